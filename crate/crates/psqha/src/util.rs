//! Small numeric helpers shared across modules: deterministic summation,
//! Gauss-Legendre nodes, and Hermite (oscillator) eigenfunctions.

use num_complex::Complex64 as C64;

/// Pairwise summation of a complex slice.
///
/// The reduction tree depends only on the slice length, so results are
/// bit-identical regardless of how the caller scheduled the fills.
pub fn pairwise_sum(v: &[C64]) -> C64 {
    const BASE: usize = 32;
    if v.len() <= BASE {
        let mut acc = C64::new(0.0, 0.0);
        for z in v {
            acc += z;
        }
        acc
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Pairwise summation of a real slice.
pub fn pairwise_sum_f64(v: &[f64]) -> f64 {
    const BASE: usize = 32;
    if v.len() <= BASE {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum_f64(&v[..mid]) + pairwise_sum_f64(&v[mid..])
    }
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
///
/// Nodes by Newton iteration on the Legendre recurrence; accurate to
/// machine precision for the orders used here (≤ a few thousand).
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && b > a);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th root in (0, 1]
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence: evaluates P_n(x) and P'_n(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

/// Values of the normalized oscillator eigenfunctions ψ_0..ψ_{n_max-1} at `t`
/// (natural units, ħ = 1): ψ_0(t) = π^{-1/4} e^{-t²/2} and the stable
/// two-term recurrence upward in the index.
pub fn hermite_functions(n_max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max);
    if n_max == 0 {
        return out;
    }
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * t * t).exp();
    out.push(h0);
    if n_max == 1 {
        return out;
    }
    out.push(t * std::f64::consts::SQRT_2 * h0);
    for n in 2..n_max {
        let nf = n as f64;
        let next = t * (2.0 / nf).sqrt() * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
        out.push(next);
    }
    out
}
