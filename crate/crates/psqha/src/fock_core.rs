//! Truncated Fock-space states and operators, Weyl (displacement) operators,
//! parity conjugation, and Schatten norms.
//!
//! Conventions: natural units ħ = 1, annihilation operator a = (Q + iP)/√2,
//! and `W(q,p) = exp(i(pQ − qP)) = D(α)` with `α = (q + ip)/√2`. This
//! reproduces the product form `e^{iqp/2} e^{−iqP} e^{ipQ}` by
//! Baker-Campbell-Hausdorff; the convention is pinned by the position-space
//! quadrature oracle in the test suite.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::PsqhaError;
use crate::util::{gauss_legendre, hermite_functions};
use crate::Result;

/// Hermiticity / trace / positivity tolerance for density operator
/// validation. Exceeds accumulated rounding in spectral decompositions at
/// cutoffs ≤ 128.
pub const DENSITY_TOL: f64 = 1e-10;

/// A point (q, p) of the phase space ℝ².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        if !q.is_finite() || !p.is_finite() {
            return Err(PsqhaError::invalid(format!(
                "phase point must be finite, got ({q}, {p})"
            )));
        }
        Ok(PhasePoint { q, p })
    }

    /// Displacement parameter α = (q + ip)/√2.
    pub fn alpha(&self) -> C64 {
        C64::new(self.q, self.p) / std::f64::consts::SQRT_2
    }

    /// Symplectic form {x, y} = y.q * x.p − x.q * y.p.
    pub fn symplectic(&self, other: &PhasePoint) -> f64 {
        other.q * self.p - self.q * other.p
    }

    pub fn neg(&self) -> PhasePoint {
        PhasePoint {
            q: -self.q,
            p: -self.p,
        }
    }
}

/// An operator on the span of the first `cutoff` number states.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    cutoff: usize,
    mat: DMatrix<C64>,
}

/// Row-major JSON form shared by operators and states.
#[derive(Serialize, Deserialize)]
struct ComplexArrayJson {
    cutoff: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl FockOperator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(PsqhaError::DimensionMismatch(format!(
                "operator matrix must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PsqhaError::Validation(
                "operator entries must be finite".into(),
            ));
        }
        Ok(FockOperator {
            cutoff: mat.nrows(),
            mat,
        })
    }

    pub fn zero(cutoff: usize) -> Self {
        FockOperator {
            cutoff,
            mat: DMatrix::zeros(cutoff, cutoff),
        }
    }

    pub fn identity(cutoff: usize) -> Self {
        FockOperator {
            cutoff,
            mat: DMatrix::identity(cutoff, cutoff),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.mat[(m, n)]
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            cutoff: self.cutoff,
            mat: self.mat.adjoint(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.cutoff).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn scale(&self, c: C64) -> FockOperator {
        FockOperator {
            cutoff: self.cutoff,
            mat: &self.mat * c,
        }
    }

    pub fn add(&self, other: &FockOperator) -> Result<FockOperator> {
        if self.cutoff != other.cutoff {
            return Err(PsqhaError::DimensionMismatch(format!(
                "cutoffs {} vs {}",
                self.cutoff, other.cutoff
            )));
        }
        Ok(FockOperator {
            cutoff: self.cutoff,
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &FockOperator) -> Result<FockOperator> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &FockOperator) -> Result<FockOperator> {
        if self.cutoff != other.cutoff {
            return Err(PsqhaError::DimensionMismatch(format!(
                "cutoffs {} vs {}",
                self.cutoff, other.cutoff
            )));
        }
        Ok(FockOperator {
            cutoff: self.cutoff,
            mat: &self.mat * &other.mat,
        })
    }

    /// (A_−)_{mn} = (−1)^{m+n} A_{mn}: conjugation by the parity operator.
    pub fn parity_conjugate(&self) -> FockOperator {
        let n = self.cutoff;
        let mat = DMatrix::from_fn(n, n, |i, j| {
            if (i + j) % 2 == 0 {
                self.mat[(i, j)]
            } else {
                -self.mat[(i, j)]
            }
        });
        FockOperator { cutoff: n, mat }
    }

    /// Zero-pad (or truncate) to a new cutoff.
    pub fn resized(&self, cutoff: usize) -> FockOperator {
        let mat = DMatrix::from_fn(cutoff, cutoff, |i, j| {
            if i < self.cutoff && j < self.cutoff {
                self.mat[(i, j)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        FockOperator { cutoff, mat }
    }

    /// Smallest n such that all entries outside the leading n×n block are
    /// below `tol` in modulus. Used to trim zero-padded operators before
    /// transform passes.
    pub fn effective_cutoff(&self, tol: f64) -> usize {
        let mut n = self.cutoff;
        while n > 1 {
            let k = n - 1;
            let row_small = (0..n).all(|j| self.mat[(k, j)].norm() <= tol);
            let col_small = (0..n).all(|i| self.mat[(i, k)].norm() <= tol);
            if row_small && col_small {
                n -= 1;
            } else {
                break;
            }
        }
        n
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        let svd = self.mat.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        sv
    }

    /// Schatten p-norm via singular values; `p = f64::INFINITY` gives the
    /// operator norm.
    pub fn schatten_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(PsqhaError::invalid(format!(
                "Schatten norm requires p >= 1 or p = inf, got {p}"
            )));
        }
        let sv = self.singular_values();
        if p.is_infinite() {
            return Ok(sv.first().copied().unwrap_or(0.0));
        }
        Ok(sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    /// Max entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.mat.adjoint();
        (&self.mat - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ComplexArrayJson {
            cutoff: self.cutoff,
            re: self.mat.transpose().iter().map(|z| z.re).collect(),
            im: self.mat.transpose().iter().map(|z| z.im).collect(),
        })
        .expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: ComplexArrayJson = serde_json::from_value(v.clone())?;
        let n = raw.cutoff;
        if raw.re.len() != n * n || raw.im.len() != n * n {
            return Err(PsqhaError::invalid(
                "operator JSON arrays must have cutoff^2 entries",
            ));
        }
        // row-major on the wire
        let mat = DMatrix::from_fn(n, n, |i, j| C64::new(raw.re[i * n + j], raw.im[i * n + j]));
        FockOperator::from_matrix(mat)
    }
}

/// A density operator: positive, trace one (validated on construction).
#[derive(Debug, Clone)]
pub struct DensityOperator {
    op: FockOperator,
}

impl DensityOperator {
    pub fn new(op: FockOperator) -> Result<Self> {
        let herm = op.hermiticity_defect();
        if herm > DENSITY_TOL {
            return Err(PsqhaError::Validation(format!(
                "density operator not Hermitian: defect {herm:e}"
            )));
        }
        let eigs = op.hermitian_eigenvalues();
        if let Some(min) = eigs.first() {
            if *min < -DENSITY_TOL {
                return Err(PsqhaError::Validation(format!(
                    "density operator has negative eigenvalue {min:e}"
                )));
            }
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(PsqhaError::Validation(format!(
                "density operator trace {tr} != 1"
            )));
        }
        Ok(DensityOperator { op })
    }

    pub fn op(&self) -> &FockOperator {
        &self.op
    }

    pub fn cutoff(&self) -> usize {
        self.op.cutoff()
    }

    pub fn from_pure(state: &PureState) -> Self {
        DensityOperator {
            op: state.projector(),
        }
    }

    /// Full-rank reference state with spectrum λ_n ∝ 2^{−n} in the number
    /// basis, normalized over the cutoff.
    pub fn dyadic_thermal(cutoff: usize) -> Self {
        let norm: f64 = (0..cutoff).map(|n| 0.5f64.powi(n as i32)).sum();
        let mat = DMatrix::from_fn(cutoff, cutoff, |i, j| {
            if i == j {
                C64::new(0.5f64.powi(i as i32) / norm, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        DensityOperator {
            op: FockOperator { cutoff, mat },
        }
    }
}

/// A pure state as a unit vector in the number basis.
#[derive(Debug, Clone)]
pub struct PureState {
    cutoff: usize,
    coeffs: DVector<C64>,
}

impl PureState {
    pub fn new(coeffs: DVector<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(PsqhaError::invalid("state vector must be nonempty"));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PsqhaError::Validation("state entries must be finite".into()));
        }
        let norm = coeffs.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(PsqhaError::Validation(format!(
                "state vector norm {norm} != 1"
            )));
        }
        Ok(PureState {
            cutoff: coeffs.len(),
            coeffs,
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn coeffs(&self) -> &DVector<C64> {
        &self.coeffs
    }

    /// |ψ⟩⟨ψ| as a FockOperator.
    pub fn projector(&self) -> FockOperator {
        let n = self.cutoff;
        let mat = DMatrix::from_fn(n, n, |i, j| self.coeffs[i] * self.coeffs[j].conj());
        FockOperator { cutoff: n, mat }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ComplexArrayJson {
            cutoff: self.cutoff,
            re: self.coeffs.iter().map(|z| z.re).collect(),
            im: self.coeffs.iter().map(|z| z.im).collect(),
        })
        .expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: ComplexArrayJson = serde_json::from_value(v.clone())?;
        if raw.re.len() != raw.cutoff || raw.im.len() != raw.cutoff {
            return Err(PsqhaError::invalid(
                "state JSON arrays must have cutoff entries",
            ));
        }
        let coeffs = DVector::from_iterator(
            raw.cutoff,
            raw.re.iter().zip(&raw.im).map(|(r, i)| C64::new(*r, *i)),
        );
        PureState::new(coeffs)
    }
}

/// n-th number state at the given cutoff.
pub fn number_state(n: usize, cutoff: usize) -> Result<PureState> {
    if n >= cutoff {
        return Err(PsqhaError::invalid(format!(
            "number state index {n} >= cutoff {cutoff}"
        )));
    }
    let mut coeffs = DVector::zeros(cutoff);
    coeffs[n] = C64::new(1.0, 0.0);
    Ok(PureState { cutoff, coeffs })
}

/// Coherent state |α⟩ truncated to the cutoff and renormalized.
pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<PureState> {
    if cutoff == 0 {
        return Err(PsqhaError::invalid("cutoff must be >= 1"));
    }
    let mut coeffs = DVector::zeros(cutoff);
    let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..cutoff {
        coeffs[n] = term;
        term = term * alpha / C64::new(((n + 1) as f64).sqrt(), 0.0);
    }
    let norm = coeffs.norm();
    if norm == 0.0 {
        return Err(PsqhaError::Validation(
            "coherent state underflowed at this cutoff".into(),
        ));
    }
    coeffs /= C64::new(norm, 0.0);
    Ok(PureState { cutoff, coeffs })
}

/// Fock coefficients of the normalized indicator wavefunction of [−a, a],
/// by Gauss-Legendre quadrature against the oscillator eigenfunctions with
/// node doubling until the coefficient vector is stable to 1e-10, then
/// renormalized after truncation.
pub fn slit_state(a: f64, cutoff: usize) -> Result<PureState> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(PsqhaError::invalid(format!("slit half-width must be > 0, got {a}")));
    }
    if cutoff == 0 {
        return Err(PsqhaError::invalid("cutoff must be >= 1"));
    }
    let amp = 1.0 / (2.0 * a).sqrt();
    let compute = |nodes: usize| -> DVector<f64> {
        let (x, w) = gauss_legendre(nodes, -a, a);
        let mut coeffs = DVector::zeros(cutoff);
        for (xi, wi) in x.iter().zip(&w) {
            let h = hermite_functions(cutoff, *xi);
            for n in 0..cutoff {
                coeffs[n] += wi * amp * h[n];
            }
        }
        coeffs
    };
    let mut nodes = 64.max(cutoff);
    let mut prev = compute(nodes);
    loop {
        nodes *= 2;
        let next = compute(nodes);
        let diff = (&next - &prev).amax();
        prev = next;
        if diff < 1e-10 {
            break;
        }
        if nodes > 1 << 16 {
            return Err(PsqhaError::ContractViolation(
                "slit state quadrature failed to converge".into(),
            ));
        }
    }
    let norm = prev.norm();
    let coeffs = DVector::from_iterator(cutoff, prev.iter().map(|r| C64::new(r / norm, 0.0)));
    Ok(PureState { cutoff, coeffs })
}

/// Rectangular block of exact displacement-operator matrix elements
/// ⟨m|W(q,p)|n⟩ for m < rows, n < cols.
///
/// Closed form via associated Laguerre polynomials, evaluated diagonal by
/// diagonal with the three-term recurrence; no truncation error is incurred
/// because the elements are those of the full (untruncated) unitary.
pub fn displacement_block(x: PhasePoint, rows: usize, cols: usize) -> DMatrix<C64> {
    let alpha = x.alpha();
    let r2 = alpha.norm_sqr();
    let gauss = (-0.5 * r2).exp();
    let mut out = DMatrix::zeros(rows, cols);

    // lower triangle and diagonal: m = n + d, d >= 0
    for d in 0..rows {
        // scale s_n = sqrt(n!/(n+d)!) α^d e^{−|α|²/2}
        let mut s = C64::new(gauss, 0.0);
        for j in 1..=d {
            s *= alpha / C64::new((j as f64).sqrt(), 0.0);
        }
        let mut l_prev = 0.0;
        let mut l = 1.0; // L_0^{(d)}
        let mut n = 0usize;
        while n + d < rows && n < cols {
            out[(n + d, n)] = s * C64::new(l, 0.0);
            // advance L_n -> L_{n+1} and the scale factor
            let nf = n as f64;
            let l_next = ((2.0 * nf + 1.0 + d as f64 - r2) * l - (nf + d as f64) * l_prev)
                / (nf + 1.0);
            l_prev = l;
            l = l_next;
            s *= C64::new(((nf + 1.0) / (nf + 1.0 + d as f64)).sqrt(), 0.0);
            n += 1;
        }
    }

    // strict upper triangle: n = m + d, d >= 1
    let neg_conj = -alpha.conj();
    for d in 1..cols {
        let mut s = C64::new(gauss, 0.0);
        for j in 1..=d {
            s *= neg_conj / C64::new((j as f64).sqrt(), 0.0);
        }
        let mut l_prev = 0.0;
        let mut l = 1.0;
        let mut m = 0usize;
        while m + d < cols && m < rows {
            out[(m, m + d)] = s * C64::new(l, 0.0);
            let mf = m as f64;
            let l_next = ((2.0 * mf + 1.0 + d as f64 - r2) * l - (mf + d as f64) * l_prev)
                / (mf + 1.0);
            l_prev = l;
            l = l_next;
            s *= C64::new(((mf + 1.0) / (mf + 1.0 + d as f64)).sqrt(), 0.0);
            m += 1;
        }
    }
    out
}

/// The Weyl operator W(q,p) truncated to the leading `cutoff` number states.
pub fn weyl_operator(x: PhasePoint, cutoff: usize) -> Result<FockOperator> {
    if cutoff == 0 {
        return Err(PsqhaError::invalid("cutoff must be >= 1"));
    }
    PhasePoint::new(x.q, x.p)?;
    Ok(FockOperator {
        cutoff,
        mat: displacement_block(x, cutoff, cutoff),
    })
}

/// α_x(A) = W(x) A W(x)*, evaluated at a working cutoff of 2·N before
/// truncating back, so products do not leak across the data cutoff.
pub fn translate(a: &FockOperator, x: PhasePoint) -> Result<FockOperator> {
    PhasePoint::new(x.q, x.p)?;
    let n = a.cutoff();
    let n_work = 2 * n;
    let w = displacement_block(x, n_work, n_work);
    let embedded = a.resized(n_work);
    let moved = &w * embedded.mat * w.adjoint();
    Ok(FockOperator {
        cutoff: n_work,
        mat: moved,
    }
    .resized(n))
}

/// Project an approximately-positive operator onto the density operators:
/// Hermitize, clip negative eigenvalues to zero, renormalize the trace.
///
/// Returns the projected state and the clipped negative mass (sum of |λ| over
/// clipped eigenvalues, before renormalization) as a quality diagnostic.
pub fn nearest_density(a: &FockOperator) -> Result<(DensityOperator, f64)> {
    let herm = (&a.mat + a.mat.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let mut clipped = 0.0;
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            clipped += -*v;
            *v = 0.0;
        }
    }
    let total: f64 = vals.iter().sum();
    if total <= 0.0 {
        return Err(PsqhaError::Validation(
            "operator has no positive part to normalize".into(),
        ));
    }
    let diag = DMatrix::from_fn(a.cutoff, a.cutoff, |i, j| {
        if i == j {
            C64::new(vals[i] / total, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mat = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    let rho = DensityOperator::new(FockOperator {
        cutoff: a.cutoff,
        mat,
    })?;
    Ok((rho, clipped))
}
