//! Finite phase space X = Z_d × Z_d, where every statement of the theory is
//! a finite linear-algebra fact with no numerical ambiguity.
//!
//! Weyl operators are clock/shift products; the transform table is d×d; and
//! the three smallness conditions on the zero set (empty / null / dense
//! complement) all collapse to emptiness, because counting measure gives
//! every nonempty set positive measure and the discrete topology makes every
//! set closed. [`check_equivalences`] asserts the resulting three-way
//! equivalence [Z(T) = ∅] ⇔ [T regular] ⇔ [A ↦ A*T injective] exactly, and
//! produces an explicit annihilating witness when it fails.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use crate::error::PsqhaError;
use crate::Result;

/// Relative singular-value tolerance for exact-arithmetic-in-disguise
/// computations: entries are combinations of roots of unity, and genuine
/// rank deficiency shows up at machine precision.
pub const FINITE_TOL: f64 = 1e-10;

/// An operator on C^d.
#[derive(Debug, Clone)]
pub struct FiniteOp {
    d: usize,
    mat: DMatrix<C64>,
}

impl FiniteOp {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        let d = mat.nrows();
        if d < 2 || mat.ncols() != d {
            return Err(PsqhaError::invalid("need a square matrix with d >= 2"));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PsqhaError::Validation("entries must be finite".into()));
        }
        Ok(FiniteOp { d, mat })
    }

    pub fn identity(d: usize) -> Self {
        FiniteOp {
            d,
            mat: DMatrix::identity(d, d),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        FiniteOp {
            d,
            mat: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0),
        }
    }

    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(PsqhaError::invalid("basis index out of range"));
        }
        let mut mat = DMatrix::zeros(d, d);
        mat[(k, k)] = C64::new(1.0, 0.0);
        Ok(FiniteOp { d, mat })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn trace(&self) -> C64 {
        (0..self.d).map(|i| self.mat[(i, i)]).sum()
    }

    pub fn hs_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Parity conjugation: (ΠAΠ)_{ij} = A_{−i,−j} with indices mod d.
    pub fn parity_conjugate(&self) -> FiniteOp {
        let d = self.d;
        FiniteOp {
            d,
            mat: DMatrix::from_fn(d, d, |i, j| self.mat[((d - i) % d, (d - j) % d)]),
        }
    }

    /// Kronecker product (operator on C^{d₁ d₂}).
    pub fn tensor(&self, other: &FiniteOp) -> FiniteOp {
        FiniteOp {
            d: self.d * other.d,
            mat: self.mat.kronecker(&other.mat),
        }
    }
}

fn omega(d: usize) -> C64 {
    C64::new(0.0, 2.0 * std::f64::consts::PI / d as f64).exp()
}

/// Weyl operator W(a, b) on Z_d: a symmetric-phase clock/shift product
/// ω^{−ab(d+1)/2} X^a Z^b for odd d, plain X^a Z^b for even d. All
/// zero-set/regularity statements are insensitive to the projective phase.
pub fn finite_weyl(d: usize, a: usize, b: usize) -> Result<FiniteOp> {
    if d < 2 {
        return Err(PsqhaError::invalid("d must be >= 2"));
    }
    if a >= d || b >= d {
        return Err(PsqhaError::invalid("Weyl indices must satisfy 0 <= a,b < d"));
    }
    let w = omega(d);
    let phase = if d % 2 == 1 {
        // ω^{−ab(d+1)/2 mod d}
        let exp = (a * b) % d * ((d + 1) / 2) % d;
        w.powu(((d - exp % d) % d) as u32)
    } else {
        C64::new(1.0, 0.0)
    };
    // (X^a Z^b)|k⟩ = ω^{bk} |k+a⟩
    let mat = DMatrix::from_fn(d, d, |row, col| {
        if row == (col + a) % d {
            phase * w.powu(((b * col) % d) as u32)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(FiniteOp { d, mat })
}

/// α_x(T) = W(x) T W(x)*.
pub fn finite_translate(t: &FiniteOp, a: usize, b: usize) -> Result<FiniteOp> {
    let w = finite_weyl(t.d, a, b)?;
    Ok(FiniteOp {
        d: t.d,
        mat: &w.mat * &t.mat * w.mat.adjoint(),
    })
}

/// The d×d table T̂(a, b) = tr{T W(a, b)}.
#[derive(Debug, Clone)]
pub struct FiniteWeylTable {
    pub d: usize,
    pub values: DMatrix<C64>,
}

impl FiniteWeylTable {
    /// Indices where |T̂| is at machine zero (relative to the largest
    /// entry).
    pub fn zero_set(&self) -> Vec<(usize, usize)> {
        let max = self.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = FINITE_TOL * max.max(1.0);
        let mut out = Vec::new();
        for a in 0..self.d {
            for b in 0..self.d {
                if self.values[(a, b)].norm() < tol {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

pub fn finite_weyl_transform(t: &FiniteOp) -> Result<FiniteWeylTable> {
    let d = t.d;
    let mut values = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let w = finite_weyl(d, a, b)?;
            values[(a, b)] = (&t.mat * &w.mat).trace();
        }
    }
    Ok(FiniteWeylTable { d, values })
}

fn rank_of(m: &DMatrix<C64>) -> usize {
    let svd = m.clone().svd(false, false);
    let max = svd
        .singular_values
        .iter()
        .copied()
        .fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    svd.singular_values
        .iter()
        .filter(|s| **s > FINITE_TOL * max)
        .count()
}

/// Dimension of the span of the d² translates W(x) T W(x)*; T is regular
/// iff this equals d².
pub fn regularity_rank(t: &FiniteOp) -> Result<usize> {
    let d = t.d;
    let mut rows = DMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let moved = finite_translate(t, a, b)?;
            for i in 0..d {
                for j in 0..d {
                    rows[(a * d + b, i * d + j)] = moved.mat[(i, j)];
                }
            }
        }
    }
    Ok(rank_of(&rows))
}

/// Dimension of the kernel of A ↦ A*T with (A*T)(y) = tr{A α_y(T_−)};
/// zero iff the observable generated by T is informationally complete.
pub fn injectivity_defect(t: &FiniteOp) -> Result<usize> {
    let d = t.d;
    let t_minus = t.parity_conjugate();
    // M[y, (i,j)] = (α_y(T_−))_{ji}: then (A*T)(y) = Σ A_{ij} M[y,(i,j)]
    let mut m = DMatrix::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            let moved = finite_translate(&t_minus, a, b)?;
            for i in 0..d {
                for j in 0..d {
                    m[(a * d + b, i * d + j)] = moved.mat[(j, i)];
                }
            }
        }
    }
    Ok(d * d - rank_of(&m))
}

/// The finite convolution (A*T)(y) evaluated at every y.
fn finite_convolution(a: &FiniteOp, t: &FiniteOp) -> Result<DMatrix<C64>> {
    let d = a.d;
    let t_minus = t.parity_conjugate();
    let mut out = DMatrix::zeros(d, d);
    for x in 0..d {
        for y in 0..d {
            let moved = finite_translate(&t_minus, x, y)?;
            out[(x, y)] = (&a.mat * &moved.mat).trace();
        }
    }
    Ok(out)
}

/// The annihilating witness exhibited when the equivalences fail.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// Zero-set point indexing the Weyl operator A = W(x₀).
    pub point: (usize, usize),
    /// sup_y |(A*T)(y)|: must be at machine zero.
    pub conv_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub d: usize,
    pub zero_set: Vec<(usize, usize)>,
    pub regularity_rank: usize,
    pub injectivity_defect: usize,
    /// [Z empty] ⇔ [rank = d²] ⇔ [defect = 0] all agree.
    pub agree: bool,
    pub witness: Option<Witness>,
}

impl EquivalenceReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

/// Check the three-way equivalence exactly and, when the zero set is
/// nonempty, build the explicit annihilator A = W(x₀) for some x₀ in the
/// zero set and verify A*T = 0 by direct computation.
pub fn check_equivalences(t: &FiniteOp) -> Result<EquivalenceReport> {
    let d = t.d;
    let table = finite_weyl_transform(t)?;
    let zero_set = table.zero_set();
    let rank = regularity_rank(t)?;
    let defect = injectivity_defect(t)?;
    let agree = (zero_set.is_empty() == (rank == d * d)) && (zero_set.is_empty() == (defect == 0));
    let witness = if let Some(&point) = zero_set.first() {
        let a = finite_weyl(d, point.0, point.1)?;
        let conv = finite_convolution(&a, t)?;
        let sup = conv.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Some(Witness { point, conv_sup: sup })
    } else {
        None
    };
    Ok(EquivalenceReport {
        d,
        zero_set,
        regularity_rank: rank,
        injectivity_defect: defect,
        agree,
        witness,
    })
}

/// Haar-random pure state projector (complex Gaussian vector, normalized).
pub fn random_pure(d: usize, rng: &mut impl Rng) -> FiniteOp {
    // Box-Muller from two uniforms
    let mut gauss = || {
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let v: Vec<C64> = (0..d).map(|_| C64::new(gauss(), gauss())).collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mat = DMatrix::from_fn(d, d, |i, j| v[i] * v[j].conj() / (norm * norm));
    FiniteOp { d, mat }
}

/// Random full-support mixture of d random pure states.
pub fn random_mixed(d: usize, rng: &mut impl Rng) -> FiniteOp {
    let mut mat = DMatrix::zeros(d, d);
    let mut weights = Vec::with_capacity(d);
    for _ in 0..d {
        weights.push(rng.gen::<f64>() + 0.05);
    }
    let total: f64 = weights.iter().sum();
    for w in &weights {
        let p = random_pure(d, rng);
        mat += p.mat * C64::new(w / total, 0.0);
    }
    FiniteOp { d, mat }
}
