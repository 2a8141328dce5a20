//! Weyl transforms of operators and the quantum-classical convolution
//! algebra: operator∗operator is a function, function∗operator is an
//! operator, and the symplectic/Weyl transform pair maps both to pointwise
//! products.
//!
//! Transforms use the exact closed-form displacement matrix elements from
//! [`crate::fock_core::displacement_block`], restricted to the effective
//! support of the operator involved. Traces against those blocks are then
//! free of truncation leakage: the trace over the full space collapses to the
//! block where the finite operator lives.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::PsqhaError;
use crate::fock_core::{displacement_block, FockOperator, PhasePoint};
use crate::phase_grid::{integrate, PSFunction, PSGrid};
use crate::util::pairwise_sum;
use crate::Result;

/// Entries below this modulus are considered structural zero padding when
/// trimming an operator to its effective support.
const TRIM_TOL: f64 = 0.0;

/// Where a transform table's values come from. Retained so zero-set
/// refinement studies and bisection can resample off-grid.
#[derive(Clone)]
pub enum TransformSource {
    /// Recompute from a Fock operator with exact displacement blocks.
    Fock(FockOperator),
    /// A closed-form evaluator (e.g. the slit-state overlap integral, which
    /// vanishes identically on its strips — a finite Fock representation
    /// cannot).
    Analytic(std::sync::Arc<dyn Fn(PhasePoint) -> C64 + Send + Sync>),
}

impl std::fmt::Debug for TransformSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransformSource::Fock(op) => write!(f, "Fock(cutoff={})", op.cutoff()),
            TransformSource::Analytic(_) => write!(f, "Analytic"),
        }
    }
}

/// The sampled Fourier-Weyl transform x ↦ tr{A W(x)} of a generating
/// operator.
#[derive(Debug, Clone)]
pub struct WeylTransformTable {
    source_cutoff: usize,
    source: TransformSource,
    values: PSFunction,
}

impl WeylTransformTable {
    pub fn source_cutoff(&self) -> usize {
        self.source_cutoff
    }

    pub fn source(&self) -> &TransformSource {
        &self.source
    }

    pub fn values(&self) -> &PSFunction {
        &self.values
    }

    pub fn grid(&self) -> &PSGrid {
        self.values.grid()
    }

    /// Evaluate the transform at an arbitrary phase point (off-grid).
    pub fn eval_at(&self, x: PhasePoint) -> C64 {
        match &self.source {
            TransformSource::Fock(op) => weyl_transform_at(op, x),
            TransformSource::Analytic(f) => f(x),
        }
    }

    /// Resample the same source on another grid.
    pub fn resampled(&self, grid: PSGrid) -> Result<WeylTransformTable> {
        match &self.source {
            TransformSource::Fock(op) => weyl_transform(op, grid),
            TransformSource::Analytic(f) => Ok(WeylTransformTable::from_analytic(
                f.clone(),
                self.source_cutoff,
                grid,
            )),
        }
    }

    /// Build a table by sampling a closed-form transform.
    pub fn from_analytic(
        f: std::sync::Arc<dyn Fn(PhasePoint) -> C64 + Send + Sync>,
        source_cutoff: usize,
        grid: PSGrid,
    ) -> WeylTransformTable {
        let rows: Vec<Vec<C64>> = (0..grid.nq)
            .into_par_iter()
            .map(|j| {
                let q = grid.q_at(j);
                (0..grid.np)
                    .map(|k| f(PhasePoint { q, p: grid.p_at(k) }))
                    .collect()
            })
            .collect();
        let samples = DMatrix::from_fn(grid.nq, grid.np, |j, k| rows[j][k]);
        WeylTransformTable {
            source_cutoff,
            source: TransformSource::Analytic(f),
            values: PSFunction::from_samples(grid, samples).expect("finite analytic samples"),
        }
    }

    /// Serialized as the PSFunction plus the source cutoff.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.values.to_json();
        v["source_cutoff"] = serde_json::json!(self.source_cutoff);
        v
    }
}

/// tr{A W(x)} at a single phase point, via the trimmed block.
pub fn weyl_transform_at(a: &FockOperator, x: PhasePoint) -> C64 {
    let n = a.effective_cutoff(TRIM_TOL);
    let w = displacement_block(x, n, n);
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..n {
        for k in 0..n {
            acc += a.entry(m, k) * w[(k, m)];
        }
    }
    acc
}

/// Sample the Fourier-Weyl transform of `a` on `grid`.
pub fn weyl_transform(a: &FockOperator, grid: PSGrid) -> Result<WeylTransformTable> {
    let n = a.effective_cutoff(TRIM_TOL);
    let trimmed = a.resized(n);
    let rows: Vec<Vec<C64>> = (0..grid.nq)
        .into_par_iter()
        .map(|j| {
            let q = grid.q_at(j);
            (0..grid.np)
                .map(|k| {
                    let w = displacement_block(PhasePoint { q, p: grid.p_at(k) }, n, n);
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..n {
                        for l in 0..n {
                            acc += trimmed.entry(m, l) * w[(l, m)];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let samples = DMatrix::from_fn(grid.nq, grid.np, |j, k| rows[j][k]);
    Ok(WeylTransformTable {
        source_cutoff: a.cutoff(),
        source: TransformSource::Fock(a.clone()),
        values: PSFunction::from_samples(grid, samples)?,
    })
}

/// A ≈ ∫ F(x) W(x)* dx by grid quadrature; inverts [`weyl_transform`] for
/// operators supported well inside the requested cutoff.
pub fn inverse_weyl_transform(f: &PSFunction, cutoff: usize) -> Result<FockOperator> {
    if cutoff == 0 {
        return Err(PsqhaError::invalid("cutoff must be >= 1"));
    }
    let grid = *f.grid();
    let weight = C64::new(grid.cell_weight(), 0.0);
    let partials: Vec<DMatrix<C64>> = (0..grid.nq)
        .into_par_iter()
        .map(|j| {
            let q = grid.q_at(j);
            let mut acc = DMatrix::zeros(cutoff, cutoff);
            for k in 0..grid.np {
                let w = displacement_block(PhasePoint { q, p: grid.p_at(k) }, cutoff, cutoff);
                let c = f.value(j, k) * weight;
                // A_{mn} += F(x) w ⟨m|W*|n⟩ = F(x) w conj(W_{nm})
                for m in 0..cutoff {
                    for nn in 0..cutoff {
                        acc[(m, nn)] += c * w[(nn, m)].conj();
                    }
                }
            }
            acc
        })
        .collect();
    // fixed-order reduction keeps the result schedule-independent
    let mut total: DMatrix<C64> = DMatrix::zeros(cutoff, cutoff);
    for p in partials {
        total += p;
    }
    FockOperator::from_matrix(total)
}

/// (A ∗ B)(y) = tr{A W(y) B_− W(y)*}, sampled on the grid.
///
/// Computed pointwise from exact displacement blocks (not via the Fourier
/// factorization, which serves as an independent cross-check in tests).
pub fn convolve_op_op(a: &FockOperator, b: &FockOperator, grid: PSGrid) -> Result<PSFunction> {
    let na = a.effective_cutoff(TRIM_TOL);
    let nb = b.effective_cutoff(TRIM_TOL);
    let a_t = a.resized(na);
    let b_minus = b.parity_conjugate().resized(nb);
    let rows: Vec<Vec<C64>> = (0..grid.nq)
        .into_par_iter()
        .map(|j| {
            let q = grid.q_at(j);
            (0..grid.np)
                .map(|k| {
                    let w = displacement_block(PhasePoint { q, p: grid.p_at(k) }, na, nb);
                    let moved = &w * b_minus.matrix() * w.adjoint(); // na×na
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..na {
                        for l in 0..na {
                            acc += a_t.entry(m, l) * moved[(l, m)];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let samples = DMatrix::from_fn(grid.nq, grid.np, |j, k| rows[j][k]);
    PSFunction::from_samples(grid, samples)
}

/// (f ∗ A)_{mn} = ∫ f(x) (W(x) A W(x)*)_{mn} dx for m, n < `cutoff`.
///
/// Entries are exact in the displacement blocks (A's finite support bounds
/// the inner sums); the only error is the grid quadrature, certified by the
/// approximate-identity test.
pub fn convolve_fn_op(f: &PSFunction, a: &FockOperator, cutoff: usize) -> Result<FockOperator> {
    if cutoff == 0 {
        return Err(PsqhaError::invalid("cutoff must be >= 1"));
    }
    let na = a.effective_cutoff(TRIM_TOL);
    let a_t = a.resized(na);
    let grid = *f.grid();
    let weight = C64::new(grid.cell_weight(), 0.0);
    let partials: Vec<DMatrix<C64>> = (0..grid.nq)
        .into_par_iter()
        .map(|j| {
            let q = grid.q_at(j);
            let mut acc: DMatrix<C64> = DMatrix::zeros(cutoff, cutoff);
            for k in 0..grid.np {
                let c = f.value(j, k) * weight;
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let w = displacement_block(PhasePoint { q, p: grid.p_at(k) }, cutoff, na);
                let moved = &w * a_t.matrix() * w.adjoint();
                acc += moved * c;
            }
            acc
        })
        .collect();
    let mut total: DMatrix<C64> = DMatrix::zeros(cutoff, cutoff);
    for p in partials {
        total += p;
    }
    FockOperator::from_matrix(total)
}

/// Two-path check of the duality relation
/// ∫ f_−(x) (A∗B)(x) dx = tr{A_− (f∗B)}.
#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

/// Reflect a sampled function through the origin (x ↦ −x on grid nodes,
/// with the −L edge wrapping periodically).
pub fn reflect(f: &PSFunction) -> PSFunction {
    let grid = *f.grid();
    let samples = DMatrix::from_fn(grid.nq, grid.np, |j, k| {
        f.value((grid.nq - j) % grid.nq, (grid.np - k) % grid.np)
    });
    let mut out = PSFunction::from_samples(grid, samples).expect("same shape");
    out.boundary_warning = f.boundary_warning;
    out
}

pub fn duality_check(f: &PSFunction, a: &FockOperator, b: &FockOperator) -> Result<DualityReport> {
    let grid = *f.grid();
    let conv = convolve_op_op(a, b, grid)?;
    let lhs = integrate(&reflect(f).mul_pointwise(&conv)?);

    let na = a.effective_cutoff(TRIM_TOL);
    let fb = convolve_fn_op(f, b, na)?;
    let a_minus = a.resized(na).parity_conjugate();
    let rhs = a_minus.mul(&fb)?.trace();

    let abs_err = (lhs - rhs).norm();
    let scale = lhs.norm().max(rhs.norm());
    Ok(DualityReport {
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs_re: rhs.re,
        rhs_im: rhs.im,
        abs_err,
        rel_err: if scale > 0.0 { abs_err / scale } else { 0.0 },
    })
}

/// Quantum Plancherel check: ‖Â‖_{L²(grid)} against ‖A‖₂.
#[derive(Debug, Clone, Serialize)]
pub struct PlancherelReport {
    pub l2_grid: f64,
    pub schatten_2: f64,
    pub rel_dev: f64,
}

pub fn verify_plancherel(a: &FockOperator, grid: PSGrid) -> Result<PlancherelReport> {
    let table = weyl_transform(a, grid)?;
    let l2 = table.values().norm_l2();
    let s2 = a.schatten_norm(2.0)?;
    let rel = if s2 > 0.0 { (l2 - s2).abs() / s2 } else { l2 };
    Ok(PlancherelReport {
        l2_grid: l2,
        schatten_2: s2,
        rel_dev: rel,
    })
}

/// Deterministic L¹-style grid sum used by callers needing a noise floor
/// estimate for a transform table.
pub fn table_noise_floor(table: &WeylTransformTable) -> f64 {
    let v: Vec<C64> = table
        .values()
        .samples()
        .iter()
        .map(|z| C64::new(z.norm(), 0.0))
        .collect();
    let mean = pairwise_sum(&v).re / v.len() as f64;
    1e-12 * mean.max(1e-300) + 1e-14
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_grid::symplectic_fourier;
    use crate::fock_core::{number_state, translate, DensityOperator};
    use rand::{Rng, SeedableRng};

    fn small_grid() -> PSGrid {
        PSGrid::new(8.0, 8.0, 64, 64).unwrap()
    }

    fn random_operator(rng: &mut impl Rng, n: usize, cutoff: usize) -> FockOperator {
        let mat = DMatrix::from_fn(cutoff, cutoff, |i, j| {
            if i < n && j < n {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            } else {
                C64::new(0.0, 0.0)
            }
        });
        FockOperator::from_matrix(mat).unwrap()
    }

    fn random_density(rng: &mut impl Rng, rank: usize, levels: usize, cutoff: usize) -> DensityOperator {
        let mut mat: DMatrix<C64> = DMatrix::zeros(cutoff, cutoff);
        for _ in 0..rank {
            let mut v: nalgebra::DVector<C64> = nalgebra::DVector::zeros(cutoff);
            for i in 0..levels {
                v[i] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let w = rng.gen_range(0.1..1.0);
            let nrm = v.norm();
            for i in 0..cutoff {
                for j in 0..cutoff {
                    mat[(i, j)] += v[i] * v[j].conj() * C64::new(w / (nrm * nrm), 0.0);
                }
            }
        }
        let tr: C64 = (0..cutoff).map(|i| mat[(i, i)]).sum();
        mat /= tr;
        DensityOperator::new(FockOperator::from_matrix(mat).unwrap()).unwrap()
    }

    #[test]
    fn vacuum_transform_is_gaussian() {
        let vac = number_state(0, 16).unwrap().projector();
        let t = weyl_transform(&vac, small_grid()).unwrap();
        let g = *t.grid();
        for j in (0..g.nq).step_by(7) {
            for k in (0..g.np).step_by(7) {
                let (q, p) = (g.q_at(j), g.p_at(k));
                let expect = (-0.25 * (q * q + p * p)).exp();
                let got = t.values().value(j, k);
                assert!(
                    (got - C64::new(expect, 0.0)).norm() < 1e-12,
                    "({q},{p}): {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn first_excited_transform_vanishes_on_circle() {
        let one = number_state(1, 16).unwrap().projector();
        let t = weyl_transform(&one, small_grid()).unwrap();
        let g = *t.grid();
        for j in (0..g.nq).step_by(5) {
            for k in (0..g.np).step_by(5) {
                let (q, p) = (g.q_at(j), g.p_at(k));
                let r2 = q * q + p * p;
                let expect = (1.0 - 0.5 * r2) * (-0.25 * r2).exp();
                let got = t.values().value(j, k);
                assert!((got - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn transform_at_origin_is_trace() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_operator(&mut rng, 8, 8);
            let t = weyl_transform(&a, small_grid()).unwrap();
            let origin = t.values().at_origin();
            assert!((origin - a.trace()).norm() < 1e-10);
        }
    }

    #[test]
    fn inverse_round_trips_vacuum() {
        let vac = number_state(0, 16).unwrap().projector();
        let grid = PSGrid::default_grid();
        let t = weyl_transform(&vac, grid).unwrap();
        let back = inverse_weyl_transform(t.values(), 16).unwrap();
        let diff = (back.matrix() - vac.matrix())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-4, "round trip defect {diff}");
    }

    #[test]
    fn inverse_of_zero_is_zero() {
        let z = PSFunction::zeros(small_grid());
        let op = inverse_weyl_transform(&z, 8).unwrap();
        assert_eq!(op.schatten_norm(1.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_round_trips_random_rank3() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(&mut rng, 3, 8, 16);
        let grid = PSGrid::default_grid();
        let t = weyl_transform(rho.op(), grid).unwrap();
        let back = inverse_weyl_transform(t.values(), 16).unwrap();
        let dist = back.sub(rho.op()).unwrap().schatten_norm(1.0).unwrap();
        assert!(dist < 1e-3, "trace distance {dist}");
    }

    #[test]
    fn op_op_integral_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let grid = PSGrid::default_grid();
        for _ in 0..3 {
            let a = random_operator(&mut rng, 5, 5);
            let b = random_operator(&mut rng, 5, 5);
            let conv = convolve_op_op(&a, &b, grid).unwrap();
            let lhs = integrate(&conv);
            let rhs = a.trace() * b.trace();
            assert!(
                (lhs - rhs).norm() < 1e-3 * rhs.norm().max(1e-4),
                "{lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn op_op_fourier_factorizes() {
        // independent paths: pointwise convolution vs product of transforms
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let grid = PSGrid::default_grid();
        let a = random_operator(&mut rng, 4, 4);
        let b = random_operator(&mut rng, 4, 4);
        let conv = convolve_op_op(&a, &b, grid).unwrap();
        let lhs = symplectic_fourier(&conv);
        let rhs = weyl_transform(&a, grid)
            .unwrap()
            .values()
            .mul_pointwise(weyl_transform(&b, grid).unwrap().values())
            .unwrap();
        let scale = rhs.max_abs();
        let diff = lhs.sub(&rhs).unwrap().max_abs();
        assert!(diff < 1e-4 * scale.max(1.0), "factorization defect {diff}");
    }

    #[test]
    fn density_convolution_is_probability_density() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let rho = random_density(&mut rng, 2, 4, 8);
        let t = random_density(&mut rng, 2, 4, 8);
        let conv = convolve_op_op(rho.op(), t.op(), PSGrid::default_grid()).unwrap();
        let min_re = conv.samples().iter().map(|z| z.re).fold(f64::MAX, f64::min);
        let max_im = conv.samples().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(min_re > -1e-10, "negative density {min_re}");
        assert!(max_im < 1e-10, "imaginary part {max_im}");
        assert!((integrate(&conv).re - 1.0).abs() < 1e-4);
    }

    #[test]
    fn convolution_commutes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let grid = small_grid();
        let a = random_operator(&mut rng, 4, 4);
        let b = random_operator(&mut rng, 4, 4);
        let ab = convolve_op_op(&a, &b, grid).unwrap();
        let ba = convolve_op_op(&b, &a, grid).unwrap();
        let diff = ab.sub(&ba).unwrap().max_abs();
        assert!(diff < 1e-10 * ab.max_abs().max(1.0), "commutativity defect {diff}");
    }

    #[test]
    fn fn_op_approximate_identity() {
        let grid = PSGrid::default_grid();
        // second-order smoothing error ~(eps²/2)·‖generator²ρ‖ ≈ 0.06 here
        let eps = 0.15f64;
        let delta = PSFunction::from_fn(grid, |q, p| {
            C64::new((-0.5 * (q * q + p * p) / (eps * eps)).exp() / (eps * eps), 0.0)
        });
        let rho = DensityOperator::from_pure(&number_state(1, 8).unwrap());
        let out = convolve_fn_op(&delta, rho.op(), 8).unwrap();
        let diff = out.sub(rho.op()).unwrap().schatten_norm(f64::INFINITY).unwrap();
        assert!(diff < 0.1, "approximate identity defect {diff}");
    }

    #[test]
    fn fn_op_transform_factorizes() {
        let grid = PSGrid::default_grid();
        let f = PSFunction::from_fn(grid, |q, p| {
            C64::new((-0.5 * ((q - 0.4).powi(2) + p * p)).exp(), 0.0)
        });
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let a = random_operator(&mut rng, 4, 4);
        let fa = convolve_fn_op(&f, &a, 24).unwrap();
        let lhs = weyl_transform(&fa, grid).unwrap();
        let rhs = symplectic_fourier(&f)
            .mul_pointwise(weyl_transform(&a, grid).unwrap().values())
            .unwrap();
        let scale = rhs.max_abs();
        let diff = lhs.values().sub(&rhs).unwrap().max_abs();
        assert!(diff < 1e-4 * scale.max(1.0), "factorization defect {diff} (scale {scale})");
    }

    #[test]
    fn norm_inequalities_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let grid = small_grid();
        for _ in 0..10 {
            let a = random_operator(&mut rng, 4, 4);
            let s = random_density(&mut rng, 2, 4, 4);
            for p in [1.0, 2.0, f64::INFINITY] {
                // operator∗operator → function: ‖A*S‖_{L^p} ≤ ‖A‖_p ‖S‖₁
                let conv = convolve_op_op(&a, s.op(), grid).unwrap();
                let lhs = conv.norm_lp(p);
                let rhs = a.schatten_norm(p).unwrap() * s.op().schatten_norm(1.0).unwrap();
                assert!(lhs <= rhs + 1e-8, "op route p={p}: {lhs} > {rhs}");

                // function∗operator → operator: ‖f*A‖_p ≤ ‖f‖_{L^p} ‖A‖₁
                let f = convolve_op_op(s.op(), s.op(), grid).unwrap();
                let fa = convolve_fn_op(&f, &a, 8).unwrap();
                let lhs2 = fa.schatten_norm(p).unwrap();
                let rhs2 = f.norm_lp(p) * a.schatten_norm(1.0).unwrap();
                assert!(lhs2 <= rhs2 + 1e-8, "fn route p={p}: {lhs2} > {rhs2}");
            }
        }
    }

    #[test]
    fn duality_two_paths_agree() {
        let grid = small_grid();
        let f = PSFunction::from_fn(grid, |q, p| {
            C64::new((-0.5 * (q * q + p * p)).exp(), 0.0)
        });
        let vac = number_state(0, 8).unwrap().projector();
        let rep = duality_check(&f, &vac, &vac).unwrap();
        assert!(rep.rel_err < 1e-5, "duality rel err {}", rep.rel_err);

        // zero function: both sides vanish
        let zero = PSFunction::zeros(grid);
        let rep0 = duality_check(&zero, &vac, &vac).unwrap();
        assert!(rep0.abs_err < 1e-14 && rep0.lhs_re.abs() < 1e-14);
    }

    #[test]
    fn duality_random_inputs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        let grid = small_grid();
        let f = PSFunction::from_fn(grid, |q, p| {
            C64::new(
                (-0.5 * ((q - 0.5).powi(2) + p * p)).exp()
                    + 0.5 * (-0.4 * (q * q + (p + 0.6).powi(2))).exp(),
                0.0,
            )
        });
        for _ in 0..3 {
            let a = random_operator(&mut rng, 3, 6);
            let b = random_operator(&mut rng, 3, 6);
            let rep = duality_check(&f, &a, &b).unwrap();
            assert!(rep.rel_err < 1e-4, "duality rel err {}", rep.rel_err);
        }
    }

    #[test]
    fn plancherel_vacuum_and_zero() {
        let vac = number_state(0, 8).unwrap().projector();
        let rep = verify_plancherel(&vac, PSGrid::default_grid()).unwrap();
        assert!(rep.rel_dev < 1e-6, "vacuum Plancherel {rep:?}");

        let rep0 = verify_plancherel(&FockOperator::zero(4), PSGrid::default_grid()).unwrap();
        assert_eq!(rep0.l2_grid, 0.0);
        assert_eq!(rep0.schatten_2, 0.0);
    }

    #[test]
    fn plancherel_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        for _ in 0..5 {
            let a = random_operator(&mut rng, 8, 8);
            let rep = verify_plancherel(&a, PSGrid::default_grid()).unwrap();
            assert!(rep.rel_dev <= 1e-3, "Plancherel deviation {}", rep.rel_dev);
        }
    }

    #[test]
    fn translate_covariance_of_transform_modulus() {
        let rho = number_state(1, 12).unwrap().projector();
        let grid = small_grid();
        let base = weyl_transform(&rho, grid).unwrap();
        for (q0, p0) in [(0.5, 0.0), (0.0, 1.0), (0.75, -0.5)] {
            let moved = translate(&rho, PhasePoint { q: q0, p: p0 }).unwrap();
            let shifted = weyl_transform(&moved, grid).unwrap();
            let mut max = 0.0f64;
            for j in 0..grid.nq {
                for k in 0..grid.np {
                    let d = (shifted.values().value(j, k).norm()
                        - base.values().value(j, k).norm())
                    .abs();
                    max = max.max(d);
                }
            }
            assert!(max < 1e-5, "modulus covariance defect {max} at ({q0},{p0})");
        }
    }

    #[test]
    fn associativity_spot_check_at_origin() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        let grid = small_grid();
        let s = random_operator(&mut rng, 3, 3);
        let a = random_operator(&mut rng, 3, 3);
        let f = PSFunction::from_fn(grid, |q, p| {
            C64::new((-0.6 * (q * q + p * p)).exp(), 0.0)
        });
        // (S*A)*f at 0 = ∫ (S*A)(x) (α_0 f_-)(x) dx = ∫ (S*A)(x) f(-x) dx
        let sa = convolve_op_op(&s, &a, grid).unwrap();
        let lhs = integrate(&sa.mul_pointwise(&reflect(&f)).unwrap());
        // S*(A*f) at 0 = tr{S ((A*f))_-}
        let af = convolve_fn_op(&f, &a, 6).unwrap();
        let rhs = s.resized(6).mul(&af.parity_conjugate()).unwrap().trace();
        assert!(
            (lhs - rhs).norm() < 1e-4 * lhs.norm().max(1.0),
            "associativity defect {lhs} vs {rhs}"
        );
    }
}
