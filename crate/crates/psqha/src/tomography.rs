//! Covariant phase-space observables, outcome statistics, and state
//! reconstruction by deconvolution.
//!
//! A density operator T generates the covariant observable with outcome
//! density f_ρ(x) = tr{ρ W(x) T W(x)*} = (ρ * T_−)(x). On the Fourier side
//! this factors as SF(f_ρ) = ρ̂ · conj(T̂), so reconstruction is division by
//! conj(T̂) wherever it is safely away from zero — which is exactly where the
//! zero-set analysis of [`crate::zeroset`] matters: observables whose
//! transform vanishes on open sets admit pairs of distinct states with
//! identical statistics, constructed here explicitly.
//!
//! Slit-generated observables keep a closed-form transform table (the
//! overlap integral of a translated indicator), which vanishes *identically*
//! on the strips |q| > 2a; a truncated Fock representation cannot do that,
//! and the indistinguishability demonstration depends on it.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::PsqhaError;
use crate::fock_core::{coherent_state, 
    nearest_density, slit_state, translate, DensityOperator, FockOperator, PhasePoint,
};
use crate::phase_grid::{integrate, symplectic_fourier, PSFunction, PSGrid};
use crate::qconv::{
    convolve_op_op, inverse_weyl_transform, weyl_transform, TransformSource, WeylTransformTable,
};
use crate::Result;

/// Closed-form Fourier-Weyl transform of the normalized slit state on
/// [−a, a]: e^{−iqp/2}/(2a) ∫ over the overlap of the slit with its
/// q-translate. Exactly zero for |q| ≥ 2a.
pub fn slit_transform_table(a: f64, cutoff_hint: usize, grid: PSGrid) -> WeylTransformTable {
    let f = std::sync::Arc::new(move |x: PhasePoint| {
        let lo = (-a).max(x.q - a);
        let hi = a.min(x.q + a);
        if hi <= lo {
            return C64::new(0.0, 0.0);
        }
        let phase = C64::new(0.0, -0.5 * x.q * x.p).exp();
        let integral = if x.p.abs() < 1e-12 {
            C64::new(hi - lo, 0.0)
        } else {
            (C64::new(0.0, x.p * hi).exp() - C64::new(0.0, x.p * lo).exp()) / C64::new(0.0, x.p)
        };
        phase * integral / C64::new(2.0 * a, 0.0)
    });
    WeylTransformTable::from_analytic(f, cutoff_hint, grid)
}

/// A covariant observable: generating density operator T plus its cached
/// transform table on a working grid.
#[derive(Debug, Clone)]
pub struct CovariantObservable {
    t: DensityOperator,
    grid: PSGrid,
    table: WeylTransformTable,
}

impl CovariantObservable {
    fn validated(t: DensityOperator, grid: PSGrid, table: WeylTransformTable) -> Result<Self> {
        let origin = table.eval_at(PhasePoint { q: 0.0, p: 0.0 });
        if (origin - C64::new(1.0, 0.0)).norm() > 1e-8 {
            return Err(PsqhaError::Validation(format!(
                "T̂(0) = {origin} must equal tr T = 1"
            )));
        }
        Ok(CovariantObservable { t, grid, table })
    }

    /// Observable generated by an arbitrary Fock-represented density
    /// operator.
    pub fn new(t: DensityOperator, grid: PSGrid) -> Result<Self> {
        let table = weyl_transform(t.op(), grid)?;
        Self::validated(t, grid, table)
    }

    /// Slit-generated observable: Fock representation of the slit state at
    /// `cutoff` for reference, closed-form transform for all computations.
    pub fn slit(a: f64, cutoff: usize, grid: PSGrid) -> Result<Self> {
        let t = DensityOperator::from_pure(&slit_state(a, cutoff)?);
        let table = slit_transform_table(a, cutoff, grid);
        Self::validated(t, grid, table)
    }

    pub fn t(&self) -> &DensityOperator {
        &self.t
    }

    pub fn grid(&self) -> &PSGrid {
        &self.grid
    }

    pub fn table(&self) -> &WeylTransformTable {
        &self.table
    }

    /// Max deviation of the covariance identity f_{α_x(ρ)} = f_ρ(· − x) over
    /// a 3×3 lattice of node-aligned shifts (8 grid steps apart).
    pub fn verify_covariance(&self, rho: &DensityOperator) -> Result<f64> {
        let base = density_of_op(rho.op(), self)?;
        let (dq, dp) = (self.grid.dq(), self.grid.dp());
        let step = 8i64;
        let mut worst: f64 = 0.0;
        for di in [-step, 0, step] {
            for dk in [-step, 0, step] {
                let x0 = PhasePoint {
                    q: di as f64 * dq,
                    p: dk as f64 * dp,
                };
                let moved = translate(rho.op(), x0)?;
                let shifted = density_of_op(&moved, self)?;
                for j in 0..self.grid.nq {
                    for k in 0..self.grid.np {
                        let (sj, sk) = (j as i64 - di, k as i64 - dk);
                        if sj < 0 || sk < 0 || sj >= self.grid.nq as i64 || sk >= self.grid.np as i64
                        {
                            continue;
                        }
                        let dev = (shifted.value(j, k) - base.value(sj as usize, sk as usize))
                            .norm();
                        worst = worst.max(dev);
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Outcome density of an arbitrary operator (not necessarily a state) under
/// the observable; the workhorse behind [`outcome_density`] that skips the
/// probability-density validations.
fn density_of_op(op: &FockOperator, obs: &CovariantObservable) -> Result<PSFunction> {
    match obs.table.source() {
        TransformSource::Fock(_) => {
            // (ρ * T_−)(y) = tr{ρ α_y(T)} directly
            convolve_op_op(op, &obs.t.op().parity_conjugate(), obs.grid)
        }
        TransformSource::Analytic(_) => {
            // factored route: f = SF(ρ̂ · conj(T̂))
            let rhohat = weyl_transform(op, obs.grid)?;
            let prod = rhohat.values().mul_pointwise(&obs.table.values().map(|z| z.conj()))?;
            Ok(symplectic_fourier(&prod))
        }
    }
}

/// Outcome density via the Fourier factorization SF(ρ̂ · conj(T̂)),
/// regardless of the table source. Used for diagnostics where the direct
/// trace route would be needlessly expensive for dense operators.
pub(crate) fn density_factored(op: &FockOperator, obs: &CovariantObservable) -> Result<PSFunction> {
    let rhohat = weyl_transform(op, obs.grid)?;
    let prod = rhohat
        .values()
        .mul_pointwise(&obs.table.values().map(|z| z.conj()))?;
    Ok(symplectic_fourier(&prod))
}

/// The probability density f_ρ(x) = tr{ρ W(x) T W(x)*} sampled on the
/// observable's grid.
///
/// Errors when more than 1% of the probability mass falls outside the grid
/// (boundary truncation) or when the computed density is materially negative
/// or non-real.
pub fn outcome_density(rho: &DensityOperator, obs: &CovariantObservable) -> Result<PSFunction> {
    let f = density_of_op(rho.op(), obs)?;
    let max_im = f.samples().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let min_re = f.samples().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if max_im > 1e-8 || min_re < -1e-6 {
        return Err(PsqhaError::ContractViolation(format!(
            "outcome density not real-nonnegative: max|Im| = {max_im:e}, min Re = {min_re:e}"
        )));
    }
    let total = integrate(&f).re;
    if (total - 1.0).abs() > 1e-2 {
        return Err(PsqhaError::Validation(format!(
            "density integrates to {total}; grid too small for this state/observable"
        )));
    }
    Ok(f)
}

/// Measurement data: either the exact density or i.i.d. draws from it.
#[derive(Debug, Clone)]
pub enum MeasurementRecord {
    Density(PSFunction),
    Samples { points: Vec<PhasePoint>, seed: u64 },
}

/// Draw `n` i.i.d. outcomes by inverse-CDF over grid cells plus uniform
/// jitter within the cell. Deterministic per seed, independent of thread
/// count.
pub fn sample_outcomes(
    rho: &DensityOperator,
    obs: &CovariantObservable,
    n: usize,
    seed: u64,
) -> Result<MeasurementRecord> {
    if n == 0 {
        return Err(PsqhaError::invalid("need at least one sample"));
    }
    let f = outcome_density(rho, obs)?;
    let grid = *f.grid();
    let mut cum = Vec::with_capacity(grid.nq * grid.np);
    let mut acc = 0.0;
    for j in 0..grid.nq {
        for k in 0..grid.np {
            acc += f.value(j, k).re.max(0.0);
            cum.push(acc);
        }
    }
    if !(acc > 0.0) {
        return Err(PsqhaError::Validation("density has no positive mass".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let idx = cum.partition_point(|c| *c < u).min(cum.len() - 1);
        let (j, k) = (idx / grid.np, idx % grid.np);
        let (jq, jp): (f64, f64) = (rng.gen(), rng.gen());
        points.push(PhasePoint {
            q: grid.q_at(j) + jq * grid.dq(),
            p: grid.p_at(k) + jp * grid.dp(),
        });
    }
    Ok(MeasurementRecord::Samples { points, seed })
}

/// Binned Gaussian kernel density estimate on the grid, bandwidth per axis
/// by Silverman's rule for d = 2: h_i = σ_i · n^{−1/6}. Returns the
/// estimate together with the (unit-integral) kernel so that the
/// deconvolution step can divide the kernel's transfer function back out.
fn kde(points: &[PhasePoint], grid: PSGrid) -> Result<(PSFunction, PSFunction)> {
    let n = points.len();
    if n == 0 {
        return Err(PsqhaError::invalid("empty sample record"));
    }
    let mean_q = points.iter().map(|x| x.q).sum::<f64>() / n as f64;
    let mean_p = points.iter().map(|x| x.p).sum::<f64>() / n as f64;
    let var = |f: &dyn Fn(&PhasePoint) -> f64, m: f64| {
        points.iter().map(|x| (f(x) - m).powi(2)).sum::<f64>() / n as f64
    };
    let sd_q = var(&|x| x.q, mean_q).sqrt().max(1e-6);
    let sd_p = var(&|x| x.p, mean_p).sqrt().max(1e-6);
    let scale = (n as f64).powf(-1.0 / 6.0);
    let (hq, hp) = (sd_q * scale, sd_p * scale);

    // histogram as a density under the scaled measure
    let mut counts = DMatrix::<C64>::zeros(grid.nq, grid.np);
    for x in points {
        let j = ((x.q - grid.q_min) / grid.dq()).floor() as i64;
        let k = ((x.p - grid.p_min) / grid.dp()).floor() as i64;
        if j < 0 || k < 0 || j >= grid.nq as i64 || k >= grid.np as i64 {
            return Err(PsqhaError::invalid("sample point outside grid extents"));
        }
        counts[(j as usize, k as usize)] += C64::new(1.0, 0.0);
    }
    let norm = 1.0 / (n as f64 * grid.cell_weight());
    let hist = PSFunction::from_samples(grid, counts * C64::new(norm, 0.0))?;

    let kernel_raw = PSFunction::from_fn(grid, |q, p| {
        C64::new((-0.5 * (q / hq).powi(2) - 0.5 * (p / hp).powi(2)).exp(), 0.0)
    });
    let kz = integrate(&kernel_raw).re;
    let kernel = kernel_raw.scale(C64::new(1.0 / kz, 0.0));
    let smoothed = crate::phase_grid::convolve_functions(&hist, &kernel)?;
    Ok((smoothed, kernel))
}

/// Rounds of the data-consistency / positivity alternation applied after
/// the linear inverse of a sampled record.
const POCS_ITERS: usize = 12;

/// How the near-zero region of T̂ is handled during inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regularization {
    /// Divide where |T̂| > reg_eps, set 0 elsewhere.
    HardCutoff,
    /// Tikhonov filter T̂/(|T̂|² + reg_eps²).
    Tikhonov,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionDiagnostics {
    /// Fraction of |f̂| mass discarded (or, for Tikhonov, lying where
    /// |T̂| ≤ reg_eps).
    pub regularized_fraction: f64,
    /// sup |f_{ρ̂} − f_record| after projection.
    pub residual: f64,
    /// Negative mass clipped by the positivity projection.
    pub clipped: f64,
    /// Set when the discarded mass exceeds 1e-3: the observable misses a
    /// non-negligible part of the state's Fourier content.
    pub mass_warning: bool,
    pub regularization: Regularization,
}

#[derive(Debug)]
pub struct ReconstructionResult {
    pub rho_hat: DensityOperator,
    /// Pre-projection linear inverse.
    pub raw: FockOperator,
    pub diagnostics: ReconstructionDiagnostics,
}

impl ReconstructionResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "rho_hat": self.rho_hat.op().to_json(),
            "raw": self.raw.to_json(),
            "diagnostics": serde_json::to_value(&self.diagnostics).expect("serializable"),
        })
    }
}

/// Linear inversion of Eq. f̂ = ρ̂ · conj(T̂): density estimate → symplectic
/// Fourier → regularized division → inverse Weyl transform → positivity
/// projection.
pub fn reconstruct(
    record: &MeasurementRecord,
    obs: &CovariantObservable,
    cutoff: usize,
    reg_eps: f64,
) -> Result<ReconstructionResult> {
    reconstruct_with(record, obs, cutoff, reg_eps, Regularization::HardCutoff)
}

/// [`reconstruct`] with an explicit regularization strategy.
pub fn reconstruct_with(
    record: &MeasurementRecord,
    obs: &CovariantObservable,
    cutoff: usize,
    reg_eps: f64,
    regularization: Regularization,
) -> Result<ReconstructionResult> {
    if !(reg_eps > 0.0) {
        return Err(PsqhaError::invalid("reg_eps must be positive"));
    }
    let grid = *obs.grid();
    let (f, kernel) = match record {
        MeasurementRecord::Density(f) => {
            if *f.grid() != grid {
                return Err(PsqhaError::GridMismatch(
                    "record grid differs from observable grid".into(),
                ));
            }
            (f.clone(), None)
        }
        MeasurementRecord::Samples { points, .. } => {
            let (f, kernel) = kde(points, grid)?;
            (f, Some(kernel))
        }
    };
    let fhat = symplectic_fourier(&f);
    // a kernel-smoothed record measures f = (ρ*T) ∗ K, so its transform
    // carries the extra factor K̂; fold it into the divisor so that the
    // regularization cut applies to the full transfer function
    let that = match &kernel {
        Some(k) => obs.table().values().mul_pointwise(&symplectic_fourier(k))?,
        None => obs.table().values().clone(),
    };
    let that = &that;

    let mut kept = 0.0;
    let mut discarded = 0.0;
    let rhohat_samples = DMatrix::from_fn(grid.nq, grid.np, |j, k| {
        let t = that.value(j, k);
        let v = fhat.value(j, k);
        if t.norm() > reg_eps {
            kept += v.norm();
            match regularization {
                Regularization::HardCutoff => v / t.conj(),
                Regularization::Tikhonov => v * t / C64::new(t.norm_sqr() + reg_eps * reg_eps, 0.0),
            }
        } else {
            discarded += v.norm();
            match regularization {
                Regularization::HardCutoff => C64::new(0.0, 0.0),
                Regularization::Tikhonov => v * t / C64::new(t.norm_sqr() + reg_eps * reg_eps, 0.0),
            }
        }
    });
    let total = kept + discarded;
    let regularized_fraction = if total > 0.0 { discarded / total } else { 0.0 };
    if regularized_fraction > 0.5 {
        return Err(PsqhaError::Validation(format!(
            "observable effectively not informationally complete at this resolution: \
             {:.0}% of the signal lies where |T̂| <= {reg_eps:e}",
            100.0 * regularized_fraction
        )));
    }
    let rhohat = PSFunction::from_samples(grid, rhohat_samples)?;
    let raw = inverse_weyl_transform(&rhohat, cutoff)?;
    let (mut rho_hat, clipped) = nearest_density(&raw)?;
    // For sampled records the one-shot inverse leaves a bias from the
    // discarded out-of-band content. A short projection-onto-convex-sets
    // refinement recovers much of it: alternate between re-imposing the
    // measured values on the well-conditioned band and projecting back onto
    // the density operators, whose positivity constraint extrapolates into
    // the discarded region.
    if kernel.is_some() {
        for _ in 0..POCS_ITERS {
            let cur = weyl_transform(rho_hat.op(), grid)?;
            let upd = DMatrix::from_fn(grid.nq, grid.np, |j, k| {
                let t = that.value(j, k);
                if t.norm() > reg_eps {
                    fhat.value(j, k) / t.conj()
                } else {
                    cur.values().value(j, k)
                }
            });
            let uf = PSFunction::from_samples(grid, upd)?;
            let refined = inverse_weyl_transform(&uf, cutoff)?;
            rho_hat = nearest_density(&refined)?.0;
        }
    }
    let remeasured = density_factored(rho_hat.op(), obs)?;
    let residual = remeasured
        .sub(&f)?
        .max_abs();
    Ok(ReconstructionResult {
        rho_hat,
        raw,
        diagnostics: ReconstructionDiagnostics {
            regularized_fraction,
            residual,
            clipped,
            mass_warning: regularized_fraction > 1e-3,
            regularization,
        },
    })
}

/// Trace distance ½‖ρ − σ‖₁.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    let n = a.cutoff().max(b.cutoff());
    let diff = a.op().resized(n).sub(&b.op().resized(n))?;
    Ok(0.5 * diff.schatten_norm(1.0)?)
}

/// Mirrored strip geometry for [`indistinguishable_pair`]: the
/// perturbation's transform is concentrated near (±q_center, 0), with
/// (q_width, p_width) the caller's declared half-widths of the strip region
/// it is meant to occupy (used for validation only; the realized profile is
/// the fixed Gaussian of the coherent pair below).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BumpSpec {
    pub q_center: f64,
    pub q_width: f64,
    pub p_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub eps_used: f64,
    /// ‖ρ₁ − ρ₂‖₁.
    pub trace_norm_diff: f64,
    /// sup |f_{ρ₁} − f_{ρ₂}| on the observable grid.
    pub sup_density_diff: f64,
    /// sup |ρ̂₁ − ρ̂₂| over the region where T̂ ≠ 0 (should be ~0: the
    /// perturbation lives inside Z(T)).
    pub off_strip_leak: f64,
}

/// Two distinct states with identical outcome statistics under an
/// observable whose zero set contains open strips.
///
/// The difference ρ₁ − ρ₂ must have a Weyl transform supported inside Z(T)
/// while staying representable at a finite cutoff. Any transform with
/// genuinely compact support forces sub-exponentially decaying number
/// content, which no 2^{−n}-spectrum base state can dominate; instead the
/// perturbation here is the rank-2 cat-state difference of two coherent
/// states φ_± at ±q_center/2,
///
///   Δ = (|e₁⟩⟨e₁| − |e₂⟩⟨e₂|)/2,  e₁ ∝ φ₊ + φ₋,  e₂ ∝ φ₊ − φ₋,
///
/// which is exactly traceless for any separation and reduces to the cross
/// term (|φ₊⟩⟨φ₋| + |φ₋⟩⟨φ₊|)/2 once the overlap is negligible. Its
/// transform is then a mirrored pair of unit-width Gaussians
/// centered at (±q_center, 0): its magnitude at distance δ from the centers
/// is e^{−δ²/4}, so for q_center far enough inside the strips the leak into
/// the complement of Z(T) sits at numerical zero. ρ₁,₂ = ρ_base ± eps·Δ
/// with ρ_base carrying the normalized 2^{−n} spectrum on Δ's own
/// eigenbasis, which turns positivity into a scalar comparison; eps is
/// still halved until both perturbations verifiably pass.
pub fn indistinguishable_pair(
    obs: &CovariantObservable,
    bump: BumpSpec,
    eps: f64,
) -> Result<(DensityOperator, DensityOperator, PairReport)> {
    if bump.q_width <= 0.0 || bump.p_width <= 0.0 || eps < 0.0 {
        return Err(PsqhaError::invalid("bump widths and eps must be positive"));
    }
    // Poisson number content with mean q_center²/8 plus fast tails: a fixed
    // moderate cutoff represents the pair far below the target tolerances.
    let cutoff = 96;
    let q0 = bump.q_center / 2.0;
    let alpha = C64::new(q0 / std::f64::consts::SQRT_2, 0.0);
    let plus = coherent_state(alpha, cutoff)?;
    let minus = coherent_state(-alpha, cutoff)?;
    // even/odd cat combinations keep Δ exactly traceless even when the two
    // coherent states overlap; for well-separated centers Δ reduces to the
    // pure cross term (|φ₊⟩⟨φ₋| + h.c.)/2
    let sym_raw = plus.coeffs() + minus.coeffs();
    let anti_raw = plus.coeffs() - minus.coeffs();
    if sym_raw.norm() < 1e-8 || anti_raw.norm() < 1e-8 {
        return Err(PsqhaError::invalid(
            "q_center too small: the coherent pair degenerates",
        ));
    }
    let sym = &sym_raw / C64::new(sym_raw.norm(), 0.0);
    let anti = &anti_raw / C64::new(anti_raw.norm(), 0.0);
    let cross = DMatrix::from_fn(cutoff, cutoff, |i, j| {
        (sym[i] * sym[j].conj() - anti[i] * anti[j].conj()) * C64::new(0.5, 0.0)
    });
    let a = FockOperator::from_matrix(cross)?;

    // base state: 2^{−n} spectrum assigned along Δ's eigenbasis, largest
    // weights on the two active directions. Δ's eigenbasis is known in
    // closed form — sym (eigenvalue +1/2), anti (−1/2), plus any orthonormal
    // completion of their complement (eigenvalue 0) — so a QR of
    // [sym anti I] supplies the full basis without a general eigensolver,
    // which struggles with this degree of degeneracy.
    let mut ext = DMatrix::<C64>::zeros(cutoff, cutoff + 2);
    ext.column_mut(0).copy_from(&sym);
    ext.column_mut(1).copy_from(&anti);
    for n in 0..cutoff {
        ext[(n, n + 2)] = C64::new(1.0, 0.0);
    }
    let basis = ext.qr().q();
    let z: f64 = (0..cutoff).map(|n| 2f64.powi(-(n as i32))).sum();
    let mut base = DMatrix::<C64>::zeros(cutoff, cutoff);
    for rank in 0..cutoff {
        let u = basis.column(rank);
        base += (&u * u.adjoint()) * C64::new(2f64.powi(-(rank as i32)) / z, 0.0);
    }
    let rho_base = DensityOperator::new(FockOperator::from_matrix(base)?)?;
    // in this shared eigenbasis ρ_base ± eps·Δ is diagonal: the two active
    // directions carry 1/z ± eps/2 and 1/(2z) ∓ eps/2, all others are
    // untouched, so positivity of both signs is the scalar condition below;
    // eps is still halved until it verifiably passes
    let mut e = eps;
    let mut found = eps == 0.0;
    for _ in 0..60 {
        if found {
            break;
        }
        if 1.0 / (2.0 * z) - e / 2.0 >= -1e-12 {
            found = true;
        } else {
            e *= 0.5;
            if e < 1e-12 {
                break;
            }
        }
    }
    if !found {
        return Err(PsqhaError::Validation(
            "no positive eps keeps both perturbations positive; base state not full-rank enough"
                .into(),
        ));
    }
    let rho1 = DensityOperator::new(rho_base.op().add(&a.scale(C64::new(e, 0.0)))?)?;
    let rho2 = DensityOperator::new(rho_base.op().add(&a.scale(C64::new(-e, 0.0)))?)?;

    let f1 = density_of_op(rho1.op(), obs)?;
    let f2 = density_of_op(rho2.op(), obs)?;
    let sup_density_diff = f1.sub(&f2)?.max_abs();
    let trace_norm_diff = rho1
        .op()
        .sub(rho2.op())?
        .schatten_norm(1.0)?;

    // leakage of the scaled perturbation's transform into the region where
    // the observable's transform is nonzero (the complement of Z(T))
    let a_table = weyl_transform(&a.scale(C64::new(2.0 * e, 0.0)), *obs.grid())?;
    let that = obs.table().values();
    let t_floor = 1e-12 * that.max_abs();
    let grid = *obs.grid();
    let mut off_strip_leak: f64 = 0.0;
    for j in 0..grid.nq {
        for k in 0..grid.np {
            if that.value(j, k).norm() > t_floor {
                off_strip_leak = off_strip_leak.max(a_table.values().value(j, k).norm());
            }
        }
    }

    Ok((
        rho1,
        rho2,
        PairReport {
            eps_used: e,
            trace_norm_diff,
            sup_density_diff,
            off_strip_leak,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_core::number_state;
    use rand::Rng;

    fn vacuum_obs(cutoff: usize) -> CovariantObservable {
        let t = DensityOperator::from_pure(&number_state(0, cutoff).unwrap());
        CovariantObservable::new(t, PSGrid::default_grid()).unwrap()
    }

    fn random_density(cutoff: usize, rank: usize, rng: &mut impl Rng) -> DensityOperator {
        let mut m = DMatrix::<C64>::zeros(cutoff, cutoff);
        for _ in 0..rank {
            let v: Vec<C64> = (0..cutoff)
                .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            for i in 0..cutoff {
                for j in 0..cutoff {
                    m[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        let tr: f64 = (0..cutoff).map(|i| m[(i, i)].re).sum();
        let (rho, _) = nearest_density(
            &FockOperator::from_matrix(m * C64::new(1.0 / tr, 0.0)).unwrap(),
        )
        .unwrap();
        rho
    }

    #[test]
    fn husimi_of_vacuum_matches_analytic() {
        // oracle: |⟨0|W(q,p)|0⟩|² = e^{−(q²+p²)/2}
        let obs = vacuum_obs(16);
        let rho = DensityOperator::from_pure(&number_state(0, 16).unwrap());
        let f = outcome_density(&rho, &obs).unwrap();
        let grid = *f.grid();
        for (j, k) in [(128, 128), (140, 120), (100, 100), (128, 180)] {
            let (q, p) = (grid.q_at(j), grid.p_at(k));
            let expect = (-(q * q + p * p) / 2.0).exp();
            assert!(
                (f.value(j, k).re - expect).abs() < 1e-10,
                "at ({q},{p})"
            );
        }
        assert!((integrate(&f).re - 1.0).abs() < 1e-4);
    }

    #[test]
    fn density_integral_is_product_of_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let obs = vacuum_obs(12);
        for _ in 0..5 {
            let rho = random_density(8, 3, &mut rng);
            let f = outcome_density(&rho, &obs).unwrap();
            assert!((integrate(&f).re - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn covariance_on_shift_lattice() {
        let obs = vacuum_obs(12);
        let rho = DensityOperator::from_pure(&number_state(1, 32).unwrap());
        let dev = obs.verify_covariance(&rho).unwrap();
        assert!(dev < 1e-4, "covariance deviation {dev}");
    }

    #[test]
    fn factorization_two_path() {
        // SF(f_ρ) = ρ̂ · conj(T̂), with f_ρ from the direct trace route
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let obs = vacuum_obs(12);
        for _ in 0..3 {
            let rho = random_density(6, 3, &mut rng);
            let f = outcome_density(&rho, &obs).unwrap();
            let lhs = symplectic_fourier(&f);
            let rhohat = weyl_transform(rho.op(), *obs.grid()).unwrap();
            let grid = *obs.grid();
            for j in (0..grid.nq).step_by(17) {
                for k in (0..grid.np).step_by(13) {
                    let rhs = rhohat.values().value(j, k) * obs.table().values().value(j, k).conj();
                    if rhs.norm() > 1e-6 {
                        assert!(
                            (lhs.value(j, k) - rhs).norm() / rhs.norm() < 1e-4,
                            "cell ({j},{k})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_contracts() {
        let obs = vacuum_obs(8);
        let rho = DensityOperator::from_pure(&number_state(0, 8).unwrap());
        assert!(sample_outcomes(&rho, &obs, 0, 1).is_err());
        let a = sample_outcomes(&rho, &obs, 500, 42).unwrap();
        let b = sample_outcomes(&rho, &obs, 500, 42).unwrap();
        match (&a, &b) {
            (
                MeasurementRecord::Samples { points: pa, .. },
                MeasurementRecord::Samples { points: pb, .. },
            ) => {
                assert_eq!(pa.len(), 500);
                for (x, y) in pa.iter().zip(pb) {
                    assert_eq!((x.q, x.p), (y.q, y.p));
                }
            }
            _ => panic!("expected sample records"),
        }
    }

    #[test]
    fn sampling_statistics_match_density() {
        // statistical oracle: z-scores of coarse-cell counts vs integrated
        // probabilities
        let obs = vacuum_obs(8);
        let rho = DensityOperator::from_pure(&number_state(1, 8).unwrap());
        let f = outcome_density(&rho, &obs).unwrap();
        let n = 200_000;
        let record = sample_outcomes(&rho, &obs, n, 9).unwrap();
        let points = match record {
            MeasurementRecord::Samples { points, .. } => points,
            _ => unreachable!(),
        };
        let grid = *f.grid();
        let coarse = 16usize; // 16×16 super-cells
        let block = grid.nq / coarse;
        let mut prob = vec![0.0; coarse * coarse];
        for j in 0..grid.nq {
            for k in 0..grid.np {
                prob[(j / block) * coarse + k / block] +=
                    f.value(j, k).re.max(0.0) * grid.cell_weight();
            }
        }
        let mut count = vec![0usize; coarse * coarse];
        for x in &points {
            let j = (((x.q - grid.q_min) / grid.dq()) as usize).min(grid.nq - 1);
            let k = (((x.p - grid.p_min) / grid.dp()) as usize).min(grid.np - 1);
            count[(j / block) * coarse + k / block] += 1;
        }
        let total: f64 = prob.iter().sum();
        for (c, p) in count.iter().zip(&prob) {
            let expect = n as f64 * p / total;
            if expect < 50.0 {
                continue;
            }
            let z = (*c as f64 - expect) / expect.sqrt();
            assert!(z.abs() < 5.0, "super-cell z-score {z} (expect {expect})");
        }
    }

    #[test]
    fn noiseless_round_trip_number_one() {
        let obs = vacuum_obs(12);
        let rho = DensityOperator::from_pure(&number_state(1, 48).unwrap());
        let f = outcome_density(&rho, &obs).unwrap();
        let rec = reconstruct(&MeasurementRecord::Density(f.clone()), &obs, 48, 1e-4).unwrap();
        let td = trace_distance(&rec.rho_hat, &rho).unwrap();
        assert!(td <= 5e-2, "trace distance {td}");
        assert!(rec.diagnostics.residual < 5e-3, "residual {}", rec.diagnostics.residual);
        assert!(!rec.diagnostics.mass_warning);
    }

    #[test]
    fn projection_does_not_worsen_residual() {
        let obs = vacuum_obs(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(6, 3, &mut rng);
        let f = outcome_density(&rho, &obs).unwrap();
        let rec = reconstruct(&MeasurementRecord::Density(f.clone()), &obs, 32, 1e-4).unwrap();
        let raw_density = density_factored(&rec.raw, &obs).unwrap();
        let raw_residual = raw_density.sub(&f).unwrap().max_abs();
        // projection moves the operator by at most ~2·clipped in trace norm
        // (clip + renormalize), and the density map is a trace-norm
        // contraction up to ‖T‖∞ = 1
        assert!(
            rec.diagnostics.residual <= raw_residual + 4.0 * rec.diagnostics.clipped + 1e-9,
            "{} vs {raw_residual} (clipped {})",
            rec.diagnostics.residual,
            rec.diagnostics.clipped
        );
    }

    #[test]
    fn sampled_round_trip() {
        let obs = vacuum_obs(12);
        let rho = DensityOperator::from_pure(&number_state(1, 48).unwrap());
        let record = sample_outcomes(&rho, &obs, 100_000, 2024).unwrap();
        let rec = reconstruct(&record, &obs, 16, 3e-2).unwrap();
        let td = trace_distance(&rec.rho_hat, &rho).unwrap();
        assert!(td <= 0.15, "trace distance {td}");
    }

    #[test]
    fn tikhonov_round_trip_comparable() {
        let obs = vacuum_obs(12);
        let rho = DensityOperator::from_pure(&number_state(1, 48).unwrap());
        let f = outcome_density(&rho, &obs).unwrap();
        let rec = reconstruct_with(
            &MeasurementRecord::Density(f),
            &obs,
            48,
            1e-4,
            Regularization::Tikhonov,
        )
        .unwrap();
        let td = trace_distance(&rec.rho_hat, &rho).unwrap();
        assert!(td <= 5e-2, "trace distance {td}");
    }

    #[test]
    fn reconstruction_translation_covariant() {
        let obs = vacuum_obs(12);
        let grid = *obs.grid();
        let x0 = PhasePoint {
            q: 8.0 * grid.dq(),
            p: -8.0 * grid.dp(),
        };
        let rho = DensityOperator::from_pure(&number_state(1, 48).unwrap());
        let moved = nearest_density(&translate(rho.op(), x0).unwrap()).unwrap().0;
        let f = outcome_density(&moved, &obs).unwrap();
        let rec = reconstruct(&MeasurementRecord::Density(f), &obs, 48, 1e-4).unwrap();
        let base = reconstruct(
            &MeasurementRecord::Density(outcome_density(&rho, &obs).unwrap()),
            &obs,
            48,
            1e-4,
        )
        .unwrap();
        let base_moved = nearest_density(&translate(base.rho_hat.op(), x0).unwrap())
            .unwrap()
            .0;
        let td = trace_distance(&rec.rho_hat, &base_moved).unwrap();
        assert!(td <= 1e-1, "covariance trace distance {td}");
    }

    #[test]
    fn slit_observable_is_valid_but_incomplete() {
        let obs = CovariantObservable::slit(1.0, 64, PSGrid::default_grid()).unwrap();
        // T̂(0) = 1 by construction; reconstruction of a state with Fourier
        // mass in the strips must either warn or refuse
        let rho = DensityOperator::from_pure(&number_state(1, 48).unwrap());
        let f = density_of_op(rho.op(), &obs).unwrap();
        match reconstruct(&MeasurementRecord::Density(f), &obs, 48, 1e-4) {
            Err(PsqhaError::Validation(msg)) => {
                assert!(msg.contains("informationally complete"), "{msg}");
            }
            Ok(rec) => assert!(rec.diagnostics.mass_warning),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn indistinguishable_pair_under_slit() {
        let obs = CovariantObservable::slit(1.0, 64, PSGrid::default_grid()).unwrap();
        let bump = BumpSpec {
            q_center: 11.0,
            q_width: 8.0,
            p_width: 8.0,
        };
        let (rho1, rho2, report) = indistinguishable_pair(&obs, bump, 0.05).unwrap();
        assert!(report.trace_norm_diff >= 0.01, "‖ρ₁−ρ₂‖₁ = {}", report.trace_norm_diff);
        assert!(report.sup_density_diff <= 1e-6, "sup diff {}", report.sup_density_diff);
        assert!(report.off_strip_leak <= 1e-8, "leak {}", report.off_strip_leak);
        let td = trace_distance(&rho1, &rho2).unwrap();
        assert!(td > 0.0);
    }

    #[test]
    fn pair_with_eps_zero_is_trivial() {
        let obs = CovariantObservable::slit(1.0, 32, PSGrid::default_grid()).unwrap();
        let bump = BumpSpec {
            q_center: 11.0,
            q_width: 8.0,
            p_width: 8.0,
        };
        let (rho1, rho2, report) = indistinguishable_pair(&obs, bump, 0.0).unwrap();
        assert_eq!(report.eps_used, 0.0);
        assert!(trace_distance(&rho1, &rho2).unwrap() < 1e-14);
    }

    #[test]
    fn bump_inside_support_is_distinguishable() {
        // sanity inversion: a bump where T̂ ≠ 0 must change the statistics
        let obs = CovariantObservable::slit(1.0, 64, PSGrid::default_grid()).unwrap();
        let bump = BumpSpec {
            q_center: 0.9,
            q_width: 0.5,
            p_width: 1.5,
        };
        let (_, _, report) = indistinguishable_pair(&obs, bump, 0.05).unwrap();
        assert!(
            report.sup_density_diff > 1e-3 * report.trace_norm_diff,
            "report {report:?}"
        );
    }
}
