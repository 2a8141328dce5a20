//! Phase-space grids, the symplectic Fourier transform, classical
//! convolution, and quadrature under the scaled measure dx = dq dp/(2π).
//!
//! The symplectic transform `f̂(y) = ∫ e^{−i{x,y}} f(x) dx` with
//! `{(q,p),(q′,p′)} = q′p − qp′` is an involution under this measure. It is
//! evaluated as an exact sampled quadrature (two dense matrix passes, one per
//! axis), so the output lives on the same grid as the input with no
//! resampling; accuracy for boundary-decaying inputs is certified against a
//! slow direct-quadrature oracle in the test suite.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::PsqhaError;
use crate::util::pairwise_sum;
use crate::Result;

/// Boundary decay threshold; violations produce a soft warning, not an
/// error, because zero-set studies intentionally use slowly decaying
/// functions.
pub const BOUNDARY_DECAY_THRESHOLD: f64 = 1e-8;

/// A rectangular phase-space sampling. Nodes are `q_j = q_min + j Δq`,
/// `j = 0..nq` (the right edge is excluded so the origin is a node and the
/// Riemann sum covers the extent exactly once).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PSGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
}

impl PSGrid {
    pub fn new(q_max: f64, p_max: f64, nq: usize, np: usize) -> Result<Self> {
        if !(q_max > 0.0) || !(p_max > 0.0) || !q_max.is_finite() || !p_max.is_finite() {
            return Err(PsqhaError::invalid("grid extents must be positive and finite"));
        }
        for (name, n) in [("nq", nq), ("np", np)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(PsqhaError::invalid(format!(
                    "{name} must be a power of two >= 16, got {n}"
                )));
            }
        }
        Ok(PSGrid {
            q_min: -q_max,
            q_max,
            p_min: -p_max,
            p_max,
            nq,
            np,
        })
    }

    /// Default grid: [−12, 12]² with 256² nodes.
    pub fn default_grid() -> Self {
        PSGrid::new(12.0, 12.0, 256, 256).expect("valid default")
    }

    /// Same extents with both sample counts scaled by `factor` (a power of
    /// two), for refinement studies.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        PSGrid::new(self.q_max, self.p_max, self.nq * factor, self.np * factor)
    }

    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / self.nq as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn q_at(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.dq()
    }

    pub fn p_at(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.dp()
    }

    /// Integration weight per node under the scaled measure.
    pub fn cell_weight(&self) -> f64 {
        self.dq() * self.dp() / (2.0 * PI)
    }
}

/// A complex-valued function sampled on a [`PSGrid`]. Rows index q, columns
/// index p.
#[derive(Debug, Clone, PartialEq)]
pub struct PSFunction {
    grid: PSGrid,
    samples: DMatrix<C64>,
    /// Set when an operation saw the input violate the boundary-decay
    /// precondition; propagated through transform pipelines.
    pub boundary_warning: bool,
}

#[derive(Serialize, Deserialize)]
struct PSFunctionJson {
    grid: PSGrid,
    re: Vec<f64>,
    im: Vec<f64>,
    #[serde(default)]
    boundary_warning: bool,
}

impl PSFunction {
    pub fn from_samples(grid: PSGrid, samples: DMatrix<C64>) -> Result<Self> {
        if samples.nrows() != grid.nq || samples.ncols() != grid.np {
            return Err(PsqhaError::DimensionMismatch(format!(
                "samples {}x{} vs grid {}x{}",
                samples.nrows(),
                samples.ncols(),
                grid.nq,
                grid.np
            )));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PsqhaError::Validation("samples must be finite".into()));
        }
        Ok(PSFunction {
            grid,
            samples,
            boundary_warning: false,
        })
    }

    pub fn from_fn(grid: PSGrid, mut f: impl FnMut(f64, f64) -> C64) -> Self {
        let samples = DMatrix::from_fn(grid.nq, grid.np, |j, k| f(grid.q_at(j), grid.p_at(k)));
        PSFunction {
            grid,
            samples,
            boundary_warning: false,
        }
    }

    pub fn zeros(grid: PSGrid) -> Self {
        PSFunction {
            grid,
            samples: DMatrix::zeros(grid.nq, grid.np),
            boundary_warning: false,
        }
    }

    pub fn grid(&self) -> &PSGrid {
        &self.grid
    }

    pub fn samples(&self) -> &DMatrix<C64> {
        &self.samples
    }

    pub fn value(&self, j: usize, k: usize) -> C64 {
        self.samples[(j, k)]
    }

    /// Value at the origin node.
    pub fn at_origin(&self) -> C64 {
        self.samples[(self.grid.nq / 2, self.grid.np / 2)]
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> PSFunction {
        PSFunction {
            grid: self.grid,
            samples: self.samples.map(f),
            boundary_warning: self.boundary_warning,
        }
    }

    pub fn scale(&self, c: C64) -> PSFunction {
        self.map(|z| z * c)
    }

    pub fn add(&self, other: &PSFunction) -> Result<PSFunction> {
        self.check_same_grid(other)?;
        Ok(PSFunction {
            grid: self.grid,
            samples: &self.samples + &other.samples,
            boundary_warning: self.boundary_warning || other.boundary_warning,
        })
    }

    pub fn sub(&self, other: &PSFunction) -> Result<PSFunction> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Pointwise product.
    pub fn mul_pointwise(&self, other: &PSFunction) -> Result<PSFunction> {
        self.check_same_grid(other)?;
        Ok(PSFunction {
            grid: self.grid,
            samples: self.samples.component_mul(&other.samples),
            boundary_warning: self.boundary_warning || other.boundary_warning,
        })
    }

    pub fn check_same_grid(&self, other: &PSFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(PsqhaError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest |f| on the outermost ring of nodes.
    pub fn boundary_max_abs(&self) -> f64 {
        let (nq, np) = (self.grid.nq, self.grid.np);
        let mut max = 0.0f64;
        for k in 0..np {
            max = max.max(self.samples[(0, k)].norm());
            max = max.max(self.samples[(nq - 1, k)].norm());
        }
        for j in 0..nq {
            max = max.max(self.samples[(j, 0)].norm());
            max = max.max(self.samples[(j, np - 1)].norm());
        }
        max
    }

    pub fn decays_at_boundary(&self) -> bool {
        self.boundary_max_abs() <= BOUNDARY_DECAY_THRESHOLD * self.max_abs().max(1e-300)
    }

    /// L¹ norm under the scaled measure.
    pub fn norm_l1(&self) -> f64 {
        let w = self.grid.cell_weight();
        self.samples.iter().map(|z| z.norm()).sum::<f64>() * w
    }

    /// L² norm under the scaled measure.
    pub fn norm_l2(&self) -> f64 {
        let w = self.grid.cell_weight();
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * w).sqrt()
    }

    /// L^p norm under the scaled measure; `p = f64::INFINITY` gives sup.
    pub fn norm_lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let w = self.grid.cell_weight();
        (self.samples.iter().map(|z| z.norm().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PSFunctionJson {
            grid: self.grid,
            re: self.samples.transpose().iter().map(|z| z.re).collect(),
            im: self.samples.transpose().iter().map(|z| z.im).collect(),
            boundary_warning: self.boundary_warning,
        })
        .expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: PSFunctionJson = serde_json::from_value(v.clone())?;
        let (nq, np) = (raw.grid.nq, raw.grid.np);
        if raw.re.len() != nq * np || raw.im.len() != nq * np {
            return Err(PsqhaError::invalid("sample arrays must have nq*np entries"));
        }
        let samples =
            DMatrix::from_fn(nq, np, |j, k| C64::new(raw.re[j * np + k], raw.im[j * np + k]));
        let mut f = PSFunction::from_samples(raw.grid, samples)?;
        f.boundary_warning = raw.boundary_warning;
        Ok(f)
    }

    /// CSV rows `q,p,re,im`, one node per line, q-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.grid.nq * self.grid.np * 32);
        out.push_str("q,p,re,im\n");
        for j in 0..self.grid.nq {
            for k in 0..self.grid.np {
                let z = self.samples[(j, k)];
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.grid.q_at(j),
                    self.grid.p_at(k),
                    z.re,
                    z.im
                ));
            }
        }
        out
    }
}

/// ∫ f dx with a fixed pairwise reduction tree (schedule-independent).
pub fn integrate(f: &PSFunction) -> C64 {
    let v: Vec<C64> = f.samples.iter().copied().collect();
    pairwise_sum(&v) * C64::new(f.grid.cell_weight(), 0.0)
}

/// The symplectic Fourier transform, sampled on the input grid.
pub fn symplectic_fourier(f: &PSFunction) -> PSFunction {
    let grid = f.grid;
    let (nq, np) = (grid.nq, grid.np);
    // e1[j, b] = exp(i q_j p'_b); e2[a, k] = exp(-i p_k q'_a)
    let e1 = DMatrix::from_fn(nq, np, |j, b| C64::new(0.0, grid.q_at(j) * grid.p_at(b)).exp());
    let e2 = DMatrix::from_fn(nq, np, |a, k| C64::new(0.0, -grid.p_at(k) * grid.q_at(a)).exp());
    let inner = f.samples.transpose() * e1; // [k, b]
    let mut out = e2 * inner; // [a, b]
    out *= C64::new(grid.cell_weight(), 0.0);
    let mut result = PSFunction {
        grid,
        samples: out,
        boundary_warning: f.boundary_warning,
    };
    if !f.decays_at_boundary() {
        result.boundary_warning = true;
    }
    result
}

/// (f ∗ g)(y) = ∫ f(x) g(y−x) dx via transform–multiply–transform (the
/// symplectic transform is its own inverse).
pub fn convolve_functions(f: &PSFunction, g: &PSFunction) -> Result<PSFunction> {
    f.check_same_grid(g)?;
    let fh = symplectic_fourier(f);
    let gh = symplectic_fourier(g);
    let prod = fh.mul_pointwise(&gh)?;
    Ok(symplectic_fourier(&prod))
}
