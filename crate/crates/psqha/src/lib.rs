//! Numerical quantum harmonic analysis on phase space.
//!
//! The crate revolves around two carriers: operators on a truncated Fock
//! space ([`fock_core::FockOperator`]) and complex functions sampled on a
//! rectangular phase-space grid ([`phase_grid::PSFunction`]) under the scaled
//! measure `dq dp / 2π`. On top of these it provides
//!
//! - the Fourier-Weyl transform `A ↦ tr{A W(q,p)}` and its inverse
//!   ([`qconv`]),
//! - the quantum-classical convolution algebra, where operator∗operator is a
//!   function and function∗operator is an operator ([`qconv`]),
//! - zero-set extraction and Z1/Z2/Z3 smallness classification for the
//!   transform of a generating operator, including the dyadic construction
//!   of a positive-measure zero set with dense complement ([`zeroset`]),
//! - covariant phase-space observables, simulated measurement, and state
//!   reconstruction by Fourier deconvolution ([`tomography`]),
//! - an exact finite phase space `Z_d × Z_d` where the regularity,
//!   injectivity, and zero-set conditions all reduce to finite linear
//!   algebra ([`finite_ps`]).
//!
//! All public values are immutable after construction and all operations are
//! pure functions; everything is safe to share across threads.

pub mod error;
pub mod finite_ps;
pub mod fock_core;
pub mod phase_grid;
pub mod qconv;
pub mod tomography;
pub mod util;
pub mod zeroset;

pub use error::PsqhaError;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, PsqhaError>;
