//! Exact Wasserstein-1 transport for semi-discrete problems.
//!
//! The pipeline this crate implements:
//!
//! 1. [`measures`] — empirical measures, synthetic generators, corruption
//!    models (noise / blur) and PSNR.
//! 2. [`exact_ot`] — an exact discrete W1 solver (transportation simplex)
//!    producing the optimal plan *and* optimal dual potentials, with an
//!    independent brute-force / Hungarian oracle.
//! 3. [`potential`] — the 1-Lipschitz inf-convolution extension
//!    `u0(x) = min_j (v_j + |x - y_j|)` of the discrete duals, its gradient,
//!    and transport-ray geometry (`alpha`, `beta`, the `A_j` sets).
//! 4. [`map_recovery`] — the optimal transport map recovered from the
//!    potential alone via `T0(x) = x - alpha(x) * grad u0(x)`.
//! 5. [`ttc`] — the iterative transport procedure with spatially uniform
//!    adaptive step sizes, plus verifiers for the uniform-step reduction
//!    estimate and the proximal (adversarial-regularization) equivalence.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature (on by
//! default) enables native float intrinsics and stage timing. File formats,
//! plotting and the CLI live in the companion `w1ray-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used for parameter guards on purpose: it rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod exact_ot;
pub mod map_recovery;
pub mod math;
pub mod measures;
pub mod potential;
pub mod ttc;

mod error;

pub use error::{Error, Result};
