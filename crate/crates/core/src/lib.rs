//! Batched stochastic gradient descent with importance-weighted batch
//! sampling.
//!
//! The crate solves two problem families by sampling fixed row batches with
//! non-uniform probabilities proportional to per-batch Lipschitz constants:
//!
//! * least squares `min ‖Ax − b‖²` via weighted batched SGD with a fixed,
//!   analytically tuned step size ([`smooth`]);
//! * L2-regularized hinge loss (SVM primal) via weighted batched subgradient
//!   descent with decaying steps and suffix averaging ([`nonsmooth`]).
//!
//! Supporting machinery: dense row-major matrices and spectral-norm
//! estimation ([`matrix`]), synthetic problem generators ([`problems`],
//! [`tomography`]), row partitioning ([`batching`]), sampling-weight tables
//! ([`weighting`]), and per-run flop accounting ([`trace`]).
//!
//! The crate is `no_std`-compatible: disable default features and enable
//! `libm` to build without the standard library (an allocator is required).
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]
// Index loops in the numeric kernels walk several arrays in lockstep;
// enumerate() over one of them would only obscure the stride structure.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("either the `std` or the `libm` feature must be enabled");

pub mod batching;
pub mod config;
pub mod error;
mod math;
pub mod matrix;
pub mod nonsmooth;
pub mod problems;
pub mod rng;
pub mod smooth;
pub mod tomography;
pub mod trace;
pub mod weighting;

pub use error::{Error, Result};
