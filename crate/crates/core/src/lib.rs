//! Core numerics for soft-to-hard routing analysis in sparse
//! mixture-of-experts models.
//!
//! A temperature parameter `tau` interpolates between a soft softmax gate
//! (`tau > 0`) and the hard top-1 rule (`tau = 0`). Everything soft-vs-hard
//! is controlled by where the router logits nearly tie, so the crate is
//! organised around that picture:
//!
//! - [`moe`]: linear routers and experts, tempered gate weights, top-two and
//!   pairwise margins, and the exponential off-winner tail bound.
//! - [`sampling`]: seeded multivariate Gaussian sampling and Monte Carlo
//!   reductions with fixed summation order, so every estimate in the crate
//!   is reproducible bit for bit.
//! - [`boundary`]: boundary-mass profiles (margin slabs, ambiguous-gate
//!   regions), the exact Gaussian slab probability, and the small-width
//!   coarea coefficient.
//! - [`risk`]: paired soft/hard risk estimation against a hard-routed
//!   teacher, the off-boundary/boundary risk decomposition, and a
//!   finite-difference check of the interface shape derivative.
//! - [`symmetry`]: a reduced two-expert model with an antisymmetric router,
//!   its effective symmetry-breaking operator, Rayleigh quotients in closed
//!   form, and the linearised alignment dynamics.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature, on by
//! default, only switches float intrinsics and enables `std::error::Error`
//! interop.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(missing_docs)]
#![allow(clippy::excessive_precision)]

extern crate alloc;

pub mod boundary;
mod error;
pub mod linalg;
pub mod math;
pub mod moe;
pub mod quadrature;
pub mod risk;
pub mod sampling;
pub mod stats;
pub mod symmetry;

pub use error::{Error, Result};
