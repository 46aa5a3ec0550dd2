//! Multivariate Hawkes processes whose pairwise excitations are parametrized
//! by a latent Euclidean embedding of the event types.
//!
//! Each type `k` owns a reception point `x_k` and an influence point `y_k`;
//! the excitation of `k` by past events of type `l` decays with the distance
//! `|y_l - x_k|` through a bank of Gaussian-in-space, exponential-in-time
//! kernels. Parameters are estimated by expectation-maximization over the
//! latent branching structure.

// `!(x > 0.0)` is used deliberately so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod em;
pub mod error;
pub mod geometry;
pub mod io;
pub mod model;
pub mod numeric;
pub mod simulate;
pub mod spectral;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
