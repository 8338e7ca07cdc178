//! First-order optimization on the Bures-Wasserstein manifold.
//!
//! Gaussian barycenters (Riemannian GD and SGD), entropically regularized
//! barycenters, smoothed Wasserstein geometric medians, and Euclidean
//! projected-gradient baselines, all on covariance matrices.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barycenter;
pub mod datasets;
pub mod distribution;
pub mod error;
pub mod euclidean;
pub mod geometry;
pub mod io;
pub mod median;
pub mod regularized;
pub mod sdp;
mod parallel;
pub mod trace;

pub use distribution::DiscreteDistribution;
pub use error::{BwError, Result};
pub use geometry::{GaussianMeasure, SpdMatrix, TangentMap};
pub use trace::{ConvergenceTrace, Termination, TraceRecord};
