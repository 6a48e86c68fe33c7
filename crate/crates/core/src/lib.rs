//! Gradient-descent regression on fixed-rank positive-semidefinite matrices.
//!
//! The model is W in S+(r, d) (or the full SPD cone), predictions are
//! yhat = tr(W X), and fitting minimizes the mean of half squared residuals,
//! optionally hinged for inequality targets. Four geometries drive the
//! updates:
//!
//! - `flat`: W = G G', straight-line updates in the factor G;
//! - `polar`: W = U R^2 U', a quotient of (Stiefel x SPD) with a
//!   lambda-weighted metric blending subspace and shape learning;
//! - `cone-affine`: full-rank W under the affine-invariant metric;
//! - `cone-logeuclidean`: full-rank W = exp(S) updated linearly in S.
//!
//! On top of the optimizers ([`optim`]) sit two applications ([`apps`]):
//! transductive kernel learning from pairwise distance constraints and
//! low-rank Mahalanobis metric learning.

pub mod apps;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod optim;
pub mod regression;

pub use error::{Error, Result};

// Re-exported so downstream crates build vectors and matrices against the
// exact linear-algebra version this crate links.
pub use nalgebra;
