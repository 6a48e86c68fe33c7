//! Trace regression over structured matrix observations: data points,
//! models per geometry, predictions, losses, and Riemannian gradients.

pub mod data;
pub mod gradient;
pub mod model;
pub mod oja;

pub use data::{loss, residual, DataPoint, Relation, Sample};
pub use gradient::{
    cost_and_gradient, grad_cone_affine, grad_flat, grad_logeuclidean, grad_polar,
    minibatch_gradient, retract_descent, sample_gradient, GradientBundle,
};
pub use model::{empirical_cost, predict, Model, Prepared};
pub use oja::oja_update;
