//! Batch and online optimizers over the regression geometries.

pub mod batch;
pub mod online;
pub mod report;

pub use batch::{
    armijo_search, batch_fit, batch_fit_with_observer, stopping_check, ArmijoStep, BatchConfig,
};
pub use online::{
    adaptive_step_flat, estimate_grad_scale, online_fit, online_fit_with_observer,
    pretrain_grid_search, shuffled_epoch_order, step_grid, step_schedule, OnlineConfig, StepRule,
    StepSchedule,
};
pub use report::{FitReport, IterationRecord, Termination};
