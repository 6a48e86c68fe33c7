//! File formats and data generation: delimited feature/label tables,
//! constraint lists, binary model snapshots, JSON run reports, synthetic
//! regression problems, and seeded train/test splitting.

pub mod constraints;
pub mod dataset;
pub mod model_file;
pub mod report_file;
pub mod split;
pub mod synth;

pub use constraints::{load_constraints, save_constraints};
pub use dataset::{load_dataset, normalize, save_dataset, NormalizeReport, TabularData};
pub use model_file::{load_model, save_model};
pub use report_file::{load_report, save_report, RunReport, Timings};
pub use split::split_indices;
pub use synth::{synth_regression, synth_spectrum, SyntheticData, SyntheticSpec};
