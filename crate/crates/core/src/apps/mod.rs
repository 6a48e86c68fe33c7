//! Applications built on the regression core: transductive kernel learning
//! from pairwise distance constraints and low-rank Mahalanobis metric
//! learning, plus the evaluation utilities they share (k-NN accuracy,
//! K-means clustering with normalized mutual information, PCA-based
//! initialization).

pub mod constraints;
pub mod dataset;
pub mod kernel;
pub mod kmeans;
pub mod knn;
pub mod mahalanobis;
pub mod pca;

pub use constraints::{satisfied_fraction, ClassBalance, ConstraintRecord, ConstraintSet};
pub use dataset::LabeledDataset;
pub use kernel::{build_kernel, generate_kernel_constraints, KernelKind, KernelMatrix};
pub use kmeans::{embedding_rows, kmeans, normalized_mutual_information, KmeansResult};
pub use knn::{knn_accuracy, KnnConfig, KnnStats};
pub use mahalanobis::{
    default_constraint_count, generate_mahalanobis_constraints, mahalanobis_distance, percentile,
};
pub use pca::{pca_subspace, spectral_init, SubspaceInit};
