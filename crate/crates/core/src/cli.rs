//! Command-line front end.
//!
//! Every subcommand resolves its full configuration (flags plus derived
//! values), runs the corresponding library pipeline, writes its artifacts
//! under `--out`, and finishes with a JSON report that embeds the resolved
//! configuration. With a fixed seed the artifacts are byte-identical across
//! runs except for the wall-clock timing block.
//!
//! Exit codes: 0 success, 2 configuration errors (including flag parsing),
//! 3 data and i/o errors, 4 numerical failures. `PSDREG_THREADS` caps the
//! size of the global thread pool.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::apps::{
    build_kernel, default_constraint_count, embedding_rows, generate_kernel_constraints,
    generate_mahalanobis_constraints, kmeans, knn_accuracy, mahalanobis_distance,
    normalized_mutual_information, pca_subspace, satisfied_fraction, spectral_init, KernelKind,
    KnnConfig, KnnStats, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::gradcheck::{max_rel_err, run_gradcheck, GradCheckConfig, GradCheckRecord};
use crate::io::{
    load_dataset, load_model, normalize, save_constraints, save_dataset, save_model, save_report,
    synth_regression, RunReport, SyntheticSpec, Timings,
};
use crate::optim::{batch_fit, online_fit, BatchConfig, FitReport, OnlineConfig};
use crate::regression::{empirical_cost, DataPoint, Model, Prepared, Sample};

/// Stream id for constraint sampling, distinct from the streams the online
/// optimizer draws from, so the two never share a random sequence.
const CONSTRAINT_STREAM: u64 = 2;

/// Restarts used for the clustering quality metric inside kernel-learn.
const METRIC_KMEANS_RESTARTS: usize = 10;

#[derive(Parser)]
#[command(
    name = "psdreg",
    version,
    about = "Least-squares regression of fixed-rank positive-semidefinite matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic low-rank regression problem
    Synth(SynthArgs),
    /// Fit a model to a numeric table whose last column is the target
    Train(TrainArgs),
    /// Learn a low-rank kernel from label-derived distance constraints
    KernelLearn(KernelLearnArgs),
    /// Learn a low-rank Mahalanobis metric from labeled features
    MetricLearn(MetricLearnArgs),
    /// Score a saved model by k-NN accuracy and clustering agreement
    Evaluate(EvaluateArgs),
    /// Check gradients against finite differences in every geometry
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GeometryArg {
    /// W = G G', gradient descent on the factor
    Flat,
    /// W = U R^2 U', interpolated metric on (U, R)
    Polar,
    /// Full-rank cone with the affine-invariant metric
    ConeAffine,
    /// Full-rank cone with the log-Euclidean metric
    ConeLogeuclidean,
}

impl GeometryArg {
    fn name(self) -> &'static str {
        match self {
            GeometryArg::Flat => "flat",
            GeometryArg::Polar => "polar",
            GeometryArg::ConeAffine => "cone-affine",
            GeometryArg::ConeLogeuclidean => "cone-logeuclidean",
        }
    }

    fn is_cone(self) -> bool {
        matches!(self, GeometryArg::ConeAffine | GeometryArg::ConeLogeuclidean)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ModeArg {
    /// Full-gradient steps with Armijo line search
    Batch,
    /// Mini-batch stochastic descent with an annealed step size
    Online,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum KernelArg {
    /// Inner-product kernel X X'
    Linear,
    /// Gaussian kernel exp(-gamma ||x_i - x_j||^2)
    Rbf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TaskArg {
    /// The model is an n x n kernel over the table's rows
    Kernel,
    /// The model is a d x d metric over the table's feature columns
    Metric,
}

/// Optimizer flags shared by the fitting subcommands.
#[derive(Args, Serialize)]
struct OptimArgs {
    /// Optimization mode
    #[arg(long, value_enum, default_value_t = ModeArg::Batch)]
    mode: ModeArg,
    /// Largest trial step is s0 / ||grad|| (batch mode)
    #[arg(long, default_value_t = 100.0)]
    s0: f64,
    /// Armijo sufficient-decrease constant (batch mode)
    #[arg(long, default_value_t = 0.5)]
    c: f64,
    /// Tolerance shared by the batch stopping tests
    #[arg(long = "eps-tol", default_value_t = 1e-5)]
    eps_tol: f64,
    /// Cap on accepted gradient steps (batch mode)
    #[arg(long = "max-iters", default_value_t = 1000)]
    max_iters: usize,
    /// Full passes over the data (online mode)
    #[arg(long, default_value_t = 1)]
    epochs: usize,
    /// Samples accumulated per update (online mode)
    #[arg(long = "batch-size", default_value_t = 32)]
    batch_size: usize,
}

impl OptimArgs {
    fn fit(
        &self,
        model: &Model,
        samples: &[Sample],
        lambda: f64,
        seed: u64,
    ) -> Result<(Model, FitReport)> {
        match self.mode {
            ModeArg::Batch => {
                let config = BatchConfig {
                    s0: self.s0,
                    c: self.c,
                    eps_tol: self.eps_tol,
                    max_iters: self.max_iters,
                    ..BatchConfig::default()
                };
                batch_fit(model, samples, lambda, &config)
            }
            ModeArg::Online => {
                let config = OnlineConfig {
                    epochs: self.epochs,
                    batch_size: self.batch_size,
                    seed,
                    ..OnlineConfig::default()
                };
                online_fit(model, samples, lambda, &config)
            }
        }
    }
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Ambient dimension of the planted model
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Rank of the planted model
    #[arg(long, default_value_t = 5)]
    r: usize,
    /// Training rows to generate
    #[arg(long = "n-train", default_value_t = 500)]
    n_train: usize,
    /// Test rows to generate
    #[arg(long = "n-test", default_value_t = 500)]
    n_test: usize,
    /// Multiplicative noise level; must stay below 1
    #[arg(long = "noise-std", default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Column separator for the generated tables
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Training table: feature columns followed by one target column
    #[arg(long)]
    train: PathBuf,
    /// Held-out table in the same layout
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GeometryArg::Polar)]
    geometry: GeometryArg,
    /// Metric interpolation weight for the polar geometry
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Model rank; required for flat/polar, defaults to d for the cones
    #[arg(long)]
    rank: Option<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct KernelLearnArgs {
    /// Labeled table; the label column defaults to the last one
    #[arg(long)]
    data: PathBuf,
    /// Zero-based index of the label column
    #[arg(long = "label-column")]
    label_column: Option<usize>,
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    kernel: KernelArg,
    /// Width of the Gaussian kernel
    #[arg(long, default_value_t = 1e-3)]
    gamma: f64,
    /// Skip centering the kernel in feature space
    #[arg(long = "no-center")]
    no_center: bool,
    /// Skip per-column standardization of the features
    #[arg(long = "no-normalize")]
    no_normalize: bool,
    /// Rank of the learned kernel
    #[arg(long, default_value_t = 16)]
    rank: usize,
    /// Low-rank geometry to optimize over (flat or polar)
    #[arg(long, value_enum, default_value_t = GeometryArg::Polar)]
    geometry: GeometryArg,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Relative margin carved around the observed distances
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// Number of pairwise constraints; defaults to 40 c (c - 1)
    #[arg(long)]
    constraints: Option<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct MetricLearnArgs {
    /// Labeled table; the label column defaults to the last one
    #[arg(long)]
    data: PathBuf,
    /// Zero-based index of the label column
    #[arg(long = "label-column")]
    label_column: Option<usize>,
    /// Skip per-column standardization of the features
    #[arg(long = "no-normalize")]
    no_normalize: bool,
    /// Rank of the learned metric; required for flat/polar, d for the cones
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, value_enum, default_value_t = GeometryArg::Polar)]
    geometry: GeometryArg,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Number of pairwise constraints; defaults to 40 c (c - 1)
    #[arg(long)]
    constraints: Option<usize>,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    /// Saved model to score
    #[arg(long)]
    model: PathBuf,
    /// Labeled table; the label column defaults to the last one
    #[arg(long)]
    data: PathBuf,
    /// Zero-based index of the label column
    #[arg(long = "label-column")]
    label_column: Option<usize>,
    /// How the model relates to the table
    #[arg(long, value_enum)]
    task: TaskArg,
    /// Neighbors in the k-NN vote
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Cross-validation folds
    #[arg(long, default_value_t = 2)]
    folds: usize,
    /// Cross-validation repetitions
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// k-means restarts for the clustering metric
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    /// Skip per-column standardization (metric task only)
    #[arg(long = "no-normalize")]
    no_normalize: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GradcheckArgs {
    /// Ambient dimension; the cone geometries run at rank d
    #[arg(long, default_value_t = 12)]
    d: usize,
    /// Rank of the flat and polar models
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Random directions probed per geometry and per lambda
    #[arg(long, default_value_t = 20)]
    directions: usize,
    /// Samples in the probed empirical cost
    #[arg(long, default_value_t = 24)]
    samples: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Polar metric weights to check
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.5, 0.7])]
    lambdas: Vec<f64>,
    /// Largest tolerated relative discrepancy
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Parses the process arguments, runs the selected subcommand, and maps the
/// outcome onto the documented exit codes.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("psdreg: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Exit code for an error: 2 configuration, 3 data/input, 4 numerical.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io(_) | Error::Dimension(_) | Error::Degenerate(_) => 3,
        Error::Domain(_)
        | Error::Numerical(_)
        | Error::LinesearchExhausted { .. }
        | Error::Divergence { .. } => 4,
    }
}

fn execute(cli: &Cli) -> Result<()> {
    init_thread_pool()?;
    match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::KernelLearn(args) => cmd_kernel_learn(args),
        Command::MetricLearn(args) => cmd_metric_learn(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    }
}

/// Applies the PSDREG_THREADS cap to the global thread pool. A pool that was
/// already installed (as happens under `cargo test`) is left untouched.
fn init_thread_pool() -> Result<()> {
    match std::env::var("PSDREG_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(()),
        Err(std::env::VarError::NotUnicode(_)) => Err(Error::config(
            "PSDREG_THREADS is not valid unicode".to_string(),
        )),
        Ok(raw) => {
            let threads: usize = raw.trim().parse().map_err(|_| {
                Error::config(format!(
                    "PSDREG_THREADS must be a positive integer, got '{raw}'"
                ))
            })?;
            if threads == 0 {
                return Err(Error::config(
                    "PSDREG_THREADS must be a positive integer, got '0'".to_string(),
                ));
            }
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
            Ok(())
        }
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if !(args.noise_std < 1.0) {
        return Err(Error::config(format!(
            "--noise-std must stay below 1 to keep targets meaningful, got {}",
            args.noise_std
        )));
    }
    let spec = SyntheticSpec {
        d: args.d,
        r: args.r,
        n_train: args.n_train,
        n_test: args.n_test,
        noise_std: args.noise_std,
        seed: args.seed,
    };
    let data = synth_regression(&spec)?;
    fs::create_dir_all(&args.out)?;
    write_regression_table(&args.out.join("train.csv"), &data.train, args.delimiter)?;
    write_regression_table(&args.out.join("test.csv"), &data.test, args.delimiter)?;
    save_model(args.out.join("true_model.psdr"), &data.true_model)?;

    let mut report = blank_report(config_json("synth", args, serde_json::Value::Null));
    report
        .metrics
        .insert("negative_targets".to_string(), data.negative_targets as f64);
    report
        .metrics
        .insert("train_rows".to_string(), data.train.len() as f64);
    report
        .metrics
        .insert("test_rows".to_string(), data.test.len() as f64);
    save_report(args.out.join("report.json"), &report)?;
    println!(
        "synth: wrote {} train and {} test rows (d = {}, rank = {}) to {}",
        data.train.len(),
        data.test.len(),
        args.d,
        args.r,
        args.out.display()
    );
    if data.negative_targets > 0 {
        eprintln!(
            "psdreg: warning: {} targets came out negative under the noise",
            data.negative_targets
        );
    }
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (train, d) = load_regression_samples(&args.train, args.delimiter)?;
    let test = match &args.test {
        Some(path) => {
            let (samples, dt) = load_regression_samples(path, args.delimiter)?;
            if dt != d {
                return Err(Error::data(format!(
                    "training rows have {d} features but test rows have {dt}"
                )));
            }
            Some(samples)
        }
        None => None,
    };
    let rank = resolve_rank(args.geometry, args.rank, d)?;
    let model0 = Model::identity(args.geometry.name(), d, rank)?;
    let (model, fit) = args.optim.fit(&model0, &train, args.lambda, args.seed)?;

    fs::create_dir_all(&args.out)?;
    save_model(args.out.join("model.psdr"), &model)?;
    write_history_csv(&args.out.join("history.csv"), &fit)?;

    let resolved = serde_json::json!({
        "rank": rank,
        "features": d,
        "train_rows": train.len(),
        "test_rows": test.as_ref().map_or(0, Vec::len),
    });
    let mut report = RunReport::from_fit(config_json("train", args, resolved), &fit);
    report
        .metrics
        .insert("train_cost_initial".to_string(), fit.initial_cost);
    report
        .metrics
        .insert("train_cost_final".to_string(), fit.final_cost);
    if let Some(test) = &test {
        report
            .metrics
            .insert("test_cost".to_string(), empirical_cost(&model, test)?);
    }
    save_report(args.out.join("report.json"), &report)?;
    println!(
        "train: {} rank {}, cost {:.6e} -> {:.6e} in {} iterations ({}), artifacts in {}",
        args.geometry.name(),
        rank,
        fit.initial_cost,
        fit.final_cost,
        fit.iterations.len(),
        fit.termination.label(),
        args.out.display()
    );
    Ok(())
}

fn cmd_kernel_learn(args: &KernelLearnArgs) -> Result<()> {
    if args.geometry.is_cone() {
        return Err(Error::config(
            "kernel learning runs on the low-rank geometries; pick flat or polar".to_string(),
        ));
    }
    let (dataset, mut warnings) = load_labeled(
        &args.data,
        args.delimiter,
        args.label_column,
        !args.no_normalize,
    )?;
    let n = dataset.len();
    let kind = match args.kernel {
        KernelArg::Linear => KernelKind::Linear,
        KernelArg::Rbf => KernelKind::Rbf { gamma: args.gamma },
    };
    let kernel = build_kernel(dataset.features(), kind, !args.no_center)?;
    let spectrum = spectral_init(kernel.values(), args.rank)?;
    let model0 =
        Model::from_scaled_subspace(args.geometry.name(), &spectrum.subspace, &spectrum.eigenvalues)?;

    let count = args
        .constraints
        .unwrap_or_else(|| default_constraint_count(dataset.classes()));
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(CONSTRAINT_STREAM);
    let set = generate_kernel_constraints(&kernel, dataset.labels(), args.alpha, count, &mut rng)?;
    warnings.extend(set.warnings.iter().cloned());
    let samples = set.kernel_samples(n)?;

    let (model, fit) = args.optim.fit(&model0, &samples, args.lambda, args.seed)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("train_cost_initial".to_string(), fit.initial_cost);
    metrics.insert("train_cost_final".to_string(), fit.final_cost);
    metrics.insert(
        "satisfied_initial".to_string(),
        satisfied_fraction(&model0, &samples)?,
    );
    metrics.insert(
        "satisfied_learned".to_string(),
        satisfied_fraction(&model, &samples)?,
    );
    metrics.insert(
        "nmi_initial".to_string(),
        cluster_agreement(&model0, &dataset, args.seed)?,
    );
    metrics.insert(
        "nmi_learned".to_string(),
        cluster_agreement(&model, &dataset, args.seed)?,
    );
    let knn_cfg = KnnConfig {
        seed: args.seed,
        ..KnnConfig::default()
    };
    let knn0 = kernel_knn(&model0, dataset.labels(), &knn_cfg)?;
    let knn1 = kernel_knn(&model, dataset.labels(), &knn_cfg)?;
    warnings.extend(knn1.warnings.iter().cloned());
    metrics.insert("knn_initial".to_string(), knn0.mean);
    metrics.insert("knn_learned".to_string(), knn1.mean);
    metrics.insert("knn_learned_std".to_string(), knn1.std_dev);

    fs::create_dir_all(&args.out)?;
    save_model(args.out.join("model.psdr"), &model)?;
    save_constraints(args.out.join("constraints.txt"), &set)?;
    write_history_csv(&args.out.join("history.csv"), &fit)?;

    let resolved = serde_json::json!({
        "label_column": resolve_label_column(&args.data, args.delimiter, args.label_column)?,
        "constraints": count,
        "classes": dataset.classes(),
        "rows": n,
        "features": dataset.dim(),
    });
    let mut report = RunReport::from_fit(config_json("kernel-learn", args, resolved), &fit);
    report.metrics = metrics;
    save_report(args.out.join("report.json"), &report)?;

    for w in &warnings {
        eprintln!("psdreg: warning: {w}");
    }
    println!(
        "kernel-learn: {} rank {} over {} rows, satisfied {:.3} -> {:.3}, nmi {:.3} -> {:.3}, artifacts in {}",
        args.geometry.name(),
        args.rank,
        n,
        report.metrics["satisfied_initial"],
        report.metrics["satisfied_learned"],
        report.metrics["nmi_initial"],
        report.metrics["nmi_learned"],
        args.out.display()
    );
    Ok(())
}

fn cmd_metric_learn(args: &MetricLearnArgs) -> Result<()> {
    let (dataset, mut warnings) = load_labeled(
        &args.data,
        args.delimiter,
        args.label_column,
        !args.no_normalize,
    )?;
    let d = dataset.dim();
    let rank = resolve_rank(args.geometry, args.rank, d)?;
    let model0 = if args.geometry.is_cone() {
        Model::identity(args.geometry.name(), d, rank)?
    } else {
        let init = pca_subspace(dataset.features(), rank)?;
        Model::from_scaled_subspace(args.geometry.name(), &init.subspace, &init.eigenvalues)?
    };

    let count = args
        .constraints
        .unwrap_or_else(|| default_constraint_count(dataset.classes()));
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(CONSTRAINT_STREAM);
    let set = generate_mahalanobis_constraints(&dataset, &model0, count, &mut rng)?;
    warnings.extend(set.warnings.iter().cloned());
    let samples = set.mahalanobis_samples(dataset.features())?;

    let (model, fit) = args.optim.fit(&model0, &samples, args.lambda, args.seed)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("train_cost_initial".to_string(), fit.initial_cost);
    metrics.insert("train_cost_final".to_string(), fit.final_cost);
    metrics.insert(
        "satisfied_initial".to_string(),
        satisfied_fraction(&model0, &samples)?,
    );
    metrics.insert(
        "satisfied_learned".to_string(),
        satisfied_fraction(&model, &samples)?,
    );
    let knn_cfg = KnnConfig {
        seed: args.seed,
        ..KnnConfig::default()
    };
    let knn0 = metric_knn(&model0, &dataset, &knn_cfg)?;
    let knn1 = metric_knn(&model, &dataset, &knn_cfg)?;
    warnings.extend(knn1.warnings.iter().cloned());
    metrics.insert("knn_initial".to_string(), knn0.mean);
    metrics.insert("knn_learned".to_string(), knn1.mean);
    metrics.insert("knn_learned_std".to_string(), knn1.std_dev);

    fs::create_dir_all(&args.out)?;
    save_model(args.out.join("model.psdr"), &model)?;
    save_constraints(args.out.join("constraints.txt"), &set)?;
    write_history_csv(&args.out.join("history.csv"), &fit)?;

    let resolved = serde_json::json!({
        "label_column": resolve_label_column(&args.data, args.delimiter, args.label_column)?,
        "rank": rank,
        "constraints": count,
        "classes": dataset.classes(),
        "rows": dataset.len(),
        "features": d,
    });
    let mut report = RunReport::from_fit(config_json("metric-learn", args, resolved), &fit);
    report.metrics = metrics;
    save_report(args.out.join("report.json"), &report)?;

    for w in &warnings {
        eprintln!("psdreg: warning: {w}");
    }
    println!(
        "metric-learn: {} rank {} over {} rows, satisfied {:.3} -> {:.3}, knn {:.3} -> {:.3}, artifacts in {}",
        args.geometry.name(),
        rank,
        dataset.len(),
        report.metrics["satisfied_initial"],
        report.metrics["satisfied_learned"],
        report.metrics["knn_initial"],
        report.metrics["knn_learned"],
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let normalize_features = matches!(args.task, TaskArg::Metric) && !args.no_normalize;
    let (dataset, warnings) = load_labeled(
        &args.data,
        args.delimiter,
        args.label_column,
        normalize_features,
    )?;
    let knn_cfg = KnnConfig {
        k: args.k,
        folds: args.folds,
        repeats: args.repeats,
        seed: args.seed,
    };
    let (stats, embedding) = match args.task {
        TaskArg::Kernel => {
            if model.dim() != dataset.len() {
                return Err(Error::data(format!(
                    "kernel model indexes {} samples but the table has {} rows",
                    model.dim(),
                    dataset.len()
                )));
            }
            let stats = kernel_knn(&model, dataset.labels(), &knn_cfg)?;
            (stats, embedding_rows(&model)?)
        }
        TaskArg::Metric => {
            if model.dim() != dataset.dim() {
                return Err(Error::data(format!(
                    "metric model has dimension {} but the table has {} features",
                    model.dim(),
                    dataset.dim()
                )));
            }
            let stats = metric_knn(&model, &dataset, &knn_cfg)?;
            (stats, dataset.features() * embedding_rows(&model)?)
        }
    };
    let clustering = kmeans(&embedding, dataset.classes(), args.restarts, args.seed)?;
    let nmi = normalized_mutual_information(&clustering.assignments, dataset.labels())?;

    fs::create_dir_all(&args.out)?;
    write_accuracy_csv(&args.out.join("accuracy.csv"), &stats, args.folds)?;

    let resolved = serde_json::json!({
        "label_column": resolve_label_column(&args.data, args.delimiter, args.label_column)?,
        "classes": dataset.classes(),
        "rows": dataset.len(),
        "model_geometry": model.geometry_name(),
        "model_rank": model.rank(),
    });
    let mut report = blank_report(config_json("evaluate", args, resolved));
    report.metrics.insert("knn_mean".to_string(), stats.mean);
    report.metrics.insert("knn_std".to_string(), stats.std_dev);
    report.metrics.insert("nmi".to_string(), nmi);
    report
        .metrics
        .insert("kmeans_objective".to_string(), clustering.objective);
    save_report(args.out.join("report.json"), &report)?;

    for w in warnings.iter().chain(stats.warnings.iter()) {
        eprintln!("psdreg: warning: {w}");
    }
    println!(
        "evaluate: knn accuracy {:.4} +- {:.4} over {} folds, clustering nmi {:.4}, artifacts in {}",
        stats.mean,
        stats.std_dev,
        stats.accuracies.len(),
        nmi,
        args.out.display()
    );
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    if !(args.tolerance > 0.0 && args.tolerance.is_finite()) {
        return Err(Error::config(format!(
            "--tolerance must be positive and finite, got {}",
            args.tolerance
        )));
    }
    let config = GradCheckConfig {
        d: args.d,
        r: args.r,
        directions: args.directions,
        samples: args.samples,
        step: args.step,
        seed: args.seed,
        lambdas: args.lambdas.clone(),
    };
    let records = run_gradcheck(&config)?;

    fs::create_dir_all(&args.out)?;
    write_gradcheck_csv(&args.out.join("gradcheck.csv"), &records)?;

    let mut report = blank_report(config_json("gradcheck", args, serde_json::Value::Null));
    report
        .metrics
        .insert("max_rel_err".to_string(), max_rel_err(&records));
    for (label, worst) in worst_by_geometry(&records) {
        report
            .metrics
            .insert(format!("max_rel_err_{}", label.replace('-', "_")), worst);
    }
    save_report(args.out.join("report.json"), &report)?;

    let mut failures = 0usize;
    for (label, worst) in worst_by_geometry(&records) {
        println!("gradcheck: {label:<22} worst relative discrepancy {worst:.3e}");
    }
    for rec in &records {
        if rec.rel_err > args.tolerance {
            failures += 1;
            eprintln!(
                "psdreg: gradcheck failure: {} direction {} derivative {:.9e} pairing {:.9e} rel_err {:.3e}",
                record_label(rec),
                rec.direction,
                rec.derivative,
                rec.pairing,
                rec.rel_err
            );
        }
    }
    if failures > 0 {
        return Err(Error::numerical(format!(
            "{failures} of {} directional checks exceeded the tolerance {:.1e}",
            records.len(),
            args.tolerance
        )));
    }
    println!(
        "gradcheck: all {} directional checks within {:.1e}",
        records.len(),
        args.tolerance
    );
    Ok(())
}

/// Groups records by geometry (with the polar lambda folded into the label)
/// and returns the worst relative error per group, in first-seen order.
fn worst_by_geometry(records: &[GradCheckRecord]) -> Vec<(String, f64)> {
    let mut order: Vec<String> = Vec::new();
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for rec in records {
        let label = record_label(rec);
        if !worst.contains_key(&label) {
            order.push(label.clone());
        }
        let entry = worst.entry(label).or_insert(0.0);
        *entry = entry.max(rec.rel_err);
    }
    order
        .into_iter()
        .map(|label| {
            let value = worst[&label];
            (label, value)
        })
        .collect()
}

fn record_label(rec: &GradCheckRecord) -> String {
    match rec.lambda {
        Some(lambda) => format!("{} (lambda {lambda})", rec.geometry),
        None => rec.geometry.clone(),
    }
}

/// Report skeleton for subcommands that do not run an iterative fit.
fn blank_report(config: serde_json::Value) -> RunReport {
    RunReport {
        config,
        cost_history: Vec::new(),
        step_history: Vec::new(),
        grad_norm_history: Vec::new(),
        timings: Timings::default(),
        termination: "completed".to_string(),
        metrics: BTreeMap::new(),
    }
}

/// The resolved configuration embedded in every report: the subcommand name,
/// the parsed flags, and values derived from the data (ranks, counts).
fn config_json(command: &str, args: &impl Serialize, resolved: serde_json::Value) -> serde_json::Value {
    let options = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
    serde_json::json!({
        "command": command,
        "options": options,
        "resolved": resolved,
    })
}

/// Rank for a geometry: the cones are full-rank (r = d, the flag may restate
/// it), the factored geometries require an explicit rank.
fn resolve_rank(geometry: GeometryArg, rank: Option<usize>, d: usize) -> Result<usize> {
    match (geometry.is_cone(), rank) {
        (true, None) => Ok(d),
        (true, Some(r)) if r == d => Ok(d),
        (true, Some(r)) => Err(Error::config(format!(
            "the {} geometry is full-rank: --rank must equal the dimension {d}, got {r}",
            geometry.name()
        ))),
        (false, Some(r)) => Ok(r),
        (false, None) => Err(Error::config(format!(
            "--rank is required for the {} geometry",
            geometry.name()
        ))),
    }
}

/// Reads a numeric table whose final column is the regression target and
/// returns rank-one equality samples together with the feature count.
fn load_regression_samples(path: &Path, delimiter: char) -> Result<(Vec<Sample>, usize)> {
    let table = load_dataset(path, delimiter, None)?;
    let cols = table.features.ncols();
    if cols < 2 {
        return Err(Error::data(format!(
            "{}: a regression table needs at least one feature column plus the target column",
            path.display()
        )));
    }
    let d = cols - 1;
    let samples = (0..table.features.nrows())
        .map(|i| {
            let x = DVector::from_fn(d, |k, _| table.features[(i, k)]);
            Sample::equality(DataPoint::rank_one(x), table.features[(i, d)])
        })
        .collect();
    Ok((samples, d))
}

/// Writes rank-one samples as a table: feature columns then the target.
fn write_regression_table(path: &Path, samples: &[Sample], delimiter: char) -> Result<()> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::data("cannot write an empty table".to_string()));
    }
    let d = samples[0].point.dim();
    let mut table = DMatrix::zeros(n, d + 1);
    for (i, sample) in samples.iter().enumerate() {
        match &sample.point {
            DataPoint::RankOne(x) => {
                for k in 0..d {
                    table[(i, k)] = x[k];
                }
            }
            _ => {
                return Err(Error::data(
                    "regression tables hold rank-one observations only".to_string(),
                ))
            }
        }
        table[(i, d)] = sample.target;
    }
    save_dataset(path, &table, None, delimiter)
}

/// The label column to use: the explicit flag, or the table's last column.
fn resolve_label_column(path: &Path, delimiter: char, requested: Option<usize>) -> Result<usize> {
    if let Some(col) = requested {
        return Ok(col);
    }
    let text = fs::read_to_string(path)?;
    let first = text
        .lines()
        .find(|line| !line.trim().is_empty())
        .ok_or_else(|| Error::data(format!("{}: the table has no data rows", path.display())))?;
    Ok(first.split(delimiter).count() - 1)
}

/// Loads a labeled table, optionally standardizing the feature columns.
/// Returns the dataset plus human-readable warnings about constant columns.
fn load_labeled(
    path: &Path,
    delimiter: char,
    label_column: Option<usize>,
    standardize: bool,
) -> Result<(LabeledDataset, Vec<String>)> {
    let col = resolve_label_column(path, delimiter, label_column)?;
    let table = load_dataset(path, delimiter, Some(col))?;
    let labels = table
        .labels
        .ok_or_else(|| Error::data(format!("{}: no labels were extracted", path.display())))?;
    let mut warnings = Vec::new();
    let features = if standardize {
        let (scaled, info) = normalize(&table.features)?;
        for c in info.constant_columns {
            warnings.push(format!("feature column {c} is constant and was left unscaled"));
        }
        scaled
    } else {
        table.features
    };
    Ok((LabeledDataset::new(features, labels)?, warnings))
}

/// k-NN accuracy where the model is a kernel over the table's rows: squared
/// distances are read off the kernel via pair-difference predictions.
fn kernel_knn(model: &Model, labels: &[usize], config: &KnnConfig) -> Result<KnnStats> {
    if model.dim() != labels.len() {
        return Err(Error::dimension(format!(
            "kernel model indexes {} samples but {} labels were given",
            model.dim(),
            labels.len()
        )));
    }
    let prepared = Prepared::new(model)?;
    let n = labels.len();
    knn_accuracy(
        |i, j| {
            let point = DataPoint::pair_diff(i, j, n).expect("cross-fold indices are distinct");
            prepared.predict(&point).expect("dimension checked").max(0.0)
        },
        labels,
        config,
    )
}

/// k-NN accuracy in the metric the model defines over feature space.
fn metric_knn(model: &Model, dataset: &LabeledDataset, config: &KnnConfig) -> Result<KnnStats> {
    if model.dim() != dataset.dim() {
        return Err(Error::dimension(format!(
            "metric model has dimension {} but the features have {}",
            model.dim(),
            dataset.dim()
        )));
    }
    let prepared = Prepared::new(model)?;
    knn_accuracy(
        |i, j| {
            mahalanobis_distance(&prepared, &dataset.feature_row(i), &dataset.feature_row(j))
                .expect("dimension checked")
        },
        dataset.labels(),
        config,
    )
}

/// Clustering agreement between the model's embedding rows and the labels.
fn cluster_agreement(model: &Model, dataset: &LabeledDataset, seed: u64) -> Result<f64> {
    let rows = embedding_rows(model)?;
    let clustering = kmeans(&rows, dataset.classes(), METRIC_KMEANS_RESTARTS, seed)?;
    normalized_mutual_information(&clustering.assignments, dataset.labels())
}

fn write_history_csv(path: &Path, fit: &FitReport) -> Result<()> {
    let mut text = String::from("iteration,cost,step,grad_norm,halvings\n");
    for (k, rec) in fit.iterations.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{},{}",
            k + 1,
            rec.cost,
            rec.step,
            rec.grad_norm,
            rec.halvings
        );
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_accuracy_csv(path: &Path, stats: &KnnStats, folds: usize) -> Result<()> {
    let mut text = String::from("repeat,fold,accuracy\n");
    for (idx, acc) in stats.accuracies.iter().enumerate() {
        let _ = writeln!(text, "{},{},{}", idx / folds, idx % folds, acc);
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_gradcheck_csv(path: &Path, records: &[GradCheckRecord]) -> Result<()> {
    let mut text = String::from("geometry,lambda,direction,derivative,pairing,rel_err\n");
    for rec in records {
        let lambda = rec.lambda.map_or(String::new(), |l| l.to_string());
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            rec.geometry, lambda, rec.direction, rec.derivative, rec.pairing, rec.rel_err
        );
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{IterationRecord, Termination};

    #[test]
    fn cli_declaration_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_follow_the_documented_mapping() {
        assert_eq!(exit_code(&Error::config("x")), 2);
        assert_eq!(exit_code(&Error::data("x")), 3);
        assert_eq!(exit_code(&Error::dimension("x")), 3);
        assert_eq!(exit_code(&Error::degenerate("x")), 3);
        assert_eq!(
            exit_code(&Error::Io(std::io::Error::other("x"))),
            3
        );
        assert_eq!(exit_code(&Error::numerical("x")), 4);
        assert_eq!(exit_code(&Error::domain("x")), 4);
        assert_eq!(exit_code(&Error::LinesearchExhausted { halvings: 3 }), 4);
    }

    #[test]
    fn rank_resolution_enforces_geometry_rules() {
        assert_eq!(resolve_rank(GeometryArg::Flat, Some(3), 10).unwrap(), 3);
        assert!(resolve_rank(GeometryArg::Flat, None, 10).is_err());
        assert_eq!(resolve_rank(GeometryArg::ConeAffine, None, 10).unwrap(), 10);
        assert_eq!(
            resolve_rank(GeometryArg::ConeLogeuclidean, Some(10), 10).unwrap(),
            10
        );
        assert!(resolve_rank(GeometryArg::ConeAffine, Some(3), 10).is_err());
    }

    #[test]
    fn regression_tables_round_trip() {
        let samples: Vec<Sample> = (0..4)
            .map(|i| {
                let x = DVector::from_fn(3, |k, _| (i * 3 + k) as f64 / 7.0);
                Sample::equality(DataPoint::rank_one(x), i as f64 - 1.5)
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        write_regression_table(&path, &samples, ',').unwrap();
        let (back, d) = load_regression_samples(&path, ',').unwrap();
        assert_eq!(d, 3);
        assert_eq!(back, samples);
    }

    #[test]
    fn label_column_defaults_to_the_last_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        fs::write(&path, "1.0,2.0,0\n3.0,4.0,1\n").unwrap();
        assert_eq!(resolve_label_column(&path, ',', None).unwrap(), 2);
        assert_eq!(resolve_label_column(&path, ',', Some(0)).unwrap(), 0);
        let (dataset, _) = load_labeled(&path, ',', None, false).unwrap();
        assert_eq!(dataset.dim(), 2);
        assert_eq!(dataset.labels(), &[0, 1]);
    }

    #[test]
    fn history_and_accuracy_tables_have_one_row_per_entry() {
        let fit = FitReport {
            termination: Termination::MaxIters,
            initial_cost: 1.0,
            final_cost: 0.5,
            iterations: vec![IterationRecord {
                cost: 0.5,
                step: 0.25,
                grad_norm: 2.0,
                halvings: 1,
                elapsed_seconds: 0.1,
            }],
        };
        let dir = tempfile::tempdir().unwrap();
        let hist = dir.path().join("history.csv");
        write_history_csv(&hist, &fit).unwrap();
        let text = fs::read_to_string(&hist).unwrap();
        assert_eq!(text, "iteration,cost,step,grad_norm,halvings\n1,0.5,0.25,2,1\n");

        let stats = KnnStats {
            mean: 0.75,
            std_dev: 0.25,
            accuracies: vec![0.5, 1.0, 1.0, 0.5],
            warnings: vec![],
        };
        let acc = dir.path().join("accuracy.csv");
        write_accuracy_csv(&acc, &stats, 2).unwrap();
        let text = fs::read_to_string(&acc).unwrap();
        assert_eq!(
            text,
            "repeat,fold,accuracy\n0,0,0.5\n0,1,1\n1,0,1\n1,1,0.5\n"
        );
    }
}
