//! C interface to the matrix regression library.
//!
//! The surface follows the usual C conventions: opaque handles created and
//! destroyed by the library, integer status codes aligned with the CLI exit
//! codes (0 ok, 2 configuration, 3 data, 4 numerical), and a thread-local
//! message retrievable with `psdreg_last_error` after any failure. The
//! matching header is generated into `include/psdreg.h` at build time.
//!
//! Pointers returned by the library stay valid until the corresponding
//! `*_free` call; strings returned by the library must not be freed and are
//! valid until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use psdreg::io::{load_model, save_model};
use psdreg::optim::{batch_fit, online_fit, BatchConfig, OnlineConfig};
use psdreg::regression::{empirical_cost, DataPoint, Model, Prepared, Relation, Sample};
use psdreg::Error;

/// Outcome of an API call. The numeric values match the CLI exit codes
/// where a correspondence exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdregStatus {
    /// The call succeeded.
    Ok = 0,
    /// Invalid configuration (bad sizes, ranks, or option values).
    ConfigError = 2,
    /// Invalid data (dimension mismatches, malformed files, i/o failures).
    DataError = 3,
    /// Numerical failure (divergence, exhausted line search, domain errors).
    NumericalError = 4,
    /// A required pointer argument was null.
    NullArgument = 5,
    /// An internal invariant was violated; the handle state is unspecified.
    Panic = 6,
}

/// How a sample's prediction is compared against its target. Pass these
/// values as the `relation` argument of the sample-pushing functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsdregRelation {
    /// Squared error on the residual.
    Equality = 0,
    /// Penalized only when the prediction exceeds the target.
    UpperBound = 1,
    /// Penalized only when the prediction falls below the target.
    LowerBound = 2,
}

/// Opaque handle to a positive-semidefinite regression model.
pub struct PsdregModel {
    inner: Model,
}

/// Opaque handle to a growable batch of training samples in a fixed
/// ambient dimension.
pub struct PsdregSamples {
    dim: usize,
    samples: Vec<Sample>,
}

/// Options for the batch (full-gradient, line-searched) optimizer.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsdregBatchOptions {
    /// Scale of the largest trial step: s_max = s0 / ||grad||.
    pub s0: f64,
    /// Sufficient-decrease constant of the line search, in (0, 1).
    pub c: f64,
    /// Tolerance shared by the stopping tests.
    pub eps_tol: f64,
    /// Cap on accepted gradient steps.
    pub max_iters: usize,
}

/// Options for the online (mini-batch stochastic) optimizer.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PsdregOnlineOptions {
    /// Full passes over the data.
    pub epochs: usize,
    /// Samples accumulated per update.
    pub batch_size: usize,
    /// Seed for shuffling and the step-size pre-training.
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| {
        let mut slot = slot.borrow_mut();
        if !slot.as_bytes().is_empty() {
            *slot = CString::default();
        }
    });
}

#[derive(Debug)]
struct Failure {
    status: PsdregStatus,
    message: String,
}

type ApiResult = Result<(), Failure>;

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let status = match psdreg::cli::exit_code(&err) {
            2 => PsdregStatus::ConfigError,
            3 => PsdregStatus::DataError,
            _ => PsdregStatus::NumericalError,
        };
        Failure {
            status,
            message: err.to_string(),
        }
    }
}

fn null_arg(name: &str) -> Failure {
    Failure {
        status: PsdregStatus::NullArgument,
        message: format!("{name} must not be null"),
    }
}

fn data_error(message: String) -> Failure {
    Failure {
        status: PsdregStatus::DataError,
        message,
    }
}

/// Runs an API body, translating panics and failures into status codes and
/// recording the message for `psdreg_last_error`.
fn run_api(body: impl FnOnce() -> ApiResult) -> PsdregStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            clear_error();
            PsdregStatus::Ok
        }
        Ok(Err(failure)) => {
            set_error(&failure.message);
            failure.status
        }
        Err(_) => {
            set_error("internal panic");
            PsdregStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null_arg(name))
}

unsafe fn borrow_mut<'a, T>(ptr: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or_else(|| null_arg(name))
}

unsafe fn borrow_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| data_error(format!("{name} is not valid UTF-8")))
}

unsafe fn borrow_slice<'a>(
    ptr: *const f64,
    len: usize,
    name: &str,
) -> Result<&'a [f64], Failure> {
    if ptr.is_null() {
        return Err(null_arg(name));
    }
    if len == 0 {
        return Err(data_error(format!("{name} must hold at least one value")));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn relation_from(code: c_int) -> Result<Relation, Failure> {
    match code {
        0 => Ok(Relation::Equality),
        1 => Ok(Relation::UpperBound),
        2 => Ok(Relation::LowerBound),
        other => Err(data_error(format!(
            "unknown relation code {other}; use 0 (equality), 1 (upper bound), or 2 (lower bound)"
        ))),
    }
}

/// Returns the library version as a static string.
#[no_mangle]
pub extern "C" fn psdreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Returns the message recorded by the most recent failing call on this
/// thread, or an empty string after a success. The pointer stays valid
/// until the next library call on the same thread and must not be freed.
#[no_mangle]
pub extern "C" fn psdreg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fills `out` with the default batch-optimizer options.
///
/// # Safety
/// `out` must be a valid pointer to writable memory for one value.
#[no_mangle]
pub unsafe extern "C" fn psdreg_batch_options_default(
    out: *mut PsdregBatchOptions,
) -> PsdregStatus {
    run_api(|| {
        let out = borrow_mut(out, "out")?;
        let defaults = BatchConfig::default();
        *out = PsdregBatchOptions {
            s0: defaults.s0,
            c: defaults.c,
            eps_tol: defaults.eps_tol,
            max_iters: defaults.max_iters,
        };
        Ok(())
    })
}

/// Fills `out` with the default online-optimizer options.
///
/// # Safety
/// `out` must be a valid pointer to writable memory for one value.
#[no_mangle]
pub unsafe extern "C" fn psdreg_online_options_default(
    out: *mut PsdregOnlineOptions,
) -> PsdregStatus {
    run_api(|| {
        let out = borrow_mut(out, "out")?;
        let defaults = OnlineConfig::default();
        *out = PsdregOnlineOptions {
            epochs: defaults.epochs,
            batch_size: defaults.batch_size,
            seed: defaults.seed,
        };
        Ok(())
    })
}

/// Creates the identity-initialized model of the named geometry ("flat",
/// "polar", "cone-affine", or "cone-logeuclidean") with ambient dimension
/// `d` and rank `r`. The cone geometries require `r == d`.
///
/// # Safety
/// `geometry` must be a valid NUL-terminated string and `out` a valid
/// pointer; on success `*out` owns the handle until `psdreg_model_free`.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_identity(
    geometry: *const c_char,
    d: usize,
    r: usize,
    out: *mut *mut PsdregModel,
) -> PsdregStatus {
    run_api(|| {
        let name = borrow_str(geometry, "geometry")?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let model = Model::identity(name, d, r)?;
        *out = Box::into_raw(Box::new(PsdregModel { inner: model }));
        Ok(())
    })
}

/// Loads a model from a file written by `psdreg_model_save` (or by the CLI).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer;
/// on success `*out` owns the handle until `psdreg_model_free`.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_load(
    path: *const c_char,
    out: *mut *mut PsdregModel,
) -> PsdregStatus {
    run_api(|| {
        let path = borrow_str(path, "path")?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let model = load_model(path)?;
        *out = Box::into_raw(Box::new(PsdregModel { inner: model }));
        Ok(())
    })
}

/// Writes the model to a file in the library's binary format.
///
/// # Safety
/// `model` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_save(
    model: *const PsdregModel,
    path: *const c_char,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        let path = borrow_str(path, "path")?;
        save_model(path, &model.inner)?;
        Ok(())
    })
}

/// Releases a model handle. Passing null is a no-op.
///
/// # Safety
/// `model` must be null or a handle obtained from this library that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_free(model: *mut PsdregModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Ambient dimension of the model, or 0 if the handle is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_dim(model: *const PsdregModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Rank of the model, or 0 if the handle is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_rank(model: *const PsdregModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.rank())
}

/// Name of the model's geometry as a static string, or an empty string if
/// the handle is null. The pointer must not be freed.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_geometry(model: *const PsdregModel) -> *const c_char {
    match model.as_ref().map(|m| m.inner.geometry_name()) {
        Some("flat") => c"flat".as_ptr(),
        Some("polar") => c"polar".as_ptr(),
        Some("cone-affine") => c"cone-affine".as_ptr(),
        Some("cone-logeuclidean") => c"cone-logeuclidean".as_ptr(),
        _ => c"".as_ptr(),
    }
}

/// Writes the reconstructed matrix W row-major into `out`, which must hold
/// exactly d * d values.
///
/// # Safety
/// `model` must be a live handle and `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_reconstruct(
    model: *const PsdregModel,
    out: *mut f64,
    len: usize,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let d = model.inner.dim();
        if len != d * d {
            return Err(data_error(format!(
                "output buffer holds {len} values but the matrix needs {}",
                d * d
            )));
        }
        let w = model.inner.reconstruct()?;
        let dest = std::slice::from_raw_parts_mut(out, len);
        for i in 0..d {
            for j in 0..d {
                dest[i * d + j] = w[(i, j)];
            }
        }
        Ok(())
    })
}

/// Predicts x' W x for a feature vector of the model's dimension.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `len` doubles, and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_predict_rank_one(
    model: *const PsdregModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        let x = borrow_slice(x, len, "x")?;
        let out = borrow_mut(out, "out")?;
        let point = DataPoint::rank_one(nalgebra_vector(x));
        *out = Prepared::new(&model.inner)?.predict(&point)?;
        Ok(())
    })
}

/// Predicts (e_i - e_j)' W (e_i - e_j), the squared distance between items
/// i and j when the model is a kernel over indexed items.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn psdreg_model_predict_pair(
    model: *const PsdregModel,
    i: usize,
    j: usize,
    out: *mut f64,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        let out = borrow_mut(out, "out")?;
        let point = DataPoint::pair_diff(i, j, model.inner.dim())?;
        *out = Prepared::new(&model.inner)?.predict(&point)?;
        Ok(())
    })
}

/// Creates an empty sample batch for observations of dimension `dim`.
///
/// # Safety
/// `out` must be a valid pointer; on success `*out` owns the handle until
/// `psdreg_samples_free`.
#[no_mangle]
pub unsafe extern "C" fn psdreg_samples_new(
    dim: usize,
    out: *mut *mut PsdregSamples,
) -> PsdregStatus {
    run_api(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        if dim == 0 {
            return Err(Failure {
                status: PsdregStatus::ConfigError,
                message: "sample dimension must be at least 1".to_string(),
            });
        }
        *out = Box::into_raw(Box::new(PsdregSamples {
            dim,
            samples: Vec::new(),
        }));
        Ok(())
    })
}

/// Appends the observation (x x', target) under the given relation
/// (0 equality, 1 upper bound, 2 lower bound).
///
/// # Safety
/// `samples` must be a live handle and `x` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn psdreg_samples_push_rank_one(
    samples: *mut PsdregSamples,
    x: *const f64,
    len: usize,
    target: f64,
    relation: c_int,
) -> PsdregStatus {
    run_api(|| {
        let batch = borrow_mut(samples, "samples")?;
        let x = borrow_slice(x, len, "x")?;
        if len != batch.dim {
            return Err(data_error(format!(
                "observation has dimension {len} but the batch holds dimension {}",
                batch.dim
            )));
        }
        let relation = relation_from(relation)?;
        batch
            .samples
            .push(Sample::new(DataPoint::rank_one(nalgebra_vector(x)), target, relation));
        Ok(())
    })
}

/// Appends the pair-difference observation between items i and j with the
/// given target and relation (0 equality, 1 upper bound, 2 lower bound).
///
/// # Safety
/// `samples` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn psdreg_samples_push_pair(
    samples: *mut PsdregSamples,
    i: usize,
    j: usize,
    target: f64,
    relation: c_int,
) -> PsdregStatus {
    run_api(|| {
        let batch = borrow_mut(samples, "samples")?;
        let relation = relation_from(relation)?;
        let point = DataPoint::pair_diff(i, j, batch.dim)?;
        batch.samples.push(Sample::new(point, target, relation));
        Ok(())
    })
}

/// Number of samples currently in the batch, or 0 if the handle is null.
///
/// # Safety
/// `samples` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psdreg_samples_len(samples: *const PsdregSamples) -> usize {
    samples.as_ref().map_or(0, |s| s.samples.len())
}

/// Releases a sample batch. Passing null is a no-op.
///
/// # Safety
/// `samples` must be null or a handle obtained from this library that has
/// not been freed already.
#[no_mangle]
pub unsafe extern "C" fn psdreg_samples_free(samples: *mut PsdregSamples) {
    if !samples.is_null() {
        drop(Box::from_raw(samples));
    }
}

/// Mean of the per-sample losses of the model on the batch.
///
/// # Safety
/// `model` and `samples` must be live handles and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn psdreg_cost(
    model: *const PsdregModel,
    samples: *const PsdregSamples,
    out: *mut f64,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        let batch = borrow(samples, "samples")?;
        let out = borrow_mut(out, "out")?;
        *out = empirical_cost(&model.inner, &batch.samples)?;
        Ok(())
    })
}

/// Fits the model to the batch with full-gradient descent and an Armijo
/// line search. `options` may be null for defaults; `final_cost` may be
/// null. The input model is untouched; `*fitted` receives a new handle.
///
/// # Safety
/// `model` and `samples` must be live handles, `fitted` a valid pointer,
/// and `options`/`final_cost` null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn psdreg_fit_batch(
    model: *const PsdregModel,
    samples: *const PsdregSamples,
    lambda: f64,
    options: *const PsdregBatchOptions,
    fitted: *mut *mut PsdregModel,
    final_cost: *mut f64,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        let batch = borrow(samples, "samples")?;
        if fitted.is_null() {
            return Err(null_arg("fitted"));
        }
        let config = match options.as_ref() {
            None => BatchConfig::default(),
            Some(opts) => BatchConfig {
                s0: opts.s0,
                c: opts.c,
                eps_tol: opts.eps_tol,
                max_iters: opts.max_iters,
                ..BatchConfig::default()
            },
        };
        let (result, report) = batch_fit(&model.inner, &batch.samples, lambda, &config)?;
        if let Some(out) = final_cost.as_mut() {
            *out = report.final_cost;
        }
        *fitted = Box::into_raw(Box::new(PsdregModel { inner: result }));
        Ok(())
    })
}

/// Fits the model to the batch with mini-batch stochastic descent.
/// `options` may be null for defaults; `final_cost` may be null. The input
/// model is untouched; `*fitted` receives a new handle.
///
/// # Safety
/// `model` and `samples` must be live handles, `fitted` a valid pointer,
/// and `options`/`final_cost` null or valid pointers.
#[no_mangle]
pub unsafe extern "C" fn psdreg_fit_online(
    model: *const PsdregModel,
    samples: *const PsdregSamples,
    lambda: f64,
    options: *const PsdregOnlineOptions,
    fitted: *mut *mut PsdregModel,
    final_cost: *mut f64,
) -> PsdregStatus {
    run_api(|| {
        let model = borrow(model, "model")?;
        let batch = borrow(samples, "samples")?;
        if fitted.is_null() {
            return Err(null_arg("fitted"));
        }
        let config = match options.as_ref() {
            None => OnlineConfig::default(),
            Some(opts) => OnlineConfig {
                epochs: opts.epochs,
                batch_size: opts.batch_size,
                seed: opts.seed,
                ..OnlineConfig::default()
            },
        };
        let (result, report) = online_fit(&model.inner, &batch.samples, lambda, &config)?;
        if let Some(out) = final_cost.as_mut() {
            *out = report.final_cost;
        }
        *fitted = Box::into_raw(Box::new(PsdregModel { inner: result }));
        Ok(())
    })
}

fn nalgebra_vector(x: &[f64]) -> psdreg::nalgebra::DVector<f64> {
    psdreg::nalgebra::DVector::from_column_slice(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_values_match_the_cli_exit_codes() {
        assert_eq!(PsdregStatus::Ok as i32, 0);
        assert_eq!(PsdregStatus::ConfigError as i32, 2);
        assert_eq!(PsdregStatus::DataError as i32, 3);
        assert_eq!(PsdregStatus::NumericalError as i32, 4);
    }

    #[test]
    fn failures_translate_through_the_shared_mapping() {
        let f: Failure = Error::config("x").into();
        assert_eq!(f.status, PsdregStatus::ConfigError);
        let f: Failure = Error::data("x").into();
        assert_eq!(f.status, PsdregStatus::DataError);
        let f: Failure = Error::numerical("x").into();
        assert_eq!(f.status, PsdregStatus::NumericalError);
    }

    #[test]
    fn relation_codes_cover_the_three_relations_and_reject_others() {
        assert_eq!(relation_from(0).unwrap(), Relation::Equality);
        assert_eq!(relation_from(1).unwrap(), Relation::UpperBound);
        assert_eq!(relation_from(2).unwrap(), Relation::LowerBound);
        assert!(relation_from(3).is_err());
        assert!(relation_from(-1).is_err());
    }

    #[test]
    fn last_error_is_empty_after_success_and_set_after_failure() {
        let status = unsafe { psdreg_model_identity(std::ptr::null(), 3, 1, std::ptr::null_mut()) };
        assert_eq!(status, PsdregStatus::NullArgument);
        let msg = unsafe { CStr::from_ptr(psdreg_last_error()) };
        assert!(!msg.to_bytes().is_empty());

        let mut model: *mut PsdregModel = std::ptr::null_mut();
        let geometry = CString::new("flat").unwrap();
        let status = unsafe { psdreg_model_identity(geometry.as_ptr(), 3, 1, &mut model) };
        assert_eq!(status, PsdregStatus::Ok);
        let msg = unsafe { CStr::from_ptr(psdreg_last_error()) };
        assert!(msg.to_bytes().is_empty());
        unsafe { psdreg_model_free(model) };
    }
}
