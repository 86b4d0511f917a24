//! C ABI over `tdl-core`.
//!
//! Every fallible function returns a [`TdlStatus`]; on failure the message
//! is available from [`tdl_last_error_message`] on the same thread until
//! the next call. Metrics and datasets are opaque handles that the caller
//! releases with the matching `*_free`. Matrices and feature blocks are
//! row-major `double` arrays. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use tdl_core::dataset::FeatureStore;
use tdl_core::eval::rank_gallery;
use tdl_core::metric::{mahalanobis_distance, read_metric, write_metric};
use tdl_core::optimizer::{psd_project, StopReason};
use tdl_core::{Error, FeatureVector, LabeledSample, MetricMatrix, TrainConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Protocol = 3,
    Numerical = 4,
    Config = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

/// A positive semidefinite metric matrix.
pub struct TdlMetric(MetricMatrix);

/// Labelled feature vectors to train on.
pub struct TdlDataset(Vec<LabeledSample>);

/// Training hyper-parameters; start from [`tdl_train_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TdlTrainConfig {
    pub alpha: f64,
    pub rho: f64,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub lambda_floor: f64,
    pub rng_seed: u64,
    pub anchor_fraction: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TdlTrainSummary {
    pub iters_run: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub converged: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl From<&TrainConfig> for TdlTrainConfig {
    fn from(c: &TrainConfig) -> Self {
        TdlTrainConfig {
            alpha: c.alpha,
            rho: c.rho,
            lambda0: c.lambda0,
            lambda_up: c.lambda_up,
            lambda_down: c.lambda_down,
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            lambda_floor: c.lambda_floor,
            rng_seed: c.rng_seed,
            anchor_fraction: c.anchor_fraction,
        }
    }
}

impl From<&TdlTrainConfig> for TrainConfig {
    fn from(c: &TdlTrainConfig) -> Self {
        TrainConfig {
            alpha: c.alpha,
            rho: c.rho,
            lambda0: c.lambda0,
            lambda_up: c.lambda_up,
            lambda_down: c.lambda_down,
            max_iters: c.max_iters,
            rel_tol: c.rel_tol,
            lambda_floor: c.lambda_floor,
            rng_seed: c.rng_seed,
            anchor_fraction: c.anchor_fraction,
        }
    }
}

struct Failure {
    status: TdlStatus,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidInput(_) => TdlStatus::InvalidInput,
            Error::Protocol(_) => TdlStatus::Protocol,
            Error::Numerical(_) => TdlStatus::Numerical,
            Error::Config(_) => TdlStatus::Config,
            Error::Io { .. } => TdlStatus::Io,
            Error::Format { .. } => TdlStatus::Format,
        };
        Failure { status, msg: e.to_string() }
    }
}

fn fail(status: TdlStatus, msg: impl Into<String>) -> Failure {
    Failure { status, msg: msg.into() }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TdlStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TdlStatus::Ok
        }
        Ok(Err(err)) => {
            set_last_error(&err.msg);
            err.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            TdlStatus::Panic
        }
    }
}

unsafe fn doubles<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TdlStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(TdlStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TdlStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(TdlStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(TdlStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn metric_out(out: *mut *mut TdlMetric, m: MetricMatrix) {
    // SAFETY: checked non-null by the caller of this helper.
    unsafe { *out = Box::into_raw(Box::new(TdlMetric(m))) };
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn tdl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static, NUL-terminated name of `status`.
#[no_mangle]
pub extern "C" fn tdl_status_name(status: TdlStatus) -> *const c_char {
    let s: &'static CStr = match status {
        TdlStatus::Ok => c"ok",
        TdlStatus::NullPointer => c"null pointer",
        TdlStatus::InvalidInput => c"invalid input",
        TdlStatus::Protocol => c"protocol error",
        TdlStatus::Numerical => c"numerical error",
        TdlStatus::Config => c"config error",
        TdlStatus::Io => c"I/O error",
        TdlStatus::Format => c"format error",
        TdlStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

#[no_mangle]
pub extern "C" fn tdl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_identity(dim: usize, out: *mut *mut TdlMetric) -> TdlStatus {
    guard(|| {
        out_ptr(out, "out")?;
        if dim == 0 {
            return Err(fail(TdlStatus::InvalidInput, "dimension must be positive"));
        }
        metric_out(out, MetricMatrix::identity(dim));
        Ok(())
    })
}

/// Builds a metric from `dim * dim` row-major entries. The matrix is
/// symmetrised and must be PSD within tolerance.
///
/// # Safety
/// `entries` must point to `dim * dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_from_entries(
    entries: *const f64,
    dim: usize,
    out: *mut *mut TdlMetric,
) -> TdlStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let len = dim
            .checked_mul(dim)
            .ok_or_else(|| fail(TdlStatus::InvalidInput, "dimension overflows"))?;
        let data = doubles(entries, len, "entries")?;
        metric_out(out, MetricMatrix::from_row_slice(dim, data)?);
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_load(path: *const c_char, out: *mut *mut TdlMetric) -> TdlStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = string(path, "path")?;
        metric_out(out, read_metric(path)?);
        Ok(())
    })
}

/// # Safety
/// `metric` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_save(metric: *const TdlMetric, path: *const c_char) -> TdlStatus {
    guard(|| {
        let m = handle(metric, "metric")?;
        write_metric(string(path, "path")?, &m.0)?;
        Ok(())
    })
}

/// Dimension of `metric`, or 0 for null.
///
/// # Safety
/// `metric` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_dim(metric: *const TdlMetric) -> usize {
    metric.as_ref().map_or(0, |m| m.0.dim())
}

/// Copies the row-major entries into `out`, which holds `len >= dim * dim`
/// doubles.
///
/// # Safety
/// `metric` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_entries(metric: *const TdlMetric, out: *mut f64, len: usize) -> TdlStatus {
    guard(|| {
        let m = handle(metric, "metric")?;
        out_ptr(out, "out")?;
        let entries = m.0.to_row_major();
        if len < entries.len() {
            return Err(fail(
                TdlStatus::InvalidInput,
                format!("buffer holds {len} doubles, need {}", entries.len()),
            ));
        }
        ptr::copy_nonoverlapping(entries.as_ptr(), out, entries.len());
        Ok(())
    })
}

/// # Safety
/// `metric` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_free(metric: *mut TdlMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// `(x - y)^T M (x - y)` for two `dim`-vectors.
///
/// # Safety
/// `x`, `y` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdl_metric_distance(
    metric: *const TdlMetric,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out: *mut f64,
) -> TdlStatus {
    guard(|| {
        let m = handle(metric, "metric")?;
        out_ptr(out, "out")?;
        let x = FeatureVector::new(doubles(x, dim, "x")?.to_vec())?;
        let y = FeatureVector::new(doubles(y, dim, "y")?.to_vec())?;
        *out = mahalanobis_distance(&m.0, &x, &y)?;
        Ok(())
    })
}

/// Orders `count` gallery rows (row-major, `dim` columns) by distance to
/// `probe`, nearest first; ties keep gallery order. Writes `count` indices.
///
/// # Safety
/// `probe` holds `dim` doubles, `gallery` `count * dim`, `out_order` is
/// writable for `count` entries.
#[no_mangle]
pub unsafe extern "C" fn tdl_rank_gallery(
    metric: *const TdlMetric,
    probe: *const f64,
    gallery: *const f64,
    count: usize,
    dim: usize,
    out_order: *mut usize,
) -> TdlStatus {
    guard(|| {
        let m = handle(metric, "metric")?;
        if count > 0 {
            out_ptr(out_order, "out_order")?;
        }
        let len = count
            .checked_mul(dim)
            .ok_or_else(|| fail(TdlStatus::InvalidInput, "gallery size overflows"))?;
        let probe = LabeledSample::new(FeatureVector::new(doubles(probe, dim, "probe")?.to_vec())?, "probe", "p")?;
        let rows = doubles(gallery, len, "gallery")?;
        let gallery = rows
            .chunks(dim.max(1))
            .take(count)
            .enumerate()
            .map(|(i, row)| LabeledSample::new(FeatureVector::new(row.to_vec())?, i.to_string(), "g"))
            .collect::<Result<Vec<_>, Error>>()?;
        let order = rank_gallery(&m.0, &probe, &gallery)?;
        ptr::copy_nonoverlapping(order.as_ptr(), out_order, order.len());
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdl_dataset_new(out: *mut *mut TdlDataset) -> TdlStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = Box::into_raw(Box::new(TdlDataset(Vec::new())));
        Ok(())
    })
}

/// Reads every record of a `TDLF` feature store into a new dataset.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tdl_dataset_load_store(path: *const c_char, out: *mut *mut TdlDataset) -> TdlStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let store = FeatureStore::read(string(path, "path")?)?;
        *out = Box::into_raw(Box::new(TdlDataset(store.records)));
        Ok(())
    })
}

/// Appends one sample. All samples must share a dimension.
///
/// # Safety
/// `dataset` must be a live handle, `features` hold `dim` doubles, and the
/// ids be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tdl_dataset_push(
    dataset: *mut TdlDataset,
    features: *const f64,
    dim: usize,
    person_id: *const c_char,
    camera_id: *const c_char,
) -> TdlStatus {
    guard(|| {
        let ds = dataset
            .as_mut()
            .ok_or_else(|| fail(TdlStatus::NullPointer, "dataset is null"))?;
        let v = FeatureVector::new(doubles(features, dim, "features")?.to_vec())?;
        if let Some(first) = ds.0.first() {
            if first.dim() != dim {
                return Err(fail(
                    TdlStatus::InvalidInput,
                    format!("sample has dimension {dim}, dataset has {}", first.dim()),
                ));
            }
        }
        let sample = LabeledSample::new(v, string(person_id, "person_id")?, string(camera_id, "camera_id")?)?;
        ds.0.push(sample);
        Ok(())
    })
}

/// Number of samples, or 0 for null.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdl_dataset_len(dataset: *const TdlDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tdl_dataset_free(dataset: *mut TdlDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

#[no_mangle]
pub extern "C" fn tdl_train_config_default() -> TdlTrainConfig {
    TdlTrainConfig::from(&TrainConfig::default())
}

/// Trains a metric from the identity on `dataset`. `summary` may be null.
///
/// # Safety
/// `dataset` and `config` must be valid; `out` writable; `summary` null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tdl_train(
    dataset: *const TdlDataset,
    config: *const TdlTrainConfig,
    out: *mut *mut TdlMetric,
    summary: *mut TdlTrainSummary,
) -> TdlStatus {
    guard(|| {
        let ds = handle(dataset, "dataset")?;
        let cfg = TrainConfig::from(handle(config, "config")?);
        out_ptr(out, "out")?;
        let report = tdl_core::train(&ds.0, &cfg)?;
        if let Some(s) = summary.as_mut() {
            *s = TdlTrainSummary {
                iters_run: report.iters_run,
                accepted: report.accepted,
                rejected: report.rejected,
                converged: report.converged || report.stop_reason == StopReason::ZeroLoss,
                initial_loss: report.loss_trace[0],
                final_loss: *report.loss_trace.last().unwrap(),
            };
        }
        metric_out(out, report.final_metric);
        Ok(())
    })
}

/// Nearest PSD matrix (Frobenius norm) to the symmetric part of `input`.
/// `input` and `output` are `dim * dim` row-major and may alias.
///
/// # Safety
/// Both pointers must be valid for `dim * dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn tdl_psd_project(input: *const f64, dim: usize, output: *mut f64) -> TdlStatus {
    guard(|| {
        out_ptr(output, "output")?;
        let len = dim
            .checked_mul(dim)
            .ok_or_else(|| fail(TdlStatus::InvalidInput, "dimension overflows"))?;
        if dim == 0 {
            return Err(fail(TdlStatus::InvalidInput, "dimension must be positive"));
        }
        let m = tdl_core::nalgebra::DMatrix::from_row_slice(dim, dim, doubles(input, len, "input")?);
        let p = psd_project(&m)?.to_row_major();
        ptr::copy(p.as_ptr(), output, len);
        Ok(())
    })
}
