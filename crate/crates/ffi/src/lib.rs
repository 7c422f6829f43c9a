//! C ABI over `interp_consistency`.
//!
//! Every fallible function returns an [`IcStatus`]. On failure the message is
//! kept per thread and read with [`ic_last_error`]. Handles are opaque and
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use interp_consistency::breaks::jenks_breaks;
use interp_consistency::data::{generate_synthetic, load_periodized_csv, PeriodizedDataset, SyntheticConfig};
use interp_consistency::interpret::permutation_importance;
use interp_consistency::learners::LearnerKind;
use interp_consistency::metrics::{auc, kendalls_tau, kendalls_w};
use interp_consistency::pipeline::{emit_reports, load_dataset, run_rq1, run_rq2, run_rq3, ExperimentConfig, Manifest};
use interp_consistency::seed::{derive_seed, SeedLabel};
use interp_consistency::stats::{cliffs_delta, kruskal_wallis, wilcoxon_rank_sum, Alternative};
use interp_consistency::training::{train_model, ScaledModel, SeedPolicy};
use interp_consistency::{Error, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Data = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcLearner {
    LogisticRegression = 0,
    Cart = 1,
    RandomForest = 2,
    Gbdt = 3,
}

impl From<IcLearner> for LearnerKind {
    fn from(l: IcLearner) -> Self {
        match l {
            IcLearner::LogisticRegression => LearnerKind::LogisticRegression,
            IcLearner::Cart => LearnerKind::Cart,
            IcLearner::RandomForest => LearnerKind::RandomForest,
            IcLearner::Gbdt => LearnerKind::Gbdt,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcAlternative {
    Greater = 0,
    TwoSided = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcExperiment {
    Rq1 = 1,
    Rq2 = 2,
    Rq3 = 3,
}

/// Opaque periodized dataset.
pub struct IcDataset {
    inner: PeriodizedDataset,
}

/// Opaque fitted model with its training scaler.
pub struct IcModel {
    inner: ScaledModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> IcStatus {
    match e {
        Error::Io { .. } => IcStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::Config(_) => IcStatus::Parse,
        Error::InvalidArgument(_) | Error::ShapeMismatch { .. } | Error::KindMismatch { .. } => {
            IcStatus::InvalidArgument
        }
        _ => IcStatus::Data,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard<F>(f: F) -> IcStatus
where
    F: FnOnce() -> Result<(), FfiError>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IcStatus::Ok,
        Ok(Err(FfiError::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            IcStatus::NullPointer
        }
        Ok(Err(FfiError::Arg(msg))) => {
            set_error(msg);
            IcStatus::InvalidArgument
        }
        Ok(Err(FfiError::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            IcStatus::Panic
        }
    }
}

enum FfiError {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for FfiError {
    fn from(e: Error) -> Self {
        FfiError::Core(e)
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, FfiError> {
    if p.is_null() {
        Err(FfiError::Null(what))
    } else {
        Ok(p)
    }
}

/// Borrows `len` values; a null pointer is accepted only when `len` is 0.
unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], FfiError> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(slice::from_raw_parts(non_null(p, what)?, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], FfiError> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, FfiError> {
    CStr::from_ptr(non_null(p, what)?)
        .to_str()
        .map_err(|_| FfiError::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &'static str) -> Result<(), FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(what));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ic_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ic_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Seed derived from `master` and `n_labels` UTF-8 string labels.
///
/// # Safety
/// `labels` must point to `n_labels` valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ic_derive_seed(
    master: u64,
    labels: *const *const c_char,
    n_labels: usize,
    out: *mut u64,
) -> IcStatus {
    guard(|| {
        let raw = slice_arg(labels, n_labels, "labels")?;
        let strs = raw
            .iter()
            .map(|&p| str_arg(p, "label"))
            .collect::<Result<Vec<_>, _>>()?;
        let labels: Vec<SeedLabel<'_>> = strs.iter().map(|s| SeedLabel::Str(s)).collect();
        write_out(out, derive_seed(master, &labels), "out")
    })
}

/// Kendall's tau-b between two rank vectors of length `n`.
///
/// # Safety
/// `a` and `b` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ic_kendalls_tau(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> IcStatus {
    guard(|| {
        let (tau, _) = kendalls_tau(slice_arg(a, n, "a")?, slice_arg(b, n, "b")?)?;
        write_out(out, tau, "out")
    })
}

/// Kendall's W of `m` rankings of `n` items stored row-major.
///
/// # Safety
/// `ranks` must point to `m * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ic_kendalls_w(ranks: *const f64, m: usize, n: usize, out: *mut f64) -> IcStatus {
    guard(|| {
        let len = m
            .checked_mul(n)
            .ok_or_else(|| FfiError::Arg("m * n overflows".into()))?;
        let all = slice_arg(ranks, len, "ranks")?;
        let rows: Vec<&[f64]> = if n == 0 { Vec::new() } else { all.chunks(n).collect() };
        write_out(out, kendalls_w(&rows)?, "out")
    })
}

/// ROC AUC of `scores` against 0/1 `labels`.
///
/// # Safety
/// `labels` and `scores` must point to `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ic_auc(labels: *const u8, scores: *const f64, n: usize, out: *mut f64) -> IcStatus {
    guard(|| {
        write_out(
            out,
            auc(slice_arg(labels, n, "labels")?, slice_arg(scores, n, "scores")?)?,
            "out",
        )
    })
}

/// Cliff's delta of `x` over `y`.
///
/// # Safety
/// `x` and `y` must point to `nx` and `ny` doubles.
#[no_mangle]
pub unsafe extern "C" fn ic_cliffs_delta(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    out: *mut f64,
) -> IcStatus {
    guard(|| {
        write_out(
            out,
            cliffs_delta(slice_arg(x, nx, "x")?, slice_arg(y, ny, "y")?)?.d,
            "out",
        )
    })
}

/// Wilcoxon rank-sum test; writes the U statistic of `x` and the p-value.
///
/// # Safety
/// `x` and `y` must point to `nx` and `ny` doubles.
#[no_mangle]
pub unsafe extern "C" fn ic_wilcoxon_rank_sum(
    x: *const f64,
    nx: usize,
    y: *const f64,
    ny: usize,
    alternative: IcAlternative,
    out_statistic: *mut f64,
    out_p: *mut f64,
) -> IcStatus {
    guard(|| {
        let alt = match alternative {
            IcAlternative::Greater => Alternative::Greater,
            IcAlternative::TwoSided => Alternative::TwoSided,
        };
        let r = wilcoxon_rank_sum(slice_arg(x, nx, "x")?, slice_arg(y, ny, "y")?, alt)?;
        write_out(out_statistic, r.statistic, "out_statistic")?;
        write_out(out_p, r.p_value, "out_p")
    })
}

/// Kruskal-Wallis H test over `n_groups` groups laid out back to back in
/// `values`; `sizes[i]` is the length of group `i`.
///
/// # Safety
/// `sizes` must point to `n_groups` counts and `values` to their sum.
#[no_mangle]
pub unsafe extern "C" fn ic_kruskal_wallis(
    values: *const f64,
    sizes: *const usize,
    n_groups: usize,
    out_statistic: *mut f64,
    out_p: *mut f64,
) -> IcStatus {
    guard(|| {
        let sizes = slice_arg(sizes, n_groups, "sizes")?;
        let total = sizes
            .iter()
            .try_fold(0usize, |a, &s| a.checked_add(s))
            .ok_or_else(|| FfiError::Arg("group sizes overflow".into()))?;
        let all = slice_arg(values, total, "values")?;
        let mut groups = Vec::with_capacity(n_groups);
        let mut start = 0;
        for &s in sizes {
            groups.push(&all[start..start + s]);
            start += s;
        }
        let r = kruskal_wallis(&groups)?;
        write_out(out_statistic, r.statistic, "out_statistic")?;
        write_out(out_p, r.p_value, "out_p")
    })
}

/// Jenks natural breaks into `k` clusters. Writes the cluster index of each
/// value (0 = lowest) to `out_assignment` and the total WSS to `out_wss`.
///
/// # Safety
/// `values` and `out_assignment` must point to `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ic_jenks_breaks(
    values: *const f64,
    n: usize,
    k: usize,
    out_assignment: *mut usize,
    out_wss: *mut f64,
) -> IcStatus {
    guard(|| {
        let r = jenks_breaks(slice_arg(values, n, "values")?, k)?;
        slice_out(out_assignment, n, "out_assignment")?.copy_from_slice(&r.assignment);
        write_out(out_wss, r.wss, "out_wss")
    })
}

/// Loads a periodized CSV file.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ic_dataset_load_csv(
    path: *const c_char,
    label_column: *const c_char,
    period_column: *const c_char,
    out: *mut *mut IcDataset,
) -> IcStatus {
    guard(|| {
        let ds = load_periodized_csv(
            str_arg(path, "path")?,
            str_arg(label_column, "label_column")?,
            str_arg(period_column, "period_column")?,
        )?;
        write_out(out, Box::into_raw(Box::new(IcDataset { inner: ds })), "out")
    })
}

/// Generates a synthetic dataset with `informative` leading signal features.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ic_dataset_synthetic(
    periods: usize,
    rows: usize,
    features: usize,
    informative: usize,
    positive_rate: f64,
    drift: f64,
    nonlinearity: f64,
    seed: u64,
    out: *mut *mut IcDataset,
) -> IcStatus {
    guard(|| {
        let cfg = SyntheticConfig {
            periods,
            rows,
            features,
            informative,
            positive_rate,
            drift,
            nonlinearity,
            coefficients: None,
        };
        let ds = generate_synthetic(&cfg, seed)?;
        write_out(out, Box::into_raw(Box::new(IcDataset { inner: ds })), "out")
    })
}

/// Number of periods, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ic_dataset_n_periods(dataset: *const IcDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.n_periods())
}

/// Number of features, or 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ic_dataset_n_features(dataset: *const IcDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.feature_count())
}

/// Rows in one period, or 0 for NULL or an out-of-range index.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ic_dataset_period_rows(dataset: *const IcDataset, period: usize) -> usize {
    dataset
        .as_ref()
        .and_then(|d| d.inner.periods.get(period))
        .map_or(0, |p| p.len())
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ic_dataset_free(dataset: *mut IcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Trains a learner with default hyperparameters on one period, with the
/// preprocessing used by the experiments (10:1 downsampling, standardization).
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ic_model_train(
    dataset: *const IcDataset,
    learner: IcLearner,
    period: usize,
    seed: u64,
    out: *mut *mut IcModel,
) -> IcStatus {
    guard(|| {
        let ds = &non_null(dataset, "dataset")?.as_ref().expect("checked").inner;
        let p = ds.period(period)?;
        let seeds = SeedPolicy::controlled_experiment(4, seed)
            .expect("known experiment")
            .resolve(seed);
        let options = ExperimentConfig::default().train_options();
        let model = train_model(learner.into(), p, &seeds, seed, &options)?;
        write_out(out, Box::into_raw(Box::new(IcModel { inner: model })), "out")
    })
}

/// Positive-class probabilities for `rows` x `cols` row-major features.
///
/// # Safety
/// `features` must point to `rows * cols` doubles, `out` to `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn ic_model_predict(
    model: *const IcModel,
    features: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> IcStatus {
    guard(|| {
        let m = &non_null(model, "model")?.as_ref().expect("checked").inner;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| FfiError::Arg("rows * cols overflows".into()))?;
        let x = Matrix::new(rows, cols, slice_arg(features, len, "features")?.to_vec())?;
        let p = m.predict_proba(&x)?;
        slice_out(out, rows, "out")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Permutation importance (AUC drop) of every feature on one period.
///
/// # Safety
/// `model` and `dataset` must be live handles; `out` must hold
/// `n_features` doubles, matching the dataset's feature count.
#[no_mangle]
pub unsafe extern "C" fn ic_model_importance(
    model: *const IcModel,
    dataset: *const IcDataset,
    period: usize,
    repeats: usize,
    seed: u64,
    out: *mut f64,
    n_features: usize,
) -> IcStatus {
    guard(|| {
        let m = &non_null(model, "model")?.as_ref().expect("checked").inner;
        let ds = &non_null(dataset, "dataset")?.as_ref().expect("checked").inner;
        if n_features != ds.feature_count() {
            return Err(FfiError::Arg(format!(
                "n_features is {n_features}, dataset has {}",
                ds.feature_count()
            )));
        }
        let scores = permutation_importance(|x| m.predict_proba(x), ds.period(period)?, repeats, seed)?;
        slice_out(out, n_features, "out")?.copy_from_slice(&scores.values);
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ic_model_free(model: *mut IcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs one experiment from a JSON configuration and writes its reports to
/// `output_dir` (overriding the configuration's own directory when non-NULL).
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string; `output_dir` must be
/// NULL or one.
#[no_mangle]
pub unsafe extern "C" fn ic_run_experiment(
    config_json: *const c_char,
    experiment: IcExperiment,
    output_dir: *const c_char,
) -> IcStatus {
    guard(|| {
        let mut cfg = ExperimentConfig::from_json_str(str_arg(config_json, "config_json")?)?;
        if !output_dir.is_null() {
            cfg.output_dir = PathBuf::from(str_arg(output_dir, "output_dir")?);
        }
        let ds = load_dataset(&cfg)?;
        let (name, bundle) = match experiment {
            IcExperiment::Rq1 => ("rq1", run_rq1(&cfg, &ds)?.to_bundle(&cfg)),
            IcExperiment::Rq2 => ("rq2", run_rq2(&cfg, &ds)?.to_bundle(&cfg)),
            IcExperiment::Rq3 => ("rq3", run_rq3(&cfg, &ds)?.to_bundle()),
        };
        emit_reports(&bundle, Manifest::new(name, &cfg), &cfg.output_dir)?;
        Ok(())
    })
}
