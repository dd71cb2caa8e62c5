//! C ABI for the jointsl library.
//!
//! Conventions:
//! - Handles (`JslDataset`, `JslLibrary`, `JslFit`) are opaque pointers owned
//!   by the library; free them with the matching `*_free` function.
//! - Constructors return null on failure; status functions return an error
//!   code: 0 success, 2 invalid input, 3 numerical failure.
//! - After any failure, `jsl_last_error_message` returns a thread-local,
//!   NUL-terminated description valid until the next call on that thread.
//! - Strings returned as `*mut c_char` are owned by the caller and must be
//!   released with `jsl_string_free`.

use jointsl::cli::archive::{load_archive, save_archive, FitArchive};
use jointsl::cli::commands::{expand_metrics, CensoringChoice, DiffChoice, MetricChoice};
use jointsl::cli::formats::{dataset_from_csv, dataset_to_csv, parse_library_json};
use jointsl::cli::report::{render_tables, EvaluationBundle, PanelBundle};
use jointsl::data::{assign_folds, Dataset};
use jointsl::dynpred::{conditional_risks, RiskConfig};
use jointsl::error::Error;
use jointsl::jointmodel::{McmcConfig, ModelFrame};
use jointsl::scoring::DiffScheme;
use jointsl::simulate::{simulate_dataset, Scenario, ScenarioSpec};
use jointsl::superlearn::{
    evaluate_on_test, fit_library_full, train_super_learner, ModelLibrary, PredictSettings,
};
use libc::c_char;
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Success.
pub const JSL_OK: i32 = 0;
/// Invalid input (bad arguments, malformed files, null pointers).
pub const JSL_ERR_INVALID: i32 = 2;
/// Numerical failure (non-convergence, degenerate weights, panics).
pub const JSL_ERR_NUMERICAL: i32 = 3;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn code_of(err: &Error) -> i32 {
    match err.exit_code() {
        3 => JSL_ERR_NUMERICAL,
        _ => JSL_ERR_INVALID,
    }
}

fn store(err: Error) -> i32 {
    let code = code_of(&err);
    set_error(&err.to_string());
    code
}

/// Runs a fallible body, converting panics into numerical errors.
fn guard<T>(body: impl FnOnce() -> Result<T, Error>) -> Result<T, i32> {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(v)) => {
            set_error("");
            Ok(v)
        }
        Ok(Err(e)) => Err(store(e)),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in jointsl".to_string());
            set_error(&msg);
            Err(JSL_ERR_NUMERICAL)
        }
    }
}

fn guard_ptr<T>(body: impl FnOnce() -> Result<T, Error>) -> *mut T {
    match guard(body) {
        Ok(v) => Box::into_raw(Box::new(v)),
        Err(_) => std::ptr::null_mut(),
    }
}

fn guard_code(body: impl FnOnce() -> Result<(), Error>) -> i32 {
    match guard(body) {
        Ok(()) => JSL_OK,
        Err(code) => code,
    }
}

fn guard_string(body: impl FnOnce() -> Result<String, Error>) -> *mut c_char {
    match guard(body) {
        Ok(s) => match CString::new(s.replace('\0', " ")) {
            Ok(c) => c.into_raw(),
            Err(_) => {
                set_error("string contained interior NUL");
                std::ptr::null_mut()
            }
        },
        Err(_) => std::ptr::null_mut(),
    }
}

unsafe fn want_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Error> {
    if ptr.is_null() {
        return Err(Error::invalid(format!("{what} pointer is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn want_ref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Error> {
    ptr.as_ref()
        .ok_or_else(|| Error::invalid(format!("{what} handle is null")))
}

// ---------------------------------------------------------------------------
// Version and errors.
// ---------------------------------------------------------------------------

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn jsl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread (empty after a
/// success). The pointer stays valid until the next jointsl call on the
/// same thread.
#[no_mangle]
pub extern "C" fn jsl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by a jointsl function that
/// documents `jsl_string_free` ownership, or null.
#[no_mangle]
pub unsafe extern "C" fn jsl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Datasets.
// ---------------------------------------------------------------------------

/// Opaque dataset handle.
pub struct JslDataset(Dataset);

/// Parses a dataset from CSV text (`id,time,value,obs_time,event,w...`).
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_from_csv(text: *const c_char) -> *mut JslDataset {
    guard_ptr(|| {
        let text = want_str(text, "csv text")?;
        Ok(JslDataset(dataset_from_csv(text)?))
    })
}

/// Reads a dataset from a CSV file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_read_csv(path: *const c_char) -> *mut JslDataset {
    guard_ptr(|| {
        let path = want_str(path, "path")?;
        Ok(JslDataset(jointsl::cli::formats::read_dataset_csv(
            Path::new(path),
        )?))
    })
}

/// Serializes a dataset to CSV text. Free with `jsl_string_free`.
///
/// # Safety
/// `ds` must be a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_to_csv(ds: *const JslDataset) -> *mut c_char {
    guard_string(|| dataset_to_csv(&want_ref(ds, "dataset")?.0))
}

/// Number of subjects, or -1 on error.
///
/// # Safety
/// `ds` must be a live dataset handle or null.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_len(ds: *const JslDataset) -> i64 {
    match guard(|| Ok(want_ref(ds, "dataset")?.0.len() as i64)) {
        Ok(n) => n,
        Err(_) => -1,
    }
}

/// Number of observed events, or -1 on error.
///
/// # Safety
/// `ds` must be a live dataset handle or null.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_n_events(ds: *const JslDataset) -> i64 {
    match guard(|| Ok(want_ref(ds, "dataset")?.0.n_events() as i64)) {
        Ok(n) => n,
        Err(_) => -1,
    }
}

/// Writes the censored fraction to `out`.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_censoring_rate(
    ds: *const JslDataset,
    out: *mut f64,
) -> i32 {
    guard_code(|| {
        let ds = want_ref(ds, "dataset")?;
        if out.is_null() {
            return Err(Error::invalid("output pointer is null"));
        }
        *out = ds.0.censoring_rate();
        Ok(())
    })
}

/// Simulates a dataset under scenario "I", "II", or "III" with the standard
/// generator (deterministic in the seed).
///
/// # Safety
/// `scenario` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_simulate(
    scenario: *const c_char,
    n: u64,
    target_censoring: f64,
    seed: u64,
) -> *mut JslDataset {
    guard_ptr(|| {
        let scenario = Scenario::parse(want_str(scenario, "scenario")?)?;
        let spec = ScenarioSpec::new(scenario, n as usize, target_censoring)?;
        Ok(JslDataset(simulate_dataset(&spec, seed)?.dataset))
    })
}

/// Releases a dataset handle.
///
/// # Safety
/// `ds` must be a pointer returned by a dataset constructor, or null; it
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jsl_dataset_free(ds: *mut JslDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

// ---------------------------------------------------------------------------
// Model libraries.
// ---------------------------------------------------------------------------

/// Opaque model-library handle.
pub struct JslLibrary(ModelLibrary);

/// Parses a model library from JSON (an array of model specifications or a
/// single specification object). Spline boundaries resolve against
/// `follow_up`, the maximum follow-up time of the data the library will be
/// fitted on.
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_library_from_json(
    text: *const c_char,
    follow_up: f64,
) -> *mut JslLibrary {
    guard_ptr(|| {
        let text = want_str(text, "library json")?;
        Ok(JslLibrary(parse_library_json(text)?.resolve(follow_up)?))
    })
}

/// Number of models, or -1 on error.
///
/// # Safety
/// `lib` must be a live library handle or null.
#[no_mangle]
pub unsafe extern "C" fn jsl_library_len(lib: *const JslLibrary) -> i64 {
    match guard(|| Ok(want_ref(lib, "library")?.0.len() as i64)) {
        Ok(n) => n,
        Err(_) => -1,
    }
}

/// Releases a library handle.
///
/// # Safety
/// `lib` must be a pointer returned by a library constructor, or null; it
/// must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jsl_library_free(lib: *mut JslLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

// ---------------------------------------------------------------------------
// Model fitting and the posterior archive.
// ---------------------------------------------------------------------------

/// Opaque fitted-model handle (posterior draws plus the model frame).
pub struct JslFit(FitArchive);

/// Fits one joint model (a single-entry library JSON) by MCMC.
///
/// # Safety
/// `ds` must be a live dataset handle; `model_json` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn jsl_fit(
    ds: *const JslDataset,
    model_json: *const c_char,
    iterations: u64,
    burn_in: u64,
    thin: u64,
    seed: u64,
) -> *mut JslFit {
    guard_ptr(|| {
        let data = &want_ref(ds, "dataset")?.0;
        let text = want_str(model_json, "model json")?;
        let follow_up = data
            .subjects
            .iter()
            .map(|s| s.obs_time)
            .fold(0.0_f64, f64::max);
        let library = parse_library_json(text)?.resolve(follow_up)?;
        if library.len() != 1 {
            return Err(Error::invalid(format!(
                "jsl_fit expects a single model specification, found {}",
                library.len()
            )));
        }
        let member = &library.members[0];
        let mcmc = McmcConfig {
            iterations: iterations as usize,
            burn_in: burn_in as usize,
            thin: thin as usize,
            seed,
            fix_sigma: None,
            fix_d: None,
            store_random_effects: false,
        };
        let fit = jointsl::jointmodel::fit_mcmc(&member.spec, &member.priors, data, &mcmc)?;
        Ok(JslFit(FitArchive {
            tool_version: jointsl::TOOL_VERSION.to_string(),
            spec: member.spec.clone(),
            priors: member.priors.clone(),
            covariate_names: data.covariate_names.clone(),
            mcmc,
            fit,
        }))
    })
}

/// Saves a fit to the versioned binary archive format.
///
/// # Safety
/// `fit` must be a live fit handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_fit_save(fit: *const JslFit, path: *const c_char) -> i32 {
    guard_code(|| {
        let fit = want_ref(fit, "fit")?;
        let path = want_str(path, "path")?;
        save_archive(&fit.0, Path::new(path))
    })
}

/// Loads a fit from a binary archive.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_fit_load(path: *const c_char) -> *mut JslFit {
    guard_ptr(|| {
        let path = want_str(path, "path")?;
        Ok(JslFit(load_archive(Path::new(path))?))
    })
}

/// Number of stored posterior draws, or -1 on error.
///
/// # Safety
/// `fit` must be a live fit handle or null.
#[no_mangle]
pub unsafe extern "C" fn jsl_fit_n_draws(fit: *const JslFit) -> i64 {
    match guard(|| Ok(want_ref(fit, "fit")?.0.fit.thetas.len() as i64)) {
        Ok(n) => n,
        Err(_) => -1,
    }
}

/// Name of the fitted model. Free with `jsl_string_free`.
///
/// # Safety
/// `fit` must be a live fit handle.
#[no_mangle]
pub unsafe extern "C" fn jsl_fit_model_name(fit: *const JslFit) -> *mut c_char {
    guard_string(|| Ok(want_ref(fit, "fit")?.0.spec.name.clone()))
}

/// Conditional risk π(u | t) for one subject: the probability of an event in
/// (t, u] given survival to t and the subject's measurements up to t.
///
/// # Safety
/// `fit` and `ds` must be live handles; `subject_id` a valid NUL-terminated
/// string; `out_risk` a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn jsl_conditional_risk(
    fit: *const JslFit,
    ds: *const JslDataset,
    subject_id: *const c_char,
    t: f64,
    u: f64,
    mc_draws: u64,
    seed: u64,
    out_risk: *mut f64,
) -> i32 {
    guard_code(|| {
        let archive = &want_ref(fit, "fit")?.0;
        let data = &want_ref(ds, "dataset")?.0;
        let id = want_str(subject_id, "subject id")?;
        if out_risk.is_null() {
            return Err(Error::invalid("output pointer is null"));
        }
        let record = data
            .subjects
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::invalid(format!("no subject with id '{id}'")))?;
        let frame = ModelFrame::from_resolved(
            &archive.spec,
            &archive.fit.meta.resolved,
            &archive.covariate_names,
        )?;
        let res = conditional_risks(
            &frame,
            &archive.fit,
            record,
            t,
            t,
            &[u],
            &RiskConfig {
                mc_draws: mc_draws as usize,
                seed,
                model_index: 0,
            },
        )?;
        *out_risk = res.risk[0];
        Ok(())
    })
}

/// Releases a fit handle.
///
/// # Safety
/// `fit` must be a pointer returned by a fit constructor, or null; it must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn jsl_fit_free(fit: *mut JslFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

// ---------------------------------------------------------------------------
// Super learning.
// ---------------------------------------------------------------------------

fn parse_metric(metric: &str) -> Result<MetricChoice, Error> {
    match metric {
        "ibs" => Ok(MetricChoice::Ibs),
        "epce" => Ok(MetricChoice::Epce),
        "both" => Ok(MetricChoice::Both),
        other => Err(Error::invalid(format!(
            "unknown metric {other:?}; expected ibs, epce, or both"
        ))),
    }
}

fn parse_censoring(cw: &str) -> Result<CensoringChoice, Error> {
    match cw {
        "ipcw" => Ok(CensoringChoice::Ipcw),
        "model" => Ok(CensoringChoice::Model),
        "both" => Ok(CensoringChoice::Both),
        other => Err(Error::invalid(format!(
            "unknown censoring-weight mode {other:?}; expected ipcw, model, or both"
        ))),
    }
}

fn parse_diff(diff: &str) -> Result<DiffScheme, Error> {
    match diff {
        "forward" => Ok(DiffChoice::Forward.scheme()),
        "central" => Ok(DiffChoice::Central.scheme()),
        other => Err(Error::invalid(format!(
            "unknown differencing scheme {other:?}; expected forward or central"
        ))),
    }
}

/// Cross-validates the library and optimizes the interval weights; returns
/// the panel bundle as JSON. Free with `jsl_string_free`.
///
/// `metric` is "ibs", "epce", or "both"; `censoring_weights` is "ipcw",
/// "model", or "both"; `diff` is "forward" or "central".
///
/// # Safety
/// `ds` and `lib` must be live handles; `landmarks` must point to
/// `n_landmarks` doubles; the string arguments must be valid NUL-terminated
/// strings.
#[no_mangle]
pub unsafe extern "C" fn jsl_superlearn(
    ds: *const JslDataset,
    lib: *const JslLibrary,
    folds: u64,
    landmarks: *const f64,
    n_landmarks: usize,
    dt: f64,
    metric: *const c_char,
    censoring_weights: *const c_char,
    epsilon: f64,
    diff: *const c_char,
    mc_draws: u64,
    iterations: u64,
    burn_in: u64,
    thin: u64,
    seed: u64,
) -> *mut c_char {
    guard_string(|| {
        let data = &want_ref(ds, "dataset")?.0;
        let library = &want_ref(lib, "library")?.0;
        if landmarks.is_null() || n_landmarks == 0 {
            return Err(Error::invalid("at least one landmark is required"));
        }
        let landmarks = std::slice::from_raw_parts(landmarks, n_landmarks).to_vec();
        let metrics = expand_metrics(
            parse_metric(want_str(metric, "metric")?)?,
            parse_censoring(want_str(censoring_weights, "censoring weights")?)?,
        );
        let settings = PredictSettings {
            mc_draws: mc_draws as usize,
            eps: epsilon,
            scheme: parse_diff(want_str(diff, "diff")?)?,
            seed,
            mcmc: McmcConfig {
                iterations: iterations as usize,
                burn_in: burn_in as usize,
                thin: thin as usize,
                seed: 0,
                fix_sigma: None,
                fix_d: None,
                store_random_effects: false,
            },
        };
        let fold_assignment = assign_folds(data, folds as usize, seed)?;
        let (panel, _cube) = train_super_learner(
            library,
            data,
            &fold_assignment,
            &landmarks,
            dt,
            &metrics,
            &settings,
        )?;
        let table = render_tables(&panel)?;
        let bundle = PanelBundle {
            tool_version: jointsl::TOOL_VERSION.to_string(),
            seed,
            config: serde_json::json!({"origin": "ffi"}),
            settings,
            warnings: vec![],
            panel,
            table,
        };
        Ok(serde_json::to_string_pretty(&bundle)?)
    })
}

/// Refits the library on `train` and scores the panel's frozen weights on
/// `test`; returns the evaluation bundle as JSON. `panel_json` is the output
/// of `jsl_superlearn` (or the CLI's panel file). Free the result with
/// `jsl_string_free`.
///
/// # Safety
/// `train`, `test`, and `lib` must be live handles; `panel_json` a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn jsl_evaluate(
    train: *const JslDataset,
    test: *const JslDataset,
    lib: *const JslLibrary,
    panel_json: *const c_char,
) -> *mut c_char {
    guard_string(|| {
        let train = &want_ref(train, "train dataset")?.0;
        let test = &want_ref(test, "test dataset")?.0;
        let library = &want_ref(lib, "library")?.0;
        let text = want_str(panel_json, "panel json")?;
        let bundle: PanelBundle = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("panel json: {e}")))?;
        if library.names() != bundle.panel.model_names {
            return Err(Error::invalid(format!(
                "library models {:?} do not match the panel's models {:?}",
                library.names(),
                bundle.panel.model_names
            )));
        }
        let fits = fit_library_full(library, train, &bundle.settings)?;
        let evaluations = evaluate_on_test(&fits, test, &bundle.panel, &bundle.settings)?;
        let out = EvaluationBundle {
            tool_version: jointsl::TOOL_VERSION.to_string(),
            seed: bundle.settings.seed,
            config: serde_json::json!({"origin": "ffi"}),
            warnings: vec![],
            evaluations,
        };
        Ok(serde_json::to_string_pretty(&out)?)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn last_error() -> String {
        CStr::from_ptr(jsl_last_error_message())
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn version_is_non_empty() {
        let v = unsafe { CStr::from_ptr(jsl_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn null_arguments_set_errors() {
        unsafe {
            assert!(jsl_dataset_from_csv(std::ptr::null()).is_null());
            assert!(last_error().contains("null"));
            assert_eq!(jsl_dataset_len(std::ptr::null()), -1);
            let code = jsl_dataset_censoring_rate(std::ptr::null(), std::ptr::null_mut());
            assert_eq!(code, JSL_ERR_INVALID);
        }
    }

    #[test]
    fn csv_round_trip_through_the_abi() {
        let csv = "id,time,value,obs_time,event\n\
                   a,0,1.5,2.5,1\n\
                   a,1,1.75,2.5,1\n\
                   b,0,0.5,3,0\n";
        unsafe {
            let ds = jsl_dataset_from_csv(c(csv).as_ptr());
            assert!(!ds.is_null(), "{}", last_error());
            assert_eq!(jsl_dataset_len(ds), 2);
            assert_eq!(jsl_dataset_n_events(ds), 1);
            let mut rate = f64::NAN;
            assert_eq!(jsl_dataset_censoring_rate(ds, &mut rate), JSL_OK);
            assert!((rate - 0.5).abs() < 1e-15);
            let text = jsl_dataset_to_csv(ds);
            assert!(!text.is_null());
            let round = CStr::from_ptr(text).to_str().unwrap().to_string();
            let ds2 = jsl_dataset_from_csv(c(&round).as_ptr());
            assert!(!ds2.is_null());
            let text2 = jsl_dataset_to_csv(ds2);
            assert_eq!(round, CStr::from_ptr(text2).to_str().unwrap());
            jsl_string_free(text);
            jsl_string_free(text2);
            jsl_dataset_free(ds);
            jsl_dataset_free(ds2);
        }
    }

    #[test]
    fn simulate_fit_save_load_predict() {
        let dir = tempfile::tempdir().unwrap();
        let archive_path = dir.path().join("fit.jsla");
        unsafe {
            let ds = jsl_simulate(c("I").as_ptr(), 90, 0.45, 4242);
            assert!(!ds.is_null(), "{}", last_error());
            assert_eq!(jsl_dataset_len(ds), 90);

            let model = r#"{"name": "lv", "trajectory": "linear", "functional_form": "value"}"#;
            let fit = jsl_fit(ds, c(model).as_ptr(), 300, 150, 3, 7);
            assert!(!fit.is_null(), "{}", last_error());
            assert_eq!(jsl_fit_n_draws(fit), 50);
            let name = jsl_fit_model_name(fit);
            assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "lv");
            jsl_string_free(name);

            let path = c(archive_path.to_str().unwrap());
            assert_eq!(jsl_fit_save(fit, path.as_ptr()), JSL_OK);
            let loaded = jsl_fit_load(path.as_ptr());
            assert!(!loaded.is_null(), "{}", last_error());
            assert_eq!(jsl_fit_n_draws(loaded), 50);

            // Risk from the loaded archive matches the in-memory fit exactly
            // (same seed, same draws).
            let id = c("s00001");
            let (mut a, mut b) = (f64::NAN, f64::NAN);
            assert_eq!(
                jsl_conditional_risk(fit, ds, id.as_ptr(), 2.0, 5.0, 40, 11, &mut a),
                JSL_OK,
                "{}",
                last_error()
            );
            assert_eq!(
                jsl_conditional_risk(loaded, ds, id.as_ptr(), 2.0, 5.0, 40, 11, &mut b),
                JSL_OK
            );
            assert!(a > 0.0 && a < 1.0);
            assert_eq!(a.to_bits(), b.to_bits());

            jsl_fit_free(fit);
            jsl_fit_free(loaded);
            jsl_dataset_free(ds);
        }
    }

    #[test]
    fn superlearn_and_evaluate_through_the_abi() {
        unsafe {
            let train = jsl_simulate(c("I").as_ptr(), 80, 0.45, 99);
            let test = jsl_simulate(c("I").as_ptr(), 60, 0.45, 100);
            assert!(!train.is_null() && !test.is_null());
            let lib_json = r#"[
                {"name": "lv", "trajectory": "linear", "functional_form": "value"},
                {"name": "ls", "trajectory": "linear", "functional_form": "slope"}
            ]"#;
            let lib = jsl_library_from_json(c(lib_json).as_ptr(), 25.0);
            assert!(!lib.is_null(), "{}", last_error());
            assert_eq!(jsl_library_len(lib), 2);

            let landmarks = [6.0];
            let panel = jsl_superlearn(
                train,
                lib,
                2,
                landmarks.as_ptr(),
                landmarks.len(),
                2.0,
                c("ibs").as_ptr(),
                c("ipcw").as_ptr(),
                1e-3,
                c("forward").as_ptr(),
                20,
                240,
                120,
                3,
                5,
            );
            assert!(!panel.is_null(), "{}", last_error());
            let panel_text = CStr::from_ptr(panel).to_str().unwrap().to_string();
            let parsed: serde_json::Value = serde_json::from_str(&panel_text).unwrap();
            assert_eq!(parsed["panel"]["model_names"][0], "lv");

            let eval = jsl_evaluate(train, test, lib, panel);
            assert!(!eval.is_null(), "{}", last_error());
            let eval_text = CStr::from_ptr(eval).to_str().unwrap();
            let parsed: serde_json::Value = serde_json::from_str(eval_text).unwrap();
            assert!(parsed["evaluations"].as_array().unwrap().len() == 1);

            jsl_string_free(panel);
            jsl_string_free(eval);
            jsl_library_free(lib);
            jsl_dataset_free(train);
            jsl_dataset_free(test);
        }
    }
}
