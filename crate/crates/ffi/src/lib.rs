//! C ABI over the fuzzcard engine.
//!
//! Chains and sessions are opaque handles owned by the caller and released
//! with their `*_free` function. Every fallible call returns an [`FcStatus`];
//! on failure [`fc_last_error`] describes the problem until the next call on
//! the same thread. Strings returned through `char **` out-parameters are
//! allocated here and must be released with [`fc_string_free`].
//!
//! Session operations exchange JSON documents with the same shapes as the
//! HTTP API.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fuzzcard::cards::{values_to_cards, CardChain, CardEdit};
use fuzzcard::cfkm::{run_cfkm, CfkmConfig, InitStrategy, SampleSet};
use fuzzcard::fuzzy::Interval;
use fuzzcard::pipeline::{
    replay, AdvanceRequest, ChainTarget, CommitRequest, PipelineError, ReplayMode, Session, SessionParams,
    TranscriptEntry,
};
use fuzzcard::service::DatasetSpec;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidArgument = 4,
    BufferTooSmall = 5,
    /// The operation is not allowed at the session's current stage.
    IllegalStage = 6,
    /// A card edit would break the chain; the chain is left unchanged.
    InvalidEdit = 7,
    /// The data or chains cannot produce a valid result.
    Unprocessable = 8,
    ReplayFailed = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcEditKind {
    Insert = 0,
    Remove = 1,
    Move = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcInit {
    Even = 0,
    Percentile = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcReplayMode {
    Strict = 0,
    Recorded = 1,
}

/// A card chain.
pub struct FcChain {
    inner: CardChain,
}

/// An elicitation session.
pub struct FcSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FcStatus, String);

type Outcome = Result<(), Failure>;

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let status = match e {
            PipelineError::Stage { .. } => FcStatus::IllegalStage,
            PipelineError::Params(_) | PipelineError::Request(_) => FcStatus::InvalidArgument,
            PipelineError::Edit { .. } => FcStatus::InvalidEdit,
            _ => FcStatus::Unprocessable,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: Option<String>) {
    let message = message.map(|m| CString::new(m.replace('\0', " ")).expect("nul bytes removed"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

fn guard(body: impl FnOnce() -> Outcome) -> FcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error(None);
            FcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(Some(message));
            status
        }
        Err(panic) => {
            let detail = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(Some(format!("internal error: {detail}")));
            FcStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(FcStatus::NullArgument, format!("{name} is null"))
}

fn invalid(message: impl ToString) -> Failure {
    Failure(FcStatus::InvalidArgument, message.to_string())
}

unsafe fn text<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| Failure(FcStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn optional_json<T: serde::de::DeserializeOwned + Default>(
    ptr: *const c_char,
    name: &str,
) -> Result<T, Failure> {
    if ptr.is_null() {
        return Ok(T::default());
    }
    let s = text(ptr, name)?;
    if s.trim().is_empty() {
        return Ok(T::default());
    }
    parse(s, name)
}

fn parse<T: serde::de::DeserializeOwned>(s: &str, name: &str) -> Result<T, Failure> {
    serde_json::from_str(s).map_err(|e| Failure(FcStatus::InvalidJson, format!("{name}: {e}")))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn emit_json(out: *mut *mut c_char, value: &impl serde::Serialize) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    let json = serde_json::to_string(value).expect("outputs serialise");
    *out = CString::new(json).expect("JSON has no nul bytes").into_raw();
    Ok(())
}

unsafe fn copy_out<T: Copy>(values: &[T], out: *mut T, capacity: usize, written: *mut usize) -> Outcome {
    if !written.is_null() {
        *written = values.len();
    }
    if values.len() > capacity {
        return Err(Failure(
            FcStatus::BufferTooSmall,
            format!("need room for {} values, buffer holds {capacity}", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Outcome {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or NULL after a
/// success. The pointer stays valid until the next call on the thread.
#[no_mangle]
pub extern "C" fn fc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Encodes `len` strictly increasing values running from `lower` to
/// `upper` as a chain of `10^precision` cards. Anchors are labelled
/// `t_0 .. t_{len-1}`.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_encode(
    lower: f64,
    upper: f64,
    values: *const f64,
    len: usize,
    precision: u32,
    out: *mut *mut FcChain,
) -> FcStatus {
    guard(|| {
        let values = slice(values, len, "values")?;
        let labels = (0..len).map(|i| format!("t_{i}")).collect();
        let chain = values_to_cards(Interval::new(lower, upper), labels, values, precision).map_err(invalid)?;
        put(out, FcChain { inner: chain })
    })
}

/// Builds a chain from `len` gap counts. `min_gap` is 1 for strict chains
/// and 0 when ties are allowed.
///
/// # Safety
/// `gaps` must point to `len` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_from_gaps(
    lower: f64,
    upper: f64,
    gaps: *const u64,
    len: usize,
    precision: u32,
    min_gap: u64,
    out: *mut *mut FcChain,
) -> FcStatus {
    guard(|| {
        let gaps = slice(gaps, len, "gaps")?.to_vec();
        let labels = (0..=len).map(|i| format!("t_{i}")).collect();
        let chain =
            CardChain::from_gaps(Interval::new(lower, upper), labels, gaps, precision, min_gap).map_err(invalid)?;
        put(out, FcChain { inner: chain })
    })
}

/// Parses a chain from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_from_json(json: *const c_char, out: *mut *mut FcChain) -> FcStatus {
    guard(|| {
        let chain: CardChain = parse(text(json, "json")?, "json")?;
        put(out, FcChain { inner: chain })
    })
}

/// # Safety
/// `chain` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_to_json(chain: *const FcChain, out: *mut *mut c_char) -> FcStatus {
    guard(|| {
        let chain = chain.as_ref().ok_or_else(|| null("chain"))?;
        emit_json(out, &chain.inner)
    })
}

/// Number of anchors; zero for NULL.
///
/// # Safety
/// `chain` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_anchor_count(chain: *const FcChain) -> usize {
    chain.as_ref().map_or(0, |c| c.inner.anchors().len())
}

/// Copies the gap counts into `out`. `written` receives the number of gaps
/// even when the buffer is too small.
///
/// # Safety
/// `chain` must be a live handle, `out` must hold `capacity` integers and
/// `written` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_gaps(
    chain: *const FcChain,
    out: *mut u64,
    capacity: usize,
    written: *mut usize,
) -> FcStatus {
    guard(|| {
        let chain = chain.as_ref().ok_or_else(|| null("chain"))?;
        copy_out(chain.inner.gaps(), out, capacity, written)
    })
}

/// Decodes every anchor to its value.
///
/// # Safety
/// As for [`fc_chain_gaps`], with `out` holding `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_decode(
    chain: *const FcChain,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> FcStatus {
    guard(|| {
        let chain = chain.as_ref().ok_or_else(|| null("chain"))?;
        copy_out(&chain.inner.values(), out, capacity, written)
    })
}

/// Applies one edit in place. `target_gap_index` is read only for moves.
/// On failure the chain is unchanged.
///
/// # Safety
/// `chain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_apply_edit(
    chain: *mut FcChain,
    kind: FcEditKind,
    gap_index: usize,
    target_gap_index: usize,
    count: u64,
) -> FcStatus {
    guard(|| {
        let chain = chain.as_mut().ok_or_else(|| null("chain"))?;
        let edit = match kind {
            FcEditKind::Insert => CardEdit::Insert { gap_index, count },
            FcEditKind::Remove => CardEdit::Remove { gap_index, count },
            FcEditKind::Move => CardEdit::Move { gap_index, target_gap_index, count },
        };
        chain.inner = chain.inner.apply(&edit).map_err(|e| Failure(FcStatus::InvalidEdit, e.to_string()))?;
        Ok(())
    })
}

/// # Safety
/// `chain` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_chain_free(chain: *mut FcChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Runs C-FKM on `n` observations within `[lower, upper]` and writes the
/// `k` centroids to `centroids`. `iterations` and `converged` may be NULL.
///
/// # Safety
/// `data` must hold `n` doubles and `centroids` room for `k`.
#[no_mangle]
pub unsafe extern "C" fn fc_cfkm_fit(
    data: *const f64,
    n: usize,
    lower: f64,
    upper: f64,
    k: usize,
    fuzzifier: f64,
    init: FcInit,
    tolerance: f64,
    max_iter: usize,
    centroids: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
) -> FcStatus {
    guard(|| {
        let samples = SampleSet::new(slice(data, n, "data")?.to_vec(), lower, upper).map_err(invalid)?;
        let init = match init {
            FcInit::Even => InitStrategy::Even,
            FcInit::Percentile => InitStrategy::Percentile,
        };
        let config = CfkmConfig::new(k)
            .with_fuzzifier(fuzzifier)
            .with_init(init)
            .with_tolerance(tolerance)
            .with_max_iter(max_iter);
        let fit = run_cfkm(&samples, &config).map_err(|e| Failure(FcStatus::Unprocessable, e.to_string()))?;
        copy_out(fit.centroids.as_slice(), centroids, k, ptr::null_mut())?;
        if !iterations.is_null() {
            *iterations = fit.report.iterations;
        }
        if !converged.is_null() {
            *converged = fit.report.converged;
        }
        Ok(())
    })
}

fn dataset(json: &str) -> Result<SampleSet, Failure> {
    let spec: DatasetSpec = parse(json, "dataset")?;
    spec.load().map_err(invalid)
}

/// Starts a session. `dataset_json` is a dataset document such as
/// `{"kind":"values","values":[...],"bounds":[a,b]}`; `params_json` may be
/// NULL for the defaults.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_new(
    dataset_json: *const c_char,
    params_json: *const c_char,
    out: *mut *mut FcSession,
) -> FcStatus {
    guard(|| {
        let data = dataset(text(dataset_json, "dataset_json")?)?;
        let params: SessionParams = optional_json(params_json, "params_json")?;
        put(out, FcSession { inner: Session::new(data, params)? })
    })
}

/// Restores a session from [`fc_session_to_json`] output.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_from_json(json: *const c_char, out: *mut *mut FcSession) -> FcStatus {
    guard(|| {
        let session: Session = parse(text(json, "json")?, "json")?;
        put(out, FcSession { inner: session })
    })
}

/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_to_json(session: *const FcSession, out: *mut *mut c_char) -> FcStatus {
    guard(|| emit_json(out, &session.as_ref().ok_or_else(|| null("session"))?.inner))
}

/// Writes the current stage name, e.g. `"step1_proposed"`.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_stage(session: *const FcSession, out: *mut *mut c_char) -> FcStatus {
    guard(|| {
        let stage = serde_json::to_value(session.as_ref().ok_or_else(|| null("session"))?.inner.stage())
            .expect("stages serialise");
        let name = stage.as_str().expect("stages are strings").to_string();
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(name).expect("no nul bytes").into_raw();
        Ok(())
    })
}

/// Produces the next proposal. `request_json` is NULL for Steps 1 and 2 and
/// `{"class":0,"side":"right","k_side":3}` for a Step-3 side.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_advance(
    session: *mut FcSession,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> FcStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        let request: AdvanceRequest = optional_json(request_json, "request_json")?;
        let proposal = session.inner.advance(&request)?;
        emit_json(out, &proposal)
    })
}

/// Applies a JSON array of edits to the open chain, all or nothing, and
/// returns the edited chain. `target` selects `"levels"` or `"breakpoints"`
/// in Step 3 and may be NULL otherwise.
///
/// # Safety
/// `session` must be a live handle; strings NUL-terminated or NULL where
/// allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_apply_edits(
    session: *mut FcSession,
    target: *const c_char,
    edits_json: *const c_char,
    out: *mut *mut c_char,
) -> FcStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        let target: Option<ChainTarget> = if target.is_null() {
            None
        } else {
            let name = serde_json::Value::String(text(target, "target")?.to_string());
            Some(serde_json::from_value(name).map_err(|e| invalid(format!("target: {e}")))?)
        };
        let edits: Vec<CardEdit> = parse(text(edits_json, "edits_json")?, "edits_json")?;
        let chain = session.inner.apply_edits(target, &edits)?;
        emit_json(out, &chain)
    })
}

/// Validates the open stage. `request_json` may be NULL to commit the
/// edited chains as they stand.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_commit(
    session: *mut FcSession,
    request_json: *const c_char,
    out: *mut *mut c_char,
) -> FcStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        let request: CommitRequest = optional_json(request_json, "request_json")?;
        let outcome = session.inner.commit(&request)?;
        emit_json(out, &outcome)
    })
}

/// Freezes the session and returns partition, centroids, cores and transcript.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_session_finalize(session: *mut FcSession, out: *mut *mut c_char) -> FcStatus {
    guard(|| {
        let session = session.as_mut().ok_or_else(|| null("session"))?;
        let output = session.inner.finalize()?;
        emit_json(out, &output)
    })
}

/// # Safety
/// `session` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fc_session_free(session: *mut FcSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Replays a transcript (a JSON array of entries) against a dataset.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fc_replay(
    dataset_json: *const c_char,
    transcript_json: *const c_char,
    mode: FcReplayMode,
    out: *mut *mut FcSession,
) -> FcStatus {
    guard(|| {
        let data = dataset(text(dataset_json, "dataset_json")?)?;
        let entries: Vec<TranscriptEntry> = parse(text(transcript_json, "transcript_json")?, "transcript_json")?;
        let mode = match mode {
            FcReplayMode::Strict => ReplayMode::Strict,
            FcReplayMode::Recorded => ReplayMode::Recorded,
        };
        let session = replay(data, &entries, mode).map_err(|e| Failure(FcStatus::ReplayFailed, e.to_string()))?;
        put(out, FcSession { inner: session })
    })
}
