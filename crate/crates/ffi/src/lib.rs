//! C ABI over `logicsent`.
//!
//! Every function returns an [`LsStatus`]; results go through out
//! pointers. On failure a message for the calling thread is available from
//! [`ls_last_error`]. Models are opaque handles released with
//! [`ls_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use logicsent::cnn::{load_checkpoint, Classifier, ModelParams, ProbDist};
use logicsent::crowd::{classify_with_threshold, fleiss_kappa, CrowdLabel, JudgmentRecord};
use logicsent::dataset::{encode_ids, Encoded};
use logicsent::rules::{kl_divergence, project, ProjectionConfig, RuleScore, PROB_CLAMP};
use logicsent::sst::Label;
use logicsent::stats::{ks_test, summarize};
use logicsent::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Numeric = 5,
    /// The statistic is undefined for this input (e.g. kappa with a single
    /// category in use).
    Undefined = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsCrowdLabel {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsKsResult {
    pub d: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsSummary {
    pub n: usize,
    pub mean: f64,
    /// NaN for a single value.
    pub ci95: f64,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

/// A trained classifier loaded from a checkpoint.
pub struct LsModel {
    params: ModelParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Io { .. } => LsStatus::Io,
        Error::Format { .. } | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => {
            LsStatus::Format
        }
        Error::Numeric(_) | Error::Divergence { .. } => LsStatus::Numeric,
        Error::StaleCache => LsStatus::Internal,
        _ => LsStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (LsStatus, String)>>(f: F) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LsStatus::Internal
        }
    }
}

type Failure = (LsStatus, String);

fn lib(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> Failure {
    (LsStatus::NullPointer, format!("`{name}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    (LsStatus::InvalidArgument, msg.into())
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for one write.
unsafe fn write<T>(ptr: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    ptr.write(value);
    Ok(())
}

fn dist(pos: f64) -> Result<ProbDist, Failure> {
    ProbDist::new(pos, 1.0 - pos).map_err(lib)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ls_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Projects `p(+) = p_pos` under rule score `(r_pos, r_neg)` with strength
/// `c`; writes `q(+)`.
///
/// # Safety
/// `q_pos` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_project(
    p_pos: f64,
    r_pos: f64,
    r_neg: f64,
    c: f64,
    q_pos: *mut f64,
) -> LsStatus {
    guard(|| {
        let p = dist(p_pos)?.clamped(PROB_CLAMP);
        let r = RuleScore::new(r_pos, r_neg).map_err(lib)?;
        let cfg = ProjectionConfig::new(c).map_err(lib)?;
        let q = project(p, r, cfg).map_err(lib)?;
        write(q_pos, q.pos, "q_pos")
    })
}

/// `KL(q || p)` in nats for binary distributions given by their positive
/// mass. May be infinite.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_kl_divergence(q_pos: f64, p_pos: f64, out: *mut f64) -> LsStatus {
    guard(|| {
        let kl = kl_divergence(dist(q_pos)?, dist(p_pos)?);
        write(out, kl, "out")
    })
}

/// Two-sided two-sample Kolmogorov-Smirnov test.
///
/// # Safety
/// `a` and `b` must be valid for `n_a` and `n_b` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_ks_test(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    alpha: f64,
    out: *mut LsKsResult,
) -> LsStatus {
    guard(|| {
        let r = ks_test(slice(a, n_a, "a")?, slice(b, n_b, "b")?, alpha).map_err(lib)?;
        write(
            out,
            LsKsResult {
                d: r.d,
                p_value: r.p_value,
                significant: r.significant,
            },
            "out",
        )
    })
}

/// Mean, 95% interval half-width and quartiles.
///
/// # Safety
/// `values` must be valid for `n` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_summarize(
    values: *const f64,
    n: usize,
    out: *mut LsSummary,
) -> LsStatus {
    guard(|| {
        let s = summarize(slice(values, n, "values")?).map_err(lib)?;
        write(
            out,
            LsSummary {
                n: s.n,
                mean: s.mean,
                ci95: s.ci95.unwrap_or(f64::NAN),
                min: s.min,
                p25: s.p25,
                p50: s.p50,
                p75: s.p75,
                max: s.max,
            },
            "out",
        )
    })
}

/// Fleiss' kappa of `n_items × n_raters` scores (row-major), each 0, 0.5
/// or 1. Returns `LS_STATUS_UNDEFINED` when only one category is used.
///
/// # Safety
/// `scores` must be valid for `n_items * n_raters` reads; `out` for one
/// write.
#[no_mangle]
pub unsafe extern "C" fn ls_fleiss_kappa(
    scores: *const f64,
    n_items: usize,
    n_raters: usize,
    out: *mut f64,
) -> LsStatus {
    guard(|| {
        let len = n_items
            .checked_mul(n_raters)
            .ok_or_else(|| invalid("n_items * n_raters overflows"))?;
        let all = slice(scores, len, "scores")?;
        if n_raters == 0 {
            return Err(invalid("n_raters must be positive"));
        }
        let records: Vec<JudgmentRecord> = all
            .chunks(n_raters)
            .enumerate()
            .map(|(i, s)| JudgmentRecord {
                sentence_id: i.to_string(),
                sst2_label: Label::Positive,
                scores: s.to_vec(),
            })
            .collect();
        match fleiss_kappa(&records).map_err(lib)? {
            Some(k) => write(out, k, "out"),
            None => Err((
                LsStatus::Undefined,
                "kappa is undefined: one category only".into(),
            )),
        }
    })
}

/// Crowd label of a mean score at ambiguity threshold `x` in `[0.5, 1)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_crowd_classify(mean: f64, x: f64, out: *mut LsCrowdLabel) -> LsStatus {
    guard(|| {
        let l = match classify_with_threshold(mean, x).map_err(lib)? {
            CrowdLabel::Negative => LsCrowdLabel::Negative,
            CrowdLabel::Neutral => LsCrowdLabel::Neutral,
            CrowdLabel::Positive => LsCrowdLabel::Positive,
        };
        write(out, l, "out")
    })
}

/// Loads a model checkpoint. Release the handle with [`ls_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_model_load(path: *const c_char, out: *mut *mut LsModel) -> LsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        let (params, _) = load_checkpoint(Path::new(path)).map_err(lib)?;
        out.write(Box::into_raw(Box::new(LsModel { params })));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`ls_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ls_model_free(model: *mut LsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input vector size of the model.
///
/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_model_dim(model: *const LsModel, out: *mut usize) -> LsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write(out, m.params.dim, "out")
    })
}

/// Whether the model carries its own word-embedding table, i.e. accepts
/// tokens rather than vectors.
///
/// # Safety
/// `model` must be a live handle; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_model_has_vocabulary(
    model: *const LsModel,
    out: *mut bool,
) -> LsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        write(out, m.params.embeddings.is_some(), "out")
    })
}

unsafe fn tokens_input(
    m: &LsModel,
    tokens: *const *const c_char,
    n_tokens: usize,
) -> Result<Encoded, Failure> {
    let table = m
        .params
        .embeddings
        .as_ref()
        .ok_or_else(|| invalid("model has no vocabulary; pass vectors"))?;
    let words = slice(tokens, n_tokens, "tokens")?
        .iter()
        .map(|&t| {
            if t.is_null() {
                return Err(null("token"));
            }
            CStr::from_ptr(t)
                .to_str()
                .map(str::to_lowercase)
                .map_err(|_| invalid("token is not UTF-8"))
        })
        .collect::<Result<Vec<String>, Failure>>()?;
    Ok(encode_ids(table, &words))
}

fn predict(m: &LsModel, input: &Encoded) -> Result<ProbDist, Failure> {
    if input.is_empty() {
        return Err(invalid("empty sentence"));
    }
    m.params.predict(input).map_err(lib)
}

/// `p(+ | sentence)` for a tokenized sentence. Unknown words read as zero
/// vectors.
///
/// # Safety
/// `model` must be a live handle; `tokens` valid for `n_tokens` pointers to
/// NUL-terminated strings; `p_pos` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_model_predict_tokens(
    model: *const LsModel,
    tokens: *const *const c_char,
    n_tokens: usize,
    p_pos: *mut f64,
) -> LsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let p = predict(m, &tokens_input(m, tokens, n_tokens)?)?;
        write(p_pos, p.pos, "p_pos")
    })
}

/// `p(+ | sentence)` for `n_tokens` row-major vectors of the model's
/// dimension.
///
/// # Safety
/// `model` must be a live handle; `vectors` valid for `n_tokens * dim`
/// reads; `p_pos` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_model_predict_vectors(
    model: *const LsModel,
    vectors: *const f64,
    n_tokens: usize,
    p_pos: *mut f64,
) -> LsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let dim = m.params.dim;
        let len = n_tokens
            .checked_mul(dim)
            .ok_or_else(|| invalid("n_tokens * dim overflows"))?;
        let input = Encoded::Vectors {
            dim,
            data: slice(vectors, len, "vectors")?.to_vec(),
        };
        let p = predict(m, &input)?;
        write(p_pos, p.pos, "p_pos")
    })
}

/// Raw and rule-projected `p(+)` for a tokenized sentence whose B clause is
/// `tokens[b_start..b_end]`. Pass `b_start == b_end` for sentences without
/// the A-but-B structure; then `q_pos == p_pos`.
///
/// # Safety
/// As [`ls_model_predict_tokens`]; `p_pos` and `q_pos` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ls_model_project_tokens(
    model: *const LsModel,
    tokens: *const *const c_char,
    n_tokens: usize,
    b_start: usize,
    b_end: usize,
    c: f64,
    p_pos: *mut f64,
    q_pos: *mut f64,
) -> LsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if b_start > b_end || b_end > n_tokens {
            return Err(invalid(format!(
                "B clause {b_start}..{b_end} outside 0..{n_tokens}"
            )));
        }
        let cfg = ProjectionConfig::new(c).map_err(lib)?;
        let input = tokens_input(m, tokens, n_tokens)?;
        let p = predict(m, &input)?.clamped(PROB_CLAMP);
        let r = if b_start == b_end {
            RuleScore::VACUOUS
        } else {
            predict(m, &input.slice(b_start, b_end))?.into()
        };
        let q = project(p, r, cfg).map_err(lib)?;
        write(p_pos, p.pos, "p_pos")?;
        write(q_pos, q.pos, "q_pos")
    })
}
