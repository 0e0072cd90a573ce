//! C ABI over `misinfo-core`.
//!
//! Conventions:
//! - Every fallible function returns a [`MisinfoStatus`]; results go through
//!   out-pointers. On failure, [`misinfo_last_error`] describes the problem.
//! - Objects are opaque handles created by `*_new` / `*_load` and released
//!   with the matching `*_free`. Passing NULL to a free function is a no-op.
//! - Strings returned through `char **` are owned by the caller and must be
//!   released with [`misinfo_string_free`].
//! - Handles are immutable after creation and may be shared across threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use misinfo_core::annotation::{majority_vote, LabelClass, VoteStatus};
use misinfo_core::corpus::{load_glossary, Glossary};
use misinfo_core::eval::{self, ConfusionMatrix};
use misinfo_core::features::{vectorize, BinaryLabel, FeatureSpace};
use misinfo_core::filtering::KeywordMatcher;
use misinfo_core::models::TrainedModel;
use misinfo_core::preprocess::{preprocess_text, StopwordSet, TokenSequence};
use misinfo_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisinfoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Format = 4,
    Schema = 5,
    Validation = 6,
    NotFound = 7,
    UnresolvedTies = 8,
    Contract = 9,
    Degenerate = 10,
    Numeric = 11,
    Version = 12,
    SpaceMismatch = 13,
    Panic = 14,
}

impl From<&Error> for MisinfoStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io { .. } => MisinfoStatus::Io,
            Error::Format { .. } => MisinfoStatus::Format,
            Error::Schema(_) => MisinfoStatus::Schema,
            Error::Validation(_) => MisinfoStatus::Validation,
            Error::NotFound(_) => MisinfoStatus::NotFound,
            Error::UnresolvedTies(_) => MisinfoStatus::UnresolvedTies,
            Error::Contract(_) => MisinfoStatus::Contract,
            Error::Degenerate(_) => MisinfoStatus::Degenerate,
            Error::Numeric { .. } => MisinfoStatus::Numeric,
            Error::Version { .. } => MisinfoStatus::Version,
            Error::SpaceMismatch { .. } => MisinfoStatus::SpaceMismatch,
        }
    }
}

/// Binary class of a prediction or metric view.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisinfoLabel {
    M = 0,
    T = 1,
}

impl From<BinaryLabel> for MisinfoLabel {
    fn from(l: BinaryLabel) -> Self {
        match l {
            BinaryLabel::M => MisinfoLabel::M,
            BinaryLabel::T => MisinfoLabel::T,
        }
    }
}

impl From<MisinfoLabel> for BinaryLabel {
    fn from(l: MisinfoLabel) -> Self {
        match l {
            MisinfoLabel::M => BinaryLabel::M,
            MisinfoLabel::T => BinaryLabel::T,
        }
    }
}

/// The five annotation classes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisinfoAnnotationLabel {
    T = 0,
    M = 1,
    I = 2,
    N = 3,
    U = 4,
}

impl From<MisinfoAnnotationLabel> for LabelClass {
    fn from(l: MisinfoAnnotationLabel) -> Self {
        match l {
            MisinfoAnnotationLabel::T => LabelClass::T,
            MisinfoAnnotationLabel::M => LabelClass::M,
            MisinfoAnnotationLabel::I => LabelClass::I,
            MisinfoAnnotationLabel::N => LabelClass::N,
            MisinfoAnnotationLabel::U => LabelClass::U,
        }
    }
}

impl From<LabelClass> for MisinfoAnnotationLabel {
    fn from(l: LabelClass) -> Self {
        match l {
            LabelClass::T => MisinfoAnnotationLabel::T,
            LabelClass::M => MisinfoAnnotationLabel::M,
            LabelClass::I => MisinfoAnnotationLabel::I,
            LabelClass::N => MisinfoAnnotationLabel::N,
            LabelClass::U => MisinfoAnnotationLabel::U,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisinfoPrediction {
    pub label: MisinfoLabel,
    /// Positive favours T.
    pub score: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisinfoClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MisinfoVote {
    /// 0 decided, 1 tie, 2 no labels.
    pub status: u32,
    /// Valid only when `status` is 0.
    pub decided: MisinfoAnnotationLabel,
    pub needs_adjudication: bool,
}

/// Stopword lists plus the text pipeline.
pub struct MisinfoPreprocessor {
    stopwords: StopwordSet,
}

/// A compiled keyword glossary.
pub struct MisinfoMatcher {
    matcher: KeywordMatcher,
}

/// A trained classifier with its feature space.
pub struct MisinfoModel {
    model: TrainedModel,
    space: FeatureSpace,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(MisinfoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MisinfoStatus::from(&e), e.to_string())
    }
}

/// Runs `f`, recording failures and panics in the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MisinfoStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MisinfoStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {msg}"));
            MisinfoStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MisinfoStatus::NullArgument, format!("{what} is NULL"))
}

/// # Safety
/// `p` is NULL or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(MisinfoStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` is NULL or a valid NUL-terminated string.
unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    opt_str(p, what)?.ok_or_else(|| null(what))
}

fn out_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string(v).map_err(|e| Failure(MisinfoStatus::Validation, e.to_string()))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn misinfo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version string (static, do not free).
#[no_mangle]
pub extern "C" fn misinfo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is NULL or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn misinfo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a preprocessor. `stopword_dir` may be NULL for the bundled lists;
/// otherwise it names a directory holding `stopwords.english` and
/// `stopwords.trivial`.
///
/// # Safety
/// `stopword_dir` is NULL or a valid C string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_preprocessor_new(
    stopword_dir: *const c_char,
    out: *mut *mut MisinfoPreprocessor,
) -> MisinfoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let stopwords = match opt_str(stopword_dir, "stopword_dir")? {
            Some(d) => StopwordSet::load_dir(Path::new(d))?,
            None => StopwordSet::default_bundled()?,
        };
        *out = Box::into_raw(Box::new(MisinfoPreprocessor { stopwords }));
        Ok(())
    })
}

/// # Safety
/// `p` is NULL or a handle from [`misinfo_preprocessor_new`].
#[no_mangle]
pub unsafe extern "C" fn misinfo_preprocessor_free(p: *mut MisinfoPreprocessor) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Stems of `text` as a JSON array of strings, written to `*out_json`.
///
/// # Safety
/// `p` is a live preprocessor, `text` a valid C string, `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_preprocess(
    p: *const MisinfoPreprocessor,
    text: *const c_char,
    out_json: *mut *mut c_char,
) -> MisinfoStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("preprocessor"))?;
        let text = req_str(text, "text")?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        *out_json = out_string(to_json(&preprocess_text(text, &p.stopwords))?);
        Ok(())
    })
}

/// Compiles a glossary file, or the bundled glossary when `glossary_path` is NULL.
///
/// # Safety
/// `glossary_path` is NULL or a valid C string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_matcher_new(
    glossary_path: *const c_char,
    out: *mut *mut MisinfoMatcher,
) -> MisinfoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let glossary = match opt_str(glossary_path, "glossary_path")? {
            Some(p) => load_glossary(Path::new(p))?,
            None => Glossary::default_bundled()?,
        };
        *out = Box::into_raw(Box::new(MisinfoMatcher {
            matcher: KeywordMatcher::new(&glossary),
        }));
        Ok(())
    })
}

/// # Safety
/// `m` is NULL or a handle from [`misinfo_matcher_new`].
#[no_mangle]
pub unsafe extern "C" fn misinfo_matcher_free(m: *mut MisinfoMatcher) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Sets `*matched` and, when `out_json` is not NULL, writes the matches as a
/// JSON array of `{keyword, source}` objects.
///
/// # Safety
/// `m` is a live matcher, `text` a valid C string, `matched` a valid
/// pointer, `out_json` NULL or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_matcher_match(
    m: *const MisinfoMatcher,
    text: *const c_char,
    matched: *mut bool,
    out_json: *mut *mut c_char,
) -> MisinfoStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("matcher"))?;
        let text = req_str(text, "text")?;
        if matched.is_null() {
            return Err(null("matched"));
        }
        let found = m.matcher.matches(text);
        *matched = !found.is_empty();
        if !out_json.is_null() {
            *out_json = out_string(to_json(&found)?);
        }
        Ok(())
    })
}

/// Loads a model file and its feature space. `space_path` may be NULL, in
/// which case `<model_path>.space.json` is used.
///
/// # Safety
/// `model_path` is a valid C string, `space_path` NULL or a valid C string,
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_model_load(
    model_path: *const c_char,
    space_path: *const c_char,
    out: *mut *mut MisinfoModel,
) -> MisinfoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model_path = PathBuf::from(req_str(model_path, "model_path")?);
        let space_path = match opt_str(space_path, "space_path")? {
            Some(p) => PathBuf::from(p),
            None => {
                let mut s = model_path.as_os_str().to_owned();
                s.push(".space.json");
                PathBuf::from(s)
            }
        };
        let model = TrainedModel::load(&model_path)?;
        let space = FeatureSpace::load(&space_path)?;
        if space.id() != model.space.digest {
            return Err(Error::SpaceMismatch {
                expected: model.space.digest.to_string(),
                found: space.id().to_string(),
            }
            .into());
        }
        *out = Box::into_raw(Box::new(MisinfoModel { model, space }));
        Ok(())
    })
}

/// # Safety
/// `m` is NULL or a handle from [`misinfo_model_load`].
#[no_mangle]
pub unsafe extern "C" fn misinfo_model_free(m: *mut MisinfoModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

fn predict_tokens(m: &MisinfoModel, tokens: Vec<String>) -> Result<MisinfoPrediction, Failure> {
    let doc = TokenSequence {
        tweet_id: String::new(),
        tokens,
        label: None,
    };
    let p = m.model.predict(&vectorize(&doc, &m.space))?;
    Ok(MisinfoPrediction {
        label: p.label.into(),
        score: p.score,
    })
}

/// Classifies already-preprocessed tokens.
///
/// # Safety
/// `m` is a live model; `tokens` points to `n` valid C strings (may be
/// NULL when `n` is 0); `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_model_predict_tokens(
    m: *const MisinfoModel,
    tokens: *const *const c_char,
    n: usize,
    out: *mut MisinfoPrediction,
) -> MisinfoStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if tokens.is_null() && n > 0 {
            return Err(null("tokens"));
        }
        let mut owned = Vec::with_capacity(n);
        for i in 0..n {
            owned.push(req_str(*tokens.add(i), "token")?.to_string());
        }
        *out = predict_tokens(m, owned)?;
        Ok(())
    })
}

/// Preprocesses `text` with `p` and classifies it with `m`.
///
/// # Safety
/// `m` and `p` are live handles, `text` a valid C string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_model_predict_text(
    m: *const MisinfoModel,
    p: *const MisinfoPreprocessor,
    text: *const c_char,
    out: *mut MisinfoPrediction,
) -> MisinfoStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("model"))?;
        let p = p.as_ref().ok_or_else(|| null("preprocessor"))?;
        let text = req_str(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = predict_tokens(m, preprocess_text(text, &p.stopwords))?;
        Ok(())
    })
}

/// Precision, recall and F1 of class `c` for a confusion matrix given in
/// the M-positive view.
///
/// # Safety
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_class_metrics(
    tp_m: u64,
    fp_m: u64,
    fn_m: u64,
    tn_m: u64,
    c: MisinfoLabel,
    out: *mut MisinfoClassMetrics,
) -> MisinfoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cm = ConfusionMatrix { tp_m, fp_m, fn_m, tn_m };
        let m = eval::class_metrics(&cm, c.into());
        *out = MisinfoClassMetrics {
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        };
        Ok(())
    })
}

/// Accuracy (mean of per-class accuracies) and macro-F1.
///
/// # Safety
/// `accuracy` and `macro_f1` are valid pointers.
#[no_mangle]
pub unsafe extern "C" fn misinfo_aggregate(
    tp_m: u64,
    fp_m: u64,
    fn_m: u64,
    tn_m: u64,
    accuracy: *mut f64,
    macro_f1: *mut f64,
) -> MisinfoStatus {
    guard(|| {
        if accuracy.is_null() || macro_f1.is_null() {
            return Err(null("accuracy/macro_f1"));
        }
        let (a, f) = eval::aggregate(&ConfusionMatrix { tp_m, fp_m, fn_m, tn_m });
        *accuracy = a;
        *macro_f1 = f;
        Ok(())
    })
}

/// Plurality vote over `n` annotation labels.
///
/// # Safety
/// `labels` points to `n` valid values (may be NULL when `n` is 0); `out`
/// is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn misinfo_majority_vote(
    labels: *const MisinfoAnnotationLabel,
    n: usize,
    out: *mut MisinfoVote,
) -> MisinfoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if labels.is_null() && n > 0 {
            return Err(null("labels"));
        }
        let slice = if n == 0 { &[][..] } else { std::slice::from_raw_parts(labels, n) };
        let classes: Vec<LabelClass> = slice.iter().map(|&l| l.into()).collect();
        let vote = majority_vote(&classes);
        *out = MisinfoVote {
            status: match vote.status {
                VoteStatus::Decided => 0,
                VoteStatus::Tie => 1,
                VoteStatus::Unlabeled => 2,
            },
            decided: vote.decided.map_or(MisinfoAnnotationLabel::U, Into::into),
            needs_adjudication: vote.needs_adjudication(),
        };
        Ok(())
    })
}
