//! C ABI for the ptyterm library: opaque handles, status codes, and
//! string-based exchange of terms, rationals, and derivation files.
//!
//! Every function returning `PtyStatus` stores a textual description of the
//! most recent failure in thread-local storage; fetch it with
//! [`ptyterm_last_error`]. Strings handed out by this library are
//! NUL-terminated, allocated by Rust, and must be released with
//! [`ptyterm_string_free`]; handles must be released with their matching
//! `_free` function.

use ptyterm::derivation::{check_derivation, parse_derivation, to_sexp, Derivation};
use ptyterm::multidist::fmt_rat;
use ptyterm::semantics::{et_approx, evaluate, p_approx};
use ptyterm::syntax::parse;
use ptyterm::transform::{null_complete, subject_reduce, tight_complete};
use ptyterm::types::{dist_norm, is_tight};
use ptyterm::{Mode, Term};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PtyStatus {
    PtyOk = 0,
    PtyParseError = 1,
    PtyEvalError = 2,
    PtyCheckError = 3,
    PtyTransformError = 4,
    PtyInvalidArgument = 5,
}

/// Evaluation mode selector.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PtyMode {
    PtyCbv = 0,
    PtyCbn = 1,
}

impl From<PtyMode> for Mode {
    fn from(m: PtyMode) -> Mode {
        match m {
            PtyMode::PtyCbv => Mode::Cbv,
            PtyMode::PtyCbn => Mode::Cbn,
        }
    }
}

/// Opaque handle to a parsed term and its mode.
pub struct PtyTerm {
    term: Term,
    mode: Mode,
}

/// Opaque handle to a checked derivation and its mode.
pub struct PtyDerivation {
    deriv: Derivation,
    mode: Mode,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into()).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn out_string(s: String, out: *mut *mut c_char) -> PtyStatus {
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            PtyStatus::PtyOk
        }
        Err(_) => {
            set_error("output contained an interior NUL byte");
            PtyStatus::PtyInvalidArgument
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, PtyStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(PtyStatus::PtyInvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        PtyStatus::PtyInvalidArgument
    })
}

/// Returns the message of the most recent failure on this thread, or NULL.
/// The caller owns the returned string.
#[no_mangle]
pub extern "C" fn ptyterm_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        Some(c) => c.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string produced by this library. NULL is ignored.
///
/// # Safety
/// `s` must have been returned by a `ptyterm_` function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `source` under `mode`, with optional CbV desugaring of non-value
/// applications. On success stores a new handle in `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_parse(
    source: *const c_char,
    mode: PtyMode,
    desugar: bool,
    out: *mut *mut PtyTerm,
) -> PtyStatus {
    let src = match read_str(source) {
        Ok(s) => s,
        Err(st) => return st,
    };
    match parse(src, mode.into(), desugar) {
        Ok(term) => {
            *out = Box::into_raw(Box::new(PtyTerm {
                term,
                mode: mode.into(),
            }));
            PtyStatus::PtyOk
        }
        Err(e) => {
            set_error(e.to_string());
            PtyStatus::PtyParseError
        }
    }
}

/// # Safety
/// `t` must be a live handle from [`ptyterm_parse`] (or NULL).
#[no_mangle]
pub unsafe extern "C" fn ptyterm_term_free(t: *mut PtyTerm) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Prints the term in the concrete grammar; the output re-parses.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_term_print(
    t: *const PtyTerm,
    out: *mut *mut c_char,
) -> PtyStatus {
    if t.is_null() {
        set_error("null term handle");
        return PtyStatus::PtyInvalidArgument;
    }
    out_string((*t).term.to_string(), out)
}

/// P^k: the probability of reaching a value within `steps` steps, written
/// as an exact rational.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_p_approx(
    t: *const PtyTerm,
    steps: usize,
    out: *mut *mut c_char,
) -> PtyStatus {
    if t.is_null() {
        set_error("null term handle");
        return PtyStatus::PtyInvalidArgument;
    }
    let h = &*t;
    match p_approx(&h.term, steps, h.mode) {
        Ok(p) => out_string(fmt_rat(&p), out),
        Err(e) => {
            set_error(e.to_string());
            PtyStatus::PtyEvalError
        }
    }
}

/// eT^k: the expected-runtime approximant, written as an exact rational.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_et_approx(
    t: *const PtyTerm,
    steps: usize,
    out: *mut *mut c_char,
) -> PtyStatus {
    if t.is_null() {
        set_error("null term handle");
        return PtyStatus::PtyInvalidArgument;
    }
    let h = &*t;
    match et_approx(&h.term, steps, h.mode) {
        Ok(p) => out_string(fmt_rat(&p), out),
        Err(e) => {
            set_error(e.to_string());
            PtyStatus::PtyEvalError
        }
    }
}

/// The first `steps`+1 states of the reduction sequence, one per line,
/// each as `<p term, ...>`.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_eval_trace(
    t: *const PtyTerm,
    steps: usize,
    out: *mut *mut c_char,
) -> PtyStatus {
    if t.is_null() {
        set_error("null term handle");
        return PtyStatus::PtyInvalidArgument;
    }
    let h = &*t;
    match evaluate(&h.term, steps, h.mode) {
        Ok(trace) => {
            let text = trace
                .states
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("\n");
            out_string(text, out)
        }
        Err(e) => {
            set_error(e.to_string());
            PtyStatus::PtyEvalError
        }
    }
}

/// Parses a derivation file and checks every node. On success stores a new
/// handle in `*out`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_derivation_parse(
    source: *const c_char,
    mode: PtyMode,
    out: *mut *mut PtyDerivation,
) -> PtyStatus {
    let src = match read_str(source) {
        Ok(s) => s,
        Err(st) => return st,
    };
    let mode: Mode = mode.into();
    let deriv = match parse_derivation(src, mode) {
        Ok(d) => d,
        Err(e) => {
            set_error(e.to_string());
            return PtyStatus::PtyParseError;
        }
    };
    if let Err(e) = check_derivation(&deriv, mode) {
        set_error(e.to_string());
        return PtyStatus::PtyCheckError;
    }
    *out = Box::into_raw(Box::new(PtyDerivation { deriv, mode }));
    PtyStatus::PtyOk
}

/// # Safety
/// `d` must be a live handle (or NULL).
#[no_mangle]
pub unsafe extern "C" fn ptyterm_derivation_free(d: *mut PtyDerivation) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Serializes the derivation in the s-expression file format.
///
/// # Safety
/// `d` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_derivation_print(
    d: *const PtyDerivation,
    out: *mut *mut c_char,
) -> PtyStatus {
    if d.is_null() {
        set_error("null derivation handle");
        return PtyStatus::PtyInvalidArgument;
    }
    out_string(to_sexp(&(*d).deriv), out)
}

/// One-line summary `weight=<rat> type=<type> tight=<bool> norm=<rat|n/a>`,
/// matching the `check` subcommand of the CLI.
///
/// # Safety
/// `d` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_derivation_summary(
    d: *const PtyDerivation,
    out: *mut *mut c_char,
) -> PtyStatus {
    if d.is_null() {
        set_error("null derivation handle");
        return PtyStatus::PtyInvalidArgument;
    }
    let h = &*d;
    let j = &h.deriv.conclusion;
    let norm = match dist_norm(&j.rhs) {
        Some(n) => fmt_rat(&n),
        None => "n/a".to_string(),
    };
    out_string(
        format!(
            "weight={} type={} tight={} norm={}",
            fmt_rat(&j.weight),
            j.rhs,
            is_tight(&j.rhs, h.mode),
            norm
        ),
        out,
    )
}

/// Synthesizes a tight derivation (or a null one when `null_type` is set)
/// witnessing the k-step approximants of the term.
///
/// # Safety
/// `t` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_synthesize(
    t: *const PtyTerm,
    steps: usize,
    null_type: bool,
    out: *mut *mut PtyDerivation,
) -> PtyStatus {
    if t.is_null() {
        set_error("null term handle");
        return PtyStatus::PtyInvalidArgument;
    }
    let h = &*t;
    let result = if null_type {
        null_complete(&h.term, steps, h.mode)
    } else {
        tight_complete(&h.term, steps, h.mode)
    };
    match result {
        Ok(deriv) => {
            *out = Box::into_raw(Box::new(PtyDerivation {
                deriv,
                mode: h.mode,
            }));
            PtyStatus::PtyOk
        }
        Err(e) => {
            set_error(e.to_string());
            PtyStatus::PtyTransformError
        }
    }
}

/// Applies weighted subject reduction and returns the branch derivations as
/// a stream of s-expressions separated by blank lines.
///
/// # Safety
/// `d` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ptyterm_subject_reduce(
    d: *const PtyDerivation,
    out: *mut *mut c_char,
) -> PtyStatus {
    if d.is_null() {
        set_error("null derivation handle");
        return PtyStatus::PtyInvalidArgument;
    }
    let h = &*d;
    match subject_reduce(&h.deriv, h.mode) {
        Ok(branches) => {
            let text = branches
                .iter()
                .map(to_sexp)
                .collect::<Vec<_>>()
                .join("\n\n");
            out_string(text, out)
        }
        Err(e) => {
            set_error(e.to_string());
            PtyStatus::PtyTransformError
        }
    }
}
