//! C ABI over the lsgen core.
//!
//! Every fallible function returns an [`LsgenStatus`]; on failure the
//! message is available from [`lsgen_last_error`] on the same thread until
//! the next failing call. Formulas are opaque handles released with
//! [`lsgen_formula_free`]; strings returned by the library are released with
//! [`lsgen_string_free`]. Assignments cross the boundary as one byte per
//! variable (`0` false, anything else true), variable `i` at index `i - 1`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::time::Duration;

use lsgen::cnf::{conflict_score, count_unsat, parse_dimacs};
use lsgen::encodings::scheme_by_name;
use lsgen::localsearch::{walksat, SearchParams};
use lsgen::scoring::{significance, Significance};
use lsgen::solver::{mini_solve, SolveStatus};
use lsgen::{Assignment, CnfFormula, Var};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsgenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    EncodeError = 4,
    InvalidArgument = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsgenSolveResult {
    Sat = 10,
    Unsat = 20,
    Timeout = 0,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsgenSignificance {
    Better = -1,
    NoChange = 0,
    Worse = 1,
}

/// Opaque CNF formula.
pub struct LsgenFormula {
    inner: CnfFormula,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Failure = (LsgenStatus, String);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> LsgenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LsgenStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LsgenStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (LsgenStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (LsgenStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn formula_arg<'a>(f: *const LsgenFormula) -> Result<&'a CnfFormula, Failure> {
    f.as_ref().map(|f| &f.inner).ok_or_else(|| null("formula"))
}

unsafe fn values_arg(values: *const u8, len: usize, num_vars: u32) -> Result<Assignment, Failure> {
    if len != num_vars as usize {
        return Err((
            LsgenStatus::InvalidArgument,
            format!("{len} values given for {num_vars} variables"),
        ));
    }
    if len == 0 {
        return Ok(Assignment::new(0));
    }
    if values.is_null() {
        return Err(null("values"));
    }
    let bools: Vec<bool> = std::slice::from_raw_parts(values, len).iter().map(|&b| b != 0).collect();
    Ok(Assignment::from_bools(&bools))
}

unsafe fn write_values(out: *mut u8, len: usize, a: &Assignment) -> Result<(), Failure> {
    if len == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let dst = std::slice::from_raw_parts_mut(out, len);
    for (d, b) in dst.iter_mut().zip(a.to_bools(false)) {
        *d = u8::from(b);
    }
    Ok(())
}

fn timeout_arg(seconds: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(seconds).map_err(|_| (LsgenStatus::InvalidArgument, format!("bad timeout {seconds}")))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lsgen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses DIMACS CNF text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lsgen_formula_parse(text: *const c_char, out: *mut *mut LsgenFormula) -> LsgenStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let f = parse_dimacs(text.as_bytes()).map_err(|e| (LsgenStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(LsgenFormula { inner: f }));
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lsgen_formula_free(f: *mut LsgenFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// # Safety
/// `f` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn lsgen_formula_num_vars(f: *const LsgenFormula) -> u32 {
    f.as_ref().map_or(0, |f| f.inner.num_vars())
}

/// # Safety
/// `f` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn lsgen_formula_num_clauses(f: *const LsgenFormula) -> usize {
    f.as_ref().map_or(0, |f| f.inner.num_clauses())
}

/// Number of clauses falsified by a total assignment.
///
/// # Safety
/// `values` must hold `len` bytes and `out_unsat` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lsgen_count_unsat(
    f: *const LsgenFormula,
    values: *const u8,
    len: usize,
    out_unsat: *mut usize,
) -> LsgenStatus {
    guard(|| {
        let f = formula_arg(f)?;
        let a = values_arg(values, len, f.num_vars())?;
        if out_unsat.is_null() {
            return Err(null("out_unsat"));
        }
        *out_unsat = count_unsat(f, &a).unsat;
        Ok(())
    })
}

/// Make and break counts for flipping variable `var` (1-based).
///
/// # Safety
/// `values` must hold `len` bytes; `out_make` and `out_break` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lsgen_conflict_score(
    f: *const LsgenFormula,
    values: *const u8,
    len: usize,
    var: u32,
    out_make: *mut u32,
    out_break: *mut u32,
) -> LsgenStatus {
    guard(|| {
        let f = formula_arg(f)?;
        let a = values_arg(values, len, f.num_vars())?;
        if var == 0 || var > f.num_vars() {
            return Err((LsgenStatus::InvalidArgument, format!("variable {var} out of range")));
        }
        if out_make.is_null() || out_break.is_null() {
            return Err(null("output"));
        }
        let s = conflict_score(f, &a, Var::new(var));
        *out_make = s.make;
        *out_break = s.brk;
        Ok(())
    })
}

/// Encodes an instance with a named scheme (`coloring`, `dfvs`, `bddt`).
/// A negative `bound` selects the scheme's heuristic bound. The variable
/// map is returned as JSON and must be released with `lsgen_string_free`.
///
/// # Safety
/// String arguments must be NUL-terminated; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lsgen_encode(
    scheme: *const c_char,
    instance: *const c_char,
    bound: i64,
    out_formula: *mut *mut LsgenFormula,
    out_varmap_json: *mut *mut c_char,
    out_bound: *mut i64,
) -> LsgenStatus {
    guard(|| {
        if out_formula.is_null() || out_varmap_json.is_null() {
            return Err(null("output"));
        }
        let scheme = scheme_by_name(str_arg(scheme, "scheme")?).map_err(|e| (LsgenStatus::InvalidArgument, e.to_string()))?;
        let instance = str_arg(instance, "instance")?;
        let enc = scheme
            .encode(instance.as_bytes(), (bound >= 0).then_some(bound))
            .map_err(|e| (LsgenStatus::EncodeError, e.to_string()))?;
        let json = CString::new(enc.varmap.to_json()).map_err(|e| (LsgenStatus::EncodeError, e.to_string()))?;
        if !out_bound.is_null() {
            *out_bound = enc.bound;
        }
        *out_varmap_json = json.into_raw();
        *out_formula = Box::into_raw(Box::new(LsgenFormula { inner: enc.formula }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn lsgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// WalkSAT from a random start. `max_flips` of 0 means unlimited. Writes
/// the best assignment into `out_values` (`len` = number of variables).
///
/// # Safety
/// `out_values` must hold `len` bytes and `out_found` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lsgen_walksat(
    f: *const LsgenFormula,
    seed: u64,
    max_flips: u64,
    timeout_secs: f64,
    out_values: *mut u8,
    len: usize,
    out_found: *mut bool,
) -> LsgenStatus {
    guard(|| {
        let f = formula_arg(f)?;
        if len != f.num_vars() as usize {
            return Err((LsgenStatus::InvalidArgument, format!("buffer of {len} for {} variables", f.num_vars())));
        }
        if out_found.is_null() {
            return Err(null("out_found"));
        }
        let p = SearchParams {
            soft_timeout: timeout_secs,
            max_flips: (max_flips > 0).then_some(max_flips),
            ..SearchParams::with_seed(seed)
        };
        p.validate().map_err(|e| (LsgenStatus::InvalidArgument, e))?;
        let out = walksat(f, &p);
        write_values(out_values, len, &out.assignment)?;
        *out_found = out.found_model;
        Ok(())
    })
}

/// Runs the mini solver with the given phases. On SAT the model is written
/// into `out_model` (`len` bytes); it is left untouched otherwise.
///
/// # Safety
/// `phases` and `out_model` must hold `len` bytes; `out_result` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lsgen_mini_solve(
    f: *const LsgenFormula,
    phases: *const u8,
    len: usize,
    timeout_secs: f64,
    out_model: *mut u8,
    out_result: *mut LsgenSolveResult,
) -> LsgenStatus {
    guard(|| {
        let f = formula_arg(f)?;
        let phases = values_arg(phases, len, f.num_vars())?;
        let timeout = timeout_arg(timeout_secs)?;
        if out_result.is_null() {
            return Err(null("out_result"));
        }
        let out = mini_solve(f, &phases, timeout);
        *out_result = match &out.status {
            SolveStatus::Sat(model) => {
                write_values(out_model, len, model)?;
                LsgenSolveResult::Sat
            }
            SolveStatus::Unsat => LsgenSolveResult::Unsat,
            SolveStatus::Timeout => LsgenSolveResult::Timeout,
        };
        Ok(())
    })
}

/// Refinement feedback for two average runtimes in seconds.
#[no_mangle]
pub extern "C" fn lsgen_significance(prev_avg: f64, new_avg: f64) -> LsgenSignificance {
    match significance(prev_avg, new_avg) {
        Significance::Better => LsgenSignificance::Better,
        Significance::NoChange => LsgenSignificance::NoChange,
        Significance::Worse => LsgenSignificance::Worse,
    }
}
