//! C ABI for the LW toolkit: opaque handles, integer status codes, and
//! JSON strings for structured data.
//!
//! Conventions:
//! - Every function returns an `LwStatus`; results come back through out
//!   parameters.
//! - Strings returned through out parameters are heap-allocated and must be
//!   released with `lw_string_free`.
//! - Handles are created by `lw_config_new` / `lw_expr_parse` and released
//!   with their matching `_free` function. A null handle is never returned
//!   on success.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use lw_core::equiv::EqBudget;
use lw_core::gen::GenBudget;
use lw_core::harness::{check_security, StateSpace};
use lw_core::interp::{run, state_from_json, State, StateCellJson};
use lw_core::policy::{Lock, LockSet, SecurityConfig};
use lw_core::syntax::ast::{Expr, TypeEnv};
use lw_core::syntax::parser::{parse_runtime_expr, parse_type};
use lw_core::syntax::pretty::{pretty_expr, pretty_type};
use lw_core::types::{typecheck_synth, TypingContext};

/// Status codes mirroring the CLI's exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum LwStatus {
    Ok = 0,
    /// A security violation or type error: the input was understood but
    /// rejected.
    Rejected = 1,
    /// A null pointer, bad UTF-8, or other invalid argument.
    InvalidArgument = 2,
    /// The program text does not parse.
    ParseError = 3,
    /// The configuration or state JSON is invalid.
    ConfigError = 4,
}

/// Opaque security configuration handle.
pub struct LwConfig(SecurityConfig);

/// Opaque parsed-expression handle.
pub struct LwExpr(Expr);

unsafe fn cstr<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    CStr::from_ptr(p).to_str().ok()
}

fn give_string(out: *mut *mut c_char, s: String) -> LwStatus {
    if out.is_null() {
        return LwStatus::InvalidArgument;
    }
    match CString::new(s) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            LwStatus::Ok
        }
        Err(_) => LwStatus::InvalidArgument,
    }
}

/// Releases a string returned by any `lw_*` function.
#[no_mangle]
pub unsafe extern "C" fn lw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a configuration from its JSON form
/// (`{"actors": [...], "locks": [...], "lock_policies": {...}}`).
#[no_mangle]
pub unsafe extern "C" fn lw_config_new(
    json: *const c_char,
    out: *mut *mut LwConfig,
) -> LwStatus {
    let (Some(text), false) = (cstr(json), out.is_null()) else {
        return LwStatus::InvalidArgument;
    };
    let cfg: SecurityConfig = match serde_json::from_str(text) {
        Ok(c) => c,
        Err(_) => return LwStatus::ConfigError,
    };
    if cfg.validate().is_err() {
        return LwStatus::ConfigError;
    }
    *out = Box::into_raw(Box::new(LwConfig(cfg)));
    LwStatus::Ok
}

#[no_mangle]
pub unsafe extern "C" fn lw_config_free(cfg: *mut LwConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Parses a program (runtime forms such as `#0` are allowed).
#[no_mangle]
pub unsafe extern "C" fn lw_expr_parse(
    cfg: *const LwConfig,
    source: *const c_char,
    out: *mut *mut LwExpr,
) -> LwStatus {
    let (Some(text), false, false) = (cstr(source), cfg.is_null(), out.is_null()) else {
        return LwStatus::InvalidArgument;
    };
    match parse_runtime_expr(text, &(*cfg).0) {
        Ok(e) => {
            *out = Box::into_raw(Box::new(LwExpr(e)));
            LwStatus::Ok
        }
        Err(_) => LwStatus::ParseError,
    }
}

#[no_mangle]
pub unsafe extern "C" fn lw_expr_free(e: *mut LwExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Prints an expression back as canonical concrete syntax.
#[no_mangle]
pub unsafe extern "C" fn lw_expr_pretty(
    e: *const LwExpr,
    out: *mut *mut c_char,
) -> LwStatus {
    if e.is_null() {
        return LwStatus::InvalidArgument;
    }
    give_string(out, pretty_expr(&(*e).0))
}

unsafe fn parse_common(
    cfg: *const LwConfig,
    state_json: *const c_char,
    locks_csv: *const c_char,
) -> Result<(SecurityConfig, State, LockSet), LwStatus> {
    if cfg.is_null() {
        return Err(LwStatus::InvalidArgument);
    }
    let cfg = (*cfg).0.clone();
    let state = match cstr(state_json) {
        None if state_json.is_null() => State::new(),
        None => return Err(LwStatus::InvalidArgument),
        Some(text) => {
            let m: std::collections::BTreeMap<String, StateCellJson> =
                serde_json::from_str(text).map_err(|_| LwStatus::ConfigError)?;
            state_from_json(&m, &cfg).map_err(|_| LwStatus::ConfigError)?
        }
    };
    let locks = match cstr(locks_csv) {
        None if locks_csv.is_null() => LockSet::new(),
        None => return Err(LwStatus::InvalidArgument),
        Some(text) => {
            let mut set = LockSet::new();
            for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let l = Lock::new(part);
                if !cfg.locks.contains(&l) {
                    return Err(LwStatus::ConfigError);
                }
                set.insert(l);
            }
            set
        }
    };
    Ok((cfg, state, locks))
}

/// Typechecks an expression; on success `out_type` receives the type in
/// concrete syntax, on rejection it receives the error message.
#[no_mangle]
pub unsafe extern "C" fn lw_typecheck(
    cfg: *const LwConfig,
    e: *const LwExpr,
    state_json: *const c_char,
    locks_csv: *const c_char,
    out_type: *mut *mut c_char,
) -> LwStatus {
    if e.is_null() {
        return LwStatus::InvalidArgument;
    }
    let (cfg, state, locks) = match parse_common(cfg, state_json, locks_csv) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let ctx = TypingContext::new(&cfg).with_theta(state.theta()).with_locks(locks);
    match typecheck_synth(&cfg, &ctx, &(*e).0) {
        Ok(t) => give_string(out_type, pretty_type(&t)),
        Err(te) => {
            let _ = give_string(out_type, te.to_string());
            LwStatus::Rejected
        }
    }
}

/// Runs an expression for at most `fuel` steps; `out_trace` receives the
/// observation trace as JSON.
#[no_mangle]
pub unsafe extern "C" fn lw_run(
    cfg: *const LwConfig,
    e: *const LwExpr,
    state_json: *const c_char,
    locks_csv: *const c_char,
    fuel: u64,
    out_trace: *mut *mut c_char,
) -> LwStatus {
    if e.is_null() {
        return LwStatus::InvalidArgument;
    }
    let (_cfg, state, locks) = match parse_common(cfg, state_json, locks_csv) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let trace = run(&(*e).0, &locks, &state, fuel);
    let json = serde_json::to_string(&trace.to_json()).expect("trace serializes");
    give_string(out_trace, json)
}

/// Bounded whole-program security check. `result_type` is the type the
/// program is claimed at (concrete syntax); `nat_domain_csv` bounds the
/// enumerated values (e.g. `"0,1"`). `out_report` receives the Report JSON.
/// Returns `Rejected` when the report contains a violation.
#[no_mangle]
pub unsafe extern "C" fn lw_check(
    cfg: *const LwConfig,
    e: *const LwExpr,
    state_json: *const c_char,
    locks_csv: *const c_char,
    result_type: *const c_char,
    nat_domain_csv: *const c_char,
    fuel: u64,
    out_report: *mut *mut c_char,
) -> LwStatus {
    if e.is_null() {
        return LwStatus::InvalidArgument;
    }
    let (cfg, state, locks) = match parse_common(cfg, state_json, locks_csv) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let Some(ty_text) = cstr(result_type) else {
        return LwStatus::InvalidArgument;
    };
    let Ok(t) = parse_type(ty_text, &cfg) else {
        return LwStatus::ParseError;
    };
    let nat_domain: Vec<u64> = match cstr(nat_domain_csv) {
        None if nat_domain_csv.is_null() => vec![0, 1, 2],
        None => return Err::<(), _>(LwStatus::InvalidArgument).unwrap_err(),
        Some(text) => {
            let mut v = Vec::new();
            for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                match part.parse() {
                    Ok(n) => v.push(n),
                    Err(_) => return LwStatus::InvalidArgument,
                }
            }
            v
        }
    };
    let budget = GenBudget { nat_domain, ..GenBudget::default() };
    let eq = EqBudget { fuel, gen: budget.clone() };
    let theta = state.theta();
    let space = StateSpace::new(theta.clone(), budget);
    let report = match check_security(
        &(*e).0,
        &TypeEnv::new(),
        &theta,
        &locks,
        &t,
        &cfg.bottom(),
        &cfg,
        &space,
        &eq,
    ) {
        Ok(r) => r,
        Err(_) => return LwStatus::ConfigError,
    };
    let json = serde_json::to_string(&report).expect("report serializes");
    let secure = report.secure();
    match give_string(out_report, json) {
        LwStatus::Ok if secure => LwStatus::Ok,
        LwStatus::Ok => LwStatus::Rejected,
        other => other,
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn lw_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

// Make `ptr` used even on platforms where no code path needs it.
const _: fn() = || {
    let _ = ptr::null::<u8>();
};

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_config() -> *mut LwConfig {
        let json = CString::new(
            r##"{"actors":["Alice"],"locks":["S"],
                "lock_policies":{"S":[{"guard":["S"],"actor":"Alice"}]}}"##,
        )
        .unwrap();
        let mut out = ptr::null_mut();
        let st = unsafe { lw_config_new(json.as_ptr(), &mut out) };
        assert!(st == LwStatus::Ok && !out.is_null());
        out
    }

    fn take_string(p: *mut c_char) -> String {
        let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
        unsafe { lw_string_free(p) };
        s
    }

    #[test]
    fn parse_pretty_round_trip() {
        let cfg = mk_config();
        let src = CString::new("open S in #0 := !#1").unwrap();
        let mut e = ptr::null_mut();
        assert!(unsafe { lw_expr_parse(cfg, src.as_ptr(), &mut e) } == LwStatus::Ok);
        let mut s = ptr::null_mut();
        assert!(unsafe { lw_expr_pretty(e, &mut s) } == LwStatus::Ok);
        assert_eq!(take_string(s), "open S in #0 := !#1");
        unsafe {
            lw_expr_free(e);
            lw_config_free(cfg);
        }
    }

    #[test]
    fn parse_error_and_bad_config() {
        let cfg = mk_config();
        let src = CString::new("open S in").unwrap();
        let mut e = ptr::null_mut();
        assert!(unsafe { lw_expr_parse(cfg, src.as_ptr(), &mut e) } == LwStatus::ParseError);
        let bad = CString::new("{").unwrap();
        let mut c2 = ptr::null_mut();
        assert!(unsafe { lw_config_new(bad.as_ptr(), &mut c2) } == LwStatus::ConfigError);
        unsafe { lw_config_free(cfg) };
    }

    #[test]
    fn typecheck_and_run() {
        let cfg = mk_config();
        let state = CString::new(
            r##"{"#0":{"value":"0","type":"nat@bot"},
                "#1":{"value":"7","type":"nat@{{S} => Alice}"}}"##,
        )
        .unwrap();
        let src = CString::new("open S in #0 := !#1").unwrap();
        let mut e = ptr::null_mut();
        assert!(unsafe { lw_expr_parse(cfg, src.as_ptr(), &mut e) } == LwStatus::Ok);
        let mut ty = ptr::null_mut();
        let st = unsafe { lw_typecheck(cfg, e, state.as_ptr(), ptr::null(), &mut ty) };
        assert!(st == LwStatus::Ok);
        assert_eq!(take_string(ty), "unit@{{} => Alice}");
        let mut trace = ptr::null_mut();
        let st = unsafe { lw_run(cfg, e, state.as_ptr(), ptr::null(), 100, &mut trace) };
        assert!(st == LwStatus::Ok);
        let t = take_string(trace);
        assert!(t.contains("\"final\":\"terminal\""));
        unsafe {
            lw_expr_free(e);
            lw_config_free(cfg);
        }
    }

    #[test]
    fn check_flags_a_leak() {
        let cfg = mk_config();
        let state = CString::new(
            r##"{"#0":{"value":"0","type":"nat@{{S} => Alice}"},
                "#1":{"value":"0","type":"nat@bot"}}"##,
        )
        .unwrap();
        let src = CString::new("#1 := !#0").unwrap();
        let mut e = ptr::null_mut();
        assert!(unsafe { lw_expr_parse(cfg, src.as_ptr(), &mut e) } == LwStatus::Ok);
        let ty = CString::new("unit@bot").unwrap();
        let dom = CString::new("0,1").unwrap();
        let mut report = ptr::null_mut();
        let st = unsafe {
            lw_check(cfg, e, state.as_ptr(), ptr::null(), ty.as_ptr(), dom.as_ptr(), 200,
                     &mut report)
        };
        assert!(st == LwStatus::Rejected);
        let r = take_string(report);
        assert!(r.contains("\"violation\""));
        unsafe {
            lw_expr_free(e);
            lw_config_free(cfg);
        }
    }
}
