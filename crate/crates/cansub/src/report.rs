//! Verification report JSON and exit status.

use cansub_core::rational::fmt_q;
use cansub_core::{ClauseResult, VerifyReport};
use serde_json::{json, Map, Value};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ENGINE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

fn clause_json(c: &ClauseResult) -> Value {
    let details: Map<String, Value> = c.details.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
    json!({
        "checked": c.applicable,
        "applicable": c.applicable,
        "pass": c.pass,
        "errored": c.errored(),
        "error": c.error,
        "details": details,
    })
}

pub fn report_json(r: &VerifyReport, module_sha256: &str) -> Value {
    let clauses: Map<String, Value> = r.clauses.iter().map(|c| (c.name.clone(), clause_json(c))).collect();
    let timing: Map<String, Value> = r.timing_ms.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    json!({
        "module_sha256": module_sha256,
        "p": r.p,
        "m": r.m,
        "e": r.e,
        "h": r.h,
        "d": r.d,
        "degree": fmt_q(&r.degree),
        "w": fmt_q(&r.w),
        "clauses": clauses,
        "timing_ms": timing,
    })
}

/// A failed clause outranks an errored one.
pub fn exit_code(r: &VerifyReport) -> i32 {
    if r.any_failed() {
        EXIT_FAIL
    } else if r.any_errored() {
        EXIT_ENGINE
    } else {
        EXIT_PASS
    }
}

fn detail<'a>(c: &'a ClauseResult, key: &str) -> &'a str {
    c.details.iter().find(|(k, _)| k == key).map_or("", |(_, v)| v.as_str())
}

fn count_list(s: &str) -> usize {
    let inner = s.trim_start_matches('[').trim_end_matches(']');
    if inner.is_empty() {
        0
    } else {
        inner.split(',').count()
    }
}

/// `(value, expected)` columns of a sweep row.
pub fn clause_columns(c: &ClauseResult, r: &VerifyReport) -> (String, String) {
    if c.errored() {
        return (c.error.clone().unwrap_or_default(), String::new());
    }
    if !c.applicable {
        return (String::new(), String::new());
    }
    match c.name.as_str() {
        "frobenius_kernel" => (detail(c, "equal_mod_u^(e i)").into(), "true".into()),
        "stability" => (detail(c, "v_det_D").into(), detail(c, "ew").into()),
        "degree_of_quotient" => (detail(c, "deg_L").into(), fmt_q(&r.w)),
        "duality" => (detail(c, "w_dual").into(), fmt_q(&r.w)),
        "lower_ram" => (detail(c, "canonical_break").into(), detail(c, "expected_canonical_break").into()),
        "upper_ram" => (detail(c, "gram_rank_certified").into(), r.h.to_string()),
        "ht_kernel" => {
            let n = count_list(detail(c, "samples"));
            let bad = count_list(detail(c, "failed_samples"));
            ((n - bad).to_string(), n.to_string())
        }
        "lowramdeg_bound" => (detail(c, "max_breaks_M_L_N").into(), detail(c, "bounds_M_L_N").into()),
        "uniqueness" => (detail(c, "agreeing").into(), detail(c, "starts").into()),
        _ => (String::new(), String::new()),
    }
}

pub fn pass_cell(c: &ClauseResult) -> &'static str {
    if c.errored() {
        "errored"
    } else if c.pass {
        "true"
    } else {
        "false"
    }
}
