//! JSON rendering of probe reports and check lists.
//!
//! Object keys come out sorted, so equal inputs give byte-identical files.
//! Non-finite numbers (undefined Richardson slopes) are written as `null`.

use geoflow_core::probe::{
    Check, ProbeReport, ResidualSeries, SmoothnessTable, ANALYTICITY_BANNER, FORMULA_STEPS, STENCIL_FACTORS,
    TOL_DRIFT, TOL_EVALUATION_IDENTITY, TOL_FD_ERROR_FLOOR, TOL_FD_ORDER, TOL_FIRST_ORDER_MATCH,
    TOL_TIME_SHIFT_RATIO, TOL_TRANSFORMED_RATIO,
};
use serde_json::{json, Value};

pub const SCHEMA: u32 = 1;

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn check_json(c: &Check) -> Value {
    json!({
        "name": c.name,
        "value": num(c.value),
        "tolerance": num(c.tolerance),
        "comparison": c.comparison.name(),
        "pass": c.pass(),
    })
}

pub fn checks_json(cs: &[Check]) -> Value {
    Value::Array(cs.iter().map(check_json).collect())
}

/// Every tolerance the probe uses.
pub fn tolerances() -> Value {
    json!({
        "transformed_over_raw_residual": TOL_TRANSFORMED_RATIO,
        "time_shift_over_raw_residual": TOL_TIME_SHIFT_RATIO,
        "parameter_derivative_fd_order": TOL_FD_ORDER,
        "parameter_derivative_fd_error_floor": TOL_FD_ERROR_FLOOR,
        "evaluation_identity": TOL_EVALUATION_IDENTITY,
        "divided_difference_drift": TOL_DRIFT,
        "first_order_match": TOL_FIRST_ORDER_MATCH,
        "stencil_factors": STENCIL_FACTORS,
        "formula_steps": FORMULA_STEPS,
    })
}

fn residual_json(r: &ResidualSeries) -> Value {
    json!({
        "lambda": r.lambda,
        "mu": r.mu,
        "delta": r.delta,
        "max_raw": num(r.max_raw()),
        "max_transformed": num(r.max_transformed()),
        "ratio": num(r.ratio()),
        "b_lambda_0_sup": num(r.b_lambda0),
        "samples": r.samples.iter().map(|s| json!({
            "t": s.t,
            "raw": num(s.raw),
            "transformed": num(s.transformed),
        })).collect::<Vec<_>>(),
    })
}

fn smoothness_json(s: &SmoothnessTable) -> Value {
    json!({
        "t0": s.t0,
        "point": s.point,
        "entries": s.entries.iter().map(|e| json!({
            "direction": e.direction.name(),
            "component": e.component,
            "order": e.order,
            "steps": e.steps,
            "values": e.values.map(num),
            "noise_floor": num(e.noise_floor),
            "resolved": e.resolved(),
            "drift": num(e.drift),
            "richardson_slope": num(e.slope),
        })).collect::<Vec<_>>(),
    })
}

/// The full report document.
pub fn probe_report_json(report: &ProbeReport, provenance: Value) -> Value {
    json!({
        "schema": SCHEMA,
        "banner": ANALYTICITY_BANNER,
        "kind": report.kind,
        "provenance": provenance,
        "tolerances": tolerances(),
        "residuals": report.residuals.iter().map(residual_json).collect::<Vec<_>>(),
        "smoothness": report.smoothness.iter().map(smoothness_json).collect::<Vec<_>>(),
        "checks": checks_json(&report.checks()),
        "passed": report.passed(),
    })
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use geoflow_core::probe::make_report;

    #[test]
    fn empty_report_is_valid_and_versioned() {
        let r = make_report("empty", Vec::new());
        let v = probe_report_json(&r, json!({}));
        assert_eq!(v["schema"], 1);
        assert_eq!(v["passed"], true);
        assert!(v["banner"].as_str().unwrap().contains("not machine-checked"));
        assert_eq!(to_pretty(&v), to_pretty(&probe_report_json(&r, json!({}))));
    }

    #[test]
    fn non_finite_values_become_null() {
        assert_eq!(num(f64::NAN), Value::Null);
        let c = check_json(&Check::at_most("x", f64::INFINITY, 1.0));
        assert_eq!(c["value"], Value::Null);
        assert_eq!(c["pass"], false);
    }
}
