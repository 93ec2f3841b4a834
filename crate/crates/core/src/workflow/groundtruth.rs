//! Deterministic rate-series metrics merged into the evaluation.

use std::fs::File;
use std::path::Path;

use serde_json::{json, Value};
use simforge_metrics::io::read_rate_series;
use simforge_metrics::{
    average_error_percentage, curve_correlation, peak_rate_error, rmse, time_to_peak_error, RateSeries,
};

use crate::artifacts::{EvaluationResult, Extra, MetricRecord, SimulationResult};

/// Time-series column compared with the reference.
pub const RATE_METRIC: &str = "rate";

pub fn load_reference(path: &Path) -> Result<RateSeries, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_rate_series(f).map_err(|e| format!("{}: {e}", path.display()))
}

fn norm(name: &str) -> String {
    name.chars()
        .filter(char::is_ascii_alphanumeric)
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

fn record(name: &str, description: &str, sim: Value, real: Value, diff: Value) -> MetricRecord {
    let mut extra = Extra::new();
    extra.insert("source".into(), json!("computed"));
    if !diff.is_null() {
        extra.insert("difference_kind".into(), json!("absolute"));
    }
    MetricRecord {
        name: name.into(),
        description: description.into(),
        simulation_value: sim,
        real_world_value: real,
        difference: diff,
        assessment: Value::String(String::new()),
        extra,
    }
}

/// Computes the rate metrics of `sim` against `reference`. Errors name the
/// first metric that could not be computed; the others still count.
pub fn rate_metrics(sim: &SimulationResult, reference: &RateSeries) -> (Vec<MetricRecord>, Vec<String>) {
    let mut errors = Vec::new();
    let predicted = match RateSeries::from_pairs(sim.series(RATE_METRIC)) {
        Ok(p) if !p.is_empty() => p,
        Ok(_) => return (Vec::new(), vec![format!("simulation produced no {RATE_METRIC:?} series")]),
        Err(e) => return (Vec::new(), vec![format!("{RATE_METRIC:?} series rejected: {e}")]),
    };
    let mut out = Vec::new();
    match rmse(&predicted, reference) {
        Ok(v) => out.push(record("rmse", "Root mean square error of daily rates", json!(v), json!(0.0), json!(v))),
        Err(e) => errors.push(format!("rmse: {e}")),
    }
    if let (Some(p), Some(a)) = (predicted.peak(), reference.peak()) {
        if let Ok(e) = peak_rate_error(&predicted, reference) {
            out.push(record(
                "peak_rate_error",
                "Absolute difference of peak rates",
                json!(p.rate),
                json!(a.rate),
                json!(e),
            ));
        }
        if let Ok(e) = time_to_peak_error(&predicted, reference) {
            out.push(record(
                "time_to_peak_error",
                "Absolute difference of peak days",
                json!(p.day),
                json!(a.day),
                json!(e),
            ));
        }
    }
    match curve_correlation(&predicted, reference) {
        Ok(r) => out.push(record(
            "curve_correlation",
            "Pearson correlation of daily rates",
            json!(r),
            json!(1.0),
            json!((1.0 - r).abs()),
        )),
        Err(e) => errors.push(format!("curve_correlation: {e}")),
    }
    match average_error_percentage(&predicted, reference) {
        Ok(v) => out.push(record(
            "average_error_percentage",
            "Mean relative error of daily rates",
            json!(v),
            json!(0.0),
            json!(v),
        )),
        Err(e) => errors.push(format!("average_error_percentage: {e}")),
    }
    (out, errors)
}

/// Replaces model-reported records that share a name with a computed one
/// and appends the computed records. Problems go to `extra.computed_metric_errors`.
pub fn augment(eval: &mut EvaluationResult, sim: &SimulationResult, reference: &RateSeries) {
    let (computed, errors) = rate_metrics(sim, reference);
    let names: Vec<String> = computed.iter().map(|m| norm(&m.name)).collect();
    eval.metrics.retain(|m| !names.contains(&norm(&m.name)));
    eval.metrics.extend(computed);
    if !errors.is_empty() {
        for e in &errors {
            tracing::warn!(error = %e, "reference metric not computed");
        }
        eval.extra.insert("computed_metric_errors".into(), json!(errors));
    }
}
