//! Weighted composite of normalized errors plus an optional correlation reward.
//!
//! `score = -Σ wᵢ · errorᵢ / normalizerᵢ + w_corr · correlation`
//!
//! With all errors at zero and no correlation weight the score is 0, its best
//! value; it never decreases when any single error decreases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::MetricError;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CompositeConfig {
    /// Error metric name to weight.
    pub weights: BTreeMap<String, f64>,
    /// Error metric name to normalizer; missing entries default to 1.
    pub normalizers: BTreeMap<String, f64>,
    pub correlation_weight: f64,
}

impl CompositeConfig {
    pub fn validate(&self) -> Result<(), MetricError> {
        let all = self.weights.values().chain(std::iter::once(&self.correlation_weight));
        let mut total = 0.0;
        for w in all {
            if !w.is_finite() || *w < 0.0 {
                return Err(MetricError::InvalidWeights(format!("weight {w} is negative or not finite")));
            }
            total += w;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(MetricError::InvalidWeights(format!("weights sum to {total}, expected 1")));
        }
        if let Some((name, n)) = self.normalizers.iter().find(|(_, n)| n.is_nan() || **n <= 0.0) {
            return Err(MetricError::InvalidWeights(format!("normalizer for `{name}` is {n}")));
        }
        Ok(())
    }

    fn normalizer(&self, name: &str) -> f64 {
        self.normalizers.get(name).copied().unwrap_or(1.0)
    }
}

pub fn composite_score(
    errors: &BTreeMap<String, f64>,
    correlation: Option<f64>,
    config: &CompositeConfig,
) -> Result<f64, MetricError> {
    config.validate()?;
    let mut score = 0.0;
    for (name, &weight) in &config.weights {
        if weight == 0.0 {
            continue;
        }
        let error = *errors.get(name).ok_or_else(|| MetricError::MissingMetric(name.clone()))?;
        score -= weight * error / config.normalizer(name);
    }
    if config.correlation_weight > 0.0 {
        let corr = correlation.ok_or_else(|| MetricError::MissingMetric("correlation".into()))?;
        score += config.correlation_weight * corr;
    }
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(weights: &[(&str, f64)], corr: f64) -> CompositeConfig {
        CompositeConfig {
            weights: weights.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            normalizers: BTreeMap::new(),
            correlation_weight: corr,
        }
    }

    fn errors(values: &[(&str, f64)]) -> BTreeMap<String, f64> {
        values.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn zero_errors_score_zero() {
        let cfg = config(&[("rmse", 0.5), ("peak_rate_error", 0.5)], 0.0);
        let s = composite_score(&errors(&[("rmse", 0.0), ("peak_rate_error", 0.0)]), None, &cfg).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn single_metric_is_negated_error() {
        let cfg = config(&[("rmse", 1.0)], 0.0);
        assert_eq!(composite_score(&errors(&[("rmse", 0.37)]), None, &cfg).unwrap(), -0.37);
    }

    #[test]
    fn normalizers_scale_errors() {
        let mut cfg = config(&[("time_to_peak_error", 1.0)], 0.0);
        cfg.normalizers.insert("time_to_peak_error".into(), 10.0);
        assert_eq!(
            composite_score(&errors(&[("time_to_peak_error", 5.0)]), None, &cfg).unwrap(),
            -0.5
        );
    }

    #[test]
    fn missing_weighted_metric_errors() {
        let cfg = config(&[("rmse", 0.5)], 0.5);
        assert_eq!(
            composite_score(&errors(&[]), Some(1.0), &cfg),
            Err(MetricError::MissingMetric("rmse".into()))
        );
        assert_eq!(
            composite_score(&errors(&[("rmse", 0.1)]), None, &cfg),
            Err(MetricError::MissingMetric("correlation".into()))
        );
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(config(&[("a", 0.7)], 0.0).validate().is_err());
        assert!(config(&[("a", 1.5), ("b", -0.5)], 0.0).validate().is_err());
        let mut cfg = config(&[("a", 1.0)], 0.0);
        cfg.normalizers.insert("a".into(), 0.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn score_is_monotone_in_each_error() {
        // finite differences: raising any error never raises the score
        let cfg = config(&[("a", 0.3), ("b", 0.2), ("c", 0.1)], 0.4);
        let base = errors(&[("a", 0.2), ("b", 3.0), ("c", 0.05)]);
        let s0 = composite_score(&base, Some(0.8), &cfg).unwrap();
        for name in ["a", "b", "c"] {
            let mut bumped = base.clone();
            *bumped.get_mut(name).unwrap() += 1e-6;
            let s1 = composite_score(&bumped, Some(0.8), &cfg).unwrap();
            assert!((s1 - s0) / 1e-6 <= 0.0, "{name}");
        }
    }
}
