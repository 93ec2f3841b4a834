//! Labelled discrete distributions and the Jensen-Shannon divergence.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::MetricError;

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

impl Distribution {
    pub fn new(labels: Vec<String>, probabilities: Vec<f64>) -> Result<Self, MetricError> {
        if labels.len() != probabilities.len() {
            return Err(MetricError::InvalidDistribution(format!(
                "{} labels for {} probabilities",
                labels.len(),
                probabilities.len()
            )));
        }
        let mut seen = HashMap::with_capacity(labels.len());
        for label in &labels {
            if seen.insert(label.as_str(), ()).is_some() {
                return Err(MetricError::InvalidDistribution(format!("duplicate label `{label}`")));
            }
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(MetricError::InvalidDistribution(format!("probability {p} is not a non-negative number")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(MetricError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { labels, probabilities })
    }

    /// Normalizes non-negative counts into a distribution.
    pub fn from_counts(labels: Vec<String>, counts: &[f64]) -> Result<Self, MetricError> {
        let total: f64 = counts.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Err(MetricError::InvalidDistribution("counts sum to zero".into()));
        }
        Self::new(labels, counts.iter().map(|c| c / total).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.probabilities[i])
    }
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).log2()
    }
}

/// Base-2 Jensen-Shannon divergence, in `[0, 1]`.
///
/// Both distributions must carry the same label set; order may differ.
pub fn jsd(p: &Distribution, q: &Distribution) -> Result<f64, MetricError> {
    if p.labels.len() != q.labels.len() {
        return Err(MetricError::LabelMismatch);
    }
    let q_aligned: Vec<f64> = if p.labels == q.labels {
        q.probabilities.clone()
    } else {
        let index: HashMap<&str, usize> = q.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        p.labels
            .iter()
            .map(|l| index.get(l.as_str()).map(|&i| q.probabilities[i]))
            .collect::<Option<Vec<_>>>()
            .ok_or(MetricError::LabelMismatch)?
    };
    let mut total = 0.0;
    for (&pi, &qi) in p.probabilities.iter().zip(&q_aligned) {
        let m = 0.5 * (pi + qi);
        total += 0.5 * kl_term(pi, m) + 0.5 * kl_term(qi, m);
    }
    Ok(total.clamp(0.0, 1.0))
}
