//! Daily population-rate series and the errors computed between them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub day: i64,
    pub rate: f64,
}

/// Rates in `[0, 1]` indexed by strictly increasing day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RatePoint>", into = "Vec<RatePoint>")]
pub struct RateSeries {
    points: Vec<RatePoint>,
}

impl RateSeries {
    pub fn new(points: Vec<RatePoint>) -> Result<Self, MetricError> {
        for (index, point) in points.iter().enumerate() {
            if !(0.0..=1.0).contains(&point.rate) {
                return Err(MetricError::RateOutOfRange {
                    day: point.day,
                    rate: point.rate,
                });
            }
            if index > 0 && points[index - 1].day >= point.day {
                return Err(MetricError::UnorderedDays {
                    index,
                    day: point.day,
                });
            }
        }
        Ok(Self { points })
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self, MetricError>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        Self::new(pairs.into_iter().map(|(day, rate)| RatePoint { day, rate }).collect())
    }

    pub fn points(&self) -> &[RatePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn days(&self) -> impl Iterator<Item = i64> + '_ {
        self.points.iter().map(|p| p.day)
    }

    pub fn rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.rate)
    }

    /// Points whose day lies in `start..=end`.
    pub fn window(&self, start: i64, end: i64) -> RateSeries {
        RateSeries {
            points: self
                .points
                .iter()
                .copied()
                .filter(|p| p.day >= start && p.day <= end)
                .collect(),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        Some(self.rates().sum::<f64>() / self.len() as f64)
    }

    /// Highest rate and the earliest day on which it occurs.
    pub fn peak(&self) -> Option<RatePoint> {
        let mut best: Option<RatePoint> = None;
        for point in &self.points {
            match best {
                Some(b) if point.rate <= b.rate => {}
                _ => best = Some(*point),
            }
        }
        best
    }
}

impl TryFrom<Vec<RatePoint>> for RateSeries {
    type Error = MetricError;

    fn try_from(points: Vec<RatePoint>) -> Result<Self, Self::Error> {
        RateSeries::new(points)
    }
}

impl From<RateSeries> for Vec<RatePoint> {
    fn from(series: RateSeries) -> Self {
        series.points
    }
}

fn paired<'a>(
    predicted: &'a RateSeries,
    actual: &'a RateSeries,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a, MetricError> {
    if predicted.days().ne(actual.days()) {
        let p: BTreeSet<i64> = predicted.days().collect();
        let a: BTreeSet<i64> = actual.days().collect();
        return Err(MetricError::MismatchedDays {
            only_predicted: p.difference(&a).copied().collect(),
            only_actual: a.difference(&p).copied().collect(),
        });
    }
    Ok(predicted.rates().zip(actual.rates()))
}

/// `sqrt(sum((predicted - actual)^2) / n)` over paired days.
pub fn rmse(predicted: &RateSeries, actual: &RateSeries) -> Result<f64, MetricError> {
    if predicted.is_empty() || actual.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    let n = predicted.len() as f64;
    let sum_sq: f64 = paired(predicted, actual)?.map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sum_sq / n).sqrt())
}

/// `|max predicted rate - max actual rate|`.
pub fn peak_rate_error(predicted: &RateSeries, actual: &RateSeries) -> Result<f64, MetricError> {
    let p = predicted.peak().ok_or(MetricError::EmptySeries)?;
    let a = actual.peak().ok_or(MetricError::EmptySeries)?;
    Ok((p.rate - a.rate).abs())
}

/// `|argmax day(predicted) - argmax day(actual)|`, ties to the earliest day.
pub fn time_to_peak_error(predicted: &RateSeries, actual: &RateSeries) -> Result<i64, MetricError> {
    let p = predicted.peak().ok_or(MetricError::EmptySeries)?;
    let a = actual.peak().ok_or(MetricError::EmptySeries)?;
    Ok((p.day - a.day).abs())
}

/// Pearson correlation of paired rates.
pub fn curve_correlation(predicted: &RateSeries, actual: &RateSeries) -> Result<f64, MetricError> {
    let pairs: Vec<(f64, f64)> = paired(predicted, actual)?.collect();
    if pairs.len() < 2 {
        return Err(MetricError::TooFewPoints(pairs.len()));
    }
    let n = pairs.len() as f64;
    let mean_p = pairs.iter().map(|(p, _)| p).sum::<f64>() / n;
    let mean_a = pairs.iter().map(|(_, a)| a).sum::<f64>() / n;
    let (mut cov, mut var_p, mut var_a) = (0.0, 0.0, 0.0);
    for (p, a) in &pairs {
        let dp = p - mean_p;
        let da = a - mean_a;
        cov += dp * da;
        var_p += dp * dp;
        var_a += da * da;
    }
    if var_p == 0.0 {
        return Err(MetricError::ConstantSeries("predicted"));
    }
    if var_a == 0.0 {
        return Err(MetricError::ConstantSeries("actual"));
    }
    Ok((cov / (var_p.sqrt() * var_a.sqrt())).clamp(-1.0, 1.0))
}

/// Mean of `|predicted - actual| / actual` over paired days.
pub fn average_error_percentage(predicted: &RateSeries, actual: &RateSeries) -> Result<f64, MetricError> {
    if predicted.is_empty() || actual.is_empty() {
        return Err(MetricError::EmptySeries);
    }
    let mut total = 0.0;
    for (point, (p, a)) in actual.points().iter().zip(paired(predicted, actual)?) {
        if a == 0.0 {
            return Err(MetricError::ZeroActual(point.day));
        }
        total += (p - a).abs() / a;
    }
    Ok(total / actual.len() as f64)
}
