//! Mobility-fidelity metrics: step distance (SD), step interval (SI), daily
//! activity routine (DARD) and spatio-temporal visits (STVD), each reported as
//! the JSD between histograms of generated and real trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::divergence::{jsd, Distribution};
use crate::MetricError;

const MINUTES_PER_DAY: u32 = 24 * 60;
const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub day: i64,
    pub time_minutes: u32,
    pub location_id: String,
    pub x: f64,
    pub y: f64,
    pub activity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub visits: Vec<Visit>,
}

impl Trajectory {
    /// Sorts visits by `(day, time)`; rejects times past the end of a day.
    pub fn new(id: impl Into<String>, mut visits: Vec<Visit>) -> Result<Self, MetricError> {
        let id = id.into();
        if let Some(v) = visits.iter().find(|v| v.time_minutes >= MINUTES_PER_DAY) {
            return Err(MetricError::Parse(format!(
                "trajectory {id}: time_minutes {} is not a minute of the day",
                v.time_minutes
            )));
        }
        visits.sort_by_key(|v| (v.day, v.time_minutes));
        Ok(Self { id, visits })
    }

    fn steps(&self) -> impl Iterator<Item = (&Visit, &Visit)> {
        self.visits.windows(2).filter(|w| w[0].day == w[1].day).map(|w| (&w[0], &w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Planar coordinates in metres.
    #[default]
    Euclidean,
    /// `x` = longitude, `y` = latitude, in degrees.
    GreatCircle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinningConfig {
    pub distance_bin_m: f64,
    pub distance_max_m: f64,
    pub interval_bin_min: u32,
    pub interval_max_min: u32,
    pub time_of_day_bin_min: u32,
    pub distance_metric: DistanceMetric,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            distance_bin_m: 500.0,
            distance_max_m: 10_000.0,
            interval_bin_min: 30,
            interval_max_min: 12 * 60,
            time_of_day_bin_min: 60,
            distance_metric: DistanceMetric::Euclidean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityMetrics {
    pub sd: f64,
    pub si: f64,
    pub dard: f64,
    pub stvd: f64,
}

fn distance(a: &Visit, b: &Visit, metric: DistanceMetric) -> f64 {
    match metric {
        DistanceMetric::Euclidean => ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt(),
        DistanceMetric::GreatCircle => {
            let (lat1, lat2) = (a.y.to_radians(), b.y.to_radians());
            let dlat = lat2 - lat1;
            let dlon = (b.x - a.x).to_radians();
            let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
            2.0 * EARTH_RADIUS_M * h.sqrt().asin()
        }
    }
}

/// Fixed-width histogram with a trailing overflow bin.
fn binned(values: &[f64], width: f64, max: f64) -> (Vec<String>, Vec<f64>) {
    let regular = (max / width).ceil() as usize;
    let mut counts = vec![0.0; regular + 1];
    for &v in values {
        let idx = if v >= max { regular } else { (v / width).floor() as usize };
        counts[idx.min(regular)] += 1.0;
    }
    let labels = (0..=regular)
        .map(|i| {
            if i == regular {
                format!(">={max}")
            } else {
                format!("[{},{})", i as f64 * width, (i + 1) as f64 * width)
            }
        })
        .collect();
    (labels, counts)
}

fn fixed_jsd(generated: &[f64], real: &[f64], width: f64, max: f64, name: &'static str) -> Result<f64, MetricError> {
    if generated.is_empty() || real.is_empty() {
        return Err(MetricError::Degenerate(name));
    }
    let (labels, g) = binned(generated, width, max);
    let (_, r) = binned(real, width, max);
    jsd(
        &Distribution::from_counts(labels.clone(), &g)?,
        &Distribution::from_counts(labels, &r)?,
    )
}

fn categorical_jsd(
    generated: BTreeMap<String, f64>,
    real: BTreeMap<String, f64>,
    name: &'static str,
) -> Result<f64, MetricError> {
    if generated.is_empty() || real.is_empty() {
        return Err(MetricError::Degenerate(name));
    }
    let mut labels: Vec<String> = generated.keys().chain(real.keys()).cloned().collect();
    labels.sort();
    labels.dedup();
    let g: Vec<f64> = labels.iter().map(|l| generated.get(l).copied().unwrap_or(0.0)).collect();
    let r: Vec<f64> = labels.iter().map(|l| real.get(l).copied().unwrap_or(0.0)).collect();
    jsd(
        &Distribution::from_counts(labels.clone(), &g)?,
        &Distribution::from_counts(labels, &r)?,
    )
}

struct Samples {
    distances: Vec<f64>,
    intervals: Vec<f64>,
    routine: BTreeMap<String, f64>,
    visits: BTreeMap<String, f64>,
}

fn collect(set: &[Trajectory], cfg: &BinningConfig) -> Samples {
    let mut samples = Samples {
        distances: Vec::new(),
        intervals: Vec::new(),
        routine: BTreeMap::new(),
        visits: BTreeMap::new(),
    };
    for trajectory in set {
        for (a, b) in trajectory.steps() {
            samples.distances.push(distance(a, b, cfg.distance_metric));
            samples.intervals.push(f64::from(b.time_minutes - a.time_minutes));
        }
        for v in &trajectory.visits {
            let slot = v.time_minutes / cfg.time_of_day_bin_min;
            let activity = v.activity.as_deref().unwrap_or("unknown");
            *samples.routine.entry(format!("{activity}@{slot}")).or_default() += 1.0;
            *samples.visits.entry(format!("{}@{slot}", v.location_id)).or_default() += 1.0;
        }
    }
    samples
}

/// Computes SD, SI, DARD and STVD between a generated and a real trajectory set.
///
/// Only consecutive visits on the same day form a step; trajectories with
/// fewer than two visits contribute nothing to SD and SI.
pub fn mobility_metrics(
    generated: &[Trajectory],
    real: &[Trajectory],
    cfg: &BinningConfig,
) -> Result<MobilityMetrics, MetricError> {
    if generated.is_empty() || real.is_empty() {
        return Err(MetricError::Degenerate("trajectory"));
    }
    if !(cfg.distance_bin_m > 0.0 && cfg.distance_max_m > 0.0 && cfg.interval_bin_min > 0 && cfg.time_of_day_bin_min > 0)
    {
        return Err(MetricError::InvalidDistribution("bin widths must be positive".into()));
    }
    let g = collect(generated, cfg);
    let r = collect(real, cfg);
    Ok(MobilityMetrics {
        sd: fixed_jsd(&g.distances, &r.distances, cfg.distance_bin_m, cfg.distance_max_m, "step distance")?,
        si: fixed_jsd(
            &g.intervals,
            &r.intervals,
            f64::from(cfg.interval_bin_min),
            f64::from(cfg.interval_max_min),
            "step interval",
        )?,
        dard: categorical_jsd(g.routine, r.routine, "activity")?,
        stvd: categorical_jsd(g.visits, r.visits, "visit")?,
    })
}
