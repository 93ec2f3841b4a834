//! Calibration metrics for comparing simulator output with reference data.
//!
//! Three families live here:
//!
//! * rate-series errors over daily adoption rates ([`series`]): RMSE, peak-rate
//!   error, time-to-peak error, curve correlation and mean relative error;
//! * base-2 Jensen-Shannon divergence over labelled histograms ([`divergence`])
//!   and the four mobility distribution metrics built on it ([`mobility`]);
//! * a configurable composite score aggregating any of the above ([`composite`]).
//!
//! Every function is pure.

pub mod composite;
pub mod divergence;
pub mod io;
pub mod mobility;
pub mod series;

mod error;

pub use composite::{composite_score, CompositeConfig};
pub use divergence::{jsd, Distribution};
pub use error::MetricError;
pub use mobility::{mobility_metrics, BinningConfig, DistanceMetric, MobilityMetrics, Trajectory, Visit};
pub use series::{
    average_error_percentage, curve_correlation, peak_rate_error, rmse, time_to_peak_error, RatePoint,
    RateSeries,
};
