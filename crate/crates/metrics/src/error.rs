use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("rate series is empty")]
    EmptySeries,

    #[error("series days are not strictly increasing at index {index} (day {day})")]
    UnorderedDays { index: usize, day: i64 },

    #[error("rate {rate} on day {day} is outside [0, 1]")]
    RateOutOfRange { day: i64, rate: f64 },

    #[error("day sets differ; only in predicted: {only_predicted:?}, only in actual: {only_actual:?}")]
    MismatchedDays {
        only_predicted: Vec<i64>,
        only_actual: Vec<i64>,
    },

    #[error("correlation needs at least 2 paired points, got {0}")]
    TooFewPoints(usize),

    #[error("correlation is undefined for a constant series ({0})")]
    ConstantSeries(&'static str),

    #[error("relative error is undefined: actual rate is 0 on day {0}")]
    ZeroActual(i64),

    #[error("distribution is invalid: {0}")]
    InvalidDistribution(String),

    #[error("distribution labels differ")]
    LabelMismatch,

    #[error("no usable {0} samples in trajectory set")]
    Degenerate(&'static str),

    #[error("metric `{0}` has a nonzero weight but no value")]
    MissingMetric(String),

    #[error("invalid composite configuration: {0}")]
    InvalidWeights(String),

    #[error("parse error: {0}")]
    Parse(String),
}
