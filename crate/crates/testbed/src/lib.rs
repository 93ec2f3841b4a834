//! Reference mask-adoption testbed.
//!
//! Generates a synthetic population embedded in a three-layer social network
//! (family, work/school, community), runs a daily adoption process with an
//! information intervention seeded at the best-connected agents, and emits the
//! resulting dataset in the file layout the pipeline consumes:
//!
//! * `agent_attributes.csv`
//! * `social_network.json`
//! * `train_data.csv` (days up to and including the train cut-off)
//! * `ground_truth.csv` (`day,rate` for the held-out days)
//!
//! Everything is a pure function of its seeds.

mod dataset;
mod population;
mod simulate;

pub use dataset::{emit_dataset, population_rate, DatasetFiles, DEFAULT_TRAIN_END_DAY};
pub use population::{generate_population, AgentRecord, Population, SocialNetwork, Ties};
pub use simulate::{simulate_adoption, AdoptionParams, DailyRecord, DecisionRule};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("invalid adoption parameters: {0}")]
    InvalidParams(String),

    #[error("no records for the requested day range {start}..={end}")]
    EmptyRange { start: u32, end: u32 },

    #[error(transparent)]
    Metric(#[from] simforge_metrics::MetricError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
