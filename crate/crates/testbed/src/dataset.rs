use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use simforge_metrics::{io::write_rate_series, RateSeries};

use crate::population::Population;
use crate::simulate::DailyRecord;
use crate::TestbedError;

pub const DEFAULT_TRAIN_END_DAY: u32 = 29;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFiles {
    pub agent_attributes: PathBuf,
    pub social_network: PathBuf,
    pub train_data: PathBuf,
    pub ground_truth: PathBuf,
}

impl DatasetFiles {
    pub fn all(&self) -> [&Path; 4] {
        [
            &self.agent_attributes,
            &self.social_network,
            &self.train_data,
            &self.ground_truth,
        ]
    }
}

/// Per-day fraction of agents wearing a mask over `start..=end`.
pub fn population_rate(records: &[DailyRecord], start: u32, end: u32) -> Result<RateSeries, TestbedError> {
    if start > end {
        return Err(TestbedError::EmptyRange { start, end });
    }
    let span = (end - start + 1) as usize;
    let mut wearing = vec![0u64; span];
    let mut total = vec![0u64; span];
    for r in records.iter().filter(|r| r.day >= start && r.day <= end) {
        let slot = (r.day - start) as usize;
        total[slot] += 1;
        if r.wearing_mask {
            wearing[slot] += 1;
        }
    }
    if total.iter().all(|&t| t == 0) {
        return Err(TestbedError::EmptyRange { start, end });
    }
    let pairs = (0..span)
        .filter(|&i| total[i] > 0)
        .map(|i| (i64::from(start) + i as i64, wearing[i] as f64 / total[i] as f64));
    Ok(RateSeries::from_pairs(pairs)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, TestbedError> {
    File::create(path).map(BufWriter::new).map_err(|source| TestbedError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), TestbedError> {
    w.flush().map_err(|source| TestbedError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the four dataset files into `out_dir`.
///
/// `train_data.csv` holds days `0..=train_end_day`; `ground_truth.csv` holds
/// the population rate for every later day present in `records`.
pub fn emit_dataset(
    population: &Population,
    records: &[DailyRecord],
    out_dir: &Path,
    train_end_day: u32,
) -> Result<DatasetFiles, TestbedError> {
    fs::create_dir_all(out_dir).map_err(|source| TestbedError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files = DatasetFiles {
        agent_attributes: out_dir.join("agent_attributes.csv"),
        social_network: out_dir.join("social_network.json"),
        train_data: out_dir.join("train_data.csv"),
        ground_truth: out_dir.join("ground_truth.csv"),
    };

    let mut attrs = csv::Writer::from_writer(create(&files.agent_attributes)?);
    attrs.write_record([
        "agent_id",
        "age",
        "age_group",
        "occupation",
        "risk_perception",
        "initial_mask_wearing",
        "family_connections",
        "work_school_connections",
        "community_connections",
        "total_connections",
    ])?;
    for a in &population.agents {
        attrs.write_record([
            a.agent_id.to_string(),
            a.age.to_string(),
            a.age_group.clone(),
            a.occupation.clone(),
            a.risk_perception.to_string(),
            a.initial_mask_wearing.to_string(),
            a.family_connections.to_string(),
            a.work_school_connections.to_string(),
            a.community_connections.to_string(),
            a.total_connections.to_string(),
        ])?;
    }
    attrs.flush().map_err(|source| TestbedError::Io {
        path: files.agent_attributes.clone(),
        source,
    })?;

    let mut network = Map::new();
    for (id, t) in population.network.ties.iter().enumerate() {
        network.insert(
            id.to_string(),
            json!({
                "family": t.family,
                "work_school": t.work_school,
                "community": t.community,
                "all": t.all,
            }),
        );
    }
    let mut w = create(&files.social_network)?;
    serde_json::to_writer_pretty(&mut w, &Value::Object(network))?;
    w.write_all(b"\n").map_err(|source| TestbedError::Io {
        path: files.social_network.clone(),
        source,
    })?;
    finish(w, &files.social_network)?;

    let mut train = csv::Writer::from_writer(create(&files.train_data)?);
    train.write_record(["day", "agent_id", "wearing_mask", "received_info"])?;
    for r in records.iter().filter(|r| r.day <= train_end_day) {
        train.write_record([
            r.day.to_string(),
            r.agent_id.to_string(),
            r.wearing_mask.to_string(),
            r.received_info.to_string(),
        ])?;
    }
    train.flush().map_err(|source| TestbedError::Io {
        path: files.train_data.clone(),
        source,
    })?;

    let last_day = records.iter().map(|r| r.day).max();
    let truth = match last_day {
        Some(last) if last > train_end_day => population_rate(records, train_end_day + 1, last)?,
        _ => RateSeries::new(Vec::new())?,
    };
    let w = create(&files.ground_truth)?;
    write_rate_series(w, &truth)?;
    Ok(files)
}
