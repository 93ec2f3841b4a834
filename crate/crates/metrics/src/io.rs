//! CSV readers and writers for rate series (`day,rate`) and trajectory sets
//! (`trajectory_id,day,time_minutes,location_id,x,y,activity`).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::mobility::{Trajectory, Visit};
use crate::series::{RatePoint, RateSeries};
use crate::MetricError;

fn parse_err(e: impl std::fmt::Display) -> MetricError {
    MetricError::Parse(e.to_string())
}

/// Reads a `day,rate` table. Rows are sorted by day before validation.
pub fn read_rate_series<R: Read>(reader: R) -> Result<RateSeries, MetricError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut points: Vec<RatePoint> = Vec::new();
    for row in rdr.deserialize::<RatePoint>() {
        points.push(row.map_err(parse_err)?);
    }
    points.sort_by_key(|p| p.day);
    RateSeries::new(points)
}

pub fn write_rate_series<W: Write>(writer: W, series: &RateSeries) -> Result<(), MetricError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["day", "rate"]).map_err(parse_err)?;
    for p in series.points() {
        wtr.write_record([p.day.to_string(), p.rate.to_string()]).map_err(parse_err)?;
    }
    wtr.flush().map_err(parse_err)
}

#[derive(Deserialize)]
struct TrajectoryRow {
    trajectory_id: String,
    day: i64,
    time_minutes: u32,
    location_id: String,
    x: f64,
    y: f64,
    #[serde(default)]
    activity: Option<String>,
}

/// Reads a trajectory table; rows are grouped by `trajectory_id` in order of
/// first appearance.
pub fn read_trajectories<R: Read>(reader: R) -> Result<Vec<Trajectory>, MetricError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<Visit>> = BTreeMap::new();
    for row in rdr.deserialize::<TrajectoryRow>() {
        let row = row.map_err(parse_err)?;
        if !grouped.contains_key(&row.trajectory_id) {
            order.push(row.trajectory_id.clone());
        }
        grouped.entry(row.trajectory_id).or_default().push(Visit {
            day: row.day,
            time_minutes: row.time_minutes,
            location_id: row.location_id,
            x: row.x,
            y: row.y,
            activity: row.activity.filter(|a| !a.is_empty()),
        });
    }
    order
        .into_iter()
        .map(|id| {
            let visits = grouped.remove(&id).unwrap_or_default();
            Trajectory::new(id, visits)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_series_round_trips_exactly() {
        let series = RateSeries::from_pairs([(30, 0.57), (31, 1.0 / 3.0), (32, 0.1 + 0.2)]).unwrap();
        let mut buf = Vec::new();
        write_rate_series(&mut buf, &series).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("day,rate\n30,0.57\n"));
        assert_eq!(read_rate_series(buf.as_slice()).unwrap(), series);
    }

    #[test]
    fn unsorted_rows_are_sorted() {
        let s = read_rate_series("day,rate\n2,0.5\n1,0.25\n".as_bytes()).unwrap();
        assert_eq!(s.days().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn bad_rows_are_errors() {
        assert!(read_rate_series("day,rate\n1,abc\n".as_bytes()).is_err());
        assert!(read_rate_series("day,value\n1,0.2\n".as_bytes()).is_err());
        assert!(read_rate_series("day,rate\n1,0.2\n1,0.3\n".as_bytes()).is_err());
    }

    #[test]
    fn trajectories_grouped_by_id() {
        let text = "trajectory_id,day,time_minutes,location_id,x,y,activity\n\
                    u2,0,600,shop,1,1,\n\
                    u1,0,480,home,0,0,rest\n\
                    u2,0,540,home,0,0,rest\n";
        let set = read_trajectories(text.as_bytes()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set[0].id, "u2");
        assert_eq!(set[0].visits[0].time_minutes, 540);
        assert_eq!(set[0].visits[1].activity, None);
    }
}
