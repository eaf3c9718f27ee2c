//! Event ingestion: parsing, spatial filtering, local time and per-user trajectories.

mod clock;
mod parse;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::{ClockError, LocalTime, UsZone, FIRST_RULE_YEAR};
pub use parse::{parse_stream, LineError, ParsedStream, RecordError, StreamFormat, MAX_LOGGED_ERRORS};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read input: {0}")]
    Io(#[source] std::io::Error),
    #[error("csv header must be `user,lon,lat,ts`, found `{0}`")]
    BadHeader(String),
    #[error("invalid bounding box: {0}")]
    BadBox(String),
    #[error("no trajectories to filter")]
    NoTrajectories,
}

/// One geo-located event.
#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub user_id: String,
    pub lon: f64,
    pub lat: f64,
    pub t_utc: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    /// Study area around Chicago.
    pub const CHICAGO: BoundingBox = BoundingBox {
        min_lat: 41.201577,
        min_lon: -88.707599,
        max_lat: 42.495775,
        max_lon: -87.524535,
    };

    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self, IngestError> {
        let b = Self { min_lat, min_lon, max_lat, max_lon };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let finite = [self.min_lat, self.min_lon, self.max_lat, self.max_lon]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.min_lat >= self.max_lat || self.min_lon >= self.max_lon {
            return Err(IngestError::BadBox(format!("{self:?}")));
        }
        Ok(())
    }

    /// Closed-interval containment.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        (self.min_lat..=self.max_lat).contains(&lat) && (self.min_lon..=self.max_lon).contains(&lon)
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self::CHICAGO
    }
}

pub fn bbox_filter(mut records: Vec<TweetRecord>, bbox: &BoundingBox) -> Vec<TweetRecord> {
    records.retain(|r| bbox.contains(r.lon, r.lat));
    records
}

/// A user's events in chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub user_id: String,
    pub points: Vec<TweetRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Drops later records that repeat an earlier (user, timestamp) pair.
    pub fn dedupe(&mut self) {
        self.points.dedup_by(|later, earlier| later.t_utc == earlier.t_utc);
    }
}

/// Groups records by user. Output is ordered by user id; ties in time keep input order.
pub fn build_trajectories(records: Vec<TweetRecord>) -> Vec<Trajectory> {
    let mut by_user: BTreeMap<String, Vec<TweetRecord>> = BTreeMap::new();
    for record in records {
        match by_user.get_mut(&record.user_id) {
            Some(points) => points.push(record),
            None => {
                by_user.insert(record.user_id.clone(), vec![record]);
            }
        }
    }
    by_user
        .into_iter()
        .map(|(user_id, mut points)| {
            points.sort_by_key(|p| p.t_utc);
            Trajectory { user_id, points }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianReport {
    pub input_users: usize,
    pub median: usize,
    pub retained_count: usize,
    pub retained_fraction: f64,
    /// Mean tweets per retained user.
    pub mean: f64,
    /// Largest retained trajectory.
    pub max: usize,
}

/// Keeps users whose tweet count is at least the (lower) median count.
pub fn median_filter(trajectories: Vec<Trajectory>) -> Result<(Vec<Trajectory>, MedianReport), IngestError> {
    if trajectories.is_empty() {
        return Err(IngestError::NoTrajectories);
    }
    let mut counts: Vec<usize> = trajectories.iter().map(Trajectory::len).collect();
    counts.sort_unstable();
    let input_users = counts.len();
    let median = counts[(input_users - 1) / 2];

    let retained: Vec<Trajectory> = trajectories.into_iter().filter(|t| t.len() >= median).collect();
    let total: usize = retained.iter().map(Trajectory::len).sum();
    let report = MedianReport {
        input_users,
        median,
        retained_count: retained.len(),
        retained_fraction: retained.len() as f64 / input_users as f64,
        mean: total as f64 / retained.len() as f64,
        max: retained.iter().map(Trajectory::len).max().unwrap_or(0),
    };
    Ok((retained, report))
}
