//! Per-user clustering into ranked visit locations.

mod dbscan;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::LocalTime;
use crate::landuse::{ClassId, SemanticPoint};

pub use dbscan::{dbscan, dbscan_exhaustive, Dbscan, Distance, Label};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("eps must be a positive finite number of degrees, got {0}")]
    Eps(f64),
    #[error("absolute min_pts must be at least 2, got {0}")]
    MinPts(usize),
    #[error("min_pts fraction must lie in (0, 1], got {0}")]
    Fraction(f64),
}

/// Minimum neighborhood size, fixed or relative to the user's tweet count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinPts {
    Absolute(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: MinPts,
    #[serde(default)]
    pub distance: Distance,
}

impl ClusterParams {
    /// ε = 0.0025°, four points.
    pub const EXP1: ClusterParams =
        ClusterParams { eps: 0.0025, min_pts: MinPts::Absolute(4), distance: Distance::Planar };
    /// ε = 0.005°, ten percent of the user's tweets.
    pub const EXP2: ClusterParams =
        ClusterParams { eps: 0.005, min_pts: MinPts::Fraction(0.10), distance: Distance::Planar };

    pub fn new(eps: f64, min_pts: MinPts, distance: Distance) -> Result<Self, ParamError> {
        let params = Self { eps, min_pts, distance };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ParamError::Eps(self.eps));
        }
        match self.min_pts {
            MinPts::Absolute(n) if n < 2 => Err(ParamError::MinPts(n)),
            MinPts::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(ParamError::Fraction(f)),
            _ => Ok(()),
        }
    }

    /// Resolves `min_pts` for a user with `n_user` tweets: fractions round up, with a floor of 2.
    pub fn effective_min_pts(&self, n_user: usize) -> usize {
        match self.min_pts {
            MinPts::Absolute(n) => n,
            MinPts::Fraction(f) => {
                let x = f * n_user as f64;
                // Products such as 0.1 × 30 land a few ulps above the integer.
                let nearest = x.round();
                let needed = if (x - nearest).abs() <= 1e-9 * x.max(1.0) { nearest } else { x.ceil() };
                (needed as usize).max(2)
            }
        }
    }
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self::EXP1
    }
}

/// Summary statistics of a member set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterStats {
    pub centroid: [f64; 2],
    pub dominant: ClassId,
    pub dominant_count: usize,
    pub purity: f64,
}

/// Planar centroid, modal landuse (smallest class id on ties) and purity.
pub fn cluster_stats<'a, I>(members: I) -> Option<ClusterStats>
where
    I: IntoIterator<Item = &'a SemanticPoint>,
{
    let mut counts: BTreeMap<ClassId, usize> = BTreeMap::new();
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in members {
        sx += p.lon;
        sy += p.lat;
        n += 1;
        *counts.entry(p.landuse).or_default() += 1;
    }
    if n == 0 {
        return None;
    }
    // BTreeMap iterates in ascending id; keep the first maximum.
    let (dominant, dominant_count) = counts
        .into_iter()
        .fold((ClassId(0), 0), |best, (c, k)| if k > best.1 { (c, k) } else { best });
    Some(ClusterStats {
        centroid: [sx / n as f64, sy / n as f64],
        dominant,
        dominant_count,
        purity: dominant_count as f64 / n as f64,
    })
}

/// One ranked frequently-visited location of a user.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitCluster {
    pub user_id: String,
    /// 1 = most tweets.
    pub rank: u32,
    /// Indices into the user's point sequence, ascending.
    pub members: Vec<u32>,
    pub centroid: [f64; 2],
    pub dominant_landuse: ClassId,
    pub purity: f64,
    pub first_time: LocalTime,
}

impl VisitCluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Member tweet counts per local hour.
    pub fn hourly_counts(&self, points: &[SemanticPoint]) -> [u64; 24] {
        let mut bins = [0u64; 24];
        for &m in &self.members {
            bins[points[m as usize].local_time.hour() as usize] += 1;
        }
        bins
    }
}

/// Groups labeled points into clusters ordered by size, then earliest tweet, then lowest
/// member index. Noise is dropped.
pub fn rank_clusters(user_id: &str, labels: &[Label], points: &[SemanticPoint]) -> Vec<VisitCluster> {
    assert_eq!(labels.len(), points.len(), "one label per point");
    let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        if let Label::Cluster(c) = label {
            groups.entry(*c).or_default().push(i as u32);
        }
    }
    let mut clusters: Vec<VisitCluster> = groups
        .into_values()
        .map(|members| {
            let stats = cluster_stats(members.iter().map(|&m| &points[m as usize])).expect("non-empty group");
            let first_time = members
                .iter()
                .map(|&m| points[m as usize].local_time)
                .min_by_key(|t| t.to_utc())
                .expect("non-empty group");
            VisitCluster {
                user_id: user_id.to_string(),
                rank: 0,
                members,
                centroid: stats.centroid,
                dominant_landuse: stats.dominant,
                purity: stats.purity,
                first_time,
            }
        })
        .collect();
    clusters.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then_with(|| a.first_time.to_utc().cmp(&b.first_time.to_utc()))
            .then_with(|| a.members[0].cmp(&b.members[0]))
    });
    for (r, c) in clusters.iter_mut().enumerate() {
        c.rank = r as u32 + 1;
    }
    clusters
}

/// Clustering result for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserClusters {
    pub user_id: String,
    pub min_pts: usize,
    pub clusters: Vec<VisitCluster>,
    pub noise: usize,
}

impl UserClusters {
    pub fn clustered(&self) -> usize {
        self.clusters.iter().map(VisitCluster::size).sum()
    }
}

/// Relabels clusters with fewer than `min_size` members as noise.
///
/// A cluster can end up below `min_pts` when border points it reaches were already
/// claimed by an earlier cluster.
pub fn dissolve_undersized(labels: &mut [Label], min_size: usize) {
    let mut sizes: BTreeMap<u32, usize> = BTreeMap::new();
    for c in labels.iter().filter_map(|l| l.cluster()) {
        *sizes.entry(c).or_default() += 1;
    }
    for label in labels.iter_mut() {
        if let Label::Cluster(c) = label {
            if sizes[c] < min_size {
                *label = Label::Noise;
            }
        }
    }
}

/// Clusters one user's points and ranks the surviving clusters.
pub fn cluster_user(user_id: &str, points: &[SemanticPoint], params: &ClusterParams) -> UserClusters {
    let min_pts = params.effective_min_pts(points.len().max(1));
    let coords: Vec<[f64; 2]> = points.iter().map(|p| [p.lon, p.lat]).collect();
    let mut labels = dbscan(&coords, params.eps, min_pts, params.distance).labels;
    dissolve_undersized(&mut labels, min_pts);
    let noise = labels.iter().filter(|l| **l == Label::Noise).count();
    UserClusters {
        user_id: user_id.to_string(),
        min_pts,
        clusters: rank_clusters(user_id, &labels, points),
        noise,
    }
}
