use std::collections::BTreeMap;

use crate::cluster::UserClusters;
use crate::landuse::ClassId;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub class: ClassId,
    /// Percentage of rank-1 clusters dominated by `class`, per run.
    pub share: [f64; 2],
    pub rank1: [usize; 2],
    /// Clusters of any rank dominated by `class`, per run.
    pub clusters: [usize; 2],
}

/// Side-by-side rank-1 landuse shares under two parameter sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub names: [String; 2],
    pub rank1_totals: [usize; 2],
    pub cluster_totals: [usize; 2],
    /// One row per class observed in either run, in class order.
    pub rows: Vec<SensitivityRow>,
}

impl SensitivityReport {
    pub fn from_runs(names: [&str; 2], runs: [&[UserClusters]; 2]) -> Self {
        let mut rank1: BTreeMap<ClassId, [usize; 2]> = BTreeMap::new();
        let mut all: BTreeMap<ClassId, [usize; 2]> = BTreeMap::new();
        let mut rank1_totals = [0; 2];
        let mut cluster_totals = [0; 2];
        for (side, run) in runs.iter().enumerate() {
            for cluster in run.iter().flat_map(|u| &u.clusters) {
                all.entry(cluster.dominant_landuse).or_default()[side] += 1;
                cluster_totals[side] += 1;
                if cluster.rank == 1 {
                    rank1.entry(cluster.dominant_landuse).or_default()[side] += 1;
                    rank1_totals[side] += 1;
                }
            }
        }
        let pct = |n: usize, total: usize| if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        let rows = all
            .into_iter()
            .map(|(class, clusters)| {
                let r1 = rank1.get(&class).copied().unwrap_or_default();
                SensitivityRow {
                    class,
                    share: [pct(r1[0], rank1_totals[0]), pct(r1[1], rank1_totals[1])],
                    rank1: r1,
                    clusters,
                }
            })
            .collect();
        Self { names: names.map(str::to_string), rank1_totals, cluster_totals, rows }
    }

    pub fn row(&self, class: ClassId) -> Option<&SensitivityRow> {
        self.rows.iter().find(|r| r.class == class)
    }

    /// Rank-1 share of `class` in percent, 0 when the class never dominates.
    pub fn share(&self, class: ClassId, side: usize) -> f64 {
        self.row(class).map_or(0.0, |r| r.share[side])
    }
}
