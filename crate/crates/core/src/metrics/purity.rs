use std::collections::BTreeMap;

use serde::Serialize;

use crate::cluster::VisitCluster;

/// Linear interpolation between order statistics of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankPurity {
    pub rank: u32,
    pub clusters: usize,
    pub min: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PurityDistribution {
    pub ranks: Vec<RankPurity>,
    /// Requested ranks with no clusters.
    pub omitted: Vec<u32>,
}

impl PurityDistribution {
    pub fn rank(&self, rank: u32) -> Option<&RankPurity> {
        self.ranks.iter().find(|r| r.rank == rank)
    }
}

/// Purity quantiles for ranks `1..=max_rank`.
pub fn purity_distribution<'a, I>(clusters: I, max_rank: u32) -> PurityDistribution
where
    I: IntoIterator<Item = &'a VisitCluster>,
{
    let mut by_rank: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for c in clusters {
        if c.rank <= max_rank {
            by_rank.entry(c.rank).or_default().push(c.purity);
        }
    }
    let mut out = PurityDistribution::default();
    for rank in 1..=max_rank {
        let Some(mut values) = by_rank.remove(&rank) else {
            out.omitted.push(rank);
            continue;
        };
        values.sort_by(f64::total_cmp);
        let q = |p| quantile(&values, p).expect("non-empty");
        out.ranks.push(RankPurity {
            rank,
            clusters: values.len(),
            min: values[0],
            p25: q(0.25),
            p50: q(0.5),
            p75: q(0.75),
            max: values[values.len() - 1],
        });
    }
    out
}
