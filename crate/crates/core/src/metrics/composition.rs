use std::collections::BTreeMap;

use crate::cluster::VisitCluster;
use crate::landuse::ClassId;

/// Dominant-landuse counts per cluster rank.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankComposition {
    /// `totals[r - 1]` is the number of rank-`r` clusters.
    pub totals: Vec<usize>,
    pub counts: BTreeMap<(u32, ClassId), usize>,
}

impl RankComposition {
    pub fn max_rank(&self) -> u32 {
        self.totals.len() as u32
    }

    pub fn total(&self, rank: u32) -> usize {
        rank.checked_sub(1).and_then(|i| self.totals.get(i as usize)).copied().unwrap_or(0)
    }

    pub fn count(&self, rank: u32, class: ClassId) -> usize {
        self.counts.get(&(rank, class)).copied().unwrap_or(0)
    }

    /// Share of rank-`rank` clusters whose dominant class is `class`.
    pub fn fraction(&self, rank: u32, class: ClassId) -> f64 {
        match self.total(rank) {
            0 => 0.0,
            t => self.count(rank, class) as f64 / t as f64,
        }
    }

    pub fn all_clusters(&self) -> usize {
        self.totals.iter().sum()
    }

    /// `(rank, class, count, fraction)` rows in rank then class order.
    pub fn rows(&self) -> impl Iterator<Item = (u32, ClassId, usize, f64)> + '_ {
        self.counts.iter().map(|(&(r, c), &n)| (r, c, n, n as f64 / self.total(r) as f64))
    }
}

/// Pools dominant classes by rank. `max_rank = None` keeps every rank present.
pub fn rank_composition<'a, I>(clusters: I, max_rank: Option<u32>) -> RankComposition
where
    I: IntoIterator<Item = &'a VisitCluster>,
{
    let mut out = RankComposition::default();
    for c in clusters {
        if max_rank.is_some_and(|m| c.rank > m) {
            continue;
        }
        let idx = c.rank as usize - 1;
        if out.totals.len() <= idx {
            out.totals.resize(idx + 1, 0);
        }
        out.totals[idx] += 1;
        *out.counts.entry((c.rank, c.dominant_landuse)).or_default() += 1;
    }
    out
}
