//! Comparing recovered clusters against the generator's ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::cluster::VisitCluster;
use crate::landuse::Taxonomy;

/// The parts of a recovered cluster that scoring looks at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub user_id: String,
    pub rank: u32,
    pub size: usize,
    pub centroid: [f64; 2],
    pub landuse: String,
}

impl ClusterSummary {
    pub fn from_cluster(cluster: &VisitCluster, taxonomy: &Taxonomy) -> Self {
        Self {
            user_id: cluster.user_id.clone(),
            rank: cluster.rank,
            size: cluster.size(),
            centroid: cluster.centroid,
            landuse: taxonomy.name(cluster.dominant_landuse).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorecard {
    /// Users scored; those without clusters count as not recovered.
    pub users: usize,
    pub recovered: usize,
    pub recovery_rate: f64,
    pub label_correct: usize,
    /// Over recovered users.
    pub label_accuracy: f64,
    /// Users with at least two clusters matched to true locations.
    pub ranked_users: usize,
    pub mean_kendall_tau: f64,
}

/// Kendall tau-a between two equally long score sequences. `None` below two items.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return None;
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            let x = (a[i] - a[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            let y = (b[i] - b[j]).partial_cmp(&0.0).map_or(0, |o| o as i64);
            s += x * y;
        }
    }
    Some(s as f64 / (n * (n - 1) / 2) as f64)
}

/// Greedy one-to-one matching of cluster centroids to true locations, closest pairs
/// first, keeping pairs within `eps`. Returns `(cluster index, location index)`.
pub fn match_locations(centroids: &[[f64; 2]], locations: &[[f64; 2]], eps: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (ci, c) in centroids.iter().enumerate() {
        for (li, l) in locations.iter().enumerate() {
            let d = (c[0] - l[0]).hypot(c[1] - l[1]);
            if d <= eps {
                pairs.push((d, ci, li));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_c, mut used_l) = (vec![false; centroids.len()], vec![false; locations.len()]);
    let mut out = Vec::new();
    for (_, ci, li) in pairs {
        if !used_c[ci] && !used_l[li] {
            used_c[ci] = true;
            used_l[li] = true;
            out.push((ci, li));
        }
    }
    out.sort_unstable();
    out
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// Scores the users named in `scope` against `truth`, with planar distances in degrees.
/// `clusters` may come in any order.
pub fn score<'a>(truth: &GroundTruth, scope: impl IntoIterator<Item = &'a str>, clusters: &[ClusterSummary], eps: f64) -> Scorecard {
    let mut by_user: BTreeMap<&str, Vec<&ClusterSummary>> = BTreeMap::new();
    for c in clusters {
        by_user.entry(c.user_id.as_str()).or_default().push(c);
    }
    by_user.values_mut().for_each(|v| v.sort_by_key(|c| c.rank));
    let (mut users, mut recovered, mut label_correct, mut ranked_users) = (0, 0, 0, 0);
    let mut tau_sum = 0.0;
    for id in scope {
        users += 1;
        let Some(t) = truth.user(id) else { continue };
        let Some(uc) = by_user.get(id) else { continue };
        let Some(top) = uc.first() else { continue };
        let home = &t.locations[0];
        if (top.centroid[0] - home.lon).hypot(top.centroid[1] - home.lat) <= eps {
            recovered += 1;
            if top.landuse == home.landuse {
                label_correct += 1;
            }
        }
        let centroids: Vec<[f64; 2]> = uc.iter().map(|c| c.centroid).collect();
        let locations: Vec<[f64; 2]> = t.locations.iter().map(|l| [l.lon, l.lat]).collect();
        let matched = match_locations(&centroids, &locations, eps);
        let sizes: Vec<f64> = matched.iter().map(|&(ci, _)| uc[ci].size as f64).collect();
        let probs: Vec<f64> = matched.iter().map(|&(_, li)| t.locations[li].probability).collect();
        if let Some(tau) = kendall_tau(&sizes, &probs) {
            ranked_users += 1;
            tau_sum += tau;
        }
    }
    Scorecard {
        users,
        recovered,
        recovery_rate: rate(recovered, users),
        label_correct,
        label_accuracy: rate(label_correct, recovered),
        ranked_users,
        mean_kendall_tau: if ranked_users == 0 { 0.0 } else { tau_sum / ranked_users as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tau_known_values() {
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        // pairs: (1,2) concordant, (1,3) discordant, (2,3) discordant
        assert_eq!(kendall_tau(&[1.0, 2.0, 3.0], &[2.0, 3.0, 1.0]), Some(-1.0 / 3.0));
        assert_eq!(kendall_tau(&[1.0, 1.0], &[1.0, 2.0]), Some(0.0));
        assert_eq!(kendall_tau(&[1.0], &[1.0]), None);
    }

    #[test]
    fn matching_prefers_closest() {
        let c = [[0.0, 0.0], [1.0, 0.0]];
        let l = [[0.9, 0.0], [0.05, 0.0], [5.0, 5.0]];
        assert_eq!(match_locations(&c, &l, 0.2), vec![(0, 1), (1, 0)]);
        assert_eq!(match_locations(&c, &l, 0.01), vec![]);
    }

    proptest! {
        #[test]
        fn tau_bounded_and_symmetric(v in prop::collection::vec((0u8..5, 0u8..5), 2..12)) {
            let a: Vec<f64> = v.iter().map(|p| p.0 as f64).collect();
            let b: Vec<f64> = v.iter().map(|p| p.1 as f64).collect();
            let t = kendall_tau(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert_eq!(t, kendall_tau(&b, &a).unwrap());
        }
    }
}
