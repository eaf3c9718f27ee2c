//! Density-based clustering over lon/lat points.
//!
//! A point is core when at least `min_pts` points (itself included) lie within `eps`.
//! Clusters are grown from unlabeled core points in ascending index order, so a border
//! point reachable from several clusters joins the one whose lowest-index core comes first.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    /// Euclidean distance in degrees.
    #[default]
    Planar,
    /// Great-circle central angle, in degrees.
    Haversine,
}

impl Distance {
    pub fn between(self, a: [f64; 2], b: [f64; 2]) -> f64 {
        match self {
            Distance::Planar => {
                let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
                (dx * dx + dy * dy).sqrt()
            }
            Distance::Haversine => {
                let (lat1, lat2) = (a[1].to_radians(), b[1].to_radians());
                let dlat = lat2 - lat1;
                let dlon = (b[0] - a[0]).to_radians();
                let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
                (2.0 * h.sqrt().min(1.0).asin()).to_degrees()
            }
        }
    }
}

impl std::str::FromStr for Distance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planar" => Ok(Self::Planar),
            "haversine" => Ok(Self::Haversine),
            other => Err(format!("unknown distance `{other}` (expected planar or haversine)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Noise,
    Cluster(u32),
}

impl Label {
    pub fn cluster(self) -> Option<u32> {
        match self {
            Label::Cluster(c) => Some(c),
            Label::Noise => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dbscan {
    pub labels: Vec<Label>,
    pub core: Vec<bool>,
    pub clusters: u32,
}

/// Neighbor search strategy.
trait Neighbors {
    fn neighbors(&self, i: usize, out: &mut Vec<u32>);
}

struct Exhaustive<'a> {
    points: &'a [[f64; 2]],
    eps: f64,
    metric: Distance,
}

impl Neighbors for Exhaustive<'_> {
    fn neighbors(&self, i: usize, out: &mut Vec<u32>) {
        out.clear();
        let p = self.points[i];
        out.extend(
            (0..self.points.len())
                .filter(|&j| self.metric.between(p, self.points[j]) <= self.eps)
                .map(|j| j as u32),
        );
    }
}

/// Buckets points on a grid whose cells are at least `eps` wide, so all neighbors of a
/// point lie in the surrounding 3×3 block.
struct Grid<'a> {
    points: &'a [[f64; 2]],
    eps: f64,
    metric: Distance,
    cell: [f64; 2],
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl<'a> Grid<'a> {
    fn new(points: &'a [[f64; 2]], eps: f64, metric: Distance) -> Option<Self> {
        let cell = match metric {
            Distance::Planar => [eps * (1.0 + 1e-9); 2],
            Distance::Haversine => {
                let max_abs_lat = points.iter().map(|p| p[1].abs()).fold(0.0, f64::max) + eps;
                if max_abs_lat >= 89.0 {
                    return None;
                }
                let ratio = (eps.to_radians() / 2.0).sin() / max_abs_lat.to_radians().cos();
                if ratio >= 1.0 {
                    return None;
                }
                // Any pair within eps differs in longitude by at most this angle.
                let lon_span = (2.0 * ratio.asin()).to_degrees() * (1.0 + 1e-9);
                [lon_span, eps * (1.0 + 1e-9)]
            }
        };
        let mut grid = Grid { points, eps, metric, cell, buckets: HashMap::new() };
        for (i, &p) in points.iter().enumerate() {
            grid.buckets.entry(grid.key(p)).or_default().push(i as u32);
        }
        Some(grid)
    }

    fn key(&self, p: [f64; 2]) -> (i64, i64) {
        ((p[0] / self.cell[0]).floor() as i64, (p[1] / self.cell[1]).floor() as i64)
    }
}

impl Neighbors for Grid<'_> {
    fn neighbors(&self, i: usize, out: &mut Vec<u32>) {
        out.clear();
        let p = self.points[i];
        let (cx, cy) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.buckets.get(&(cx + dx, cy + dy)) {
                    out.extend(bucket.iter().copied().filter(|&j| self.metric.between(p, self.points[j as usize]) <= self.eps));
                }
            }
        }
    }
}

fn run<N: Neighbors>(n: usize, min_pts: usize, search: &N) -> Dbscan {
    let mut scratch = Vec::new();
    let mut neighborhoods: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut core = Vec::with_capacity(n);
    for i in 0..n {
        search.neighbors(i, &mut scratch);
        let is_core = scratch.len() >= min_pts;
        core.push(is_core);
        neighborhoods.push(if is_core { scratch.clone() } else { Vec::new() });
    }

    let mut labels = vec![Label::Noise; n];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for seed in 0..n {
        if !core[seed] || labels[seed] != Label::Noise {
            continue;
        }
        let id = Label::Cluster(next);
        next += 1;
        labels[seed] = id;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for &q in &neighborhoods[p] {
                let q = q as usize;
                if labels[q] == Label::Noise {
                    labels[q] = id;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    Dbscan { labels, core, clusters: next }
}

/// Clusters `points` using a grid-bucketed neighbor search.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize, metric: Distance) -> Dbscan {
    match Grid::new(points, eps, metric) {
        Some(grid) => run(points.len(), min_pts, &grid),
        None => dbscan_exhaustive(points, eps, min_pts, metric),
    }
}

/// Same semantics as [`dbscan`] with an O(n²) neighbor scan.
pub fn dbscan_exhaustive(points: &[[f64; 2]], eps: f64, min_pts: usize, metric: Distance) -> Dbscan {
    run(points.len(), min_pts, &Exhaustive { points, eps, metric })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// Reachability closure: connected components of the core-core ε-graph, numbered by
    /// lowest core index; each border point takes the lowest-numbered adjacent component.
    fn closure_oracle(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
        let n = points.len();
        let near = |a: usize, b: usize| {
            let (dx, dy) = (points[a][0] - points[b][0], points[a][1] - points[b][1]);
            (dx * dx + dy * dy).sqrt() <= eps
        };
        let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();
        let mut comp: Vec<Option<usize>> = vec![None; n];
        let mut count = 0;
        for s in 0..n {
            if !core[s] || comp[s].is_some() {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = Some(count);
            while let Some(p) = stack.pop() {
                for q in 0..n {
                    if core[q] && comp[q].is_none() && near(p, q) {
                        comp[q] = Some(count);
                        stack.push(q);
                    }
                }
            }
            count += 1;
        }
        (0..n)
            .map(|i| {
                if core[i] {
                    comp[i]
                } else {
                    (0..n).filter(|&j| core[j] && near(i, j)).filter_map(|j| comp[j]).min()
                }
            })
            .collect()
    }

    fn same_partition(labels: &[Label], oracle: &[Option<usize>]) -> bool {
        let mut fwd = HashMap::new();
        let mut back = HashMap::new();
        labels.iter().zip(oracle).all(|(l, o)| match (l.cluster(), o) {
            (None, None) => true,
            (Some(a), Some(b)) => *fwd.entry(a).or_insert(*b) == *b && *back.entry(*b).or_insert(a) == a,
            _ => false,
        })
    }

    #[test]
    fn three_identical_points_are_noise() {
        let out = dbscan(&[[1.0, 1.0]; 3], 0.0025, 4, Distance::Planar);
        assert!(out.labels.iter().all(|l| *l == Label::Noise));
    }

    #[test]
    fn four_identical_points_cluster() {
        let out = dbscan(&[[-87.6, 41.9]; 4], 0.0025, 4, Distance::Planar);
        assert_eq!(out.clusters, 1);
        assert!(out.labels.iter().all(|l| *l == Label::Cluster(0)));
    }

    #[test]
    fn uniform_points_match_closure_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let points: Vec<[f64; 2]> = (0..50).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let out = dbscan(&points, 0.05, 4, Distance::Planar);
        let oracle = closure_oracle(&points, 0.05, 4);
        assert!(same_partition(&out.labels, &oracle));
        let ids: Vec<Option<u32>> = out.labels.iter().map(|l| l.cluster()).collect();
        let expected: Vec<Option<u32>> = oracle.iter().map(|o| o.map(|c| c as u32)).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // Index 0 is a border point within eps of one core in each group; the group
        // scanned first (starting at index 1) claims it.
        let mut points = vec![[1.0, 0.0]];
        points.extend([[2.0, 0.0], [2.1, 0.0], [2.2, 0.0], [2.3, 0.0]]);
        points.extend([[0.0, 0.0], [-0.1, 0.0], [-0.2, 0.0], [-0.3, 0.0]]);
        let out = dbscan(&points, 1.0, 4, Distance::Planar);
        assert!(!out.core[0]);
        assert!(out.core[1..].iter().all(|&c| c));
        assert_eq!(out.clusters, 2);
        assert_eq!(out.labels[0], Label::Cluster(0));
        assert_eq!(out.labels[1], Label::Cluster(0));
        assert_eq!(out.labels[5], Label::Cluster(1));
    }

    #[test]
    fn haversine_grid_matches_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<[f64; 2]> =
            (0..300).map(|_| [-87.7 + rng.random::<f64>() * 0.05, 41.8 + rng.random::<f64>() * 0.05]).collect();
        let grid = dbscan(&points, 0.0025, 4, Distance::Haversine);
        let brute = dbscan_exhaustive(&points, 0.0025, 4, Distance::Haversine);
        assert_eq!(grid, brute);
    }

    #[test]
    fn haversine_is_central_angle() {
        let d = Distance::Haversine.between([0.0, 0.0], [0.0, 1.0]);
        assert!((d - 1.0).abs() < 1e-12);
        let at_chicago = Distance::Haversine.between([-87.6, 41.9], [-87.5, 41.9]);
        assert!((at_chicago - 0.1 * 41.9f64.to_radians().cos()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn grid_equals_exhaustive(
            raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..120),
            eps in 0.01..0.3f64,
            min_pts in 2usize..8,
        ) {
            let points: Vec<[f64; 2]> = raw.into_iter().map(|(x, y)| [x, y]).collect();
            prop_assert_eq!(
                dbscan(&points, eps, min_pts, Distance::Planar),
                dbscan_exhaustive(&points, eps, min_pts, Distance::Planar)
            );
        }

        #[test]
        fn core_flags_independent_of_order(
            raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..80),
            eps in 0.02..0.3f64,
            min_pts in 2usize..6,
        ) {
            let points: Vec<[f64; 2]> = raw.into_iter().map(|(x, y)| [x, y]).collect();
            let reversed: Vec<[f64; 2]> = points.iter().rev().copied().collect();
            let a = dbscan(&points, eps, min_pts, Distance::Planar);
            let b = dbscan(&reversed, eps, min_pts, Distance::Planar);
            let b_core: Vec<bool> = b.core.iter().rev().copied().collect();
            prop_assert_eq!(&a.core, &b_core);
            prop_assert_eq!(&a, &dbscan(&points, eps, min_pts, Distance::Planar));
        }

        #[test]
        fn close_points_form_one_cluster(raw in prop::collection::vec((0.0..0.01f64, 0.0..0.01f64), 2..40)) {
            let points: Vec<[f64; 2]> = raw.into_iter().map(|(x, y)| [x, y]).collect();
            let out = dbscan(&points, 0.015, 2, Distance::Planar);
            prop_assert_eq!(out.clusters, 1);
            prop_assert!(out.labels.iter().all(|l| *l == Label::Cluster(0)));
        }
    }
}
