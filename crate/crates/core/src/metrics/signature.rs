//! Hourly tweet-intensity signatures and nearest-signature labeling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::cluster::VisitCluster;
use crate::landuse::{ClassId, SemanticPoint};

pub const HOURS: usize = 24;

/// Tweets per local hour pooled over the clusters of one (landuse, rank) group.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureGroup {
    pub class: ClassId,
    pub rank: u32,
    pub clusters: usize,
    pub counts: [u64; HOURS],
}

impl SignatureGroup {
    pub fn tweets(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Hourly counts divided by the group's cluster count.
    pub fn intensity(&self) -> [f64; HOURS] {
        let mut out = [0.0; HOURS];
        for (o, &c) in out.iter_mut().zip(&self.counts) {
            *o = c as f64 / self.clusters as f64;
        }
        out
    }

    pub fn stats(&self) -> HourlyStats {
        HourlyStats::from_counts(&self.counts)
    }
}

/// Peak hour, its share of the total, and Pearson's χ² against a flat 24-bin profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HourlyStats {
    pub peak_hour: u32,
    pub peak_share: f64,
    pub chi_squared: f64,
    pub degrees_of_freedom: u32,
}

impl HourlyStats {
    pub fn from_counts(counts: &[u64; HOURS]) -> Self {
        let total: u64 = counts.iter().sum();
        let (peak_hour, &peak) = counts
            .iter()
            .enumerate()
            .fold((0, &counts[0]), |best, (h, c)| if c > best.1 { (h, c) } else { best });
        let expected = total as f64 / HOURS as f64;
        let chi_squared = if total == 0 {
            0.0
        } else {
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
        };
        HourlyStats {
            peak_hour: peak_hour as u32,
            peak_share: if total == 0 { 0.0 } else { peak as f64 / total as f64 },
            chi_squared,
            degrees_of_freedom: (HOURS - 1) as u32,
        }
    }
}

/// Signature groups keyed by (landuse, rank).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignatureMatrix {
    groups: BTreeMap<(ClassId, u32), SignatureGroup>,
}

impl SignatureMatrix {
    /// Pools member hours of each cluster into its (dominant landuse, rank) group.
    pub fn build<'a, I>(clusters: I, max_rank: u32) -> Self
    where
        I: IntoIterator<Item = (&'a VisitCluster, &'a [SemanticPoint])>,
    {
        let mut matrix = Self::default();
        for (cluster, points) in clusters {
            if cluster.rank <= max_rank {
                matrix.add(cluster, &cluster.hourly_counts(points));
            }
        }
        matrix
    }

    pub fn add(&mut self, cluster: &VisitCluster, hourly: &[u64; HOURS]) {
        let key = (cluster.dominant_landuse, cluster.rank);
        let group = self.groups.entry(key).or_insert_with(|| SignatureGroup {
            class: key.0,
            rank: key.1,
            clusters: 0,
            counts: [0; HOURS],
        });
        group.clusters += 1;
        for (g, h) in group.counts.iter_mut().zip(hourly) {
            *g += h;
        }
    }

    /// Combines two partial matrices. Order of merging does not affect the result.
    pub fn merge(&mut self, other: SignatureMatrix) {
        for (key, g) in other.groups {
            match self.groups.get_mut(&key) {
                Some(mine) => {
                    mine.clusters += g.clusters;
                    for (a, b) in mine.counts.iter_mut().zip(&g.counts) {
                        *a += b;
                    }
                }
                None => {
                    self.groups.insert(key, g);
                }
            }
        }
    }

    pub fn get(&self, class: ClassId, rank: u32) -> Option<&SignatureGroup> {
        self.groups.get(&(class, rank))
    }

    /// Groups in (class, rank) order.
    pub fn groups(&self) -> impl Iterator<Item = &SignatureGroup> {
        self.groups.values()
    }

    /// Per-class intensity vectors at `rank`, used as classification references.
    pub fn references(&self, rank: u32, metric: SignatureMetric) -> ReferenceSignatures {
        ReferenceSignatures {
            metric,
            entries: self
                .groups
                .values()
                .filter(|g| g.rank == rank && g.tweets() > 0)
                .map(|g| (g.class, g.intensity()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignatureMetric {
    /// 1 − cosine similarity of the L1-normalized vectors.
    #[default]
    Cosine,
    /// Symmetric χ² distance ½·Σ(a−b)²/(a+b) of the L1-normalized vectors.
    ChiSquared,
}

impl std::str::FromStr for SignatureMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "chi_squared" | "chi2" => Ok(Self::ChiSquared),
            other => Err(format!("unknown signature metric `{other}`")),
        }
    }
}

fn l1_normalized(v: &[f64; HOURS]) -> Result<[f64; HOURS], MetricsError> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(MetricsError::InvalidSignature);
    }
    let sum: f64 = v.iter().sum();
    if sum <= 0.0 {
        return Err(MetricsError::EmptySignature);
    }
    Ok(v.map(|x| x / sum))
}

/// Dissimilarity in `[0, 1]` between two non-negative hourly vectors.
pub fn signature_distance(a: &[f64; HOURS], b: &[f64; HOURS], metric: SignatureMetric) -> Result<f64, MetricsError> {
    let (a, b) = (l1_normalized(a)?, l1_normalized(b)?);
    let d = match metric {
        SignatureMetric::Cosine => {
            let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            1.0 - dot / (na * nb)
        }
        SignatureMetric::ChiSquared => {
            0.5 * a.iter().zip(&b).filter(|(x, y)| **x + **y > 0.0).map(|(x, y)| (x - y).powi(2) / (x + y)).sum::<f64>()
        }
    };
    Ok(d.clamp(0.0, 1.0))
}

/// Reference vector per class, ordered by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSignatures {
    pub metric: SignatureMetric,
    pub entries: Vec<(ClassId, [f64; HOURS])>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    Label { class: ClassId, dissimilarity: f64 },
    /// Too few tweets to classify.
    Abstain { tweets: u64 },
}

impl Classification {
    pub fn class(&self) -> Option<ClassId> {
        match self {
            Classification::Label { class, .. } => Some(*class),
            Classification::Abstain { .. } => None,
        }
    }
}

/// Labels a cluster's hourly counts with the nearest reference class (smallest class id on ties).
pub fn classify_cluster(
    hourly: &[u64; HOURS],
    references: &ReferenceSignatures,
    min_tweets: u64,
) -> Result<Classification, MetricsError> {
    if references.entries.len() < 2 {
        return Err(MetricsError::TooFewReferences(references.entries.len()));
    }
    let tweets: u64 = hourly.iter().sum();
    if tweets < min_tweets.max(1) {
        return Ok(Classification::Abstain { tweets });
    }
    let v = hourly.map(|c| c as f64);
    let mut best: Option<(ClassId, f64)> = None;
    for (class, reference) in &references.entries {
        let d = signature_distance(&v, reference, references.metric)?;
        match best {
            Some((bc, bd)) if bd < d || (bd == d && bc < *class) => {}
            _ => best = Some((*class, d)),
        }
    }
    let (class, dissimilarity) = best.expect("at least two references");
    Ok(Classification::Label { class, dissimilarity })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn spike(h: usize, mass: f64) -> [f64; HOURS] {
        let mut v = [0.0; HOURS];
        v[h] = mass;
        v
    }

    #[test]
    fn distance_basics() {
        let mut v = [0.0; HOURS];
        for (h, x) in v.iter_mut().enumerate() {
            *x = (h % 5) as f64 + 0.5;
        }
        assert!(signature_distance(&v, &v, SignatureMetric::Cosine).unwrap().abs() < 1e-12);
        assert_eq!(signature_distance(&spike(3, 1.0), &spike(15, 1.0), SignatureMetric::Cosine).unwrap(), 1.0);
        assert!(signature_distance(&v, &v.map(|x| 2.0 * x), SignatureMetric::Cosine).unwrap().abs() < 1e-12);
        assert_eq!(signature_distance(&spike(3, 1.0), &spike(15, 1.0), SignatureMetric::ChiSquared).unwrap(), 1.0);
    }

    #[test]
    fn zero_vector_rejected() {
        assert_eq!(
            signature_distance(&[0.0; HOURS], &spike(1, 1.0), SignatureMetric::Cosine),
            Err(MetricsError::EmptySignature)
        );
        assert_eq!(
            signature_distance(&spike(1, -1.0), &spike(1, 1.0), SignatureMetric::Cosine),
            Err(MetricsError::InvalidSignature)
        );
    }

    fn refs() -> ReferenceSignatures {
        let mut night = [1.0; HOURS];
        for x in &mut night[19..] {
            *x = 6.0;
        }
        let mut morning = [1.0; HOURS];
        for x in &mut morning[7..10] {
            *x = 8.0;
        }
        ReferenceSignatures { metric: SignatureMetric::Cosine, entries: vec![(ClassId(2), morning), (ClassId(5), night)] }
    }

    #[test]
    fn reference_classifies_as_itself() {
        let r = refs();
        let night_counts = r.entries[1].1.map(|x| x as u64 * 3);
        match classify_cluster(&night_counts, &r, 10).unwrap() {
            Classification::Label { class, dissimilarity } => {
                assert_eq!(class, ClassId(5));
                assert!(dissimilarity.abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn abstains_below_threshold() {
        let mut counts = [0u64; HOURS];
        counts[8] = 3;
        assert_eq!(classify_cluster(&counts, &refs(), 10).unwrap(), Classification::Abstain { tweets: 3 });
    }

    #[test]
    fn needs_two_references() {
        let mut r = refs();
        r.entries.truncate(1);
        assert_eq!(classify_cluster(&[1; HOURS], &r, 10), Err(MetricsError::TooFewReferences(1)));
    }

    #[test]
    fn equal_distance_picks_smaller_class() {
        let r = ReferenceSignatures {
            metric: SignatureMetric::Cosine,
            entries: vec![(ClassId(1), spike(2, 1.0)), (ClassId(4), spike(20, 1.0))],
        };
        let mut counts = [0u64; HOURS];
        counts[2] = 10;
        counts[20] = 10;
        assert_eq!(r.entries.len(), 2);
        assert_eq!(classify_cluster(&counts, &r, 10).unwrap().class(), Some(ClassId(1)));
    }

    #[test]
    fn hourly_stats() {
        let mut counts = [0u64; HOURS];
        counts[9] = 12;
        counts[10] = 12;
        let s = HourlyStats::from_counts(&counts);
        assert_eq!(s.peak_hour, 9);
        assert_eq!(s.peak_share, 0.5);
        // Expected 1 per bin: 22 bins at (0-1)² plus two at (12-1)².
        assert!((s.chi_squared - (22.0 + 2.0 * 121.0)).abs() < 1e-9);
        let flat = HourlyStats::from_counts(&[5; HOURS]);
        assert_eq!(flat.chi_squared, 0.0);
    }

    fn arb_vec() -> impl Strategy<Value = [f64; HOURS]> {
        prop::array::uniform24(0.0..10.0f64).prop_filter("non-zero", |v| v.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_scale_free(a in arb_vec(), b in arb_vec(), k in 0.1..50.0f64) {
            for metric in [SignatureMetric::Cosine, SignatureMetric::ChiSquared] {
                let ab = signature_distance(&a, &b, metric).unwrap();
                let ba = signature_distance(&b, &a, metric).unwrap();
                prop_assert!((ab - ba).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&ab));
                let scaled = signature_distance(&a.map(|x| x * k), &b, metric).unwrap();
                prop_assert!((scaled - ab).abs() < 1e-9);
                prop_assert!(signature_distance(&a, &a, metric).unwrap() < 1e-9);
            }
        }
    }
}
