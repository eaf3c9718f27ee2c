//! Stage composition shared by the command line and the tests.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{cluster_user, ClusterParams, UserClusters};
use crate::ingest::{bbox_filter, build_trajectories, median_filter, BoundingBox, IngestError, MedianReport, Trajectory, TweetRecord, UsZone};
use crate::landuse::{LanduseError, LanduseMap, SemanticPoint};
use crate::metrics::{purity_distribution, rank_composition, PurityDistribution, RankComposition, SignatureMatrix};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {source}")]
    Ingest { stage: &'static str, source: IngestError },
    #[error("enrich: user {user}: {source}")]
    Enrich { user: String, source: LanduseError },
    #[error("{0}: no records left")]
    Empty(&'static str),
}

#[derive(Debug, Clone)]
pub struct PrepareOptions {
    pub bbox: BoundingBox,
    pub zone: UsZone,
    /// Drop repeated (user, timestamp) records.
    pub dedupe: bool,
}

/// Record and user counts after each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub records: usize,
    pub bbox_retained: usize,
    /// Inside the box but outside the supported clock years.
    pub outside_years: usize,
    pub duplicates: usize,
    pub users: usize,
    /// Sum of trajectory lengths before the median filter.
    pub trajectory_points: usize,
    pub median_retained_users: usize,
    pub median_retained_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichedUser {
    pub user_id: String,
    pub points: Vec<SemanticPoint>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    /// In user id order.
    pub users: Vec<EnrichedUser>,
    pub counts: StageCounts,
    pub median: MedianReport,
}

#[derive(Debug, Clone)]
pub struct Selected {
    /// Median-retained trajectories in user id order.
    pub trajectories: Vec<Trajectory>,
    pub counts: StageCounts,
    pub median: MedianReport,
}

/// Box filter, clock guard, trajectories and the median filter.
pub fn select(records: Vec<TweetRecord>, opts: &PrepareOptions) -> Result<Selected, PipelineError> {
    let mut counts = StageCounts { records: records.len(), ..StageCounts::default() };
    if records.is_empty() {
        return Err(PipelineError::Empty("parse"));
    }
    let inside = bbox_filter(records, &opts.bbox);
    counts.bbox_retained = inside.len();
    let dated: Vec<TweetRecord> = inside.into_iter().filter(|r| opts.zone.to_local(r.t_utc).is_ok()).collect();
    counts.outside_years = counts.bbox_retained - dated.len();
    if dated.is_empty() {
        return Err(PipelineError::Empty("bbox"));
    }
    let mut trajectories = build_trajectories(dated);
    if opts.dedupe {
        let before: usize = trajectories.iter().map(|t| t.len()).sum();
        trajectories.iter_mut().for_each(|t| t.dedupe());
        counts.duplicates = before - trajectories.iter().map(|t| t.len()).sum::<usize>();
    }
    counts.users = trajectories.len();
    counts.trajectory_points = trajectories.iter().map(|t| t.len()).sum();
    let (retained, median) = median_filter(trajectories).map_err(|source| PipelineError::Ingest { stage: "median_filter", source })?;
    counts.median_retained_users = retained.len();
    counts.median_retained_points = retained.iter().map(|t| t.len()).sum();
    Ok(Selected { trajectories: retained, counts, median })
}

/// [`select`] followed by parallel enrichment.
pub fn prepare(records: Vec<TweetRecord>, opts: &PrepareOptions, map: &LanduseMap) -> Result<Prepared, PipelineError> {
    let Selected { trajectories, counts, median } = select(records, opts)?;
    let users = trajectories
        .par_iter()
        .map(|t| {
            map.enrich(t, &opts.zone)
                .map(|points| EnrichedUser { user_id: t.user_id.clone(), points })
                .map_err(|source| PipelineError::Enrich { user: t.user_id.clone(), source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Prepared { users, counts, median })
}

/// Clusters every user in parallel; output order follows `users`.
pub fn cluster_all(users: &[EnrichedUser], params: &ClusterParams) -> Vec<UserClusters> {
    users.par_iter().map(|u| cluster_user(&u.user_id, &u.points, params)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub composition: RankComposition,
    pub purity: PurityDistribution,
    pub signatures: SignatureMatrix,
    pub clusters: usize,
    pub clustered_points: usize,
    pub noise_points: usize,
}

/// Aggregates one clustering run. `users` and `clusters` must be aligned.
pub fn analyze(users: &[EnrichedUser], clusters: &[UserClusters], max_rank: u32) -> Analysis {
    assert_eq!(users.len(), clusters.len(), "users and clusters are aligned");
    let all = || clusters.iter().flat_map(|u| &u.clusters);
    let signatures = SignatureMatrix::build(
        users.iter().zip(clusters).flat_map(|(u, c)| c.clusters.iter().map(move |v| (v, u.points.as_slice()))),
        max_rank,
    );
    Analysis {
        composition: rank_composition(all(), None),
        purity: purity_distribution(all(), max_rank),
        signatures,
        clusters: all().count(),
        clustered_points: clusters.iter().map(UserClusters::clustered).sum(),
        noise_points: clusters.iter().map(|u| u.noise).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, GridSpec, SynthConfig};

    fn run(threads: usize) -> (Prepared, Vec<UserClusters>) {
        let config = SynthConfig { n_users: 80, grid: GridSpec { cols: 12, rows: 12, ..GridSpec::default() }, ..SynthConfig::default() };
        let corpus = generate(&config).unwrap();
        let opts = PrepareOptions { bbox: BoundingBox::CHICAGO, zone: UsZone::central(2014..=2014).unwrap(), dedupe: false };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let prepared = prepare(corpus.records, &opts, &corpus.map.map).unwrap();
            let clusters = cluster_all(&prepared.users, &ClusterParams::EXP1);
            (prepared, clusters)
        })
    }

    #[test]
    fn counts_are_consistent() {
        let (p, clusters) = run(2);
        let c = &p.counts;
        assert!(c.records >= c.bbox_retained && c.bbox_retained >= c.trajectory_points);
        assert_eq!(c.trajectory_points, c.bbox_retained - c.outside_years - c.duplicates);
        assert!(c.median_retained_points <= c.trajectory_points);
        assert_eq!(p.users.iter().map(|u| u.points.len()).sum::<usize>(), c.median_retained_points);
        let a = analyze(&p.users, &clusters, 5);
        assert_eq!(a.clustered_points + a.noise_points, c.median_retained_points);
        assert_eq!(a.composition.all_clusters(), a.clusters);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let (p1, c1) = run(1);
        let (p4, c4) = run(4);
        assert_eq!(p1.users, p4.users);
        assert_eq!(c1, c4);
    }

    #[test]
    fn empty_input_rejected() {
        let opts = PrepareOptions { bbox: BoundingBox::CHICAGO, zone: UsZone::central(2014..=2014).unwrap(), dedupe: false };
        let map = crate::synth::build_synth_map(&GridSpec { cols: 2, rows: 2, ..GridSpec::default() }, 1).unwrap();
        assert!(matches!(prepare(vec![], &opts, &map.map), Err(PipelineError::Empty("parse"))));
    }
}
