//! Report tables. Float columns use fixed precision so reruns compare byte for byte.

use std::io::Read;

use anyhow::Context;
use serde_json::{json, Value};
use toploc_core::cluster::UserClusters;
use toploc_core::landuse::Taxonomy;
use toploc_core::metrics::{SensitivityReport, HOURS};
use toploc_core::pipeline::{Analysis, StageCounts};
use toploc_core::ingest::MedianReport;
use toploc_core::synth::ClusterSummary;

pub struct Run<'a> {
    pub name: &'a str,
    pub min_pts: String,
    pub eps: f64,
    pub clusters: &'a [UserClusters],
    pub analysis: &'a Analysis,
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

fn table(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn strings<const N: usize>(h: [&str; N]) -> Vec<String> {
    h.iter().map(|s| s.to_string()).collect()
}

pub fn clusters_csv(runs: &[Run], tax: &Taxonomy) -> Vec<u8> {
    let header = strings(["experiment", "user", "rank", "size", "lon", "lat", "landuse", "purity", "first_local_time"]);
    let rows = runs.iter().flat_map(|run| {
        run.clusters.iter().flat_map(|u| &u.clusters).map(move |c| {
            vec![
                run.name.to_string(),
                c.user_id.clone(),
                c.rank.to_string(),
                c.size().to_string(),
                c.centroid[0].to_string(),
                c.centroid[1].to_string(),
                tax.name(c.dominant_landuse).to_string(),
                f6(c.purity),
                c.first_time.to_string(),
            ]
        })
    });
    table(header, rows)
}

/// Reads `clusters.csv` back as `(experiment, summary)` pairs.
pub fn read_clusters_csv<R: Read>(input: R) -> anyhow::Result<Vec<(String, ClusterSummary)>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.context("reading clusters.csv")?;
        let field = |k: usize| row.get(k).with_context(|| format!("clusters.csv row {}: missing column {k}", i + 2));
        let summary = ClusterSummary {
            user_id: field(1)?.to_string(),
            rank: field(2)?.parse().context("rank")?,
            size: field(3)?.parse().context("size")?,
            centroid: [field(4)?.parse().context("lon")?, field(5)?.parse().context("lat")?],
            landuse: field(6)?.to_string(),
        };
        out.push((field(0)?.to_string(), summary));
    }
    Ok(out)
}

pub fn rank_composition_csv(runs: &[Run], tax: &Taxonomy) -> Vec<u8> {
    let header = strings(["experiment", "rank", "landuse", "clusters", "rank_total", "share"]);
    let rows = runs.iter().flat_map(|run| {
        let comp = &run.analysis.composition;
        comp.rows().map(move |(rank, class, n, share)| {
            vec![run.name.to_string(), rank.to_string(), tax.name(class).to_string(), n.to_string(), comp.total(rank).to_string(), f6(share)]
        })
    });
    table(header, rows)
}

pub fn purity_csv(runs: &[Run]) -> Vec<u8> {
    let header = strings(["experiment", "rank", "clusters", "min", "p25", "p50", "p75", "max"]);
    let rows = runs.iter().flat_map(|run| {
        run.analysis.purity.ranks.iter().map(move |r| {
            vec![run.name.to_string(), r.rank.to_string(), r.clusters.to_string(), f6(r.min), f6(r.p25), f6(r.p50), f6(r.p75), f6(r.max)]
        })
    });
    table(header, rows)
}

/// Mean tweets per cluster at each local hour, per (landuse, rank) group.
pub fn signatures_csv(runs: &[Run], tax: &Taxonomy) -> Vec<u8> {
    let mut header = strings(["experiment", "landuse", "rank", "clusters", "tweets"]);
    header.extend((0..HOURS).map(|h| format!("h{h:02}")));
    let rows = runs.iter().flat_map(|run| {
        run.analysis.signatures.groups().map(move |g| {
            let mut row = vec![run.name.to_string(), tax.name(g.class).to_string(), g.rank.to_string(), g.clusters.to_string(), g.tweets().to_string()];
            row.extend(g.intensity().iter().map(|x| f6(*x)));
            row
        })
    });
    table(header, rows)
}

pub fn sensitivity_csv(report: &SensitivityReport, tax: &Taxonomy) -> Vec<u8> {
    let [a, b] = &report.names;
    let header = vec![
        "landuse".to_string(),
        format!("{a}_rank1_share_pct"),
        format!("{b}_rank1_share_pct"),
        format!("{a}_rank1_clusters"),
        format!("{b}_rank1_clusters"),
        format!("{a}_clusters"),
        format!("{b}_clusters"),
    ];
    let rows = report.rows.iter().map(|r| {
        vec![
            tax.name(r.class).to_string(),
            f6(r.share[0]),
            f6(r.share[1]),
            r.rank1[0].to_string(),
            r.rank1[1].to_string(),
            r.clusters[0].to_string(),
            r.clusters[1].to_string(),
        ]
    });
    table(header, rows)
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn summary_json(counts: &StageCounts, median: &MedianReport, runs: &[Run], sensitivity: Option<&SensitivityReport>, tax: &Taxonomy) -> Value {
    let experiments: Vec<Value> = runs
        .iter()
        .map(|run| {
            let a = run.analysis;
            let groups: Vec<Value> = a
                .signatures
                .groups()
                .map(|g| {
                    let s = g.stats();
                    json!({
                        "landuse": tax.name(g.class),
                        "rank": g.rank,
                        "clusters": g.clusters,
                        "tweets": g.tweets(),
                        "peak_hour": s.peak_hour,
                        "peak_share": round6(s.peak_share),
                        "chi_squared": round6(s.chi_squared),
                        "degrees_of_freedom": s.degrees_of_freedom,
                    })
                })
                .collect();
            json!({
                "name": run.name,
                "eps": run.eps,
                "min_pts": run.min_pts,
                "users": run.clusters.len(),
                "users_with_clusters": run.clusters.iter().filter(|u| !u.clusters.is_empty()).count(),
                "clusters": a.clusters,
                "clustered_points": a.clustered_points,
                "noise_points": a.noise_points,
                "rank_totals": a.composition.totals,
                "purity_omitted_ranks": a.purity.omitted,
                "hourly": groups,
            })
        })
        .collect();
    let mut out = json!({
        "stages": counts,
        "median_filter": {
            "input_users": median.input_users,
            "median": median.median,
            "retained_users": median.retained_count,
            "retained_fraction": round6(median.retained_fraction),
            "mean_tweets": round6(median.mean),
            "max_tweets": median.max,
        },
        "experiments": experiments,
    });
    if let Some(s) = sensitivity {
        out["sensitivity"] = json!({
            "experiments": s.names,
            "rank1_totals": s.rank1_totals,
            "cluster_totals": s.cluster_totals,
        });
    }
    out
}
