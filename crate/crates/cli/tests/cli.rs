use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn toploc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toploc")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate_small(dir: &Path, extra: &[&str]) {
    let out = dir.join("synth");
    let mut args = vec!["generate", "--out", s(&out), "--users", "300"];
    args.extend_from_slice(extra);
    let o = toploc(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn generate_notes_defaulted_keys() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let manifest = json(&dir.path().join("synth/manifest.json"));
    let defaulted: Vec<&str> = manifest["defaulted"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaulted.contains(&"seed"));
    assert!(!defaulted.contains(&"n_users"));
    assert_eq!(manifest["config"]["seed"], 2014);
    for f in ["corpus.ndjson", "ground_truth.json", "landuse.geojson", "taxonomy.csv", "run.toml"] {
        assert!(manifest["outputs"][f].is_string(), "{f}");
    }
}

#[test]
fn generate_rejects_invalid_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    fs::write(&cfg, "[grid]\ncols = 1\nrows = 1\n").unwrap();
    let o = toploc(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("x").exists());
    fs::write(&cfg, "colour = 3\n").unwrap();
    let o = toploc(&["generate", "--config", s(&cfg), "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_reports_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let synth = dir.path().join("synth");
    let o = toploc(&["run", "--config", s(&synth.join("run.toml"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = synth.join("reports");
    for f in ["clusters.csv", "rank_composition.csv", "purity_quantiles.csv", "signatures.csv", "sensitivity.csv", "summary.json"] {
        assert!(reports.join(f).is_file(), "{f}");
    }
    let m = json(&reports.join("manifest.json"));
    let st = &m["stages"];
    let n = |k: &str| st[k].as_u64().unwrap();
    assert!(n("parsed") >= n("bbox_retained") && n("bbox_retained") >= n("median_retained_points"));
    assert_eq!(n("parsed"), n("trajectory_points"));
    assert_eq!(m["inputs"]["events"]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(st["experiments"].as_array().unwrap().len(), 2);

    // one parameter set from flags: no sensitivity table, stale one removed
    let o = toploc(&["run", "--config", s(&synth.join("run.toml")), "--eps", "0.003", "--min-pts", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!reports.join("sensitivity.csv").exists());
    let clusters = fs::read_to_string(reports.join("clusters.csv")).unwrap();
    assert!(clusters.lines().skip(1).all(|l| l.starts_with("cli,")));
}

#[test]
fn empty_input_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let synth = dir.path().join("synth");
    let empty = dir.path().join("empty.ndjson");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("out");
    let o = toploc(&["run", "--config", s(&synth.join("run.toml")), "--events", s(&empty), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no records parsed"));
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().starts_with(".toploc")).collect();
    assert!(leftovers.is_empty());
}

#[test]
fn stage_failure_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let synth = dir.path().join("synth");
    // every point outside the box
    let out = dir.path().join("out");
    let o = toploc(&["run", "--config", s(&synth.join("run.toml")), "--bbox", "10,10,11,11", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bbox"));
    assert!(!out.exists());
}

#[test]
fn missing_input_and_bad_flags() {
    let o = toploc(&["run", "--events", "/nonexistent.ndjson", "--polygons", "/nonexistent.geojson"]);
    assert_eq!(o.status.code(), Some(2));
    let o = toploc(&["run", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = toploc(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_without_scatter_recovers_everyone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    fs::write(&cfg, "n_users = 200\nscatter_deg = 1e-9\n").unwrap();
    let synth = dir.path().join("synth");
    assert!(toploc(&["generate", "--config", s(&cfg), "--out", s(&synth)]).status.success());
    assert!(toploc(&["run", "--config", s(&synth.join("run.toml"))]).status.success());
    let card = dir.path().join("card.json");
    let o = toploc(&[
        "verify",
        "--corpus",
        s(&synth.join("corpus.ndjson")),
        "--truth",
        s(&synth.join("ground_truth.json")),
        "--reports",
        s(&synth.join("reports")),
        "--out",
        s(&card),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&card);
    for e in v["experiments"].as_array().unwrap() {
        assert_eq!(e["scorecard"]["recovery_rate"], 1.0, "{e}");
        assert_eq!(e["scorecard"]["label_accuracy"], 1.0, "{e}");
    }
}

#[test]
fn verify_rejects_shuffled_truth_and_foreign_corpus() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let synth = dir.path().join("synth");
    assert!(toploc(&["run", "--config", s(&synth.join("run.toml"))]).status.success());
    let truth_path = synth.join("ground_truth.json");
    let mut truth = json(&truth_path);
    truth["users"].as_array_mut().unwrap().reverse();
    let shuffled = dir.path().join("shuffled.json");
    fs::write(&shuffled, serde_json::to_vec(&truth).unwrap()).unwrap();
    let verify = |corpus: &Path, truth: &Path| {
        toploc(&["verify", "--corpus", s(corpus), "--truth", s(truth), "--reports", s(&synth.join("reports"))])
    };
    let o = verify(&synth.join("corpus.ndjson"), &shuffled);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("digest"));

    let other = dir.path().join("other");
    assert!(toploc(&["generate", "--out", s(&other), "--users", "300", "--seed", "9"]).status.success());
    let o = verify(&other.join("corpus.ndjson"), &truth_path);
    assert_eq!(o.status.code(), Some(2));
    let o = verify(&other.join("corpus.ndjson"), &other.join("ground_truth.json"));
    assert_eq!(o.status.code(), Some(2));
    assert!(verify(&synth.join("corpus.ndjson"), &truth_path).status.success());
}

#[test]
fn signatures_dump_normalized_references() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let synth = dir.path().join("synth");
    let out = dir.path().join("refs.csv");
    let o = toploc(&["signatures", "--config", s(&synth.join("run.toml")), "--experiment", "exp2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap().split(',').count(), 27);
    let mut n = 0;
    for line in lines {
        let total: f64 = line.split(',').skip(3).map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-4, "{line}");
        n += 1;
    }
    assert!(n >= 2);
    let o = toploc(&["signatures", "--config", s(&synth.join("run.toml")), "--experiment", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn csv_input_matches_ndjson() {
    let dir = tempfile::tempdir().unwrap();
    generate_small(dir.path(), &[]);
    let synth = dir.path().join("synth");
    let mut csv = String::from("user,lon,lat,ts\n");
    for line in fs::read_to_string(synth.join("corpus.ndjson")).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        csv.push_str(&format!("{},{},{},{}\n", v["user"].as_str().unwrap(), v["lon"], v["lat"], v["ts"].as_str().unwrap()));
    }
    let csv_path = dir.path().join("corpus.csv");
    fs::write(&csv_path, csv).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(toploc(&["run", "--config", s(&synth.join("run.toml")), "--out", s(&a)]).status.success());
    assert!(toploc(&["run", "--config", s(&synth.join("run.toml")), "--events", s(&csv_path), "--out", s(&b)]).status.success());
    for f in ["clusters.csv", "signatures.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
