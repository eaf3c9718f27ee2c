use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use toploc_core::cluster::MinPts;
use toploc_core::ingest::{parse_stream, TweetRecord, UsZone};
use toploc_core::landuse::{LanduseMap, Taxonomy, DEFAULT_TAXONOMY_CSV};
use toploc_core::metrics::{SensitivityReport, SignatureMatrix, HOURS};
use toploc_core::pipeline::{analyze, cluster_all, prepare, select, PipelineError, PrepareOptions};
use toploc_core::synth::{generate as synth_generate, score, SynthConfig, TruthUser};

use crate::config::{ExperimentSpec, RunConfig, RunFile};
use crate::report::{self, Run};
use crate::{Classify, Failure, GenerateArgs, Outcome, RunArgs, SignaturesArgs, VerifyArgs};

pub const CORPUS_FILE: &str = "corpus.ndjson";
pub const TRUTH_FILE: &str = "ground_truth.json";
pub const MAP_FILE: &str = "landuse.geojson";
pub const TAXONOMY_FILE: &str = "taxonomy.csv";
pub const RUN_CONFIG_FILE: &str = "run.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILES: [&str; 7] = [
    "clusters.csv",
    "rank_composition.csv",
    "purity_quantiles.csv",
    "signatures.csv",
    "sensitivity.csv",
    "summary.json",
    MANIFEST_FILE,
];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files are written into a hidden sibling directory and moved into place only once
/// everything succeeded; on failure the staging directory is deleted.
struct Staging {
    dir: tempfile::TempDir,
    out: PathBuf,
    written: BTreeMap<String, String>,
}

impl Staging {
    fn new(out: &Path) -> Outcome<Self> {
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display())).user()?;
        let dir = tempfile::Builder::new().prefix(".toploc-staging-").tempdir_in(&parent).context("creating staging directory").internal()?;
        Ok(Self { dir, out: out.to_path_buf(), written: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Outcome<()> {
        fs::write(self.dir.path().join(name), bytes).with_context(|| format!("writing {name}")).internal()?;
        self.written.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Moves staged files into the output directory, removing stale `managed` files.
    fn commit(self, managed: &[&str]) -> Outcome<()> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display())).user()?;
        for name in managed {
            let target = self.out.join(name);
            if !self.written.contains_key(*name) && target.exists() {
                fs::remove_file(&target).with_context(|| format!("removing stale {}", target.display())).internal()?;
            }
        }
        for name in self.written.keys() {
            fs::rename(self.dir.path().join(name), self.out.join(name)).with_context(|| format!("moving {name} into place")).internal()?;
        }
        Ok(())
    }
}

fn synth_field_names() -> Vec<String> {
    toml::Table::try_from(SynthConfig::default()).expect("serializable").keys().cloned().collect()
}

pub fn generate(args: &GenerateArgs) -> Outcome<()> {
    let (mut config, present): (SynthConfig, Vec<String>) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).user()?;
            let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display())).user()?;
            let keys = table.keys().cloned().collect();
            (table.try_into().with_context(|| format!("parsing {}", path.display())).user()?, keys)
        }
        None => (SynthConfig::default(), Vec::new()),
    };
    let mut set: Vec<String> = present;
    if let Some(seed) = args.seed {
        config.seed = seed;
        set.push("seed".into());
    }
    if let Some(n) = args.users {
        config.n_users = n;
        set.push("n_users".into());
    }
    if let Some(f) = args.tourists {
        config.tourists.fraction = f;
        set.push("tourists".into());
    }
    let defaulted: Vec<String> = synth_field_names().into_iter().filter(|k| !set.contains(k)).collect();
    let corpus = synth_generate(&config).user()?;

    let ndjson = corpus.to_ndjson();
    let corpus_sha = sha256_hex(ndjson.as_bytes());
    let users_bytes = serde_json::to_vec(&corpus.truth.users).expect("serializable");
    let truth = TruthFile { corpus_sha256: corpus_sha.clone(), content_sha256: sha256_hex(&users_bytes), users: corpus.truth.users };
    let taxonomy = corpus.map.map.taxonomy();
    let run_toml = format!(
        "events = \"{CORPUS_FILE}\"\npolygons = \"{MAP_FILE}\"\ntaxonomy = \"{TAXONOMY_FILE}\"\nyear = {}\nout = \"reports\"\n",
        config.year
    );

    let mut staging = Staging::new(&args.out)?;
    staging.write(CORPUS_FILE, ndjson.as_bytes())?;
    staging.write(TRUTH_FILE, &serde_json::to_vec(&truth).expect("serializable"))?;
    staging.write(MAP_FILE, corpus.map.map.to_geojson().as_bytes())?;
    staging.write(TAXONOMY_FILE, taxonomy.to_csv().as_bytes())?;
    staging.write(RUN_CONFIG_FILE, run_toml.as_bytes())?;
    let config_json = serde_json::to_vec(&config).expect("serializable");
    let manifest = json!({
        "tool": "toploc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "generate",
        "config_sha256": sha256_hex(&config_json),
        "config": config,
        "defaulted": defaulted,
        "counts": { "users": truth.users.len(), "tweets": corpus.records.len() },
        "outputs": staging.written,
    });
    staging.write(MANIFEST_FILE, &pretty(&manifest))?;
    staging.commit(&[])?;
    eprintln!("wrote {} tweets for {} users to {}", corpus.records.len(), truth.users.len(), args.out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthFile {
    pub corpus_sha256: String,
    /// Digest of the compact JSON serialization of `users`.
    pub content_sha256: String,
    pub users: Vec<TruthUser>,
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

fn run_file_from_args(args: &RunArgs) -> Outcome<RunFile> {
    let base = match &args.config {
        Some(path) => RunFile::load(path).user()?,
        None => RunFile::default(),
    };
    let experiment = match args.eps {
        Some(eps) => vec![ExperimentSpec {
            name: "cli".into(),
            eps,
            min_pts: if args.min_pts_fraction.is_some() { None } else { Some(args.min_pts.unwrap_or(4)) },
            min_pts_fraction: args.min_pts_fraction,
            distance: args.distance.unwrap_or_default(),
        }],
        None => Vec::new(),
    };
    let flags = RunFile {
        events: args.events.clone(),
        format: args.format,
        polygons: args.polygons.clone(),
        taxonomy: args.taxonomy.clone(),
        bbox: args.bbox.as_ref().map(|b| [b[0], b[1], b[2], b[3]]),
        year: args.year,
        dedupe: args.dedupe.then_some(true),
        max_rank: args.max_rank,
        threads: args.threads,
        out: args.out.clone(),
        experiment,
    };
    Ok(base.overlay(flags))
}

struct Inputs {
    records: Vec<TweetRecord>,
    parse_errors: u64,
    map: LanduseMap,
    digests: Value,
}

fn file_digest(path: &Path, bytes: &[u8]) -> Value {
    json!({ "path": path.display().to_string(), "bytes": bytes.len(), "sha256": sha256_hex(bytes) })
}

fn load_inputs(config: &RunConfig) -> Outcome<Inputs> {
    let events = fs::read(&config.events).with_context(|| format!("reading {}", config.events.display())).user()?;
    let parsed = parse_stream(events.as_slice(), config.format).context("parse").user()?;
    for e in parsed.errors.iter().take(5) {
        eprintln!("warning: {}: line {}: {}", config.events.display(), e.line, e.error);
    }
    if parsed.error_count > 5 {
        eprintln!("warning: {} malformed lines in total", parsed.error_count);
    }
    if parsed.records.is_empty() {
        return Err(Failure::User(anyhow!("no records parsed from {}", config.events.display())));
    }
    let polygons = fs::read(&config.polygons).with_context(|| format!("reading {}", config.polygons.display())).user()?;
    let (taxonomy, taxonomy_digest) = match &config.taxonomy {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display())).user()?;
            let t = Taxonomy::from_csv(bytes.as_slice()).with_context(|| format!("taxonomy {}", path.display())).user()?;
            (t, file_digest(path, &bytes))
        }
        None => (
            Taxonomy::default_taxonomy(),
            json!({ "path": "built-in", "bytes": DEFAULT_TAXONOMY_CSV.len(), "sha256": sha256_hex(DEFAULT_TAXONOMY_CSV.as_bytes()) }),
        ),
    };
    let map = LanduseMap::from_geojson(polygons.as_slice(), taxonomy).with_context(|| format!("landuse {}", config.polygons.display())).user()?;
    Ok(Inputs {
        records: parsed.records,
        parse_errors: parsed.error_count,
        map,
        digests: json!({
            "events": file_digest(&config.events, &events),
            "polygons": file_digest(&config.polygons, &polygons),
            "taxonomy": taxonomy_digest,
        }),
    })
}

fn prepare_options(config: &RunConfig) -> PrepareOptions {
    PrepareOptions { bbox: config.bbox, zone: UsZone::central(config.year..=config.year).expect("validated"), dedupe: config.dedupe }
}

fn thread_pool(threads: usize) -> Outcome<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("starting worker threads").internal()
}

fn pipeline_failure(e: PipelineError) -> Failure {
    Failure::User(e.into())
}

fn min_pts_label(m: MinPts) -> String {
    match m {
        MinPts::Absolute(n) => n.to_string(),
        MinPts::Fraction(f) => format!("{f}n"),
    }
}

pub fn run(args: &RunArgs) -> Outcome<()> {
    let config = run_file_from_args(args)?.resolve().user()?;
    let pool = thread_pool(config.threads)?;
    let inputs = load_inputs(&config)?;
    let taxonomy = inputs.map.taxonomy().clone();
    let parsed = inputs.records.len();
    let (prepared, results) = pool.install(|| -> Outcome<_> {
        let prepared = prepare(inputs.records, &prepare_options(&config), &inputs.map).map_err(pipeline_failure)?;
        let results: Vec<_> = config
            .params()
            .into_iter()
            .map(|(name, params)| {
                let clusters = cluster_all(&prepared.users, &params);
                let analysis = analyze(&prepared.users, &clusters, config.max_rank);
                (name, params, clusters, analysis)
            })
            .collect();
        Ok((prepared, results))
    })?;

    let runs: Vec<Run> = results
        .iter()
        .map(|(name, params, clusters, analysis)| Run { name, min_pts: min_pts_label(params.min_pts), eps: params.eps, clusters, analysis })
        .collect();
    let sensitivity = (runs.len() == 2).then(|| SensitivityReport::from_runs([runs[0].name, runs[1].name], [runs[0].clusters, runs[1].clusters]));

    let mut staging = Staging::new(&config.out)?;
    staging.write("clusters.csv", &report::clusters_csv(&runs, &taxonomy))?;
    staging.write("rank_composition.csv", &report::rank_composition_csv(&runs, &taxonomy))?;
    staging.write("purity_quantiles.csv", &report::purity_csv(&runs))?;
    staging.write("signatures.csv", &report::signatures_csv(&runs, &taxonomy))?;
    if let Some(s) = &sensitivity {
        staging.write("sensitivity.csv", &report::sensitivity_csv(s, &taxonomy))?;
    }
    let summary = report::summary_json(&prepared.counts, &prepared.median, &runs, sensitivity.as_ref(), &taxonomy);
    staging.write("summary.json", &pretty(&summary))?;

    let c = &prepared.counts;
    let experiments: Vec<Value> = runs
        .iter()
        .map(|r| json!({ "name": r.name, "clusters": r.analysis.clusters, "clustered": r.analysis.clustered_points, "noise": r.analysis.noise_points }))
        .collect();
    let manifest = json!({
        "tool": "toploc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "run",
        "config_sha256": sha256_hex(&serde_json::to_vec(&config).expect("serializable")),
        "config": config,
        "inputs": inputs.digests,
        "stages": {
            "parsed": parsed,
            "parse_errors": inputs.parse_errors,
            "bbox_retained": c.bbox_retained,
            "outside_years": c.outside_years,
            "duplicates": c.duplicates,
            "users": c.users,
            "trajectory_points": c.trajectory_points,
            "median": prepared.median.median,
            "median_retained_users": c.median_retained_users,
            "median_retained_points": c.median_retained_points,
            "experiments": experiments,
        },
        "outputs": staging.written,
    });
    staging.write(MANIFEST_FILE, &pretty(&manifest))?;
    staging.commit(&REPORT_FILES)?;
    eprintln!("{} users retained, reports in {}", c.median_retained_users, config.out.display());
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Outcome<()> {
    let corpus = fs::read(&args.corpus).with_context(|| format!("reading {}", args.corpus.display())).user()?;
    let truth_bytes = fs::read(&args.truth).with_context(|| format!("reading {}", args.truth.display())).user()?;
    let truth: TruthFile = serde_json::from_slice(&truth_bytes).with_context(|| format!("parsing {}", args.truth.display())).user()?;
    let content = sha256_hex(&serde_json::to_vec(&truth.users).expect("serializable"));
    if content != truth.content_sha256 {
        return Err(Failure::User(anyhow!("ground truth content digest mismatch: file says {}, content hashes to {content}", truth.content_sha256)));
    }
    let corpus_sha = sha256_hex(&corpus);
    if corpus_sha != truth.corpus_sha256 {
        return Err(Failure::User(anyhow!("corpus digest {corpus_sha} does not match ground truth ({})", truth.corpus_sha256)));
    }
    let manifest_path = args.reports.join(MANIFEST_FILE);
    let manifest: Value = serde_json::from_slice(&fs::read(&manifest_path).with_context(|| format!("reading {}", manifest_path.display())).user()?)
        .with_context(|| format!("parsing {}", manifest_path.display()))
        .user()?;
    let run_events = manifest["inputs"]["events"]["sha256"].as_str().unwrap_or_default();
    if run_events != corpus_sha {
        return Err(Failure::User(anyhow!("reports were produced from a different corpus (events digest {run_events})")));
    }
    let config: RunConfig = serde_json::from_value(manifest["config"].clone()).context("run config in manifest").user()?;

    let parsed = parse_stream(corpus.as_slice(), config.format).context("parse").user()?;
    let selected = select(parsed.records, &prepare_options(&config)).map_err(pipeline_failure)?;
    let clusters_path = args.reports.join("clusters.csv");
    let rows = report::read_clusters_csv(fs::File::open(&clusters_path).with_context(|| format!("opening {}", clusters_path.display())).user()?).user()?;

    let truth_index = toploc_core::synth::GroundTruth { users: truth.users };
    let mut experiments = Vec::new();
    for spec in &config.experiments {
        let mine: Vec<_> = rows.iter().filter(|(e, _)| *e == spec.name).map(|(_, c)| c.clone()).collect();
        let card = score(&truth_index, selected.trajectories.iter().map(|t| t.user_id.as_str()), &mine, spec.eps);
        experiments.push(json!({ "name": spec.name, "eps": spec.eps, "scorecard": card }));
    }
    let out = pretty(&json!({ "corpus_sha256": corpus_sha, "experiments": experiments }));
    if let Some(path) = &args.out {
        fs::write(path, &out).with_context(|| format!("writing {}", path.display())).internal()?;
    }
    std::io::stdout().write_all(&out).context("writing to stdout").internal()?;
    Ok(())
}

pub fn signatures(args: &SignaturesArgs) -> Outcome<()> {
    let out_path = args.run.out.clone();
    let config = run_file_from_args(&RunArgs { out: None, ..args.run.clone() })?.resolve().user()?;
    let params = config.params();
    let (name, params) = match &args.experiment {
        Some(want) => params.into_iter().find(|(n, _)| n == want).ok_or_else(|| Failure::User(anyhow!("no experiment named `{want}`")))?,
        None => params.into_iter().next().expect("at least one experiment"),
    };
    if args.rank == 0 {
        return Err(Failure::User(anyhow!("rank must be at least 1")));
    }
    let pool = thread_pool(config.threads)?;
    let inputs = load_inputs(&config)?;
    let taxonomy = inputs.map.taxonomy().clone();
    let matrix = pool.install(|| -> Outcome<SignatureMatrix> {
        let prepared = prepare(inputs.records, &prepare_options(&config), &inputs.map).map_err(pipeline_failure)?;
        let clusters = cluster_all(&prepared.users, &params);
        Ok(analyze(&prepared.users, &clusters, args.rank).signatures)
    })?;
    let references = matrix.references(args.rank, args.metric);
    if references.entries.is_empty() {
        return Err(Failure::User(anyhow!("experiment `{name}` produced no rank-{} clusters", args.rank)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["landuse".to_string(), "clusters".into(), "tweets".into()];
    header.extend((0..HOURS).map(|h| format!("h{h:02}")));
    w.write_record(&header).internal()?;
    for (class, intensity) in &references.entries {
        let group = matrix.get(*class, args.rank).expect("reference comes from a group");
        let total: f64 = intensity.iter().sum();
        let mut row = vec![taxonomy.name(*class).to_string(), group.clusters.to_string(), group.tweets().to_string()];
        row.extend(intensity.iter().map(|x| format!("{:.6}", x / total)));
        w.write_record(&row).internal()?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}")).internal()?;
    match out_path {
        Some(path) => fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display())).internal()?,
        None => std::io::stdout().write_all(&bytes).context("writing to stdout").internal()?,
    }
    Ok(())
}
