//! Run configuration: TOML file, then command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use toploc_core::cluster::{ClusterParams, Distance, MinPts};
use toploc_core::ingest::{BoundingBox, StreamFormat, UsZone};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_pts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_pts_fraction: Option<f64>,
    #[serde(default)]
    pub distance: Distance,
}

impl ExperimentSpec {
    pub fn params(&self) -> anyhow::Result<ClusterParams> {
        let min_pts = match (self.min_pts, self.min_pts_fraction) {
            (Some(n), None) => MinPts::Absolute(n),
            (None, Some(f)) => MinPts::Fraction(f),
            (None, None) => bail!("experiment `{}`: set min_pts or min_pts_fraction", self.name),
            (Some(_), Some(_)) => bail!("experiment `{}`: min_pts and min_pts_fraction are exclusive", self.name),
        };
        ClusterParams::new(self.eps, min_pts, self.distance).map_err(|e| anyhow!("experiment `{}`: {e}", self.name))
    }

    fn from_params(name: &str, p: ClusterParams) -> Self {
        let (min_pts, min_pts_fraction) = match p.min_pts {
            MinPts::Absolute(n) => (Some(n), None),
            MinPts::Fraction(f) => (None, Some(f)),
        };
        Self { name: name.into(), eps: p.eps, min_pts, min_pts_fraction, distance: p.distance }
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::from_params("exp1", ClusterParams::EXP1), Self::from_params("exp2", ClusterParams::EXP2)]
    }
}

/// Contents of a run config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub events: Option<PathBuf>,
    pub format: Option<StreamFormat>,
    pub polygons: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    /// `[min_lat, min_lon, max_lat, max_lon]`.
    pub bbox: Option<[f64; 4]>,
    pub year: Option<i32>,
    pub dedupe: Option<bool>,
    pub max_rank: Option<u32>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub experiment: Vec<ExperimentSpec>,
}

impl RunFile {
    /// Reads `path`; relative paths inside are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut file: RunFile = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut file.events, &mut file.polygons, &mut file.taxonomy, &mut file.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(file)
    }

    /// Fields set in `over` replace those here; a non-empty experiment list replaces the whole list.
    pub fn overlay(mut self, over: RunFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(events, format, polygons, taxonomy, bbox, year, dedupe, max_rank, threads, out);
        if !over.experiment.is_empty() {
            self.experiment = over.experiment;
        }
        self
    }

    pub fn resolve(self) -> anyhow::Result<RunConfig> {
        let events = self.events.ok_or_else(|| anyhow!("no events file given"))?;
        let polygons = self.polygons.ok_or_else(|| anyhow!("no polygon file given"))?;
        for p in [Some(&events), Some(&polygons), self.taxonomy.as_ref()].into_iter().flatten() {
            if !p.is_file() {
                bail!("input file not found: {}", p.display());
            }
        }
        let format = match self.format {
            Some(f) => f,
            None if events.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => StreamFormat::Csv,
            None => StreamFormat::Ndjson,
        };
        let bbox = match self.bbox {
            Some([a, b, c, d]) => BoundingBox::new(a, b, c, d)?,
            None => BoundingBox::CHICAGO,
        };
        let year = self.year.unwrap_or(2014);
        UsZone::central(year..=year)?;
        let max_rank = self.max_rank.unwrap_or(5);
        if max_rank == 0 {
            bail!("max_rank must be at least 1");
        }
        let experiments = if self.experiment.is_empty() { ExperimentSpec::defaults() } else { self.experiment };
        if experiments.len() > 2 {
            bail!("at most two experiments are supported, got {}", experiments.len());
        }
        let mut names = BTreeSet::new();
        for e in &experiments {
            if e.name.is_empty() || !e.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                bail!("experiment name `{}` must be non-empty ASCII letters, digits, `_` or `-`", e.name);
            }
            if !names.insert(e.name.as_str()) {
                bail!("duplicate experiment name `{}`", e.name);
            }
            e.params()?;
        }
        Ok(RunConfig {
            events,
            format,
            polygons,
            taxonomy: self.taxonomy,
            bbox,
            year,
            dedupe: self.dedupe.unwrap_or(false),
            max_rank,
            experiments,
            threads: self.threads.unwrap_or(0),
            out: self.out.unwrap_or_else(|| PathBuf::from("toploc-out")),
        })
    }
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub events: PathBuf,
    pub format: StreamFormat,
    pub polygons: PathBuf,
    pub taxonomy: Option<PathBuf>,
    pub bbox: BoundingBox,
    pub year: i32,
    pub dedupe: bool,
    pub max_rank: u32,
    pub experiments: Vec<ExperimentSpec>,
    /// 0 lets the thread pool decide. Not part of the config digest.
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn params(&self) -> Vec<(String, ClusterParams)> {
        self.experiments.iter().map(|e| (e.name.clone(), e.params().expect("validated"))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ev.ndjson"), "").unwrap();
        std::fs::write(dir.path().join("map.geojson"), "").unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(
            &cfg,
            "events = \"ev.ndjson\"\npolygons = \"map.geojson\"\nyear = 2013\n[[experiment]]\nname = \"a\"\neps = 0.001\nmin_pts = 3\n",
        )
        .unwrap();
        let file = RunFile::load(&cfg).unwrap();
        assert_eq!(file.events.as_deref(), Some(dir.path().join("ev.ndjson").as_path()));
        let resolved = file.clone().overlay(RunFile { year: Some(2015), ..RunFile::default() }).resolve().unwrap();
        assert_eq!(resolved.year, 2015);
        assert_eq!(resolved.experiments.len(), 1);
        assert_eq!(resolved.format, StreamFormat::Ndjson);
        assert_eq!(file.resolve().unwrap().year, 2013);
    }

    #[test]
    fn rejects_bad_configs() {
        let dir = tempfile::tempdir().unwrap();
        let ev = dir.path().join("ev.csv");
        std::fs::write(&ev, "").unwrap();
        let base = RunFile { events: Some(ev.clone()), polygons: Some(ev.clone()), ..RunFile::default() };
        assert_eq!(base.clone().resolve().unwrap().format, StreamFormat::Csv);
        assert_eq!(base.clone().resolve().unwrap().experiments.len(), 2);
        let exp = |name: &str| ExperimentSpec { name: name.into(), eps: 0.1, min_pts: Some(3), min_pts_fraction: None, distance: Distance::Planar };
        let three = RunFile { experiment: vec![exp("a"), exp("b"), exp("c")], ..base.clone() };
        assert!(three.resolve().is_err());
        let dup = RunFile { experiment: vec![exp("a"), exp("a")], ..base.clone() };
        assert!(dup.resolve().is_err());
        let both = RunFile { experiment: vec![ExperimentSpec { min_pts_fraction: Some(0.1), ..exp("a") }], ..base.clone() };
        assert!(both.resolve().is_err());
        assert!(RunFile { polygons: Some(dir.path().join("nope")), ..base.clone() }.resolve().is_err());
        assert!(RunFile { year: Some(1999), ..base.clone() }.resolve().is_err());
        assert!(RunFile { bbox: Some([42.0, -87.0, 41.0, -88.0]), ..base }.resolve().is_err());
        assert!(toml::from_str::<RunFile>("colour = 1").is_err());
    }
}
