//! Seeded synthetic corpora with a preferential-return visitation process.
//!
//! Each resident gets a handful of locations in distinct, non-adjacent map cells. Visits
//! are Zipf-distributed over the location order, positions scatter around the location
//! with isotropic Gaussian noise, and the local hour follows the landuse's hourly
//! template. An optional tourist cohort has one hotel location with few tweets plus many
//! scattered tweets around the city that belong to no location.

mod map;
mod score;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime, SecondsFormat, Utc, DateTime};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{TweetRecord, UsZone};
use crate::landuse::{ClassId, Taxonomy};

pub use map::{build_synth_map, GridSpec, SynthMap, ROAD_CLASS};
pub use score::{kendall_tau, match_locations, score, ClusterSummary, Scorecard};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
}

/// Tweet-count distribution per resident: log-normal around `median`, clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TweetCounts {
    pub median: f64,
    pub log_sigma: f64,
    pub min: usize,
    pub max: usize,
}

impl Default for TweetCounts {
    fn default() -> Self {
        Self { median: 40.0, log_sigma: 0.6, min: 15, max: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TouristCohort {
    /// Tourists added per resident (0 disables the cohort).
    pub fraction: f64,
    /// Inclusive range of tweets at the hotel.
    pub hotel_tweets: [usize; 2],
    /// Inclusive range of scattered tweets that belong to no location.
    pub scattered_tweets: [usize; 2],
    /// Scattered tweets fall uniformly within this radius of the hotel, degrees.
    pub scatter_radius_deg: f64,
}

impl Default for TouristCohort {
    fn default() -> Self {
        Self { fraction: 0.0, hotel_tweets: [4, 6], scattered_tweets: [80, 120], scatter_radius_deg: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_users: usize,
    pub year: i32,
    /// Locations per resident follow a Zipf law over `locations_min..=locations_max`.
    pub locations_min: usize,
    pub locations_max: usize,
    pub locations_exponent: f64,
    /// Visit probability of a user's i-th location is proportional to `i^-visit_exponent`.
    pub visit_exponent: f64,
    /// Gaussian position noise, degrees.
    pub scatter_deg: f64,
    pub tweets: TweetCounts,
    pub grid: GridSpec,
    /// Class distribution of each resident's top location.
    pub top_class_weights: BTreeMap<String, f64>,
    /// Class distribution of the remaining locations.
    pub other_class_weights: BTreeMap<String, f64>,
    /// Relative tweet volume per local hour, per class. Classes without a template use a flat profile.
    pub templates: BTreeMap<String, Vec<f64>>,
    pub tourists: TouristCohort,
}

fn weights(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Stylized hourly shapes, hours 0 through 23.
pub fn default_templates() -> BTreeMap<String, Vec<f64>> {
    let t: [(&str, [f64; 24]); 9] = [
        ("Residential", [3.0, 2.0, 1.2, 0.8, 0.8, 1.5, 4.0, 6.0, 5.0, 3.0, 2.5, 2.5, 2.5, 2.5, 2.5, 3.0, 3.5, 4.5, 6.0, 7.0, 8.0, 8.0, 7.0, 5.0]),
        ("Office", [0.3, 0.2, 0.2, 0.2, 0.2, 0.3, 1.0, 2.5, 5.0, 6.0, 6.0, 6.0, 8.0, 6.0, 6.0, 5.5, 5.0, 4.0, 2.5, 1.5, 1.0, 0.7, 0.5, 0.4]),
        ("K-12 Educational", [0.2, 0.1, 0.1, 0.1, 0.1, 0.3, 1.5, 5.0, 8.0, 7.0, 5.0, 4.5, 5.0, 4.5, 4.0, 2.0, 1.0, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2]),
        ("Hotel", [7.0, 6.0, 4.0, 2.0, 1.0, 0.5, 0.8, 1.5, 2.0, 1.5, 1.0, 0.8, 0.8, 0.8, 1.0, 1.2, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 8.0, 8.0]),
        ("Urban Mix Residential", [1.5, 1.0, 0.7, 0.5, 0.5, 0.7, 1.5, 2.5, 3.5, 4.0, 4.0, 4.5, 5.0, 4.5, 4.5, 4.5, 4.5, 4.5, 4.5, 4.0, 3.5, 3.0, 2.5, 2.0]),
        ("Urban Mix Commercial", [0.5, 0.3, 0.2, 0.2, 0.2, 0.3, 0.8, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 6.5, 6.0, 5.5, 5.5, 6.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]),
        ("Cultural/Entertainment", [1.5, 1.0, 0.5, 0.3, 0.2, 0.2, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0, 3.0, 3.5, 3.5, 3.5, 4.0, 5.0, 7.0, 9.0, 10.0, 9.0, 6.0, 3.0]),
        ("Post-Secondary Educational", [0.5, 0.3, 0.2, 0.1, 0.1, 0.2, 0.5, 1.5, 3.5, 5.0, 5.5, 5.5, 5.0, 5.5, 5.5, 5.0, 4.5, 4.0, 3.5, 3.0, 2.5, 2.0, 1.5, 1.0]),
        ("Other", [1.0, 0.8, 0.6, 0.5, 0.5, 0.6, 1.0, 1.5, 2.0, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.0, 2.0, 1.8, 1.5, 1.2, 1.0]),
    ];
    t.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 2014,
            n_users: 10_000,
            year: 2014,
            locations_min: 1,
            locations_max: 8,
            locations_exponent: 2.0,
            visit_exponent: 1.2,
            scatter_deg: 0.0005,
            tweets: TweetCounts::default(),
            grid: GridSpec::default(),
            top_class_weights: weights(&[
                ("Residential", 0.62),
                ("Urban Mix Residential", 0.05),
                ("Hotel", 0.04),
                ("Office", 0.06),
                ("Urban Mix Commercial", 0.05),
                ("Cultural/Entertainment", 0.04),
                ("K-12 Educational", 0.05),
                ("Post-Secondary Educational", 0.05),
                ("Other", 0.04),
            ]),
            other_class_weights: weights(&[
                ("Residential", 0.12),
                ("Office", 0.22),
                ("K-12 Educational", 0.10),
                ("Post-Secondary Educational", 0.10),
                ("Urban Mix Commercial", 0.14),
                ("Urban Mix Residential", 0.06),
                ("Cultural/Entertainment", 0.10),
                ("Hotel", 0.03),
                ("Other", 0.13),
            ]),
            templates: default_templates(),
            tourists: TouristCohort::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let taxonomy = Taxonomy::default_taxonomy();
        let bad = |m: String| Err(SynthError::Config(m));
        self.grid.validate(&taxonomy)?;
        map::check_weights(&self.top_class_weights, &taxonomy, "top_class_weights")?;
        map::check_weights(&self.other_class_weights, &taxonomy, "other_class_weights")?;
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        UsZone::central(self.year..=self.year).map_err(|e| SynthError::Config(e.to_string()))?;
        if self.locations_min == 0 || self.locations_min > self.locations_max || self.locations_max > 255 {
            return bad("need 1 <= locations_min <= locations_max <= 255".into());
        }
        for (name, v) in [("locations_exponent", self.locations_exponent), ("visit_exponent", self.visit_exponent)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.scatter_deg.is_finite() && self.scatter_deg > 0.0) {
            return bad("scatter_deg must be positive".into());
        }
        let t = &self.tweets;
        if t.min == 0 || t.min > t.max || t.median.is_nan() || t.median <= 0.0 || t.log_sigma.is_nan() || t.log_sigma < 0.0 {
            return bad("tweets: need 0 < min <= max, median > 0, log_sigma >= 0".into());
        }
        for (name, profile) in &self.templates {
            if taxonomy.class_id(name).is_none() {
                return bad(format!("templates: unknown class `{name}`"));
            }
            if profile.len() != 24 || profile.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || profile.iter().sum::<f64>() <= 0.0 {
                return bad(format!("templates: `{name}` needs 24 non-negative values with positive sum"));
            }
        }
        let c = &self.tourists;
        if !(c.fraction.is_finite() && c.fraction >= 0.0) {
            return bad("tourists.fraction must be non-negative".into());
        }
        if c.hotel_tweets[0] == 0 || c.hotel_tweets[0] > c.hotel_tweets[1] || c.scattered_tweets[0] > c.scattered_tweets[1] {
            return bad("tourists: ranges must be [lo, hi] with lo <= hi and at least one hotel tweet".into());
        }
        if !(c.scatter_radius_deg.is_finite() && c.scatter_radius_deg > 0.0) {
            return bad("tourists.scatter_radius_deg must be positive".into());
        }
        if c.fraction > 0.0 && taxonomy.class_id("Hotel").is_none_or(|h| !self.grid.class_weights.get(taxonomy.name(h)).is_some_and(|w| *w > 0.0)) {
            return bad("tourists need Hotel cells in grid.class_weights".into());
        }
        Ok(())
    }

    /// Normalized Zipf weights for `k` ordered items.
    pub fn zipf_weights(k: usize, exponent: f64) -> Vec<f64> {
        let raw: Vec<f64> = (1..=k).map(|i| (i as f64).powf(-exponent)).collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / z).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserKind {
    Resident,
    Tourist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueLocation {
    pub lon: f64,
    pub lat: f64,
    pub landuse: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthUser {
    pub user: String,
    pub kind: UserKind,
    /// Ordered by decreasing visit probability.
    pub locations: Vec<TrueLocation>,
    /// True location index of each emitted tweet, in emission order; `None` for scattered tweets.
    pub tweets: Vec<Option<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub users: Vec<TruthUser>,
}

impl GroundTruth {
    pub fn user(&self, id: &str) -> Option<&TruthUser> {
        self.users.binary_search_by(|u| u.user.as_str().cmp(id)).ok().map(|i| &self.users[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub map: SynthMap,
    /// Per-user chronological tweets; users in id order.
    pub records: Vec<TweetRecord>,
    pub truth: GroundTruth,
}

impl SynthCorpus {
    /// Events in the NDJSON input schema, one line per tweet.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 80);
        for r in &self.records {
            writeln!(
                out,
                "{{\"user\":\"{}\",\"lon\":{},\"lat\":{},\"ts\":\"{}\"}}",
                r.user_id,
                r.lon,
                r.lat,
                r.t_utc.to_rfc3339_opts(SecondsFormat::Secs, true)
            )
            .unwrap();
        }
        out
    }
}

impl PartialEq for SynthMap {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.cells == other.cells
    }
}

fn round7(x: f64) -> f64 {
    (x * 1e7).round() / 1e7
}

struct Sampler<'a> {
    config: &'a SynthConfig,
    map: &'a SynthMap,
    zone: UsZone,
    year_start: NaiveDate,
    days: i64,
    noise: Normal<f64>,
    templates: BTreeMap<ClassId, WeightedIndex<f64>>,
    flat: WeightedIndex<f64>,
    cells_by_class: BTreeMap<ClassId, Vec<(usize, usize)>>,
}

impl Sampler<'_> {
    fn hour(&self, class: ClassId, rng: &mut ChaCha8Rng) -> u32 {
        self.templates.get(&class).unwrap_or(&self.flat).sample(rng) as u32
    }

    fn timestamp(&self, hour: u32, rng: &mut ChaCha8Rng) -> DateTime<Utc> {
        loop {
            let day = self.year_start + Duration::days(rng.random_range(0..self.days));
            let time = NaiveTime::from_hms_opt(hour, rng.random_range(0..60), rng.random_range(0..60)).unwrap();
            if let Some(t) = self.zone.from_local(NaiveDateTime::new(day, time)) {
                return t;
            }
        }
    }

    fn scatter(&self, center: [f64; 2], rng: &mut ChaCha8Rng) -> [f64; 2] {
        [round7(center[0] + self.noise.sample(rng)), round7(center[1] + self.noise.sample(rng))]
    }

    /// Random point in a cell, kept away from the edges.
    fn point_in_cell(&self, col: usize, row: usize, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let spec = &self.map.spec;
        let margin = (3.0 * self.config.scatter_deg).max(0.1 * spec.cell_deg).min(0.45 * spec.cell_deg);
        let o = spec.cell_origin(col, row);
        let span = spec.cell_deg - 2.0 * margin;
        [o[0] + margin + rng.random::<f64>() * span, o[1] + margin + rng.random::<f64>() * span]
    }

    /// A cell of `class` at Chebyshev distance ≥ 2 from every cell in `taken`.
    fn pick_cell(&self, class: ClassId, taken: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        let candidates = self.cells_by_class.get(&class)?;
        for _ in 0..64 {
            let c = candidates[rng.random_range(0..candidates.len())];
            let clear = taken.iter().all(|t| t.0.abs_diff(c.0).max(t.1.abs_diff(c.1)) >= 2);
            if clear {
                return Some(c);
            }
        }
        None
    }
}

fn class_picker(w: &BTreeMap<String, f64>, taxonomy: &Taxonomy) -> (Vec<ClassId>, WeightedIndex<f64>) {
    let ids = w.keys().map(|k| taxonomy.class_id(k).expect("validated")).collect();
    (ids, WeightedIndex::new(w.values().copied()).expect("validated"))
}

/// Generates the corpus for `config`. Identical configs give identical corpora.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    config.validate()?;
    let map = build_synth_map(&config.grid, config.seed)?;
    let taxonomy = map.map.taxonomy().clone();

    let cells_by_class = taxonomy.classes().map(|c| (c, map.cells_of(c))).filter(|(_, v)| !v.is_empty()).collect();
    let templates = config
        .templates
        .iter()
        .map(|(k, v)| (taxonomy.class_id(k).expect("validated"), WeightedIndex::new(v.iter().copied()).expect("validated")))
        .collect();
    let year_start = NaiveDate::from_ymd_opt(config.year, 1, 1).unwrap();
    let sampler = Sampler {
        config,
        map: &map,
        zone: UsZone::central(config.year..=config.year).expect("validated"),
        year_start,
        days: (NaiveDate::from_ymd_opt(config.year + 1, 1, 1).unwrap() - year_start).num_days(),
        noise: Normal::new(0.0, config.scatter_deg).expect("validated"),
        templates,
        flat: WeightedIndex::new([1.0; 24]).unwrap(),
        cells_by_class,
    };

    let (top_ids, top_pick) = class_picker(&config.top_class_weights, &taxonomy);
    let (other_ids, other_pick) = class_picker(&config.other_class_weights, &taxonomy);
    let count_pick = WeightedIndex::new(
        SynthConfig::zipf_weights(config.locations_max, config.locations_exponent)[config.locations_min - 1..].to_vec(),
    )
    .unwrap();
    let tweet_counts = LogNormal::new(config.tweets.median.ln(), config.tweets.log_sigma).expect("validated");

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(2);

    let mut users = Vec::new();
    for u in 0..config.n_users {
        let k = count_pick.sample(&mut rng) + config.locations_min;
        let mut cells: Vec<(usize, usize)> = Vec::with_capacity(k);
        let mut classes = Vec::with_capacity(k);
        let mut attempts = 0;
        while cells.len() < k && attempts < 256 {
            attempts += 1;
            let class = if cells.is_empty() { top_ids[top_pick.sample(&mut rng)] } else { other_ids[other_pick.sample(&mut rng)] };
            if let Some(c) = sampler.pick_cell(class, &cells, &mut rng) {
                cells.push(c);
                classes.push(class);
            }
        }
        if cells.is_empty() {
            return Err(SynthError::Config("could not place any location; grid too small for the class weights".into()));
        }
        let probs = SynthConfig::zipf_weights(cells.len(), config.visit_exponent);
        let centers: Vec<[f64; 2]> = cells.iter().map(|&(c, r)| sampler.point_in_cell(c, r, &mut rng)).collect();
        let n = (tweet_counts.sample(&mut rng).round() as usize).clamp(config.tweets.min, config.tweets.max);
        let visit = WeightedIndex::new(&probs).unwrap();
        let mut tweets: Vec<(DateTime<Utc>, [f64; 2], Option<u8>)> = (0..n)
            .map(|_| {
                let loc = visit.sample(&mut rng);
                let pos = sampler.scatter(centers[loc], &mut rng);
                let t = sampler.timestamp(sampler.hour(classes[loc], &mut rng), &mut rng);
                (t, pos, Some(loc as u8))
            })
            .collect();
        tweets.sort_by_key(|t| t.0);
        let locations = centers
            .iter()
            .zip(&classes)
            .zip(&probs)
            .map(|((c, &class), &p)| TrueLocation { lon: c[0], lat: c[1], landuse: taxonomy.name(class).to_string(), probability: p })
            .collect();
        users.push((format!("u{u:05}"), UserKind::Resident, locations, tweets));
    }

    let n_tourists = (config.tourists.fraction * config.n_users as f64).round() as usize;
    if n_tourists > 0 {
        let hotel = taxonomy.class_id("Hotel").expect("validated");
        let [x0, y0, x1, y1] = map.spec.extent();
        let cohort = &config.tourists;
        for u in 0..n_tourists {
            let cell = sampler.pick_cell(hotel, &[], &mut rng).expect("validated hotel cells");
            let center = sampler.point_in_cell(cell.0, cell.1, &mut rng);
            let h = rng.random_range(cohort.hotel_tweets[0]..=cohort.hotel_tweets[1]);
            let m = rng.random_range(cohort.scattered_tweets[0]..=cohort.scattered_tweets[1]);
            let mut tweets = Vec::with_capacity(h + m);
            for _ in 0..h {
                let pos = sampler.scatter(center, &mut rng);
                tweets.push((sampler.timestamp(sampler.hour(hotel, &mut rng), &mut rng), pos, Some(0u8)));
            }
            while tweets.len() < h + m {
                let r = cohort.scatter_radius_deg * rng.random::<f64>().sqrt();
                let a = rng.random::<f64>() * std::f64::consts::TAU;
                let pos = [round7(center[0] + r * a.cos()), round7(center[1] + r * a.sin())];
                if pos[0] < x0 || pos[0] > x1 || pos[1] < y0 || pos[1] > y1 {
                    continue;
                }
                let class = sampler.map.map.classify_point(pos[0], pos[1]).expect("grid has non-road cells");
                tweets.push((sampler.timestamp(sampler.hour(class, &mut rng), &mut rng), pos, None));
            }
            tweets.sort_by_key(|t| t.0);
            let locations = vec![TrueLocation { lon: center[0], lat: center[1], landuse: "Hotel".into(), probability: 1.0 }];
            users.push((format!("t{u:05}"), UserKind::Tourist, locations, tweets));
        }
    }

    users.sort_by(|a, b| a.0.cmp(&b.0));
    let mut records = Vec::new();
    let mut truth = Vec::with_capacity(users.len());
    for (user, kind, locations, tweets) in users {
        records.extend(tweets.iter().map(|(t, pos, _)| TweetRecord { user_id: user.clone(), lon: pos[0], lat: pos[1], t_utc: *t }));
        truth.push(TruthUser { user, kind, locations, tweets: tweets.iter().map(|t| t.2).collect() });
    }
    Ok(SynthCorpus { map, records, truth: GroundTruth { users: truth } })
}
