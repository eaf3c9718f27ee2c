//! Tiled rectangular landuse maps with road strips between cells.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::landuse::geometry::Shape;
use crate::landuse::{ClassId, LanduseMap, PolygonId, Taxonomy};

pub const ROAD_CLASS: &str = "Road/Transport";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// South-west corner of the grid.
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub cols: usize,
    pub rows: usize,
    /// Side of each landuse cell, degrees.
    pub cell_deg: f64,
    /// Width of the road strip between neighboring cells, degrees. Zero disables roads.
    pub road_deg: f64,
    /// Relative frequency of each analysis class among cells.
    pub class_weights: BTreeMap<String, f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        let class_weights = [
            ("Residential", 0.40),
            ("Office", 0.10),
            ("Urban Mix Commercial", 0.08),
            ("Urban Mix Residential", 0.06),
            ("Hotel", 0.04),
            ("Cultural/Entertainment", 0.06),
            ("K-12 Educational", 0.08),
            ("Post-Secondary Educational", 0.06),
            ("Other", 0.12),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            origin_lon: -87.95,
            origin_lat: 41.70,
            cols: 40,
            rows: 40,
            cell_deg: 0.01,
            road_deg: 0.0006,
            class_weights,
        }
    }
}

impl GridSpec {
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.cols < 2 || self.rows < 2 {
            return bad(format!("grid must be at least 2×2, got {}×{}", self.cols, self.rows));
        }
        if !(self.cell_deg.is_finite() && self.cell_deg > 0.0) {
            return bad(format!("cell_deg must be positive, got {}", self.cell_deg));
        }
        if !(self.road_deg.is_finite() && self.road_deg >= 0.0) {
            return bad(format!("road_deg must be non-negative, got {}", self.road_deg));
        }
        let (w, h) = (self.pitch() * self.cols as f64, self.pitch() * self.rows as f64);
        if !(-180.0..=180.0).contains(&self.origin_lon)
            || !(-90.0..=90.0).contains(&self.origin_lat)
            || self.origin_lon + w > 180.0
            || self.origin_lat + h > 90.0
        {
            return bad("grid extends outside lon/lat range".into());
        }
        check_weights(&self.class_weights, taxonomy, "class_weights")
    }

    pub fn pitch(&self) -> f64 {
        self.cell_deg + self.road_deg
    }

    /// Lower-left corner of cell (col, row).
    pub fn cell_origin(&self, col: usize, row: usize) -> [f64; 2] {
        [self.origin_lon + col as f64 * self.pitch(), self.origin_lat + row as f64 * self.pitch()]
    }

    /// `[min_lon, min_lat, max_lon, max_lat]` of the whole grid.
    pub fn extent(&self) -> [f64; 4] {
        let [x1, y1] = self.cell_origin(self.cols - 1, self.rows - 1);
        [self.origin_lon, self.origin_lat, x1 + self.cell_deg, y1 + self.cell_deg]
    }
}

pub(crate) fn check_weights(weights: &BTreeMap<String, f64>, taxonomy: &Taxonomy, what: &str) -> Result<(), SynthError> {
    if weights.is_empty() || weights.values().all(|w| *w == 0.0) {
        return Err(SynthError::Config(format!("{what} must contain a positive weight")));
    }
    for (name, w) in weights {
        let Some(id) = taxonomy.class_id(name) else {
            return Err(SynthError::Config(format!("{what}: unknown class `{name}`")));
        };
        if taxonomy.is_road(id) {
            return Err(SynthError::Config(format!("{what}: road class `{name}` cannot host locations")));
        }
        if !(w.is_finite() && *w >= 0.0) {
            return Err(SynthError::Config(format!("{what}: weight for `{name}` must be non-negative")));
        }
    }
    Ok(())
}

/// A generated grid: the map plus the class of every cell.
#[derive(Debug, Clone)]
pub struct SynthMap {
    pub spec: GridSpec,
    pub map: LanduseMap,
    /// Row-major `cells[row * cols + col]`.
    pub cells: Vec<ClassId>,
}

impl SynthMap {
    pub fn cell_class(&self, col: usize, row: usize) -> ClassId {
        self.cells[row * self.spec.cols + col]
    }

    /// Cell ids of cells with class `class`, as `(col, row)`.
    pub fn cells_of(&self, class: ClassId) -> Vec<(usize, usize)> {
        (0..self.spec.rows)
            .flat_map(|r| (0..self.spec.cols).map(move |c| (c, r)))
            .filter(|&(c, r)| self.cell_class(c, r) == class)
            .collect()
    }
}

/// Tiles `spec.cols × spec.rows` square cells with classes drawn from `class_weights`,
/// separated by one road strip per interior grid line.
pub fn build_synth_map(spec: &GridSpec, seed: u64) -> Result<SynthMap, SynthError> {
    let taxonomy = Taxonomy::default_taxonomy();
    spec.validate(&taxonomy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let names: Vec<&String> = spec.class_weights.keys().collect();
    let picker = WeightedIndex::new(spec.class_weights.values().copied())
        .map_err(|e| SynthError::Config(format!("class_weights: {e}")))?;
    let raw_code = |name: &str| -> String {
        let id = taxonomy.class_id(name).expect("validated");
        taxonomy.raw_codes(id)[0].to_string()
    };

    let mut cells = Vec::with_capacity(spec.cols * spec.rows);
    let mut features = Vec::new();
    let mut next_id = 1u64;
    for row in 0..spec.rows {
        for col in 0..spec.cols {
            let name = names[picker.sample(&mut rng)];
            cells.push(taxonomy.class_id(name).expect("validated"));
            let min = spec.cell_origin(col, row);
            let max = [min[0] + spec.cell_deg, min[1] + spec.cell_deg];
            features.push((PolygonId(next_id), raw_code(name), Shape::rectangle(min, max).rings().to_vec()));
            next_id += 1;
        }
    }
    if spec.road_deg > 0.0 {
        let road = raw_code(ROAD_CLASS);
        let [x0, y0, x1, y1] = spec.extent();
        for col in 0..spec.cols - 1 {
            let left = spec.cell_origin(col, 0)[0] + spec.cell_deg;
            let ring = Shape::rectangle([left, y0], [left + spec.road_deg, y1]).rings().to_vec();
            features.push((PolygonId(next_id), road.clone(), ring));
            next_id += 1;
        }
        for row in 0..spec.rows - 1 {
            let bottom = spec.cell_origin(0, row)[1] + spec.cell_deg;
            let ring = Shape::rectangle([x0, bottom], [x1, bottom + spec.road_deg]).rings().to_vec();
            features.push((PolygonId(next_id), road.clone(), ring));
            next_id += 1;
        }
    }
    let map = LanduseMap::new(features, taxonomy).map_err(|e| SynthError::Config(e.to_string()))?;
    Ok(SynthMap { spec: spec.clone(), map, cells })
}
