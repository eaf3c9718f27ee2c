//! Landuse inventory: polygon loading, taxonomy reduction and point enrichment.
//!
//! Points are matched to the containing polygon (even-odd rule, boundary inclusive,
//! smallest polygon id on overlap). Points that land on a road/transport polygon, or on
//! no polygon at all, are reassigned to the nearest non-road polygon.

pub mod geometry;
mod index;
mod taxonomy;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::Read;
use std::sync::Arc;

use geojson::{GeoJson, Value};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::ingest::{ClockError, LocalTime, Trajectory, UsZone};
use geometry::{Coord, Shape, ShapeError};

pub use index::SpatialIndex;
pub use taxonomy::{ClassId, Taxonomy, DEFAULT_TAXONOMY_CSV};

#[derive(Debug, Error)]
pub enum LanduseError {
    #[error("failed to read landuse input: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid polygon file: {0}")]
    GeoJson(String),
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("raw classes missing from taxonomy: {}", .0.join(", "))]
    UnmappedCodes(Vec<String>),
    #[error("degenerate polygon {0}: rings need at least 4 vertices")]
    Degenerate(PolygonId),
    #[error("polygon {id}: {problem}")]
    InvalidPolygon { id: PolygonId, problem: &'static str },
    #[error("feature {0} has no usable `raw_class` property")]
    MissingClass(String),
    #[error("duplicate polygon id {0}")]
    DuplicateId(PolygonId),
    #[error("no polygon outside the excluded classes")]
    NoEligiblePolygon,
    #[error(transparent)]
    Clock(#[from] ClockError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PolygonId(pub u64);

impl fmt::Display for PolygonId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandusePolygon {
    pub id: PolygonId,
    pub raw_class: String,
    pub class: ClassId,
    pub shape: Shape,
}

/// An enriched trajectory element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticPoint {
    pub lon: f64,
    pub lat: f64,
    pub local_time: LocalTime,
    pub landuse: ClassId,
}

/// Validated polygon inventory plus its taxonomy and spatial index.
#[derive(Debug, Clone)]
pub struct LanduseMap {
    taxonomy: Taxonomy,
    polygons: Vec<Arc<LandusePolygon>>,
    index: SpatialIndex,
}

fn shape_problem(id: PolygonId, e: ShapeError) -> LanduseError {
    match e {
        ShapeError::Degenerate | ShapeError::Empty => LanduseError::Degenerate(id),
        ShapeError::NotClosed => LanduseError::InvalidPolygon { id, problem: "ring is not closed" },
        ShapeError::NonFinite => LanduseError::InvalidPolygon { id, problem: "non-finite coordinate" },
        ShapeError::SelfIntersecting => LanduseError::InvalidPolygon { id, problem: "ring self-intersects" },
    }
}

fn to_rings(raw: &[Vec<Vec<f64>>]) -> Vec<Vec<Coord>> {
    raw.iter()
        .map(|ring| ring.iter().map(|pos| [pos.first().copied().unwrap_or(f64::NAN), pos.get(1).copied().unwrap_or(f64::NAN)]).collect())
        .collect()
}

impl LanduseMap {
    /// Builds a map from `(id, raw_class, rings)` triples.
    pub fn new<I>(features: I, taxonomy: Taxonomy) -> Result<Self, LanduseError>
    where
        I: IntoIterator<Item = (PolygonId, String, Vec<Vec<Coord>>)>,
    {
        let mut polygons = Vec::new();
        let mut seen = HashSet::new();
        let mut unmapped = BTreeSet::new();
        for (id, raw_class, rings) in features {
            if !seen.insert(id) {
                return Err(LanduseError::DuplicateId(id));
            }
            let shape = Shape::new(rings).map_err(|e| shape_problem(id, e))?;
            if !shape.is_simple() {
                return Err(shape_problem(id, ShapeError::SelfIntersecting));
            }
            match taxonomy.resolve(&raw_class) {
                Some(class) => polygons.push(Arc::new(LandusePolygon { id, raw_class, class, shape })),
                None => {
                    unmapped.insert(raw_class);
                }
            }
        }
        if !unmapped.is_empty() {
            return Err(LanduseError::UnmappedCodes(unmapped.into_iter().collect()));
        }
        polygons.sort_by_key(|p| p.id);
        let index = SpatialIndex::build(&polygons);
        Ok(Self { taxonomy, polygons, index })
    }

    /// Reads a GeoJSON feature collection of Polygon/MultiPolygon features, each with a
    /// `raw_class` property. Numeric feature ids are used when present, otherwise the
    /// feature's position in the file.
    pub fn from_geojson<R: Read>(geo: R, taxonomy: Taxonomy) -> Result<Self, LanduseError> {
        let parsed = GeoJson::from_reader(geo).map_err(|e| LanduseError::GeoJson(e.to_string()))?;
        let GeoJson::FeatureCollection(collection) = parsed else {
            return Err(LanduseError::GeoJson("expected a FeatureCollection".into()));
        };
        let mut features = Vec::with_capacity(collection.features.len());
        for (position, feature) in collection.features.into_iter().enumerate() {
            let id = match &feature.id {
                None => PolygonId(position as u64),
                Some(geojson::feature::Id::Number(n)) => PolygonId(n.as_u64().ok_or_else(|| {
                    LanduseError::GeoJson(format!("feature id {n} is not a non-negative integer"))
                })?),
                Some(geojson::feature::Id::String(s)) => PolygonId(s.parse().map_err(|_| {
                    LanduseError::GeoJson(format!("feature id `{s}` is not a non-negative integer"))
                })?),
            };
            let raw_class = match feature.property("raw_class") {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                _ => return Err(LanduseError::MissingClass(id.to_string())),
            };
            let rings = match feature.geometry.map(|g| g.value) {
                Some(Value::Polygon(rings)) => to_rings(&rings),
                Some(Value::MultiPolygon(parts)) => parts.iter().flat_map(|p| to_rings(p)).collect(),
                _ => return Err(LanduseError::InvalidPolygon { id, problem: "geometry must be Polygon or MultiPolygon" }),
            };
            features.push((id, raw_class, rings));
        }
        Self::new(features, taxonomy)
    }

    /// Loads polygons and taxonomy from their file formats.
    pub fn load<G: Read, T: Read>(geo: G, taxonomy: T) -> Result<Self, LanduseError> {
        let taxonomy = Taxonomy::from_csv(taxonomy)?;
        Self::from_geojson(geo, taxonomy)
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// All polygons ordered by id.
    pub fn polygons(&self) -> &[Arc<LandusePolygon>] {
        &self.polygons
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    /// Class of the containing polygon (smallest id on ties), or `None`.
    pub fn locate(&self, lon: f64, lat: f64) -> Option<ClassId> {
        self.index.locate([lon, lat]).map(|p| p.class)
    }

    pub fn locate_polygon(&self, lon: f64, lat: f64) -> Option<&LandusePolygon> {
        self.index.locate([lon, lat])
    }

    /// Nearest polygon whose class is not excluded, with its planar distance in degrees.
    pub fn nearest_polygon<F>(&self, lon: f64, lat: f64, exclude: F) -> Result<(PolygonId, f64), LanduseError>
    where
        F: Fn(ClassId) -> bool,
    {
        self.index
            .nearest([lon, lat], |poly| exclude(poly.class))
            .map(|(poly, d)| (poly.id, d))
            .ok_or(LanduseError::NoEligiblePolygon)
    }

    pub fn polygon(&self, id: PolygonId) -> Option<&LandusePolygon> {
        self.polygons.binary_search_by_key(&id, |p| p.id).ok().map(|i| self.polygons[i].as_ref())
    }

    /// Landuse for a point, with road and uncovered points moved to the nearest non-road polygon.
    pub fn classify_point(&self, lon: f64, lat: f64) -> Result<ClassId, LanduseError> {
        match self.locate(lon, lat) {
            Some(class) if !self.taxonomy.is_road(class) => Ok(class),
            _ => {
                let (id, _) = self.nearest_polygon(lon, lat, |c| self.taxonomy.is_road(c))?;
                Ok(self.polygon(id).expect("id comes from this map").class)
            }
        }
    }

    /// Attaches local time and landuse to every point, preserving order.
    pub fn enrich(&self, trajectory: &Trajectory, zone: &UsZone) -> Result<Vec<SemanticPoint>, LanduseError> {
        trajectory
            .points
            .iter()
            .map(|p| {
                Ok(SemanticPoint {
                    lon: p.lon,
                    lat: p.lat,
                    local_time: zone.to_local(p.t_utc)?,
                    landuse: self.classify_point(p.lon, p.lat)?,
                })
            })
            .collect()
    }

    /// Serializes polygons as a GeoJSON feature collection in id order.
    pub fn to_geojson(&self) -> String {
        let features: Vec<serde_json::Value> = self
            .polygons
            .iter()
            .map(|p| {
                json!({
                    "type": "Feature",
                    "id": p.id.0,
                    "properties": { "raw_class": p.raw_class },
                    "geometry": { "type": "Polygon", "coordinates": p.shape.rings() },
                })
            })
            .collect();
        serde_json::to_string(&json!({ "type": "FeatureCollection", "features": features }))
            .expect("serializable")
    }
}
