use std::sync::Arc;

use rstar::{PointDistance, RTree, RTreeObject, AABB};

use super::geometry::Coord;
use super::{LandusePolygon, PolygonId};

#[derive(Debug, Clone)]
struct Entry {
    polygon: Arc<LandusePolygon>,
    envelope: AABB<Coord>,
}

impl RTreeObject for Entry {
    type Envelope = AABB<Coord>;

    fn envelope(&self) -> Self::Envelope {
        self.envelope
    }
}

impl PointDistance for Entry {
    fn distance_2(&self, point: &Coord) -> f64 {
        self.polygon.shape.distance_sq(*point)
    }

    fn contains_point(&self, point: &Coord) -> bool {
        self.polygon.shape.contains(*point)
    }
}

/// Bulk-loaded R-tree over polygon bounding boxes. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    tree: RTree<Entry>,
}

impl SpatialIndex {
    pub fn build(polygons: &[Arc<LandusePolygon>]) -> Self {
        let entries = polygons
            .iter()
            .map(|p| {
                let b = p.shape.bounds();
                Entry { polygon: Arc::clone(p), envelope: AABB::from_corners(b.min, b.max) }
            })
            .collect();
        Self { tree: RTree::bulk_load(entries) }
    }

    /// Polygons whose bounding box contains `p`.
    pub fn candidates(&self, p: Coord) -> impl Iterator<Item = &LandusePolygon> {
        self.tree.locate_in_envelope_intersecting(&AABB::from_point(p)).map(|e| e.polygon.as_ref())
    }

    /// Containing polygon with the smallest id.
    pub fn locate(&self, p: Coord) -> Option<&LandusePolygon> {
        self.candidates(p).filter(|poly| poly.shape.contains(p)).min_by_key(|poly| poly.id)
    }

    /// Closest polygon not rejected by `exclude`, with ties broken by smallest id.
    pub fn nearest<F>(&self, p: Coord, exclude: F) -> Option<(&LandusePolygon, f64)>
    where
        F: Fn(&LandusePolygon) -> bool,
    {
        let mut best: Option<(&LandusePolygon, f64)> = None;
        for (entry, d2) in self.tree.nearest_neighbor_iter_with_distance_2(&p) {
            if let Some((_, best_d2)) = best {
                if d2 > best_d2 {
                    break;
                }
            }
            let poly = entry.polygon.as_ref();
            if exclude(poly) {
                continue;
            }
            best = match best {
                Some((b, bd2)) if b.id <= poly.id => Some((b, bd2)),
                _ => Some((poly, d2)),
            };
        }
        best.map(|(poly, d2)| (poly, d2.sqrt()))
    }

    pub fn len(&self) -> usize {
        self.tree.size()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.size() == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = PolygonId> + '_ {
        self.tree.iter().map(|e| e.polygon.id)
    }
}
