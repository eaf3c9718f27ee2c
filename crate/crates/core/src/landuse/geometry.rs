//! Planar polygon predicates in lon/lat degrees.

pub type Coord = [f64; 2];

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Coord,
    pub max: Coord,
}

impl Rect {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Coord>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut rect = Rect { min: first, max: first };
        for p in it {
            rect.min = [rect.min[0].min(p[0]), rect.min[1].min(p[1])];
            rect.max = [rect.max[0].max(p[0]), rect.max[1].max(p[1])];
        }
        Some(rect)
    }

    pub fn contains(&self, p: Coord) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

/// A polygon feature: every ring of every part, evaluated together under the even-odd rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    rings: Vec<Vec<Coord>>,
    bounds: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeError {
    Empty,
    Degenerate,
    NotClosed,
    NonFinite,
    SelfIntersecting,
}

impl Shape {
    /// Validates closed rings of at least four vertices. Self-intersection is checked with
    /// [`Shape::is_simple`] separately.
    pub fn new(rings: Vec<Vec<Coord>>) -> Result<Self, ShapeError> {
        if rings.is_empty() {
            return Err(ShapeError::Empty);
        }
        for ring in &rings {
            if ring.len() < 4 {
                return Err(ShapeError::Degenerate);
            }
            if ring.iter().flatten().any(|v| !v.is_finite()) {
                return Err(ShapeError::NonFinite);
            }
            if ring.first() != ring.last() {
                return Err(ShapeError::NotClosed);
            }
        }
        let bounds = Rect::of_points(rings.iter().flatten()).expect("rings are non-empty");
        Ok(Self { rings, bounds })
    }

    /// Axis-aligned rectangle with corners `min` and `max`.
    pub fn rectangle(min: Coord, max: Coord) -> Self {
        Self::new(vec![vec![min, [max[0], min[1]], max, [min[0], max[1]], min]]).expect("valid rectangle")
    }

    pub fn rings(&self) -> &[Vec<Coord>] {
        &self.rings
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    fn edges(&self) -> impl Iterator<Item = (Coord, Coord)> + '_ {
        self.rings.iter().flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
    }

    /// Even-odd containment; points on any edge are inside.
    pub fn contains(&self, p: Coord) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x_cross = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
                if p[0] < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Euclidean distance from `p` to the nearest edge.
    pub fn boundary_distance(&self, p: Coord) -> f64 {
        self.edges().map(|(a, b)| segment_distance_sq(p, a, b)).fold(f64::INFINITY, f64::min).sqrt()
    }

    /// Squared form of [`Shape::distance`].
    pub fn distance_sq(&self, p: Coord) -> f64 {
        if self.contains(p) {
            0.0
        } else {
            self.edges().map(|(a, b)| segment_distance_sq(p, a, b)).fold(f64::INFINITY, f64::min)
        }
    }

    /// Zero when contained, otherwise the boundary distance.
    pub fn distance(&self, p: Coord) -> f64 {
        self.distance_sq(p).sqrt()
    }

    /// True when no two non-adjacent edges of a ring touch and no two rings cross.
    pub fn is_simple(&self) -> bool {
        let edges: Vec<(usize, usize, Coord, Coord)> = self
            .rings
            .iter()
            .enumerate()
            .flat_map(|(ri, r)| r.windows(2).enumerate().map(move |(ei, w)| (ri, ei, w[0], w[1])))
            .collect();
        for i in 0..edges.len() {
            let (ri, ei, a, b) = edges[i];
            let ring_edges = self.rings[ri].len() - 1;
            for &(rj, ej, c, d) in &edges[i + 1..] {
                if ri == rj {
                    let adjacent = ej == ei + 1 || (ei == 0 && ej == ring_edges - 1);
                    if adjacent {
                        continue;
                    }
                }
                if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

fn cross(o: Coord, a: Coord, b: Coord) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn within_box(p: Coord, a: Coord, b: Coord) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

pub fn on_segment(p: Coord, a: Coord, b: Coord) -> bool {
    cross(a, b, p) == 0.0 && within_box(p, a, b)
}

fn segments_intersect(a: Coord, b: Coord, c: Coord, d: Coord) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && within_box(a, c, d))
        || (d2 == 0.0 && within_box(b, c, d))
        || (d3 == 0.0 && within_box(c, a, b))
        || (d4 == 0.0 && within_box(d, a, b))
}

/// Squared distance from `p` to segment `ab`.
pub fn segment_distance_sq(p: Coord, a: Coord, b: Coord) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    (p[0] - qx).powi(2) + (p[1] - qy).powi(2)
}
