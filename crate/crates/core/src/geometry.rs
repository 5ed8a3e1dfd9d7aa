//! Closed polygonal curves and regions.
//!
//! A [`ClosedCurve`] is a simple polygon whose last vertex connects back to the
//! first. A [`Region`] is one counterclockwise outer curve plus clockwise holes.
//! With that orientation convention the region always lies to the left of the
//! direction of travel, so the outward normal is the right-hand normal for
//! every boundary curve.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Turning angle (radians) above which a vertex is kept as a corner by
/// [`ClosedCurve::resample_uniform`].
pub const CORNER_ANGLE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curve needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("vertices {0} and {1} coincide")]
    DuplicateVertex(usize, usize),
    #[error("curve is not simple: edges {0} and {1} intersect")]
    SelfIntersection(usize, usize),
    #[error("curve encloses zero area")]
    ZeroArea,
    #[error("outer curve must be counterclockwise")]
    OuterOrientation,
    #[error("hole {0} must be clockwise")]
    HoleOrientation(usize),
    #[error("hole {0} is not strictly inside the outer curve")]
    HoleOutside(usize),
    #[error("holes {0} and {1} overlap")]
    HolesOverlap(usize, usize),
    #[error("region has non-positive area {0}")]
    EmptyRegion(f64),
    #[error("invalid resampling spacing {spacing} (perimeter {perimeter})")]
    InvalidSpacing { spacing: f64, perimeter: f64 },
    #[error("normal undefined at vertex {0} (edge reversal)")]
    DegenerateNormal(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2 { x: v[0], y: v[1] }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Right-hand perpendicular `(y, -x)`.
    pub fn right_perp(self) -> Point2 {
        Point2::new(self.y, -self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    point_segment_distance_sq(p, a, b).sqrt()
}

/// Squared distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance_sq(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let ap = p - a;
    let len2 = ab.dot(ab);
    let t = if len2 == 0.0 { 0.0 } else { (ap.dot(ab) / len2).clamp(0.0, 1.0) };
    let d = ap - ab * t;
    d.dot(d)
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

/// Closed-segment intersection test with an absolute slack `eps` on the
/// orientation predicates.
fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2, eps: f64) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    let straddle = |u: f64, v: f64| (u > eps && v < -eps) || (u < -eps && v > eps);
    if straddle(d1, d2) && straddle(d3, d4) {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2, o: f64| {
        o.abs() <= eps
            && r.x >= p.x.min(q.x) - eps
            && r.x <= p.x.max(q.x) + eps
            && r.y >= p.y.min(q.y) - eps
            && r.y <= p.y.max(q.y) + eps
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

/// Axis-aligned bounding box `(min, max)`.
pub fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Simple closed polygon, implicitly closed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCurve {
    vertices: Vec<Point2>,
}

impl ClosedCurve {
    /// Validates vertex count, finiteness, distinct consecutive vertices,
    /// simplicity and non-zero area.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let curve = Self::with_basic_checks(vertices)?;
        curve.check_simple()?;
        if curve.signed_area() == 0.0 {
            return Err(GeometryError::ZeroArea);
        }
        Ok(curve)
    }

    fn with_basic_checks(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        for i in 0..n {
            let j = (i + 1) % n;
            if vertices[i] == vertices[j] {
                return Err(GeometryError::DuplicateVertex(i, j));
            }
        }
        Ok(ClosedCurve { vertices })
    }

    fn check_simple(&self) -> Result<(), GeometryError> {
        let v = &self.vertices;
        let n = v.len();
        let (lo, hi) = bounding_box(v);
        let scale = (hi - lo).norm().max(1.0);
        // orientation values are products of two lengths
        let eps = 1e-12 * scale * scale;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            // adjacent edge folding back onto itself
            let c = v[(i + 2) % n];
            if orient(a, b, c).abs() <= eps && (b - a).dot(c - b) < 0.0 {
                return Err(GeometryError::SelfIntersection(i, (i + 1) % n));
            }
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (v[j], v[(j + 1) % n]);
                if segments_intersect(a, b, c, d, eps) {
                    return Err(GeometryError::SelfIntersection(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[i % n], self.vertices[(i + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        (0..self.vertices.len()).map(move |i| self.edge(i))
    }

    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges().map(|(a, b)| a.dist(b)).collect()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).fold(0.0, f64::max)
    }

    /// Shoelace area; positive iff counterclockwise.
    pub fn signed_area(&self) -> f64 {
        let s: f64 = self.edges().map(|(a, b)| a.cross(b)).sum();
        0.5 * s
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn reversed(&self) -> ClosedCurve {
        let mut v = self.vertices.clone();
        v.reverse();
        ClosedCurve { vertices: v }
    }

    pub fn translated(&self, d: Point2) -> ClosedCurve {
        ClosedCurve {
            vertices: self.vertices.iter().map(|&p| p + d).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ClosedCurve {
        ClosedCurve {
            vertices: self.vertices.iter().map(|&p| p * s).collect(),
        }
    }

    /// Signed exterior angle at every vertex, in `(-π, π]`. Sums to `±2π` for
    /// simple curves.
    pub fn turning_angles(&self) -> Vec<f64> {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let prev = v[i] - v[(i + n - 1) % n];
                let next = v[(i + 1) % n] - v[i];
                prev.cross(next).atan2(prev.dot(next))
            })
            .collect()
    }

    /// Per-vertex `(κ_i, w_i)`: turning angle over the mean incident edge
    /// length, weighted by that mean length. `Σ w_i` is the perimeter and
    /// `Σ κ_i w_i` is the total signed turning.
    pub fn curvature_profile(&self) -> Vec<(f64, f64)> {
        let lens = self.edge_lengths();
        let n = lens.len();
        self.turning_angles()
            .into_iter()
            .enumerate()
            .map(|(i, theta)| {
                let w = 0.5 * (lens[(i + n - 1) % n] + lens[i]);
                (theta / w, w)
            })
            .collect()
    }

    pub fn total_absolute_curvature(&self) -> f64 {
        self.turning_angles().iter().map(|t| t.abs()).sum()
    }

    /// Vertices at equal arclength spacing `≤ target_spacing` along each arc
    /// between corners (turning angle above [`CORNER_ANGLE`]). Corners are kept
    /// exactly. Without corners the loop starts at vertex 0.
    pub fn resample_uniform(&self, target_spacing: f64) -> Result<ClosedCurve, GeometryError> {
        let perimeter = self.perimeter();
        if !(target_spacing > 0.0) || target_spacing > perimeter / 3.0 {
            return Err(GeometryError::InvalidSpacing {
                spacing: target_spacing,
                perimeter,
            });
        }
        let n = self.vertices.len();
        let corners: Vec<usize> = self
            .turning_angles()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.abs() > CORNER_ANGLE)
            .map(|(i, _)| i)
            .collect();
        let anchors = if corners.is_empty() { vec![0] } else { corners };

        let mut out = Vec::new();
        for (a, &start) in anchors.iter().enumerate() {
            let end = anchors[(a + 1) % anchors.len()];
            let mut span = (end + n - start) % n;
            if span == 0 {
                span = n;
            }
            let arc: Vec<Point2> = (0..=span).map(|k| self.vertices[(start + k) % n]).collect();
            let lens: Vec<f64> = arc.windows(2).map(|w| w[0].dist(w[1])).collect();
            let total: f64 = lens.iter().sum();
            let m = (total / target_spacing).ceil().max(1.0) as usize;
            let step = total / m as f64;
            out.push(arc[0]);
            let mut seg = 0;
            let mut seg_start = 0.0;
            for j in 1..m {
                let s = step * j as f64;
                while seg + 1 < lens.len() && seg_start + lens[seg] < s {
                    seg_start += lens[seg];
                    seg += 1;
                }
                let t = ((s - seg_start) / lens[seg]).clamp(0.0, 1.0);
                out.push(arc[seg] + (arc[seg + 1] - arc[seg]) * t);
            }
        }
        out.dedup();
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        ClosedCurve::new(out)
    }

    /// Even-odd crossing test on the open interior (boundary is not handled).
    pub fn crossing_contains(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        self.distance_sq_and_parity(p).0.sqrt()
    }

    /// Squared boundary distance and even-odd crossing parity in one sweep.
    fn distance_sq_and_parity(&self, p: Point2) -> (f64, bool) {
        let mut d2 = f64::INFINITY;
        let mut inside = false;
        let v = &self.vertices;
        let mut a = v[v.len() - 1];
        for &b in v {
            d2 = d2.min(point_segment_distance_sq(p, a, b));
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
            a = b;
        }
        (d2, inside)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    /// Unit outward normals (right-hand bisector of the incident edge normals).
    pub fn outward_normals(&self) -> Result<Vec<Point2>, GeometryError> {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let e0 = v[i] - v[(i + n - 1) % n];
                let e1 = v[(i + 1) % n] - v[i];
                let b = e0.right_perp() * (1.0 / e0.norm()) + e1.right_perp() * (1.0 / e1.norm());
                let len = b.norm();
                if len < 1e-12 {
                    Err(GeometryError::DegenerateNormal(i))
                } else {
                    Ok(b * (1.0 / len))
                }
            })
            .collect()
    }
}

/// One outer counterclockwise curve with clockwise holes strictly inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    outer: ClosedCurve,
    holes: Vec<ClosedCurve>,
}

impl Region {
    pub fn new(outer: ClosedCurve, holes: Vec<ClosedCurve>) -> Result<Self, GeometryError> {
        if !outer.is_ccw() {
            return Err(GeometryError::OuterOrientation);
        }
        for (i, h) in holes.iter().enumerate() {
            if h.signed_area() >= 0.0 {
                return Err(GeometryError::HoleOrientation(i));
            }
            if !curve_strictly_inside(h, &outer) {
                return Err(GeometryError::HoleOutside(i));
            }
        }
        for i in 0..holes.len() {
            for j in (i + 1)..holes.len() {
                if curves_touch(&holes[i], &holes[j])
                    || holes[j].crossing_contains(holes[i].vertices[0])
                    || holes[i].crossing_contains(holes[j].vertices[0])
                {
                    return Err(GeometryError::HolesOverlap(i, j));
                }
            }
        }
        let region = Region { outer, holes };
        let area = region.area();
        if area <= 0.0 {
            return Err(GeometryError::EmptyRegion(area));
        }
        Ok(region)
    }

    /// Simply connected region.
    pub fn simple(outer: ClosedCurve) -> Result<Self, GeometryError> {
        Region::new(outer, Vec::new())
    }

    /// Like [`Region::new`] but reorients curves to the required convention.
    pub fn oriented(outer: ClosedCurve, holes: Vec<ClosedCurve>) -> Result<Self, GeometryError> {
        let outer = if outer.is_ccw() { outer } else { outer.reversed() };
        let holes = holes
            .into_iter()
            .map(|h| if h.is_ccw() { h.reversed() } else { h })
            .collect();
        Region::new(outer, holes)
    }

    pub fn outer(&self) -> &ClosedCurve {
        &self.outer
    }

    pub fn holes(&self) -> &[ClosedCurve] {
        &self.holes
    }

    /// Outer curve first, then holes.
    pub fn curves(&self) -> impl Iterator<Item = &ClosedCurve> + '_ {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn area(&self) -> f64 {
        self.outer.signed_area() - self.holes.iter().map(|h| h.signed_area().abs()).sum::<f64>()
    }

    /// Total boundary length, holes included.
    pub fn perimeter(&self) -> f64 {
        self.curves().map(ClosedCurve::perimeter).sum()
    }

    pub fn vertex_count(&self) -> usize {
        self.curves().map(ClosedCurve::len).sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.curves().map(ClosedCurve::max_edge_length).fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        self.outer.bounding_box()
    }

    /// Distance from `p` to the nearest boundary curve.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.curves().map(|c| c.distance_to(p)).fold(f64::INFINITY, f64::min)
    }

    /// Points on the boundary count as inside.
    pub fn contains_point(&self, p: Point2) -> bool {
        let (lo, hi) = self.bounding_box();
        let eps = 1e-12 * (hi - lo).norm().max(1.0);
        if p.x < lo.x - eps || p.x > hi.x + eps || p.y < lo.y - eps || p.y > hi.y + eps {
            return false;
        }
        if self.boundary_distance(p) <= eps {
            return true;
        }
        self.outer.crossing_contains(p) && !self.holes.iter().any(|h| h.crossing_contains(p))
    }

    /// Signed distance to the boundary, positive inside (boundary included,
    /// as in [`Region::contains_point`]).
    pub fn signed_distance(&self, p: Point2) -> f64 {
        let mut d2 = f64::INFINITY;
        let mut inside = false;
        for c in self.curves() {
            let (dc, pc) = c.distance_sq_and_parity(p);
            d2 = d2.min(dc);
            inside ^= pc;
        }
        let d = d2.sqrt();
        let (lo, hi) = self.bounding_box();
        let eps = 1e-12 * (hi - lo).norm().max(1.0);
        if inside || d <= eps {
            d
        } else {
            -d
        }
    }

    /// Maximum pairwise distance among outer-curve vertices.
    pub fn diameter(&self) -> f64 {
        let v = self.outer.vertices();
        let mut best: f64 = 0.0;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                best = best.max(v[i].dist(v[j]));
            }
        }
        best
    }

    pub fn translated(&self, d: Point2) -> Region {
        Region {
            outer: self.outer.translated(d),
            holes: self.holes.iter().map(|h| h.translated(d)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Region {
        Region {
            outer: self.outer.scaled(s),
            holes: self.holes.iter().map(|h| h.scaled(s)).collect(),
        }
    }

    /// Resamples every boundary curve.
    pub fn resample_uniform(&self, spacing: f64) -> Result<Region, GeometryError> {
        let outer = self.outer.resample_uniform(spacing)?;
        let holes = self
            .holes
            .iter()
            .map(|h| h.resample_uniform(spacing))
            .collect::<Result<Vec<_>, _>>()?;
        Region::new(outer, holes)
    }
}

fn curve_strictly_inside(inner: &ClosedCurve, outer: &ClosedCurve) -> bool {
    !curves_touch(inner, outer) && inner.vertices().iter().all(|&p| outer.crossing_contains(p))
}

fn curves_touch(a: &ClosedCurve, b: &ClosedCurve) -> bool {
    let (lo, hi) = a.bounding_box();
    let eps = 1e-12 * (hi - lo).norm().max(1.0).powi(2);
    a.edges()
        .any(|(p, q)| b.edges().any(|(r, s)| segments_intersect(p, q, r, s, eps)))
}

/// Regular `n`-gon inscribed in the circle of radius `r` about `center`,
/// counterclockwise, first vertex at angle `phase`.
pub fn regular_polygon(center: Point2, r: f64, n: usize, phase: f64) -> Vec<Point2> {
    (0..n)
        .map(|i| {
            let t = phase + 2.0 * PI * i as f64 / n as f64;
            center + Point2::new(r * t.cos(), r * t.sin())
        })
        .collect()
}
