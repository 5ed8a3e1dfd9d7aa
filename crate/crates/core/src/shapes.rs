//! Parametric shape generators used by the demo, the diagnostics and tests.

use std::f64::consts::PI;

use crate::geometry::{regular_polygon, ClosedCurve, GeometryError, Point2, Region};

/// Counterclockwise regular `n`-gon inscribed in the circle.
pub fn disk(center: Point2, r: f64, n: usize) -> Result<Region, GeometryError> {
    Region::simple(ClosedCurve::new(regular_polygon(center, r, n, 0.0))?)
}

/// Inscribed polygon with edge length at most `spacing`.
pub fn disk_with_spacing(center: Point2, r: f64, spacing: f64) -> Result<Region, GeometryError> {
    let n = vertices_for_circle(r, spacing);
    disk(center, r, n)
}

/// Vertex count of an inscribed polygon whose edges are at most `spacing`.
pub fn vertices_for_circle(r: f64, spacing: f64) -> usize {
    // edge = 2 r sin(π/n) ≤ 2πr/n
    ((2.0 * PI * r / spacing).ceil() as usize).max(8)
}

/// Capsule: two semicircular caps of radius `cap` joined by straight sides of
/// length `straight`, axis along x. Edges are at most `spacing`.
pub fn stadium(center: Point2, cap: f64, straight: f64, spacing: f64) -> Result<Region, GeometryError> {
    let half = straight / 2.0;
    let cap_steps = ((PI * cap / spacing).ceil() as usize).max(4);
    let side_steps = ((straight / spacing).ceil() as usize).max(1);
    let mut v = Vec::new();
    // bottom side, left to right
    for i in 0..side_steps {
        let t = i as f64 / side_steps as f64;
        v.push(Point2::new(-half + straight * t, -cap));
    }
    // right cap from -π/2 to π/2
    for i in 0..cap_steps {
        let a = -PI / 2.0 + PI * i as f64 / cap_steps as f64;
        v.push(Point2::new(half + cap * a.cos(), cap * a.sin()));
    }
    for i in 0..side_steps {
        let t = i as f64 / side_steps as f64;
        v.push(Point2::new(half - straight * t, cap));
    }
    for i in 0..cap_steps {
        let a = PI / 2.0 + PI * i as f64 / cap_steps as f64;
        v.push(Point2::new(-half + cap * a.cos(), cap * a.sin()));
    }
    Region::simple(ClosedCurve::new(v.into_iter().map(|p| p + center).collect())?)
}

/// Closed-form capsule area.
pub fn stadium_area(cap: f64, straight: f64) -> f64 {
    2.0 * cap * straight + PI * cap * cap
}

/// Circle of radius `r` with radial perturbation `amplitude·cos(freq·θ)`,
/// sampled at `n` equally spaced angles.
pub fn perturbed_circle(
    center: Point2,
    r: f64,
    amplitude: f64,
    freq: u32,
    n: usize,
) -> Result<Region, GeometryError> {
    let v = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let rho = r + amplitude * (freq as f64 * t).cos();
            center + Point2::new(rho * t.cos(), rho * t.sin())
        })
        .collect();
    Region::simple(ClosedCurve::new(v)?)
}

/// Axis-aligned rectangle with corners rounded by circular arcs of radius
/// `corner` (which must be at most half of each side).
pub fn rounded_rect(
    center: Point2,
    width: f64,
    height: f64,
    corner: f64,
    spacing: f64,
) -> Result<Region, GeometryError> {
    let (hx, hy) = (width / 2.0 - corner, height / 2.0 - corner);
    let arc_steps = ((PI / 2.0 * corner / spacing).ceil() as usize).max(2);
    let centers = [
        Point2::new(hx, -hy),
        Point2::new(hx, hy),
        Point2::new(-hx, hy),
        Point2::new(-hx, -hy),
    ];
    let mut v: Vec<Point2> = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        let a0 = -PI / 2.0 + k as f64 * PI / 2.0;
        for i in 0..=arc_steps {
            let a = a0 + PI / 2.0 * i as f64 / arc_steps as f64;
            v.push(*c + Point2::new(corner * a.cos(), corner * a.sin()));
        }
        // straight side up to the next arc
        let next = centers[(k + 1) % 4];
        let a1 = a0 + PI / 2.0;
        let from = *c + Point2::new(corner * a1.cos(), corner * a1.sin());
        let to = next + Point2::new(corner * a1.cos(), corner * a1.sin());
        let len = from.dist(to);
        let steps = (len / spacing).ceil() as usize;
        for i in 1..steps {
            v.push(from + (to - from) * (i as f64 / steps as f64));
        }
    }
    v.dedup_by(|a, b| a.dist(*b) < 1e-12);
    if v.first().map(|p| p.dist(*v.last().unwrap()) < 1e-12).unwrap_or(false) {
        v.pop();
    }
    Region::simple(ClosedCurve::new(v.into_iter().map(|p| p + center).collect())?)
}

/// Annulus with outer radius `r_out` and a concentric hole of radius `r_in`.
pub fn annulus(center: Point2, r_out: f64, r_in: f64, spacing: f64) -> Result<Region, GeometryError> {
    let outer = ClosedCurve::new(regular_polygon(center, r_out, vertices_for_circle(r_out, spacing), 0.0))?;
    let hole = ClosedCurve::new(regular_polygon(center, r_in, vertices_for_circle(r_in, spacing), 0.0))?.reversed();
    Region::new(outer, vec![hole])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stadium_area_close_to_formula() {
        let s = stadium(Point2::default(), 1.0, 8.0, 0.05).unwrap();
        assert!((s.area() - stadium_area(1.0, 8.0)).abs() / stadium_area(1.0, 8.0) < 1e-3);
        assert!(s.max_edge_length() <= 0.05 + 1e-12);
    }

    #[test]
    fn rounded_rect_is_valid() {
        let r = rounded_rect(Point2::new(1.0, 2.0), 4.0, 3.0, 1.0, 0.1).unwrap();
        assert!(r.max_edge_length() <= 0.1 + 1e-12);
        let expected = 4.0 * 3.0 - (4.0 - PI) * 1.0;
        assert!((r.area() - expected).abs() < 1e-2);
    }

    #[test]
    fn annulus_has_hole() {
        let a = annulus(Point2::default(), 3.0, 1.0, 0.1).unwrap();
        assert_eq!(a.holes().len(), 1);
        assert!((a.area() - 8.0 * PI).abs() < 0.02);
    }
}
