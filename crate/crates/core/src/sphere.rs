//! Membership in the class of sets satisfying the uniform interior and
//! exterior ball condition with radius `R`, plus the structural consequences
//! of membership (curvature bound, local graph slope bound, packing bound).
//!
//! Membership is decided at boundary vertices. Every vertex `p` with outward
//! normal `ν` gets an interior ball center `p - Rν` and an exterior center
//! `p + Rν`; the vertex passes when each center sits on the correct side at
//! distance at least `R(1 - tol)` from the whole boundary. The exterior test
//! runs against every component of the set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ClosedCurve, GeometryError, Point2, Region};
use crate::morph;
use crate::raster::{BinaryMask, RasterError};

/// Relative tolerance used when none is given.
pub const DEFAULT_TOL: f64 = 0.02;

/// Tolerance applied to regions emitted by [`regularize_raster`].
pub const REGULARIZE_TOL: f64 = 0.05;

/// Slope slack of [`verify_graph_bound`].
pub const GRAPH_SLOPE_SLACK: f64 = 0.05;

/// Maximum vertex spacing as a fraction of `R` accepted by the checker.
pub const SPACING_FRACTION: f64 = 1.0 / 8.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SphereError {
    #[error("radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("tolerance must be non-negative, got {0}")]
    InvalidTolerance(f64),
    #[error("boundary under-sampled: max edge {max_spacing} exceeds required spacing {required} (R/8); resample first")]
    UnderSampled { max_spacing: f64, required: f64 },
    #[error("region is not in the ball-condition class (worst violation {worst_violation})")]
    NotInClass { worst_violation: f64 },
    #[error("expected a connected set, got {0} components; apply per component")]
    Disconnected(usize),
    #[error("vertex {index} of curve {curve} does not exist")]
    NoSuchVertex { curve: usize, index: usize },
    #[error("radius {radius_px} px is below the 2 pixel minimum")]
    RadiusTooSmall { radius_px: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Outcome of the ball test at one boundary vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexCheck {
    /// Index of the region (component) in the checked set.
    pub region: usize,
    /// 0 for the outer curve, `1 + h` for hole `h`.
    pub curve: usize,
    pub index: usize,
    pub interior_ok: bool,
    pub exterior_ok: bool,
    pub interior_margin: f64,
    pub exterior_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    pub radius: f64,
    pub tol: f64,
    pub per_vertex: Vec<VertexCheck>,
    pub pass: bool,
    pub worst_violation: f64,
    /// Describes the approximate-membership convention behind `tol`.
    pub membership: String,
}

const MEMBERSHIP_NOTE: &str = "approximate: vertex-sampled ball test, margins = (signed boundary distance of ball center - R)/R, vertex ok iff margin >= -tol";

/// Addresses one vertex of a region: `curve` 0 is the outer curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexId {
    pub curve: usize,
    pub index: usize,
}

impl VertexId {
    pub fn outer(index: usize) -> VertexId {
        VertexId { curve: 0, index }
    }
}

/// Unit outward normals, one per vertex (angle-bisector normal).
pub fn outward_normals(curve: &ClosedCurve) -> Result<Vec<Point2>, SphereError> {
    Ok(curve.outward_normals()?)
}

/// Interior and exterior ball centers `(p - Rν, p + Rν)` at vertex `i`.
pub fn ball_centers(curve: &ClosedCurve, i: usize, radius: f64) -> Result<(Point2, Point2), SphereError> {
    let n = curve.len();
    if i >= n {
        return Err(SphereError::NoSuchVertex { curve: 0, index: i });
    }
    // normal at one vertex from its two incident edges
    let v = curve.vertices();
    let local = ClosedCurve::new(vec![v[(i + n - 1) % n], v[i], v[(i + 1) % n]]);
    let nu = match local {
        Ok(c) => c.outward_normals()?[1],
        // collinear neighbours: straight-edge normal
        Err(_) => {
            let e = v[(i + 1) % n] - v[(i + n - 1) % n];
            e.right_perp() * (1.0 / e.norm())
        }
    };
    let p = v[i];
    Ok((p - nu * radius, p + nu * radius))
}

fn validate_radius(radius: f64) -> Result<(), SphereError> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(SphereError::InvalidRadius(radius))
    }
}

/// Checks a single region.
pub fn check_region(region: &Region, radius: f64, tol: f64) -> Result<SphereReport, SphereError> {
    check_regions(std::slice::from_ref(region), radius, tol)
}

/// Checks a set made of several disjoint regions. Interior balls are tested
/// against their own component, exterior balls against all components.
pub fn check_regions(regions: &[Region], radius: f64, tol: f64) -> Result<SphereReport, SphereError> {
    validate_radius(radius)?;
    if !(tol >= 0.0) {
        return Err(SphereError::InvalidTolerance(tol));
    }
    let required = radius * SPACING_FRACTION;
    let max_spacing = regions.iter().map(Region::max_edge_length).fold(0.0, f64::max);
    if max_spacing > required * (1.0 + 1e-9) {
        return Err(SphereError::UnderSampled { max_spacing, required });
    }

    let mut per_vertex = Vec::new();
    for (ri, region) in regions.iter().enumerate() {
        for (ci, curve) in region.curves().enumerate() {
            let normals = curve.outward_normals()?;
            for (vi, (&p, &nu)) in curve.vertices().iter().zip(normals.iter()).enumerate() {
                let inner = p - nu * radius;
                let outer = p + nu * radius;

                let sd_in = region.signed_distance(inner);
                let interior_margin = (sd_in - radius) / radius;

                let mut d_out = f64::INFINITY;
                let mut covered = false;
                for other in regions {
                    let sd = other.signed_distance(outer);
                    d_out = d_out.min(sd.abs());
                    covered |= sd >= 0.0;
                }
                let sd_out = if covered { -d_out } else { d_out };
                let exterior_margin = (sd_out - radius) / radius;

                per_vertex.push(VertexCheck {
                    region: ri,
                    curve: ci,
                    index: vi,
                    interior_ok: interior_margin >= -tol,
                    exterior_ok: exterior_margin >= -tol,
                    interior_margin,
                    exterior_margin,
                });
            }
        }
    }
    let worst_violation = per_vertex
        .iter()
        .map(|v| (-v.interior_margin).max(-v.exterior_margin).max(0.0))
        .fold(0.0, f64::max);
    let pass = per_vertex.iter().all(|v| v.interior_ok && v.exterior_ok);
    Ok(SphereReport {
        radius,
        tol,
        per_vertex,
        pass,
        worst_violation,
        membership: MEMBERSHIP_NOTE.to_string(),
    })
}

/// Necessary condition: `max |κ_i| ≤ (1 + 8·spacing/R)/R` with `spacing` the
/// longest edge.
pub fn curvature_bound_check(regions: &[Region], radius: f64) -> bool {
    let mut max_k: f64 = 0.0;
    let mut spacing: f64 = 0.0;
    for region in regions {
        spacing = spacing.max(region.max_edge_length());
        for curve in region.curves() {
            for (k, _) in curve.curvature_profile() {
                max_k = max_k.max(k.abs());
            }
        }
    }
    max_k <= (1.0 + 8.0 * spacing / radius) / radius
}

/// One sample of the local graph around a base vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSample {
    /// Local tangential coordinate.
    pub x: f64,
    /// Local normal coordinate (outward positive).
    pub y: f64,
    /// `dy/dx` of the tangent line, `None` for a vertical tangent.
    pub slope: Option<f64>,
    /// `|x| / sqrt(R² - x²)`.
    pub bound: f64,
}

/// Samples the boundary branch through `vertex` inside the box
/// `|x| < √3R/2, |y| < R` of the frame centered at the vertex with the
/// outward normal as second axis.
pub fn graph_samples(region: &Region, radius: f64, vertex: VertexId) -> Result<Vec<GraphSample>, SphereError> {
    validate_radius(radius)?;
    let curve = region
        .curves()
        .nth(vertex.curve)
        .ok_or(SphereError::NoSuchVertex { curve: vertex.curve, index: vertex.index })?;
    let n = curve.len();
    if vertex.index >= n {
        return Err(SphereError::NoSuchVertex { curve: vertex.curve, index: vertex.index });
    }
    let normals = curve.outward_normals()?;
    let v = curve.vertices();
    let origin = v[vertex.index];
    let ey = normals[vertex.index];
    let ex = Point2::new(ey.y, -ey.x);
    let half_width = 3f64.sqrt() * radius / 2.0;

    let sample = |j: usize| -> Option<GraphSample> {
        let d = v[j] - origin;
        let (x, y) = (d.dot(ex), d.dot(ey));
        if x.abs() >= half_width || y.abs() >= radius {
            return None;
        }
        let nx = normals[j].dot(ex);
        let ny = normals[j].dot(ey);
        let slope = if ny > 1e-12 { Some(-nx / ny) } else { None };
        let bound = x.abs() / (radius * radius - x * x).sqrt();
        Some(GraphSample { x, y, slope, bound })
    };

    let mut out = vec![sample(vertex.index).expect("base vertex is the frame origin")];
    let mut visited = 1;
    let mut j = vertex.index;
    while visited < n {
        j = (j + 1) % n;
        match sample(j) {
            Some(s) => out.push(s),
            None => break,
        }
        visited += 1;
    }
    let mut j = vertex.index;
    while visited < n {
        j = (j + n - 1) % n;
        match sample(j) {
            Some(s) => out.push(s),
            None => break,
        }
        visited += 1;
    }
    Ok(out)
}

fn samples_within_bound(samples: &[GraphSample]) -> bool {
    samples.iter().all(|s| match s.slope {
        Some(m) => m.abs() <= s.bound + GRAPH_SLOPE_SLACK,
        None => false,
    })
}

/// Local graph slope bound at one vertex. Fails with [`SphereError::NotInClass`]
/// unless the region passes [`check_region`] at [`DEFAULT_TOL`].
pub fn verify_graph_bound(region: &Region, radius: f64, vertex: VertexId) -> Result<bool, SphereError> {
    require_member(region, radius)?;
    Ok(samples_within_bound(&graph_samples(region, radius, vertex)?))
}

/// [`verify_graph_bound`] over every vertex of every boundary curve.
pub fn verify_graph_bound_all(region: &Region, radius: f64) -> Result<bool, SphereError> {
    require_member(region, radius)?;
    for (ci, curve) in region.curves().enumerate() {
        for index in 0..curve.len() {
            let samples = graph_samples(region, radius, VertexId { curve: ci, index })?;
            if !samples_within_bound(&samples) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn require_member(region: &Region, radius: f64) -> Result<(), SphereError> {
    let report = check_region(region, radius, DEFAULT_TOL)?;
    if report.pass {
        Ok(())
    } else {
        Err(SphereError::NotInClass { worst_violation: report.worst_violation })
    }
}

/// `m = floor(diam/4R)` disjoint interior balls fit in a connected member, so
/// its area is at least `m·πR²`. Returns `(m, area ≥ m·πR²)`.
///
/// The vertex diameter underestimates the diameter of the sampled curve by at
/// most `s²/4R` for edge length `s` (chord sag under curvature `1/R`), which is
/// added back before taking the floor.
pub fn packing_lower_bound(regions: &[Region], radius: f64) -> Result<(usize, bool), SphereError> {
    validate_radius(radius)?;
    let region = match regions {
        [r] => r,
        _ => return Err(SphereError::Disconnected(regions.len())),
    };
    require_member(region, radius)?;
    let s = region.max_edge_length();
    let diameter = region.diameter() + s * s / (4.0 * radius);
    let m = (diameter / (4.0 * radius)).floor() as usize;
    let satisfied = region.area() >= m as f64 * std::f64::consts::PI * radius * radius;
    Ok((m, satisfied))
}

/// Opening then closing by a disk of radius `R`, contour extraction,
/// resampling to `R/8`, keeping only regions that pass at [`REGULARIZE_TOL`].
pub fn regularize_raster(mask: &BinaryMask, radius: f64) -> Result<Vec<Region>, SphereError> {
    regularize_raster_with_tol(mask, radius, REGULARIZE_TOL)
}

/// [`regularize_raster`] with an explicit acceptance tolerance.
pub fn regularize_raster_with_tol(mask: &BinaryMask, radius: f64, tol: f64) -> Result<Vec<Region>, SphereError> {
    validate_radius(radius)?;
    let grid = *mask.grid();
    let r_px = radius / grid.pixel_size;
    if r_px < 2.0 {
        return Err(SphereError::RadiusTooSmall { radius_px: r_px });
    }
    let padded = morph::pad_mask(mask, r_px.ceil() as usize + 3);
    let pg = *padded.grid();
    // one pixel of slack: a digital disk of radius exactly R does not survive
    // erosion by R; the ball test below is the actual gate
    let r_morph = r_px - 1.0;
    let opened = morph::open(pg.width, pg.height, padded.data(), r_morph);
    let closed = morph::close(pg.width, pg.height, &opened, r_morph);
    let field = morph::signed_distance_field(pg.width, pg.height, &closed);
    let loops = morph::iso_contours(&pg, &field);

    let fine = 0.5 * grid.pixel_size;
    let spacing = radius * SPACING_FRACTION;
    let mut outers = Vec::new();
    let mut holes = Vec::new();
    for pts in loops {
        let Ok(raw) = ClosedCurve::new(pts) else { continue };
        let Ok(dense) = raw.resample_uniform(fine) else { continue };
        let smooth = morph::smooth_closed(dense.vertices(), 2.0 * grid.pixel_size / fine);
        let Ok(smooth) = ClosedCurve::new(smooth) else { continue };
        let Ok(curve) = smooth.resample_uniform(spacing) else { continue };
        if curve.is_ccw() {
            outers.push(curve);
        } else {
            holes.push(curve);
        }
    }

    let mut out = Vec::new();
    for outer in outers {
        let inside: Vec<ClosedCurve> = holes
            .iter()
            .filter(|h| outer.crossing_contains(h.vertices()[0]))
            .cloned()
            .collect();
        let Ok(region) = Region::new(outer, inside) else { continue };
        if check_region(&region, radius, tol)?.pass {
            out.push(region);
        }
    }
    out.sort_by(|a, b| b.area().total_cmp(&a.area()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    const O: Point2 = Point2::new(0.0, 0.0);

    #[test]
    fn ball_centers_examples() {
        let c = shapes::disk(O, 2.0, 512).unwrap();
        let (pi, pe) = ball_centers(c.outer(), 0, 1.0).unwrap();
        assert!(pi.dist(Point2::new(1.0, 0.0)) < 1e-12);
        assert!(pe.dist(Point2::new(3.0, 0.0)) < 1e-12);

        let sq = ClosedCurve::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        let (pi, pe) = ball_centers(&sq, 1, 0.1).unwrap();
        assert!(pi.dist(Point2::new(0.5, 0.1)) < 1e-12);
        assert!(pe.dist(Point2::new(0.5, -0.1)) < 1e-12);
        let (pi, _) = ball_centers(&sq, 0, 0.1).unwrap();
        let h = 0.1 / 2f64.sqrt();
        assert!(pi.dist(Point2::new(h, h)) < 1e-12);
    }

    #[test]
    fn disk_radius_two_passes_at_unit_radius() {
        let d = shapes::disk(O, 2.0, 512).unwrap();
        let rep = check_region(&d, 1.0, DEFAULT_TOL).unwrap();
        assert!(rep.pass);
        for v in &rep.per_vertex {
            assert!(v.interior_margin.abs() < 1e-3);
            assert!(v.exterior_margin.abs() < 1e-3);
        }
    }

    #[test]
    fn small_disk_fails_interior_everywhere() {
        let d = shapes::disk(O, 0.5, 512).unwrap();
        let rep = check_region(&d, 1.0, DEFAULT_TOL).unwrap();
        assert!(!rep.pass);
        assert!(rep.per_vertex.iter().all(|v| !v.interior_ok));
        assert!(rep.per_vertex.iter().all(|v| v.exterior_ok));
    }

    #[test]
    fn two_disks_gap_r_fail_exterior() {
        let r = 1.0;
        let a = shapes::disk(O, 2.0 * r, 512).unwrap();
        let b = shapes::disk(Point2::new(5.0 * r, 0.0), 2.0 * r, 512).unwrap();
        let rep = check_regions(&[a.clone(), b.clone()], r, DEFAULT_TOL).unwrap();
        assert!(!rep.pass);
        // facing vertex of the first disk: p'' lands on the second boundary
        let facing = rep.per_vertex.iter().find(|v| v.region == 0 && v.index == 0).unwrap();
        assert!(!facing.exterior_ok);
        assert!((facing.exterior_margin + 1.0).abs() < 1e-3);
        // each disk alone is fine
        assert!(check_region(&a, r, DEFAULT_TOL).unwrap().pass);
    }

    #[test]
    fn under_sampled_curve_rejected() {
        let d = shapes::disk(O, 2.0, 16).unwrap();
        assert!(matches!(
            check_region(&d, 1.0, DEFAULT_TOL),
            Err(SphereError::UnderSampled { .. })
        ));
    }

    #[test]
    fn curvature_prefilter() {
        let r = 1.0;
        assert!(curvature_bound_check(&[shapes::disk_with_spacing(O, 2.0, r / 8.0).unwrap()], r));
        assert!(!curvature_bound_check(&[shapes::disk_with_spacing(O, 0.5, r / 8.0).unwrap()], r));
        let st = shapes::stadium(O, r, 4.0 * r, r / 8.0).unwrap();
        assert!(curvature_bound_check(&[st.clone()], r));
        let max_k = st
            .outer()
            .curvature_profile()
            .iter()
            .map(|p| p.0.abs())
            .fold(0.0, f64::max);
        assert!((max_k - 1.0 / r).abs() < 0.05);
    }

    #[test]
    fn graph_bound_on_circles() {
        let r = 1.0;
        let d = shapes::disk(O, r, 512).unwrap();
        for i in [0, 17, 200] {
            assert!(verify_graph_bound(&d, r, VertexId::outer(i)).unwrap());
        }
        let samples = graph_samples(&d, r, VertexId::outer(0)).unwrap();
        for s in &samples {
            let m = s.slope.unwrap().abs();
            assert!((m - s.bound).abs() <= 0.02 * s.bound.max(1.0), "{s:?}");
        }
        let big = shapes::disk(O, 3.0 * r, 1024).unwrap();
        let samples = graph_samples(&big, r, VertexId::outer(5)).unwrap();
        assert!(samples.iter().filter(|s| s.x.abs() > 0.1).all(|s| s.slope.unwrap().abs() < s.bound));
        let small = shapes::disk(O, 0.5 * r, 512).unwrap();
        assert!(matches!(
            verify_graph_bound(&small, r, VertexId::outer(0)),
            Err(SphereError::NotInClass { .. })
        ));
    }

    #[test]
    fn packing_examples() {
        let r = 1.0;
        let d = shapes::disk_with_spacing(O, 2.0 * r, r / 8.0).unwrap();
        assert_eq!(packing_lower_bound(&[d.clone()], r).unwrap(), (1, true));
        let st = shapes::stadium(O, r, 8.0 * r, r / 8.0).unwrap();
        let (m, ok) = packing_lower_bound(&[st], r).unwrap();
        assert_eq!(m, 2);
        assert!(ok);
        let unit = shapes::disk_with_spacing(O, r, r / 8.0).unwrap();
        assert_eq!(packing_lower_bound(&[unit], r).unwrap().0, 0);
        assert!(matches!(packing_lower_bound(&[d.clone(), d], r), Err(SphereError::Disconnected(2))));
    }

    #[test]
    fn scale_equivariance() {
        let d = shapes::stadium(O, 1.0, 3.0, 0.1).unwrap();
        let a = check_region(&d, 1.0, DEFAULT_TOL).unwrap();
        let b = check_region(&d.scaled(3.5), 3.5, DEFAULT_TOL).unwrap();
        assert_eq!(a.pass, b.pass);
        for (u, v) in a.per_vertex.iter().zip(&b.per_vertex) {
            assert!((u.interior_margin - v.interior_margin).abs() < 1e-9);
            assert!((u.exterior_margin - v.exterior_margin).abs() < 1e-9);
        }
    }

    #[test]
    fn annulus_hole_checked() {
        let r = 1.0;
        let ok = shapes::annulus(O, 6.0, 2.0, r / 8.0).unwrap();
        assert!(check_region(&ok, r, DEFAULT_TOL).unwrap().pass);
        // ring thinner than 2R
        let thin = shapes::annulus(O, 3.0, 1.5, r / 8.0).unwrap();
        assert!(!check_region(&thin, r, DEFAULT_TOL).unwrap().pass);
    }

    fn disk_mask(grid: crate::raster::Grid, centers: &[(Point2, f64)]) -> BinaryMask {
        BinaryMask::from_fn(grid, |p| centers.iter().any(|&(c, r)| p.dist(c) <= r))
    }

    #[test]
    fn regularize_disk_is_near_identity() {
        let grid = crate::raster::Grid::square(-20.0, 20.0, 80).unwrap();
        let r = 2.0; // 4 px
        let mask = disk_mask(grid, &[(O, 3.0 * r)]);
        let out = regularize_raster(&mask, r).unwrap();
        assert_eq!(out.len(), 1);
        // Hausdorff to the ideal circle, vertex-sampled with spacing R/8
        let worst = out[0]
            .outer()
            .vertices()
            .iter()
            .map(|v| (v.norm() - 3.0 * r).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 2.0 * grid.pixel_size, "deviation {worst}");
    }

    #[test]
    fn regularize_erases_speck() {
        let grid = crate::raster::Grid::square(0.0, 20.0, 20).unwrap();
        let mut mask = BinaryMask::empty(grid);
        mask.set(10, 10, true);
        assert!(regularize_raster(&mask, 3.0).unwrap().is_empty());
        assert!(matches!(regularize_raster(&mask, 1.0), Err(SphereError::RadiusTooSmall { .. })));
    }

    #[test]
    fn regularize_never_emits_failing_pair() {
        let grid = crate::raster::Grid::square(-30.0, 30.0, 120).unwrap();
        let r = 3.0;
        let mask = disk_mask(grid, &[(Point2::new(-2.5 * r, 0.0), 2.0 * r), (Point2::new(2.5 * r, 0.0), 2.0 * r)]);
        let out = regularize_raster(&mask, r).unwrap();
        if !out.is_empty() {
            assert!(check_regions(&out, r, REGULARIZE_TOL).unwrap().pass);
        }
        // well separated: both survive and pass together
        let mask = disk_mask(grid, &[(Point2::new(-3.0 * r, 0.0), 2.0 * r), (Point2::new(4.0 * r, 0.0), 2.0 * r)]);
        let out = regularize_raster(&mask, r).unwrap();
        assert_eq!(out.len(), 2);
        assert!(check_regions(&out, r, REGULARIZE_TOL).unwrap().pass);
    }
}
