//! Set metrics and finite-sequence diagnostics for compactness and lower
//! semicontinuity in the ball-condition class.
//!
//! Set convergence is measured two ways: the Hausdorff distance between
//! boundaries and the area of the symmetric difference. Sequence experiments
//! come from named generator families with closed-form limits. A finite
//! check can only be consistent with a liminf statement, never prove it, and
//! reports say so.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{region_curvature_energy, PhiModel};
use crate::geometry::{point_segment_distance, GeometryError, Point2, Region};
use crate::raster::{rasterize_region, Grid, RasterError};
use crate::shapes;
use crate::sphere::{check_regions, SphereError, DEFAULT_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConvergenceError {
    #[error("hausdorff distance needs nonempty sets")]
    EmptySet,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("term {index} is not in the ball-condition class (worst violation {worst_violation})")]
    InfeasibleTerm { index: usize, worst_violation: f64 },
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Label attached to semicontinuity results.
pub const SEMICONTINUITY_LABEL: &str = "consistency with lower semicontinuity (finite probe, not a proof)";

fn boundary_edges(set: &[Region]) -> Vec<(Point2, Point2)> {
    set.iter()
        .flat_map(|r| r.curves().flat_map(|c| c.edges().collect::<Vec<_>>()))
        .collect()
}

fn sample_spacing(a: &[Region], b: &[Region]) -> f64 {
    // smallest equivalent radius over all boundary curves
    let feature = a
        .iter()
        .chain(b)
        .flat_map(|r| r.curves())
        .map(|c| c.perimeter() / (2.0 * std::f64::consts::PI))
        .fold(f64::INFINITY, f64::min);
    feature / 16.0
}

fn directed_hausdorff(from: &[(Point2, Point2)], to: &[(Point2, Point2)], spacing: f64) -> f64 {
    let dist_to = |p: Point2| {
        to.iter()
            .map(|&(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    };
    let mut worst: f64 = 0.0;
    for &(a, b) in from {
        let steps = ((a.dist(b) / spacing).ceil() as usize).max(1);
        for k in 0..steps {
            let p = a + (b - a) * (k as f64 / steps as f64);
            worst = worst.max(dist_to(p));
        }
    }
    worst
}

/// Symmetric Hausdorff distance between the boundaries of two sets, from
/// dense boundary samples (spacing ≤ smallest feature / 16) measured exactly
/// against the other boundary's segments.
pub fn hausdorff_distance(a: &[Region], b: &[Region]) -> Result<f64, ConvergenceError> {
    if a.is_empty() || b.is_empty() {
        return Err(ConvergenceError::EmptySet);
    }
    let spacing = sample_spacing(a, b);
    let (ea, eb) = (boundary_edges(a), boundary_edges(b));
    Ok(directed_hausdorff(&ea, &eb, spacing).max(directed_hausdorff(&eb, &ea, spacing)))
}

fn coverage(set: &[Region], grid: &Grid) -> Vec<bool> {
    let mut out = vec![false; grid.len()];
    let mut tmp = vec![false; grid.len()];
    for r in set {
        let rect = grid.rect_for_region(r);
        if rect.is_empty() {
            continue;
        }
        rasterize_region(r, grid, rect, &mut tmp);
        for row in rect.r0..rect.r1 {
            for col in rect.c0..rect.c1 {
                let i = grid.index(col, row);
                out[i] |= tmp[i];
            }
        }
    }
    out
}

/// Area of the symmetric difference by pixel-center rasterization on `frame`.
pub fn l1_distance(a: &[Region], b: &[Region], frame: &Grid) -> f64 {
    let (ca, cb) = (coverage(a, frame), coverage(b, frame));
    let n = ca.iter().zip(&cb).filter(|(x, y)| x != y).count();
    n as f64 * frame.pixel_area()
}

/// Square frame covering every set with a margin of 5%, `pixels` per side.
pub fn auto_frame<'a>(sets: impl IntoIterator<Item = &'a [Region]>, pixels: usize) -> Result<Grid, ConvergenceError> {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for set in sets {
        for r in set {
            let (a, b) = r.bounding_box();
            lo = Point2::new(lo.x.min(a.x), lo.y.min(a.y));
            hi = Point2::new(hi.x.max(b.x), hi.y.max(b.y));
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(ConvergenceError::EmptySet);
    }
    let side = (hi.x - lo.x).max(hi.y - lo.y) * 1.1;
    let center = (lo + hi) * 0.5;
    let origin = center - Point2::new(side / 2.0, side / 2.0);
    Ok(Grid::new(pixels, pixels, side / pixels as f64, origin)?)
}

/// Tolerances of [`analyze_sequence`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceTolerances {
    /// Relative perimeter tolerance at the last term.
    pub perimeter_rel: f64,
    /// Relative slack on the liminf inequality.
    pub semicontinuity_rel: f64,
    /// Pixels per side of the L¹ frame.
    pub l1_pixels: usize,
}

impl Default for SequenceTolerances {
    fn default() -> Self {
        SequenceTolerances { perimeter_rel: 0.01, semicontinuity_rel: 0.02, l1_pixels: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermMetrics {
    pub hausdorff_to_limit: f64,
    pub l1_to_limit: f64,
    pub perimeter: f64,
    pub f_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub terms: Vec<TermMetrics>,
    pub limit_perimeter: f64,
    pub limit_f: f64,
    pub limit_feasible: bool,
    pub perimeter_converges: bool,
    pub semicontinuity_ok: bool,
    pub label: String,
}

fn set_perimeter(set: &[Region]) -> f64 {
    set.iter().map(Region::perimeter).sum()
}

fn set_energy(set: &[Region], phi: &PhiModel) -> f64 {
    set.iter().map(|r| region_curvature_energy(r, phi)).sum()
}

/// Per-term metrics against the limit plus the perimeter-convergence and
/// liminf consistency flags. Every term must be in the class at `radius`.
pub fn analyze_sequence(
    seq: &[Vec<Region>],
    limit: &[Region],
    radius: f64,
    phi: &PhiModel,
    tol: &SequenceTolerances,
) -> Result<SequenceReport, ConvergenceError> {
    if seq.is_empty() {
        return Err(ConvergenceError::EmptySequence);
    }
    for (index, term) in seq.iter().enumerate() {
        let rep = check_regions(term, radius, DEFAULT_TOL)?;
        if !rep.pass {
            return Err(ConvergenceError::InfeasibleTerm { index, worst_violation: rep.worst_violation });
        }
    }
    let limit_feasible = check_regions(limit, radius, DEFAULT_TOL).map(|r| r.pass).unwrap_or(false);
    let frame = auto_frame(seq.iter().map(Vec::as_slice).chain(std::iter::once(limit)), tol.l1_pixels)?;

    let mut terms = Vec::with_capacity(seq.len());
    for term in seq {
        terms.push(TermMetrics {
            hausdorff_to_limit: hausdorff_distance(term, limit)?,
            l1_to_limit: l1_distance(term, limit, &frame),
            perimeter: set_perimeter(term),
            f_value: set_energy(term, phi),
        });
    }
    let limit_perimeter = set_perimeter(limit);
    let limit_f = set_energy(limit, phi);

    let dev: Vec<f64> = terms.iter().map(|t| (t.perimeter - limit_perimeter).abs()).collect();
    let tail = &dev[dev.len() / 2..];
    let noise = 1e-9 * limit_perimeter;
    let eventually_decreasing = tail.windows(2).all(|w| w[1] <= w[0] + noise);
    let perimeter_converges =
        *dev.last().unwrap() <= tol.perimeter_rel * limit_perimeter && eventually_decreasing;

    let quarter = (terms.len() / 4).max(1);
    let tail_min = terms[terms.len() - quarter..]
        .iter()
        .map(|t| t.f_value)
        .fold(f64::INFINITY, f64::min);
    let semicontinuity_ok = limit_f <= tail_min + tol.semicontinuity_rel * limit_f;

    Ok(SequenceReport {
        terms,
        limit_perimeter,
        limit_f,
        limit_feasible,
        perimeter_converges,
        semicontinuity_ok,
        label: SEMICONTINUITY_LABEL.to_string(),
    })
}

/// Sequence families with closed-form limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Circle of radius `5R` with radial perturbation `R/(10h)·cos(6θ)`.
    ShrinkingRadialPerturbation,
    /// Disk of radius `2R` shifted by `R/h` along x.
    TranslationDecay,
    /// Disk of radius `2R + R/h²`.
    RadiusDecay,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::ShrinkingRadialPerturbation, Family::TranslationDecay, Family::RadiusDecay];

    pub fn name(&self) -> &'static str {
        match self {
            Family::ShrinkingRadialPerturbation => "shrinking_radial_perturbation",
            Family::TranslationDecay => "translation_decay",
            Family::RadiusDecay => "radius_decay",
        }
    }
}

/// Terms `h = 1..=terms` and the limit, all sampled at spacing `≤ R/16`.
pub fn generate_family(family: Family, radius: f64, terms: usize) -> Result<(Vec<Vec<Region>>, Vec<Region>), ConvergenceError> {
    let o = Point2::default();
    let spacing = radius / 16.0;
    let circle = |c: Point2, r: f64| shapes::disk_with_spacing(c, r, spacing);
    let mut seq = Vec::with_capacity(terms);
    let limit = match family {
        Family::ShrinkingRadialPerturbation => {
            let r0 = 5.0 * radius;
            let n = shapes::vertices_for_circle(r0 * 1.1, spacing);
            for h in 1..=terms {
                let amp = radius / (10.0 * h as f64);
                seq.push(vec![shapes::perturbed_circle(o, r0, amp, 6, n)?]);
            }
            circle(o, r0)?
        }
        Family::TranslationDecay => {
            for h in 1..=terms {
                seq.push(vec![circle(Point2::new(radius / h as f64, 0.0), 2.0 * radius)?]);
            }
            circle(o, 2.0 * radius)?
        }
        Family::RadiusDecay => {
            for h in 1..=terms {
                let hf = h as f64;
                seq.push(vec![circle(o, 2.0 * radius + radius / (hf * hf))?]);
            }
            circle(o, 2.0 * radius)?
        }
    };
    Ok((seq, vec![limit]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub l1: f64,
    pub hausdorff: f64,
    /// Both sets pass the ball test at the probe radius.
    pub in_class: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    pub l1_at_most: f64,
    pub max_hausdorff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub pairs: Vec<PairMetrics>,
    /// Over in-class pairs: the largest Hausdorff distance among pairs whose
    /// L¹ distance is at most each decile of the L¹ values.
    pub deciles: Vec<DecileRow>,
    /// Out-of-class pairs with small L¹ but large Hausdorff distance.
    pub counterexamples: Vec<usize>,
}

/// Metrics for each pair, deciles over the in-class pairs, and the indices of
/// out-of-class pairs where L¹ is small (≤ πR²) while Hausdorff is large (≥ R).
pub fn equivalence_probe(pairs: &[(Vec<Region>, Vec<Region>)], radius: f64) -> Result<EquivalenceReport, ConvergenceError> {
    let in_class = |s: &[Region]| check_regions(s, radius, DEFAULT_TOL).map(|r| r.pass).unwrap_or(false);
    let mut metrics = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let frame = auto_frame([a.as_slice(), b.as_slice()], 512)?;
        metrics.push(PairMetrics {
            l1: l1_distance(a, b, &frame),
            hausdorff: hausdorff_distance(a, b)?,
            in_class: in_class(a) && in_class(b),
        });
    }
    let mut l1s: Vec<f64> = metrics.iter().filter(|m| m.in_class).map(|m| m.l1).collect();
    l1s.sort_by(f64::total_cmp);
    let mut deciles = Vec::new();
    if !l1s.is_empty() {
        for d in 1..=10 {
            let idx = ((d * l1s.len()).div_ceil(10)).max(1) - 1;
            let threshold = l1s[idx];
            let max_hausdorff = metrics
                .iter()
                .filter(|m| m.in_class && m.l1 <= threshold)
                .map(|m| m.hausdorff)
                .fold(0.0, f64::max);
            deciles.push(DecileRow { l1_at_most: threshold, max_hausdorff });
        }
    }
    let unit = std::f64::consts::PI * radius * radius;
    let counterexamples = metrics
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.in_class && m.l1 <= unit && m.hausdorff >= radius)
        .map(|(i, _)| i)
        .collect();
    Ok(EquivalenceReport { pairs: metrics, deciles, counterexamples })
}

/// In-class pairs: a disk of radius `2R` against shifted and rescaled copies.
pub fn standard_pairs(radius: f64) -> Result<Vec<(Vec<Region>, Vec<Region>)>, ConvergenceError> {
    let spacing = radius / 8.0;
    let o = Point2::default();
    let base = shapes::disk_with_spacing(o, 2.0 * radius, spacing)?;
    let mut pairs = vec![(vec![base.clone()], vec![base.clone()])];
    for k in 0..10 {
        let shift = radius * 0.01 * 1.6f64.powi(k);
        pairs.push((vec![base.clone()], vec![base.translated(Point2::new(shift, 0.0))]));
        let grown = shapes::disk_with_spacing(o, 2.0 * radius + shift, spacing)?;
        pairs.push((vec![base.clone()], vec![grown]));
    }
    Ok(pairs)
}

/// Disk of radius `3R` against the same disk plus a far disk of radius `R/4`,
/// which is too small to be in the class.
pub fn counterexample_pair(radius: f64) -> Result<(Vec<Region>, Vec<Region>), ConvergenceError> {
    let spacing = radius / 32.0;
    let big = shapes::disk_with_spacing(Point2::default(), 3.0 * radius, spacing)?;
    let speck = shapes::disk_with_spacing(Point2::new(10.0 * radius, 0.0), radius / 4.0, spacing)?;
    Ok((vec![big.clone()], vec![big, speck]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const O: Point2 = Point2::new(0.0, 0.0);

    fn disk(c: Point2, r: f64) -> Vec<Region> {
        vec![shapes::disk(c, r, 512).unwrap()]
    }

    #[test]
    fn hausdorff_examples() {
        let a = disk(O, 1.0);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let b = disk(O, 1.1);
        assert!((hausdorff_distance(&a, &b).unwrap() - 0.1).abs() < 1e-3);
        let c = disk(Point2::new(0.3, 0.0), 1.0);
        assert!((hausdorff_distance(&a, &c).unwrap() - 0.3).abs() < 1e-3);
        assert_eq!(hausdorff_distance(&a, &[]), Err(ConvergenceError::EmptySet));
    }

    #[test]
    fn l1_examples() {
        let a = disk(O, 1.0);
        let b = disk(O, 1.1);
        let frame = Grid::square(-1.5, 1.5, 600).unwrap();
        assert_eq!(l1_distance(&a, &a, &frame), 0.0);
        let d = l1_distance(&a, &b, &frame);
        let expected = PI * (1.21 - 1.0);
        assert!((d - expected).abs() / expected < 0.02, "{d}");

        let sq = |x0: f64| {
            vec![Region::simple(
                crate::geometry::ClosedCurve::new(vec![
                    Point2::new(x0, 0.0),
                    Point2::new(x0 + 1.0, 0.0),
                    Point2::new(x0 + 1.0, 1.0),
                    Point2::new(x0, 1.0),
                ])
                .unwrap(),
            )
            .unwrap()]
        };
        let frame = Grid::square(-1.0, 3.0, 400).unwrap();
        let d = l1_distance(&sq(0.0), &sq(0.5), &frame);
        assert!((d - 1.0).abs() <= 2.0 * frame.pixel_size * 4.0);
    }

    #[test]
    fn families_analyze_cleanly() {
        let phi = PhiModel::power(2.0).unwrap();
        for fam in Family::ALL {
            let (seq, limit) = generate_family(fam, 1.0, 12).unwrap();
            let rep = analyze_sequence(&seq, &limit, 1.0, &phi, &SequenceTolerances::default()).unwrap();
            assert!(rep.limit_feasible, "{fam:?}");
            assert!(rep.perimeter_converges, "{fam:?}");
            assert!(rep.semicontinuity_ok, "{fam:?}");
            assert!(rep.terms.last().unwrap().hausdorff_to_limit < rep.terms[0].hausdorff_to_limit + 1e-12);
        }
    }

    #[test]
    fn perturbation_energy_decreases_to_circle() {
        let phi = PhiModel::power(2.0).unwrap();
        let (seq, limit) = generate_family(Family::ShrinkingRadialPerturbation, 1.0, 12).unwrap();
        let rep = analyze_sequence(&seq, &limit, 1.0, &phi, &SequenceTolerances::default()).unwrap();
        for w in rep.terms.windows(2) {
            assert!(w[1].f_value < w[0].f_value);
        }
        assert!(rep.limit_f < rep.terms.last().unwrap().f_value);
    }

    #[test]
    fn constant_sequence_has_zero_deviation() {
        let phi = PhiModel::power(2.0).unwrap();
        let e = vec![shapes::disk_with_spacing(O, 2.0, 1.0 / 16.0).unwrap()];
        let seq = vec![e.clone(); 5];
        let rep = analyze_sequence(&seq, &e, 1.0, &phi, &SequenceTolerances::default()).unwrap();
        for t in &rep.terms {
            assert_eq!(t.hausdorff_to_limit, 0.0);
            assert_eq!(t.l1_to_limit, 0.0);
            assert_eq!(t.perimeter, rep.limit_perimeter);
        }
        assert!(rep.perimeter_converges && rep.semicontinuity_ok);
    }

    #[test]
    fn infeasible_term_named() {
        let phi = PhiModel::power(2.0).unwrap();
        let ok = vec![shapes::disk_with_spacing(O, 2.0, 1.0 / 16.0).unwrap()];
        let bad = vec![shapes::disk_with_spacing(O, 0.5, 1.0 / 16.0).unwrap()];
        let err = analyze_sequence(&[ok.clone(), bad], &ok, 1.0, &phi, &SequenceTolerances::default()).unwrap_err();
        assert!(matches!(err, ConvergenceError::InfeasibleTerm { index: 1, .. }));
    }

    #[test]
    fn equivalence_and_counterexample() {
        let r = 1.0;
        let mut pairs = standard_pairs(r).unwrap();
        pairs.push(counterexample_pair(r).unwrap());
        let rep = equivalence_probe(&pairs, r).unwrap();
        assert_eq!(rep.pairs[0].l1, 0.0);
        assert_eq!(rep.pairs[0].hausdorff, 0.0);
        // shift by 0.01R
        assert!(rep.pairs[1].hausdorff < 0.011 && rep.pairs[1].l1 < 0.1);
        assert_eq!(rep.counterexamples, vec![pairs.len() - 1]);
        let ce = rep.pairs.last().unwrap();
        assert!(!ce.in_class && ce.hausdorff > 5.0 * r && ce.l1 < 0.3);
        // both metrics shrink together on in-class pairs
        for w in rep.deciles.windows(2) {
            assert!(w[0].max_hausdorff <= w[1].max_hausdorff);
        }
    }
}
