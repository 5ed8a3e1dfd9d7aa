//! The ball-minimizer demonstration: for `g = χ_{B(0,R)}` on
//! `Ω = [-2.5R, 2.5R]²` and suitable weights, the disk `B(0,R)` itself has
//! lower one-layer energy than the empty set and than nearby feasible shapes.
//!
//! Closed forms used by the report, with `|Ω| = 25R²`:
//!
//! ```text
//! G₁(B(0,R)) = βπR² + γ(2πR + 2π/R)            (φ(κ) = 1 + κ²)
//! G₁(∅)      = α(πR² − π²R⁴/|Ω|)
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::convergence::{hausdorff_distance, ConvergenceError};
use crate::energy::{total_energy, EnergyError, EnergyParams, LayeredSegmentation, PhiModel};
use crate::geometry::{GeometryError, Point2, Region};
use crate::optimizer::{optimize_from, LayerMode, OptimizerError, Schedule};
use crate::raster::{Grid, RasterError, RasterImage};
use crate::shapes;
use crate::sphere::{check_region, SphereError, DEFAULT_TOL, SPACING_FRACTION};

/// Weight tried first for the data term; doubled until the inequality holds.
pub const DEFAULT_ALPHA: f64 = 10.0;
const MAX_ALPHA: f64 = 1e9;
/// Vertex count of the reference disk polygon.
const DISK_VERTICES: usize = 512;

#[derive(Debug, Error)]
pub enum ExampleError {
    #[error("the demo assumes R > 1, got {0}")]
    RadiusTooSmall(f64),
    #[error("grid must have at least 16 pixels per side, got {0}")]
    GridTooSmall(usize),
    #[error("no alpha up to {max_alpha} satisfies G1(empty) = {empty} >= {disk}")]
    ParameterSearch { max_alpha: f64, empty: f64, disk: f64 },
    #[error("competitor {0} is outside the admissible class")]
    InfeasibleCompetitor(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Convergence(#[from] ConvergenceError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerRun {
    pub seed: u64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Competitor {
    pub name: String,
    pub energy: f64,
    pub perimeter: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerOutcome {
    pub seed: u64,
    pub iterations: usize,
    pub seed_energy: f64,
    pub best_energy: f64,
    /// `best_energy / analytic_disk - 1`.
    pub relative_error: f64,
    pub hausdorff_pixels: f64,
    pub layers: usize,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallReport {
    pub radius: f64,
    pub grid: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega_area: f64,
    pub analytic_disk: f64,
    pub analytic_empty: f64,
    pub disk_energy: f64,
    pub empty_energy: f64,
    pub competitors: Vec<Competitor>,
    /// The disk is strictly below the empty set and every competitor.
    pub disk_wins: bool,
    pub optimizer: Option<OptimizerOutcome>,
}

/// `βπR² + γ(2πR + 2π/R)`.
pub fn analytic_disk_energy(radius: f64, beta: f64, gamma: f64) -> f64 {
    beta * PI * radius * radius + gamma * (2.0 * PI * radius + 2.0 * PI / radius)
}

/// `α(πR² − π²R⁴/|Ω|)`.
pub fn analytic_empty_energy(radius: f64, alpha: f64, omega_area: f64) -> f64 {
    alpha * (PI * radius * radius - PI * PI * radius.powi(4) / omega_area)
}

/// The image `χ_{B(0,R)}` on `[-2.5R, 2.5R]²` with `grid × grid` pixels.
pub fn ball_image(radius: f64, grid: usize) -> Result<RasterImage, RasterError> {
    let g = Grid::square(-2.5 * radius, 2.5 * radius, grid)?;
    RasterImage::from_fn(g, |p| if p.norm() <= radius { 1.0 } else { 0.0 })
}

fn competitors(radius: f64) -> Result<Vec<(String, Region)>, GeometryError> {
    let r = radius;
    let h = r * SPACING_FRACTION;
    let o = Point2::new(0.0, 0.0);
    let mut out = Vec::new();
    for (i, f) in [0.05, 0.1, 0.25, 0.5, 1.0].into_iter().enumerate() {
        let a = 0.7 * i as f64;
        let c = Point2::new(f * r * a.cos(), f * r * a.sin());
        out.push((format!("disk r=R shifted {f}R"), shapes::disk_with_spacing(c, r, h)?));
    }
    for f in [1.05, 1.1, 1.25, 1.5] {
        out.push((format!("disk r={f}R"), shapes::disk_with_spacing(o, f * r, h)?));
    }
    for (f, d) in [(1.1, 0.2), (1.25, 0.3)] {
        let c = Point2::new(d * r, -d * r);
        out.push((format!("disk r={f}R shifted {d}R"), shapes::disk_with_spacing(c, f * r, h)?));
    }
    for l in [0.25, 0.5, 1.0, 2.0] {
        out.push((format!("stadium cap R straight {l}R"), shapes::stadium(o, r, l * r, h)?));
    }
    for (f, a, k) in [(1.1, 0.02, 3), (1.25, 0.03, 2), (1.5, 0.05, 3)] {
        let n = shapes::vertices_for_circle((f + a) * r, h);
        out.push((
            format!("perturbed r={f}R amp {a}R freq {k}"),
            shapes::perturbed_circle(o, f * r, a * r, k, n)?,
        ));
    }
    out.push((
        "rounded square side 2.2R corner R".into(),
        shapes::rounded_rect(o, 2.2 * r, 2.2 * r, r, h)?,
    ));
    out.push(("annulus 3R / R".into(), shapes::annulus(o, 3.0 * r, r, h)?));
    Ok(out)
}

/// Runs the demonstration. With `run` set, the optimizer starts from a disk
/// of radius `1.25R` whose center is displaced by up to `0.25R`.
pub fn example_ball(radius: f64, grid: usize, run: Option<OptimizerRun>) -> Result<BallReport, ExampleError> {
    if !(radius > 1.0) {
        return Err(ExampleError::RadiusTooSmall(radius));
    }
    if grid < 16 {
        return Err(ExampleError::GridTooSmall(grid));
    }
    let img = ball_image(radius, grid)?;
    let omega_area = img.grid().area();
    let (beta, gamma) = (1.0, 1.0);
    let analytic_disk = analytic_disk_energy(radius, beta, gamma);

    let mut alpha = DEFAULT_ALPHA;
    while analytic_empty_energy(radius, alpha, omega_area) < analytic_disk {
        alpha *= 2.0;
        if alpha > MAX_ALPHA {
            return Err(ExampleError::ParameterSearch {
                max_alpha: MAX_ALPHA,
                empty: analytic_empty_energy(radius, MAX_ALPHA, omega_area),
                disk: analytic_disk,
            });
        }
    }
    let params = EnergyParams::new(alpha, beta, gamma, radius, PhiModel::power(2.0)?)?;
    let analytic_empty = analytic_empty_energy(radius, alpha, omega_area);

    let disk = shapes::disk(Point2::new(0.0, 0.0), radius, DISK_VERTICES)?;
    let disk_energy = total_energy(&LayeredSegmentation::new(vec![disk]), &img, &params)?.g;
    let empty_energy = total_energy(&LayeredSegmentation::empty(), &img, &params)?.g;

    let mut comps = Vec::new();
    for (name, region) in competitors(radius)? {
        let feasible = check_region(&region, radius, DEFAULT_TOL)?.pass;
        if !feasible {
            return Err(ExampleError::InfeasibleCompetitor(name));
        }
        let perimeter = region.perimeter();
        let energy = total_energy(&LayeredSegmentation::new(vec![region]), &img, &params)?.g;
        comps.push(Competitor { name, energy, perimeter, feasible });
    }
    let disk_wins = disk_energy < empty_energy && comps.iter().all(|c| disk_energy < c.energy);

    let optimizer = match run {
        None => None,
        Some(run) => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            let d = 0.25 * radius * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            let start = shapes::disk_with_spacing(
                Point2::new(d * a.cos(), d * a.sin()),
                1.25 * radius,
                radius * SPACING_FRACTION,
            )?;
            let schedule = Schedule {
                iterations: run.iterations,
                ..Schedule::new(run.seed)
            };
            let rep = optimize_from(
                &img,
                &params,
                &schedule,
                LayeredSegmentation::new(vec![start]),
                LayerMode::Fixed(1),
            )?;
            let truth = shapes::disk(Point2::new(0.0, 0.0), radius, 4096)?;
            let hausdorff_pixels = if rep.final_segmentation.is_empty() {
                f64::INFINITY
            } else {
                hausdorff_distance(&rep.final_segmentation.layers, std::slice::from_ref(&truth))?
                    / img.grid().pixel_size
            };
            Some(OptimizerOutcome {
                seed: run.seed,
                iterations: run.iterations,
                seed_energy: rep.seed_energy,
                best_energy: rep.best_energy,
                relative_error: rep.best_energy / analytic_disk - 1.0,
                hausdorff_pixels,
                layers: rep.final_segmentation.len(),
                feasible: rep.feasible,
            })
        }
    };

    Ok(BallReport {
        radius,
        grid,
        alpha,
        beta,
        gamma,
        omega_area,
        analytic_disk,
        analytic_empty,
        disk_energy,
        empty_energy,
        competitors: comps,
        disk_wins,
        optimizer,
    })
}

impl BallReport {
    /// Plain-text summary.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ball minimizer demo: R = {}, grid {}x{}", self.radius, self.grid, self.grid);
        let _ = writeln!(
            s,
            "parameters: alpha = {}, beta = {}, gamma = {}, phi = 1 + k^2, |Omega| = {}",
            self.alpha, self.beta, self.gamma, self.omega_area
        );
        let _ = writeln!(
            s,
            "disk   G1 = {:.6}  (closed form {:.6}, rel {:+.3e})",
            self.disk_energy,
            self.analytic_disk,
            self.disk_energy / self.analytic_disk - 1.0
        );
        let _ = writeln!(
            s,
            "empty  G1 = {:.6}  (closed form {:.6}, rel {:+.3e})",
            self.empty_energy,
            self.analytic_empty,
            self.empty_energy / self.analytic_empty - 1.0
        );
        let _ = writeln!(s, "competitors:");
        for c in &self.competitors {
            let _ = writeln!(
                s,
                "  {:<40} G1 = {:>12.6}  perimeter = {:>9.4}  margin = {:+.6}",
                c.name,
                c.energy,
                c.perimeter,
                c.energy - self.disk_energy
            );
        }
        let _ = writeln!(s, "disk attains the minimum: {}", if self.disk_wins { "yes" } else { "no" });
        if let Some(o) = &self.optimizer {
            let _ = writeln!(
                s,
                "optimizer (seed {}, {} iterations): start {:.6} -> best {:.6}, rel {:+.3e}, hausdorff {:.3} px, feasible {}",
                o.seed, o.iterations, o.seed_energy, o.best_energy, o.relative_error, o.hausdorff_pixels, o.feasible
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_two() {
        let rep = example_ball(2.0, 200, None).unwrap();
        let disk = 4.0 * PI + 5.0 * PI;
        assert!((rep.disk_energy - disk).abs() <= 0.02 * disk, "{}", rep.disk_energy);
        assert!((rep.analytic_disk - disk).abs() < 1e-12);
        let empty = 10.0 * (4.0 * PI - 16.0 * PI * PI / 100.0);
        assert!((rep.empty_energy - empty).abs() <= 0.02 * empty, "{}", rep.empty_energy);
        assert_eq!(rep.alpha, DEFAULT_ALPHA);
        assert_eq!(rep.competitors.len(), 20);
        assert!(rep.competitors.iter().any(|c| c.perimeter > 2.0 * PI * 2.0 + 2.0));
        assert!(rep.disk_wins, "{}", rep.to_text());
    }

    #[test]
    fn radius_one_and_a_half() {
        let rep = example_ball(1.5, 200, None).unwrap();
        let disk = 2.25 * PI + 3.0 * PI + 4.0 * PI / 3.0;
        assert!((rep.disk_energy - disk).abs() <= 0.02 * disk);
        assert!(rep.disk_wins, "{}", rep.to_text());
    }

    #[test]
    fn precondition() {
        assert!(matches!(example_ball(1.0, 200, None), Err(ExampleError::RadiusTooSmall(_))));
        assert!(matches!(example_ball(0.5, 200, None), Err(ExampleError::RadiusTooSmall(_))));
    }
}
