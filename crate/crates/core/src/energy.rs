//! Curvature energies and the layered segmentation functional.
//!
//! For layers `E_1, …, E_k` (index 0 frontmost) the visible part of layer `i`
//! is `E_i` minus every layer in front of it. The functional is
//!
//! ```text
//! G = α Σ_i fid(visible_i ∩ Ω) + α fid(Ω \ ∪E_i) + Σ_i [β |E_i| + γ ∫_{∂E_i} φ(κ) ds]
//! ```
//!
//! where `fid(A) = ∫_A |g - mean_A g|²`. Area and curvature terms read the full
//! layer geometry, unclipped and including boundary arcs hidden by layers in
//! front; only the data term sees the overlap decomposition.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ClosedCurve, Region};
use crate::raster::{rasterize_region, Grid, RasterImage};
use crate::sphere::{check_region, DEFAULT_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("invalid phi model: {0}")]
    InvalidPhi(String),
    #[error("invalid parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("layer {0} does not intersect the image frame")]
    FrameMismatch(usize),
}

/// Convex curvature density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiModel {
    /// `1 + |κ|^p`, `p ≥ 1`.
    Power { p: f64 },
    /// `ν + aκ²` for `|κ| < b/a`, else `ν + b|κ|`.
    NitzbergMumford { nu: f64, a: f64, b: f64 },
    /// `c0 + c2 κ²`, `c2 ≥ 0`.
    Quadratic { c0: f64, c2: f64 },
}

impl PhiModel {
    pub fn power(p: f64) -> Result<Self, EnergyError> {
        if p >= 1.0 && p.is_finite() {
            Ok(PhiModel::Power { p })
        } else {
            Err(EnergyError::InvalidPhi(format!("power exponent must be >= 1, got {p}")))
        }
    }

    pub fn nitzberg_mumford(nu: f64, a: f64, b: f64) -> Result<Self, EnergyError> {
        for (name, v) in [("nu", nu), ("a", a), ("b", b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnergyError::InvalidPhi(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(PhiModel::NitzbergMumford { nu, a, b })
    }

    pub fn quadratic(c0: f64, c2: f64) -> Result<Self, EnergyError> {
        if c2 >= 0.0 && c0.is_finite() && c2.is_finite() {
            Ok(PhiModel::Quadratic { c0, c2 })
        } else {
            Err(EnergyError::InvalidPhi(format!("quadratic needs finite c0 and c2 >= 0, got {c0}, {c2}")))
        }
    }

    /// Density value at curvature `kappa`.
    pub fn eval(&self, kappa: f64) -> f64 {
        match *self {
            PhiModel::Power { p } => 1.0 + kappa.abs().powf(p),
            PhiModel::NitzbergMumford { nu, a, b } => {
                if kappa.abs() < b / a {
                    nu + a * kappa * kappa
                } else {
                    nu + b * kappa.abs()
                }
            }
            PhiModel::Quadratic { c0, c2 } => c0 + c2 * kappa * kappa,
        }
    }
}

/// Same as [`PhiModel::eval`].
pub fn phi_eval(phi: &PhiModel, kappa: f64) -> f64 {
    phi.eval(kappa)
}

impl fmt::Display for PhiModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiModel::Power { p } => write!(f, "power:{p}"),
            PhiModel::NitzbergMumford { nu, a, b } => write!(f, "nm:{nu},{a},{b}"),
            PhiModel::Quadratic { c0, c2 } => write!(f, "quadratic:{c0},{c2}"),
        }
    }
}

/// Parses `power:P`, `nm:NU,A,B` or `quadratic:C0,C2`.
impl FromStr for PhiModel {
    type Err = EnergyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| EnergyError::InvalidPhi(format!("expected KIND:ARGS, got {s:?}")))?;
        let nums = args
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EnergyError::InvalidPhi(format!("{s:?}: {e}")))?;
        match (kind.trim(), nums.as_slice()) {
            ("power", [p]) => PhiModel::power(*p),
            ("nm", [nu, a, b]) => PhiModel::nitzberg_mumford(*nu, *a, *b),
            ("quadratic", [c0, c2]) => PhiModel::quadratic(*c0, *c2),
            _ => Err(EnergyError::InvalidPhi(format!(
                "unknown phi {s:?}; expected power:P, nm:NU,A,B or quadratic:C0,C2"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub radius: f64,
    pub phi: PhiModel,
}

impl EnergyParams {
    /// `beta`, `gamma` and `radius` must be positive; `alpha` non-negative.
    pub fn new(alpha: f64, beta: f64, gamma: f64, radius: f64, phi: PhiModel) -> Result<Self, EnergyError> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(EnergyError::InvalidParam { name: "alpha", value: alpha });
        }
        for (name, value) in [("beta", beta), ("gamma", gamma), ("radius", radius)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(EnergyError::InvalidParam { name, value });
            }
        }
        Ok(EnergyParams { alpha, beta, gamma, radius, phi })
    }
}

/// Ordered layers, index 0 frontmost.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayeredSegmentation {
    pub layers: Vec<Region>,
}

impl LayeredSegmentation {
    pub fn new(layers: Vec<Region>) -> Self {
        LayeredSegmentation { layers }
    }

    pub fn empty() -> Self {
        LayeredSegmentation::default()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// `Σ φ(κ_i) w_i` over the discrete curvature profile.
pub fn curvature_energy(curve: &ClosedCurve, phi: &PhiModel) -> f64 {
    curve
        .curvature_profile()
        .into_iter()
        .map(|(k, w)| phi.eval(k) * w)
        .sum()
}

/// Curvature energy over every boundary curve of the region.
pub fn region_curvature_energy(region: &Region, phi: &PhiModel) -> f64 {
    region.curves().map(|c| curvature_energy(c, phi)).sum()
}

/// `L·φ(2π/L)` with `L` the perimeter.
pub fn jensen_lower_bound(curve: &ClosedCurve, phi: &PhiModel) -> f64 {
    let l = curve.perimeter();
    l * phi.eval(2.0 * PI / l)
}

/// Largest layer count any state with energy `current_g` can carry, since
/// every nonempty member contains a ball of radius `R`.
pub fn k_upper_bound(current_g: f64, params: &EnergyParams) -> usize {
    let unit = params.beta * PI * params.radius * params.radius;
    (current_g.max(0.0) / unit).floor() as usize
}

/// Per-pixel owner: 0 for background, `i + 1` for the visible part of layer `i`.
pub fn owner_labels(seg: &LayeredSegmentation, grid: &Grid) -> Vec<u32> {
    let mut labels = vec![0u32; grid.len()];
    let mut inside = vec![false; grid.len()];
    // back to front so front layers overwrite
    for (i, layer) in seg.layers.iter().enumerate().rev() {
        let rect = grid.rect_for_region(layer);
        if rect.is_empty() {
            continue;
        }
        rasterize_region(layer, grid, rect, &mut inside);
        for r in rect.r0..rect.r1 {
            for c in rect.c0..rect.c1 {
                let idx = grid.index(c, r);
                if inside[idx] {
                    labels[idx] = i as u32 + 1;
                }
            }
        }
    }
    labels
}

/// Pixel masks of the visible parts plus the background; they partition the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMasks {
    pub layers: Vec<Vec<bool>>,
    pub background: Vec<bool>,
}

pub fn overlap_decompose(seg: &LayeredSegmentation, img: &RasterImage) -> OverlapMasks {
    let labels = owner_labels(seg, img.grid());
    let mut layers = vec![vec![false; labels.len()]; seg.len()];
    let mut background = vec![false; labels.len()];
    for (idx, &l) in labels.iter().enumerate() {
        if l == 0 {
            background[idx] = true;
        } else {
            layers[l as usize - 1][idx] = true;
        }
    }
    OverlapMasks { layers, background }
}

/// Mean of `g` over the mask; 0 for an empty mask.
pub fn region_mean(img: &RasterImage, mask: &[bool]) -> f64 {
    let (mut n, mut s) = (0usize, 0.0);
    for (&g, &m) in img.values().iter().zip(mask) {
        if m {
            n += 1;
            s += g;
        }
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// `Σ (g - mean)² · pixel_area` over the mask; 0 for an empty mask.
pub fn fidelity(img: &RasterImage, mask: &[bool]) -> f64 {
    let mean = region_mean(img, mask);
    let mut acc = 0.0;
    for (&g, &m) in img.values().iter().zip(mask) {
        if m {
            acc += (g - mean) * (g - mean);
        }
    }
    acc * img.grid().pixel_area()
}

/// Per-term breakdown of the functional. Terms are weighted so that they sum
/// to `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    #[serde(rename = "G")]
    pub g: f64,
    pub fidelity_per_layer: Vec<f64>,
    pub fidelity_background: f64,
    pub area_terms: Vec<f64>,
    pub curvature_terms: Vec<f64>,
    /// Every layer passes the ball test at `params.radius`, default tolerance.
    pub feasible: bool,
}

/// Evaluates the functional; feasibility is reported, not enforced.
///
/// Fidelity is taken over each layer's visible part, but area and curvature
/// are charged for the whole layer, hidden boundary arcs included.
pub fn total_energy(
    seg: &LayeredSegmentation,
    img: &RasterImage,
    params: &EnergyParams,
) -> Result<EnergyBreakdown, EnergyError> {
    let grid = img.grid();
    for (i, layer) in seg.layers.iter().enumerate() {
        if grid.rect_for_region(layer).is_empty() {
            return Err(EnergyError::FrameMismatch(i));
        }
    }
    let masks = overlap_decompose(seg, img);
    let fidelity_per_layer: Vec<f64> =
        masks.layers.iter().map(|m| params.alpha * fidelity(img, m)).collect();
    let fidelity_background = params.alpha * fidelity(img, &masks.background);
    let area_terms: Vec<f64> = seg.layers.iter().map(|l| params.beta * l.area()).collect();
    let curvature_terms: Vec<f64> = seg
        .layers
        .iter()
        .map(|l| params.gamma * region_curvature_energy(l, &params.phi))
        .collect();
    let feasible = seg.layers.iter().all(|l| {
        check_region(l, params.radius, DEFAULT_TOL)
            .map(|r| r.pass)
            .unwrap_or(false)
    });
    let mut g = fidelity_background;
    for i in 0..seg.len() {
        g += fidelity_per_layer[i] + area_terms[i] + curvature_terms[i];
    }
    Ok(EnergyBreakdown {
        g,
        fidelity_per_layer,
        fidelity_background,
        area_terms,
        curvature_terms,
        feasible,
    })
}
