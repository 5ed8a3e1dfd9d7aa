//! Layered curvature-regularized segmentation over planar sets that satisfy
//! the uniform interior/exterior ball condition with radius `R`.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: closed polygonal curves, regions with holes, discrete curvature.
//! - [`raster`]: pixel grids, grayscale images, binary masks, rasterization.
//! - [`morph`]: disk morphology and sub-pixel contours.
//! - [`sphere`]: membership test for the ball-condition class and its consequences.
//! - [`energy`]: curvature energies and the layered segmentation functional.
//! - [`optimizer`]: constrained annealing search over layered segmentations.
//! - [`convergence`]: set metrics and sequence diagnostics.
//! - [`io`], [`example`] and [`verify`]: persistence, configuration, the
//!   ball-minimizer demo and the diagnostic suites.

pub mod convergence;
pub mod energy;
pub mod example;
pub mod geometry;
pub mod io;
pub mod morph;
pub mod optimizer;
pub mod raster;
pub mod sphere;
pub mod verify;
pub mod shapes;

pub use energy::{EnergyBreakdown, EnergyParams, LayeredSegmentation, PhiModel};
pub use geometry::{ClosedCurve, GeometryError, Point2, Region};
pub use raster::{BinaryMask, Grid, RasterImage};
pub use sphere::{check_region, check_regions, SphereReport, DEFAULT_TOL};
