//! Pixel grids, grayscale images and pixel-center rasterization.
//!
//! Pixel `(col, row)` covers the square whose center is
//! `origin + ((col + 0.5)·s, (row + 0.5)·s)` with `s` the pixel size; rows
//! grow with `y`. Set membership of a pixel is decided at its center.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("grid must be at least 1x1, got {0}x{1}")]
    EmptyGrid(usize, usize),
    #[error("pixel size must be positive and finite, got {0}")]
    PixelSize(f64),
    #[error("expected {expected} pixel values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("pixel value {value} at index {index} is outside [0, 1]")]
    ValueRange { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub origin: Point2,
}

/// Inclusive-exclusive pixel rectangle `cols × rows`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub c0: usize,
    pub c1: usize,
    pub r0: usize,
    pub r1: usize,
}

impl PixelRect {
    pub fn is_empty(&self) -> bool {
        self.c0 >= self.c1 || self.r0 >= self.r1
    }

    pub fn union(self, o: PixelRect) -> PixelRect {
        if self.is_empty() {
            return o;
        }
        if o.is_empty() {
            return self;
        }
        PixelRect {
            c0: self.c0.min(o.c0),
            c1: self.c1.max(o.c1),
            r0: self.r0.min(o.r0),
            r1: self.r1.max(o.r1),
        }
    }

    pub fn empty() -> PixelRect {
        PixelRect { c0: 0, c1: 0, r0: 0, r1: 0 }
    }
}

impl Grid {
    pub fn new(width: usize, height: usize, pixel_size: f64, origin: Point2) -> Result<Grid, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyGrid(width, height));
        }
        if !(pixel_size > 0.0 && pixel_size.is_finite()) {
            return Err(RasterError::PixelSize(pixel_size));
        }
        Ok(Grid { width, height, pixel_size, origin })
    }

    /// Square grid of `n × n` pixels covering `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Grid, RasterError> {
        Grid::new(n, n, (hi - lo) / n as f64, Point2::new(lo, lo))
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> Point2 {
        Point2::new(
            self.origin.x + (col as f64 + 0.5) * self.pixel_size,
            self.origin.y + (row as f64 + 0.5) * self.pixel_size,
        )
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size * self.pixel_size
    }

    /// Physical area of the grid.
    pub fn area(&self) -> f64 {
        self.len() as f64 * self.pixel_area()
    }

    pub fn full_rect(&self) -> PixelRect {
        PixelRect { c0: 0, c1: self.width, r0: 0, r1: self.height }
    }

    /// Pixels whose centers lie in the closed box `[lo, hi]`, clipped to the grid.
    pub fn rect_for_box(&self, lo: Point2, hi: Point2) -> PixelRect {
        let s = self.pixel_size;
        let first = |v: f64, o: f64, n: usize| (((v - o) / s - 0.5).ceil().max(0.0) as usize).min(n);
        let last = |v: f64, o: f64, n: usize| {
            let f = ((v - o) / s - 0.5).floor() + 1.0;
            (f.max(0.0) as usize).min(n)
        };
        PixelRect {
            c0: first(lo.x, self.origin.x, self.width),
            c1: last(hi.x, self.origin.x, self.width),
            r0: first(lo.y, self.origin.y, self.height),
            r1: last(hi.y, self.origin.y, self.height),
        }
    }

    /// Pixel rectangle covering the bounding box of `region`.
    pub fn rect_for_region(&self, region: &Region) -> PixelRect {
        let (lo, hi) = region.bounding_box();
        self.rect_for_box(lo, hi)
    }
}

/// Grayscale data on a grid, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    grid: Grid,
    values: Vec<f64>,
}

impl RasterImage {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, RasterError> {
        if values.len() != grid.len() {
            return Err(RasterError::ValueCount { expected: grid.len(), got: values.len() });
        }
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(RasterError::ValueRange { index, value });
        }
        Ok(RasterImage { grid, values })
    }

    /// Samples `f` at every pixel center.
    pub fn from_fn(grid: Grid, f: impl Fn(Point2) -> f64) -> Result<Self, RasterError> {
        let mut values = Vec::with_capacity(grid.len());
        for r in 0..grid.height {
            for c in 0..grid.width {
                values.push(f(grid.pixel_center(c, r)));
            }
        }
        RasterImage::new(grid, values)
    }

    pub fn constant(grid: Grid, v: f64) -> Result<Self, RasterError> {
        RasterImage::new(grid, vec![v; grid.len()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.grid.index(col, row)]
    }
}

/// Boolean pixel mask on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    grid: Grid,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(grid: Grid, data: Vec<bool>) -> Result<Self, RasterError> {
        if data.len() != grid.len() {
            return Err(RasterError::ValueCount { expected: grid.len(), got: data.len() });
        }
        Ok(BinaryMask { grid, data })
    }

    pub fn empty(grid: Grid) -> Self {
        BinaryMask { grid, data: vec![false; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point2) -> bool) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for r in 0..grid.height {
            for c in 0..grid.width {
                data.push(f(grid.pixel_center(c, r)));
            }
        }
        BinaryMask { grid, data }
    }

    pub fn from_region(grid: Grid, region: &Region) -> Self {
        let mut data = vec![false; grid.len()];
        rasterize_region(region, &grid, grid.full_rect(), &mut data);
        BinaryMask { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<bool> {
        self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[self.grid.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        let i = self.grid.index(col, row);
        self.data[i] = v;
    }
}

/// Writes pixel-center membership of `region` into `out` for pixels in `rect`
/// (other entries untouched). Scanline even-odd rule over all boundary curves,
/// consistent with [`crate::geometry::ClosedCurve::crossing_contains`].
pub fn rasterize_region(region: &Region, grid: &Grid, rect: PixelRect, out: &mut [bool]) {
    let mut xs: Vec<f64> = Vec::new();
    let s = grid.pixel_size;
    for r in rect.r0..rect.r1 {
        let row = &mut out[r * grid.width..(r + 1) * grid.width];
        for v in &mut row[rect.c0..rect.c1] {
            *v = false;
        }
        let y = grid.origin.y + (r as f64 + 0.5) * s;
        xs.clear();
        for curve in region.curves() {
            for (a, b) in curve.edges() {
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // centers px with pair[0] <= px < pair[1]
            let lo = ((pair[0] - grid.origin.x) / s - 0.5).ceil();
            let hi = ((pair[1] - grid.origin.x) / s - 0.5).ceil();
            let c_lo = (lo.max(rect.c0 as f64) as usize).min(rect.c1);
            let c_hi = (hi.max(rect.c0 as f64) as usize).min(rect.c1);
            for v in &mut row[c_lo..c_hi.max(c_lo)] {
                *v = true;
            }
        }
    }
}
