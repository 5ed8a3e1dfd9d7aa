//! Binary morphology with Euclidean disks and sub-pixel contour extraction.

use std::collections::BTreeMap;

use crate::geometry::Point2;
use crate::raster::{BinaryMask, Grid};

const INF: f64 = 1e20;

/// 1D lower envelope of parabolas (Felzenszwalb–Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: replace the first parabola
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance (in pixels) from every pixel to the nearest
/// `true` pixel; `INF`-like values when there is none.
pub fn squared_distance_transform(width: usize, height: usize, features: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = features.iter().map(|&b| if b { 0.0 } else { INF }).collect();
    let m = width.max(height);
    let mut f = vec![0.0; m];
    let mut out = vec![0.0; m];
    let mut v = vec![0usize; m];
    let mut z = vec![0.0; m + 1];
    for c in 0..width {
        for r in 0..height {
            f[r] = d[r * width + c];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for r in 0..height {
            d[r * width + c] = out[r];
        }
    }
    for r in 0..height {
        f[..width].copy_from_slice(&d[r * width..(r + 1) * width]);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        d[r * width..(r + 1) * width].copy_from_slice(&out[..width]);
    }
    d
}

/// Pixels within Euclidean distance `radius` (pixels) of the set.
pub fn dilate(width: usize, height: usize, set: &[bool], radius: f64) -> Vec<bool> {
    let r2 = radius * radius;
    squared_distance_transform(width, height, set)
        .into_iter()
        .map(|d| d <= r2)
        .collect()
}

/// Pixels whose disk of radius `radius` stays in the set. Outside the grid
/// counts as background.
pub fn erode(width: usize, height: usize, set: &[bool], radius: f64) -> Vec<bool> {
    let pad = radius.ceil() as usize + 1;
    let (pw, ph) = (width + 2 * pad, height + 2 * pad);
    let mut comp = vec![true; pw * ph];
    for r in 0..height {
        for c in 0..width {
            comp[(r + pad) * pw + c + pad] = !set[r * width + c];
        }
    }
    let grown = dilate(pw, ph, &comp, radius);
    let mut out = vec![false; width * height];
    for r in 0..height {
        for c in 0..width {
            out[r * width + c] = !grown[(r + pad) * pw + c + pad];
        }
    }
    out
}

pub fn open(width: usize, height: usize, set: &[bool], radius: f64) -> Vec<bool> {
    let e = erode(width, height, set, radius);
    dilate(width, height, &e, radius)
}

pub fn close(width: usize, height: usize, set: &[bool], radius: f64) -> Vec<bool> {
    let d = dilate(width, height, set, radius);
    erode(width, height, &d, radius)
}

/// Mask grown by `pad` background pixels on every side, with the matching grid.
pub fn pad_mask(mask: &BinaryMask, pad: usize) -> BinaryMask {
    let g = mask.grid();
    let grid = Grid {
        width: g.width + 2 * pad,
        height: g.height + 2 * pad,
        pixel_size: g.pixel_size,
        origin: g.origin - Point2::new(pad as f64, pad as f64) * g.pixel_size,
    };
    let mut out = BinaryMask::empty(grid);
    for r in 0..g.height {
        for c in 0..g.width {
            if mask.get(c, r) {
                out.set(c + pad, r + pad, true);
            }
        }
    }
    out
}

/// Signed distance in pixels at pixel centers, positive inside, never zero.
pub fn signed_distance_field(width: usize, height: usize, set: &[bool]) -> Vec<f64> {
    let to_fg = squared_distance_transform(width, height, set);
    let comp: Vec<bool> = set.iter().map(|b| !b).collect();
    let to_bg = squared_distance_transform(width, height, &comp);
    set.iter()
        .zip(to_fg.iter().zip(to_bg.iter()))
        .map(|(&inside, (&dfg, &dbg))| if inside { dbg.sqrt() - 0.5 } else { -(dfg.sqrt() - 0.5) })
        .collect()
}

/// 4-connected components of the set, each as a list of pixel indices in
/// scan order. Components are ordered by their first pixel.
pub fn connected_components(width: usize, height: usize, set: &[bool]) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; set.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..set.len() {
        if !set[start] || label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut pixels = Vec::new();
        label[start] = id;
        stack.push(start);
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (c, r) = (i % width, i / width);
            let mut visit = |j: usize| {
                if set[j] && label[j] == usize::MAX {
                    label[j] = id;
                    stack.push(j);
                }
            };
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < width {
                visit(i + 1);
            }
            if r > 0 {
                visit(i - width);
            }
            if r + 1 < height {
                visit(i + width);
            }
        }
        pixels.sort_unstable();
        comps.push(pixels);
    }
    comps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeId {
    /// between (c, r) and (c + 1, r)
    H(usize, usize),
    /// between (c, r) and (c, r + 1)
    V(usize, usize),
}

/// Marching-squares iso-contours of `field` at level 0 over pixel centers,
/// oriented with the positive side on the left. Saddles are resolved by the
/// cell-center average. Coordinates are in the grid's physical units.
pub fn iso_contours(grid: &Grid, field: &[f64]) -> Vec<Vec<Point2>> {
    let (w, h) = (grid.width, grid.height);
    let val = |c: usize, r: usize| field[r * w + c];
    let point = |e: EdgeId| -> Point2 {
        let (p0, p1, f0, f1) = match e {
            EdgeId::H(c, r) => (grid.pixel_center(c, r), grid.pixel_center(c + 1, r), val(c, r), val(c + 1, r)),
            EdgeId::V(c, r) => (grid.pixel_center(c, r), grid.pixel_center(c, r + 1), val(c, r), val(c, r + 1)),
        };
        let t = f0 / (f0 - f1);
        p0 + (p1 - p0) * t
    };

    let mut next: BTreeMap<EdgeId, EdgeId> = BTreeMap::new();
    for r in 0..h.saturating_sub(1) {
        for c in 0..w.saturating_sub(1) {
            // counterclockwise corners and the edge leaving each corner
            let corners = [(c, r), (c + 1, r), (c + 1, r + 1), (c, r + 1)];
            let edges = [EdgeId::H(c, r), EdgeId::V(c + 1, r), EdgeId::H(c, r + 1), EdgeId::V(c, r)];
            let inside: Vec<bool> = corners.iter().map(|&(cc, rr)| val(cc, rr) > 0.0).collect();
            let mut crossings: Vec<(EdgeId, bool)> = Vec::new(); // (edge, entering)
            for k in 0..4 {
                let (a, b) = (inside[k], inside[(k + 1) % 4]);
                if a != b {
                    crossings.push((edges[k], b));
                }
            }
            if crossings.is_empty() {
                continue;
            }
            let center_inside = corners.iter().map(|&(cc, rr)| val(cc, rr)).sum::<f64>() > 0.0;
            let m = crossings.len();
            for k in 0..m {
                let (e, entering) = crossings[k];
                if entering {
                    continue;
                }
                let partner = if m == 2 || !center_inside {
                    crossings[(k + m - 1) % m]
                } else {
                    crossings[(k + 1) % m]
                };
                next.insert(e, partner.0);
            }
        }
    }

    let mut loops = Vec::new();
    while let Some((&start, _)) = next.iter().next() {
        let mut pts = Vec::new();
        let mut cur = start;
        while let Some(nx) = next.remove(&cur) {
            pts.push(point(cur));
            cur = nx;
            if cur == start {
                break;
            }
        }
        pts.dedup();
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        if pts.len() >= 3 {
            loops.push(pts);
        }
    }
    loops
}

/// Circular Gaussian smoothing of a closed polyline sampled at uniform spacing.
pub fn smooth_closed(points: &[Point2], sigma_samples: f64) -> Vec<Point2> {
    let n = points.len();
    if sigma_samples <= 0.0 || n < 3 {
        return points.to_vec();
    }
    let half = ((3.0 * sigma_samples).ceil() as usize).min((n - 1) / 2);
    let weights: Vec<f64> = (0..=half)
        .map(|k| (-(k as f64).powi(2) / (2.0 * sigma_samples * sigma_samples)).exp())
        .collect();
    let total: f64 = weights[0] + 2.0 * weights[1..].iter().sum::<f64>();
    (0..n)
        .map(|i| {
            let mut acc = points[i] * weights[0];
            for (k, &wk) in weights.iter().enumerate().skip(1) {
                acc = acc + (points[(i + k) % n] + points[(i + n - k) % n]) * wk;
            }
            acc * (1.0 / total)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sq_dist(w: usize, h: usize, set: &[bool]) -> Vec<f64> {
        let pts: Vec<(f64, f64)> = (0..set.len())
            .filter(|&i| set[i])
            .map(|i| ((i % w) as f64, (i / w) as f64))
            .collect();
        (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64, (i / w) as f64);
                pts.iter()
                    .map(|&(a, b)| (x - a).powi(2) + (y - b).powi(2))
                    .fold(INF, f64::min)
            })
            .collect()
    }

    #[test]
    fn edt_matches_brute_force() {
        let (w, h) = (23, 17);
        let set: Vec<bool> = (0..w * h).map(|i| (i * 7919) % 37 == 3).collect();
        let fast = squared_distance_transform(w, h, &set);
        let slow = brute_sq_dist(w, h, &set);
        assert_eq!(fast, slow);
    }

    #[test]
    fn opening_erases_isolated_pixel() {
        let (w, h) = (20, 20);
        let mut set = vec![false; w * h];
        set[10 * w + 10] = true;
        assert!(open(w, h, &set, 2.0).iter().all(|b| !b));
    }

    #[test]
    fn opening_keeps_large_disk() {
        let (w, h) = (60, 60);
        let set: Vec<bool> = (0..w * h)
            .map(|i| {
                let (x, y) = ((i % w) as f64 - 30.0, (i / w) as f64 - 30.0);
                x * x + y * y <= 20.0 * 20.0
            })
            .collect();
        // identity up to rasterization of the two disks
        for out in [open(w, h, &set, 5.0), close(w, h, &set, 5.0)] {
            let diff = out.iter().zip(&set).filter(|(a, b)| a != b).count();
            assert!(diff <= 8, "{diff} pixels changed");
        }
    }

    #[test]
    fn contour_of_square_block_is_ccw() {
        let g = Grid::new(6, 6, 1.0, Point2::default()).unwrap();
        let set: Vec<bool> = (0..36).map(|i| (1..5).contains(&(i % 6)) && (1..5).contains(&(i / 6))).collect();
        let f = signed_distance_field(6, 6, &set);
        let loops = iso_contours(&g, &f);
        assert_eq!(loops.len(), 1);
        let area: f64 = {
            let v = &loops[0];
            (0..v.len()).map(|i| v[i].cross(v[(i + 1) % v.len()])).sum::<f64>() * 0.5
        };
        assert!(area > 0.0);
    }

    #[test]
    fn components_split() {
        let set = vec![true, false, true, true, false, false, false, false, true];
        let comps = connected_components(3, 3, &set);
        assert_eq!(comps, vec![vec![0, 3], vec![2], vec![8]]);
    }
}
