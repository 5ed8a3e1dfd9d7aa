//! C ABI over the reachseg toolkit.
//!
//! Objects are opaque handles owned by the caller and released with the
//! matching `*_free`. Every fallible call returns a [`ReachsegStatus`]; on
//! failure the message is available from [`reachseg_last_error`] on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use reachseg::energy::{region_curvature_energy, total_energy};
use reachseg::geometry::{ClosedCurve, Point2, Region};
use reachseg::io::{parse_regions, read_pgm, regions_to_json};
use reachseg::optimizer::{optimize_fixed_k, optimize_variable_k, Schedule};
use reachseg::raster::{Grid, RasterImage};
use reachseg::{check_regions, EnergyParams, LayeredSegmentation, PhiModel};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachsegStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument: malformed text, non-finite number, degenerate polygon.
    InvalidInput = 2,
    /// Input violates a checker precondition (e.g. vertex spacing).
    Precondition = 3,
    Io = 4,
    /// The optimizer could not produce a result.
    Optimizer = 5,
    Panic = 6,
}

/// A region with optional holes.
pub struct ReachsegRegion(Region);

/// A grayscale image on a rectangular pixel grid.
pub struct ReachsegImage(RasterImage);

/// Summary of a ball-condition check.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ReachsegCheck {
    pub pass: bool,
    /// Largest `-margin` over all vertices, clamped at 0.
    pub worst_violation: f64,
    pub vertices: usize,
}

/// Weights of the functional and the curvature penalty `phi(k) = 1 + |k|^p`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ReachsegParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub radius: f64,
    pub phi_exponent: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ReachsegStatus, String);

impl Failure {
    fn new(status: ReachsegStatus, message: impl ToString) -> Failure {
        Failure(status, message.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ReachsegStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ReachsegStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            ReachsegStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: caller guarantees p is null or valid for 'a
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(ReachsegStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller guarantees p is null or valid for writes
    unsafe { p.as_mut() }.ok_or_else(|| Failure::new(ReachsegStatus::NullPointer, format!("{what} is null")))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(ReachsegStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null, caller guarantees nul termination
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(ReachsegStatus::InvalidInput, format!("{what} is not valid UTF-8")))
}

fn invalid(e: impl ToString) -> Failure {
    Failure::new(ReachsegStatus::InvalidInput, e)
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior nul").into_raw()
}

unsafe fn region_list<'a>(regions: *const *const ReachsegRegion, n: usize) -> Result<Vec<&'a Region>, Failure> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if regions.is_null() {
        return Err(Failure::new(ReachsegStatus::NullPointer, "regions is null"));
    }
    // SAFETY: caller guarantees n readable handle pointers
    let handles = unsafe { std::slice::from_raw_parts(regions, n) };
    handles
        .iter()
        .enumerate()
        .map(|(i, &h)| unsafe { deref(h, &format!("regions[{i}]")) }.map(|r| &r.0))
        .collect()
}

fn params_from(p: &ReachsegParams) -> Result<EnergyParams, Failure> {
    let phi = PhiModel::power(p.phi_exponent).map_err(invalid)?;
    EnergyParams::new(p.alpha, p.beta, p.gamma, p.radius, phi).map_err(invalid)
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn reachseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a region document: `{"outer": [[x, y], ...], "holes": [...]}`.
/// Arrays of documents are rejected here; use one call per region.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_region_from_json(json: *const c_char, out: *mut *mut ReachsegRegion) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { self::out(out, "out") }?;
        let s = unsafe { text(json, "json") }?;
        let mut regions = parse_regions(s).map_err(invalid)?;
        if regions.len() != 1 {
            return Err(invalid(format!("expected one region, found {}", regions.len())));
        }
        *slot = Box::into_raw(Box::new(ReachsegRegion(regions.remove(0))));
        Ok(())
    })
}

/// Builds a hole-free region from `n` interleaved `x, y` pairs. Clockwise
/// input is reoriented.
///
/// # Safety
/// `xy` must point to `2 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_region_from_vertices(
    xy: *const f64,
    n: usize,
    out: *mut *mut ReachsegRegion,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { self::out(out, "out") }?;
        if xy.is_null() {
            return Err(Failure::new(ReachsegStatus::NullPointer, "xy is null"));
        }
        // SAFETY: caller guarantees 2n readable doubles
        let coords = unsafe { std::slice::from_raw_parts(xy, 2 * n) };
        let pts = coords.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect();
        let curve = ClosedCurve::new(pts).map_err(invalid)?;
        let region = Region::oriented(curve, Vec::new()).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(ReachsegRegion(region)));
        Ok(())
    })
}

/// # Safety
/// `region` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reachseg_region_free(region: *mut ReachsegRegion) {
    if !region.is_null() {
        // SAFETY: handle came from Box::into_raw
        drop(unsafe { Box::from_raw(region) });
    }
}

/// # Safety
/// `region` must be a live handle; `area` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_region_area(region: *const ReachsegRegion, area: *mut f64) -> ReachsegStatus {
    guard(|| {
        *unsafe { out(area, "area") }? = unsafe { deref(region, "region") }?.0.area();
        Ok(())
    })
}

/// # Safety
/// `region` must be a live handle; `perimeter` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_region_perimeter(region: *const ReachsegRegion, perimeter: *mut f64) -> ReachsegStatus {
    guard(|| {
        *unsafe { out(perimeter, "perimeter") }? = unsafe { deref(region, "region") }?.0.perimeter();
        Ok(())
    })
}

/// Discrete `∫ phi(k) ds` over every boundary curve, `phi(k) = 1 + |k|^p`.
///
/// # Safety
/// `region` must be a live handle; `energy` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_region_curvature_energy(
    region: *const ReachsegRegion,
    phi_exponent: f64,
    energy: *mut f64,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { out(energy, "energy") }?;
        let r = unsafe { deref(region, "region") }?;
        let phi = PhiModel::power(phi_exponent).map_err(invalid)?;
        *slot = region_curvature_energy(&r.0, &phi);
        Ok(())
    })
}

/// Interior/exterior ball test of `n` regions at radius `radius`. Pass
/// `tol < 0` for the default tolerance. Edges longer than `radius / 8` give
/// `Precondition`.
///
/// # Safety
/// `regions` must point to `n` live handles; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_check(
    regions: *const *const ReachsegRegion,
    n: usize,
    radius: f64,
    tol: f64,
    result: *mut ReachsegCheck,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { out(result, "result") }?;
        let list: Vec<Region> = unsafe { region_list(regions, n) }?.into_iter().cloned().collect();
        let tol = if tol < 0.0 { reachseg::DEFAULT_TOL } else { tol };
        let rep = check_regions(&list, radius, tol).map_err(|e| Failure::new(ReachsegStatus::Precondition, e))?;
        *slot = ReachsegCheck { pass: rep.pass, worst_violation: rep.worst_violation, vertices: rep.per_vertex.len() };
        Ok(())
    })
}

/// Serializes `n` regions as a JSON array. Release with
/// [`reachseg_string_free`].
///
/// # Safety
/// `regions` must point to `n` live handles; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_regions_to_json(
    regions: *const *const ReachsegRegion,
    n: usize,
    json: *mut *mut c_char,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { out(json, "json") }?;
        let list: Vec<Region> = unsafe { region_list(regions, n) }?.into_iter().cloned().collect();
        *slot = into_c_string(regions_to_json(&list));
        Ok(())
    })
}

/// Builds an image from row-major samples, row 0 at `origin_y`.
///
/// # Safety
/// `values` must point to `width * height` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_image_from_values(
    width: usize,
    height: usize,
    pixel_size: f64,
    origin_x: f64,
    origin_y: f64,
    values: *const f64,
    out: *mut *mut ReachsegImage,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { self::out(out, "out") }?;
        if values.is_null() {
            return Err(Failure::new(ReachsegStatus::NullPointer, "values is null"));
        }
        let len = width.checked_mul(height).ok_or_else(|| invalid("image size overflows"))?;
        // SAFETY: caller guarantees len readable doubles
        let v = unsafe { std::slice::from_raw_parts(values, len) }.to_vec();
        let grid = Grid::new(width, height, pixel_size, Point2::new(origin_x, origin_y)).map_err(invalid)?;
        *slot = Box::into_raw(Box::new(ReachsegImage(RasterImage::new(grid, v).map_err(invalid)?)));
        Ok(())
    })
}

/// Reads a P2 or P5 file; samples are scaled to `[0, 1]`.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_image_read_pgm(
    path: *const c_char,
    pixel_size: f64,
    origin_x: f64,
    origin_y: f64,
    out: *mut *mut ReachsegImage,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { self::out(out, "out") }?;
        let p = unsafe { text(path, "path") }?;
        let img = read_pgm(Path::new(p), pixel_size, Point2::new(origin_x, origin_y))
            .map_err(|e| Failure::new(ReachsegStatus::Io, e))?;
        *slot = Box::into_raw(Box::new(ReachsegImage(img)));
        Ok(())
    })
}

/// # Safety
/// `image` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reachseg_image_free(image: *mut ReachsegImage) {
    if !image.is_null() {
        // SAFETY: handle came from Box::into_raw
        drop(unsafe { Box::from_raw(image) });
    }
}

/// # Safety
/// `image` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_image_size(
    image: *const ReachsegImage,
    width: *mut usize,
    height: *mut usize,
) -> ReachsegStatus {
    guard(|| {
        let img = unsafe { deref(image, "image") }?;
        *unsafe { out(width, "width") }? = img.0.grid().width;
        *unsafe { out(height, "height") }? = img.0.grid().height;
        Ok(())
    })
}

/// Evaluates the functional for `n` layers (index 0 frontmost). `g` receives
/// the total; `json`, if non-null, receives the per-term breakdown.
///
/// # Safety
/// `image` must be live, `layers` must point to `n` live handles, `params`
/// and `g` must be valid; `json` may be null.
#[no_mangle]
pub unsafe extern "C" fn reachseg_energy(
    image: *const ReachsegImage,
    layers: *const *const ReachsegRegion,
    n: usize,
    params: *const ReachsegParams,
    g: *mut f64,
    json: *mut *mut c_char,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { out(g, "g") }?;
        let img = unsafe { deref(image, "image") }?;
        let params = params_from(unsafe { deref(params, "params") }?)?;
        let seg = LayeredSegmentation::new(unsafe { region_list(layers, n) }?.into_iter().cloned().collect());
        let b = total_energy(&seg, &img.0, &params).map_err(invalid)?;
        *slot = b.g;
        if !json.is_null() {
            let s = serde_json::to_string_pretty(&b).expect("breakdown serializes");
            // SAFETY: non-null, caller guarantees writable
            unsafe { *json = into_c_string(s) };
        }
        Ok(())
    })
}

/// Runs the annealer. `k = 0` lets the layer count vary; otherwise at most
/// `k` layers. `iterations = 0` keeps the default schedule length. On
/// success `json` receives `{"G": .., "feasible": .., "layers": [..]}`.
///
/// # Safety
/// `image` and `params` must be valid; `json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn reachseg_segment(
    image: *const ReachsegImage,
    params: *const ReachsegParams,
    k: usize,
    iterations: usize,
    seed: u64,
    json: *mut *mut c_char,
) -> ReachsegStatus {
    guard(|| {
        let slot = unsafe { out(json, "json") }?;
        let img = unsafe { deref(image, "image") }?;
        let params = params_from(unsafe { deref(params, "params") }?)?;
        let mut schedule = Schedule::new(seed);
        if iterations > 0 {
            schedule.iterations = iterations;
        }
        let run = if k == 0 {
            optimize_variable_k(&img.0, &params, &schedule)
        } else {
            optimize_fixed_k(&img.0, &params, &schedule, k)
        }
        .map_err(|e| Failure::new(ReachsegStatus::Optimizer, e))?;
        let layers: serde_json::Value =
            serde_json::from_str(&regions_to_json(&run.final_segmentation.layers)).expect("own output parses");
        let doc = serde_json::json!({ "G": run.best_energy, "feasible": run.feasible, "layers": layers });
        *slot = into_c_string(serde_json::to_string_pretty(&doc).expect("document serializes"));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn reachseg_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: came from CString::into_raw
        drop(unsafe { CString::from_raw(s) });
    }
}
