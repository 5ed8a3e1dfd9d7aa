use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::ptr;

use reachseg_ffi::*;

fn disk_xy(r: f64, n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn disk(r: f64, n: usize) -> *mut ReachsegRegion {
    let xy = disk_xy(r, n);
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { reachseg_region_from_vertices(xy.as_ptr(), n, &mut h) }, ReachsegStatus::Ok);
    h
}

fn last_error() -> String {
    let p = reachseg_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn region_measures() {
    let h = disk(1.0, 256);
    let (mut a, mut p, mut e) = (0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(reachseg_region_area(h, &mut a), ReachsegStatus::Ok);
        assert_eq!(reachseg_region_perimeter(h, &mut p), ReachsegStatus::Ok);
        assert_eq!(reachseg_region_curvature_energy(h, 2.0, &mut e), ReachsegStatus::Ok);
        reachseg_region_free(h);
    }
    assert!((a - PI).abs() < 1e-3);
    assert!((p - 2.0 * PI).abs() < 1e-3);
    // phi = 1 + k^2 on the unit circle: perimeter plus 2pi
    assert!((e - 4.0 * PI).abs() < 1e-2, "{e}");
    assert!(reachseg_last_error().is_null());
}

#[test]
fn check_disk_and_spacing_precondition() {
    let fine = disk(1.0, 128) as *const ReachsegRegion;
    let mut res = ReachsegCheck::default();
    assert_eq!(unsafe { reachseg_check(&fine, 1, 1.0, -1.0, &mut res) }, ReachsegStatus::Ok);
    assert!(res.pass);
    assert_eq!(res.vertices, 128);

    // a larger ball does not fit inside
    assert_eq!(unsafe { reachseg_check(&fine, 1, 1.25, -1.0, &mut res) }, ReachsegStatus::Ok);
    assert!(!res.pass);
    assert!(res.worst_violation > 0.0);

    let coarse = disk(1.0, 8) as *const ReachsegRegion;
    assert_eq!(unsafe { reachseg_check(&coarse, 1, 1.0, -1.0, &mut res) }, ReachsegStatus::Precondition);
    assert!(!last_error().is_empty());
    unsafe {
        reachseg_region_free(fine as *mut _);
        reachseg_region_free(coarse as *mut _);
    }
}

#[test]
fn json_round_trip() {
    let h = disk(2.0, 64) as *const ReachsegRegion;
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { reachseg_regions_to_json(&h, 1, &mut s) }, ReachsegStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { reachseg_string_free(s) };

    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let one = CString::new(v[0].to_string()).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { reachseg_region_from_json(one.as_ptr(), &mut back) }, ReachsegStatus::Ok);
    let (mut a0, mut a1) = (0.0, 0.0);
    unsafe {
        reachseg_region_area(h, &mut a0);
        reachseg_region_area(back, &mut a1);
        reachseg_region_free(h as *mut _);
        reachseg_region_free(back);
    }
    assert_eq!(a0, a1);
}

#[test]
fn error_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { reachseg_region_from_json(ptr::null(), &mut h) }, ReachsegStatus::NullPointer);
    assert!(last_error().contains("json"));

    let bad = CString::new("{\"outer\": [[0, 0], [1, 0]]}").unwrap();
    assert_eq!(unsafe { reachseg_region_from_json(bad.as_ptr(), &mut h) }, ReachsegStatus::InvalidInput);
    assert!(h.is_null());

    let missing = CString::new("/nonexistent/image.pgm").unwrap();
    let mut img = ptr::null_mut();
    assert_eq!(unsafe { reachseg_image_read_pgm(missing.as_ptr(), 1.0, 0.0, 0.0, &mut img) }, ReachsegStatus::Io);

    let mut area = 0.0;
    assert_eq!(unsafe { reachseg_region_area(ptr::null(), &mut area) }, ReachsegStatus::NullPointer);

    // freeing null is a no-op
    unsafe {
        reachseg_region_free(ptr::null_mut());
        reachseg_image_free(ptr::null_mut());
        reachseg_string_free(ptr::null_mut());
    }
}

fn ball_image(r: f64, n: usize) -> *mut ReachsegImage {
    let lo = -2.5 * r;
    let h = 5.0 * r / n as f64;
    let mut values = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let x = lo + (col as f64 + 0.5) * h;
            let y = lo + (row as f64 + 0.5) * h;
            values.push(if x.hypot(y) <= r { 1.0 } else { 0.0 });
        }
    }
    let mut img = ptr::null_mut();
    assert_eq!(
        unsafe { reachseg_image_from_values(n, n, h, lo, lo, values.as_ptr(), &mut img) },
        ReachsegStatus::Ok
    );
    img
}

#[test]
fn energy_of_ball_image() {
    let r = 2.0;
    let img = ball_image(r, 100);
    let (mut w, mut h) = (0, 0);
    assert_eq!(unsafe { reachseg_image_size(img, &mut w, &mut h) }, ReachsegStatus::Ok);
    assert_eq!((w, h), (100, 100));

    let params = ReachsegParams { alpha: 10.0, beta: 1.0, gamma: 1.0, radius: r, phi_exponent: 2.0 };
    let layer = disk(r, 512) as *const ReachsegRegion;
    let mut g = 0.0;
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { reachseg_energy(img, &layer, 1, &params, &mut g, &mut json) }, ReachsegStatus::Ok);
    let expected = PI * r * r + 2.0 * PI * r + 2.0 * PI / r;
    assert!((g - expected).abs() / expected < 0.02, "G = {g}, expected {expected}");
    let doc: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(doc["G"].as_f64().unwrap(), g);
    assert_eq!(doc["feasible"], true);

    let mut g_empty = 0.0;
    assert_eq!(unsafe { reachseg_energy(img, ptr::null(), 0, &params, &mut g_empty, ptr::null_mut()) }, ReachsegStatus::Ok);
    assert!(g < g_empty);

    let bad = ReachsegParams { beta: -1.0, ..params };
    assert_eq!(unsafe { reachseg_energy(img, &layer, 1, &bad, &mut g, ptr::null_mut()) }, ReachsegStatus::InvalidInput);
    unsafe {
        reachseg_string_free(json);
        reachseg_region_free(layer as *mut _);
        reachseg_image_free(img);
    }
}

#[test]
fn segment_finds_the_ball() {
    let r = 2.0;
    let img = ball_image(r, 100);
    let params = ReachsegParams { alpha: 10.0, beta: 1.0, gamma: 1.0, radius: r, phi_exponent: 2.0 };
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { reachseg_segment(img, &params, 1, 3000, 7, &mut json) }, ReachsegStatus::Ok);
    let doc: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
    assert_eq!(doc["layers"].as_array().unwrap().len(), 1);
    assert_eq!(doc["feasible"], true);
    let expected = PI * r * r + 2.0 * PI * r + 2.0 * PI / r;
    assert!(doc["G"].as_f64().unwrap() < 1.05 * expected);
    unsafe {
        reachseg_string_free(json);
        reachseg_image_free(img);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/reachseg.h")).unwrap();
    for name in [
        "reachseg_last_error",
        "reachseg_region_from_json",
        "reachseg_region_from_vertices",
        "reachseg_region_free",
        "reachseg_region_area",
        "reachseg_region_perimeter",
        "reachseg_region_curvature_energy",
        "reachseg_check",
        "reachseg_regions_to_json",
        "reachseg_image_from_values",
        "reachseg_image_read_pgm",
        "reachseg_image_free",
        "reachseg_image_size",
        "reachseg_energy",
        "reachseg_segment",
        "reachseg_string_free",
        "REACHSEG_STATUS_PRECONDITION",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
