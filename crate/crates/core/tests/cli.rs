use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use reachseg::example::ball_image;
use reachseg::io::{write_pgm, write_regions};
use reachseg::{shapes, Point2};

fn reachseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reachseg")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let small = dir.path().join("small.json");
    write_regions(&good, &[shapes::disk_with_spacing(Point2::default(), 2.0, 0.1).unwrap()]).unwrap();
    write_regions(&small, &[shapes::disk_with_spacing(Point2::default(), 0.5, 0.05).unwrap()]).unwrap();

    let out = reachseg(&["check", "--radius", "1", s(&good)]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pass"], true);

    assert_eq!(code(&reachseg(&["check", "--radius", "1", s(&small)])), 1);
    assert_eq!(code(&reachseg(&["check", "--radius", "1", "/nonexistent.json"])), 3);
    assert_eq!(code(&reachseg(&["check", s(&good)])), 2);
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let region = dir.path().join("r.json");
    write_regions(&region, &[shapes::disk_with_spacing(Point2::default(), 2.0, 0.1).unwrap()]).unwrap();
    let cfg = dir.path().join("check.cfg");
    fs::write(&cfg, "# ball radius\nradius = 1\n").unwrap();
    assert_eq!(code(&reachseg(&["check", "--config", s(&cfg), s(&region)])), 0);
    // explicit flags override the file
    assert_eq!(code(&reachseg(&["check", "--config", s(&cfg), "--radius", "3", s(&region)])), 1);

    fs::write(&cfg, "radius = 1\nbogus = 2\n").unwrap();
    let out = reachseg(&["check", "--config", s(&cfg), s(&region)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn energy_reports_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let img = ball_image(2.0, 100).unwrap();
    let pgm = dir.path().join("ball.pgm");
    write_pgm(&img, &pgm).unwrap();
    let layers = dir.path().join("layers.json");
    write_regions(&layers, &[shapes::disk(Point2::default(), 2.0, 512).unwrap()]).unwrap();
    let out = reachseg(&[
        "energy", "--image", s(&pgm), "--layers", s(&layers), "--radius", "2", "--pixel-size", "0.1",
        "--origin-x", "-5", "--origin-y", "-5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let b: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let g = b["G"].as_f64().unwrap();
    let exact = reachseg::example::analytic_disk_energy(2.0, 1.0, 1.0);
    assert!((g - exact).abs() / exact < 0.02, "G = {g}");

    let bad_phi = reachseg(&["energy", "--image", s(&pgm), "--layers", s(&layers), "--radius", "2", "--phi", "cubic:1"]);
    assert_eq!(code(&bad_phi), 2);
}

#[test]
fn segment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("ball.pgm");
    write_pgm(&ball_image(2.0, 80).unwrap(), &pgm).unwrap();
    let out_dir = dir.path().join("out");
    let out = reachseg(&[
        "segment", "--image", s(&pgm), "--radius", "2", "--pixel-size", "0.125", "--origin-x", "-5", "--origin-y",
        "-5", "--k", "1", "--iters", "1500", "--seed", "4", "--out", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["layer_0.json", "segmentation.json", "energy.json", "trace.csv", "moves.json", "labels.pgm"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let trace = fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,move,energy,layers\n"));

    // --seed is mandatory
    let out = reachseg(&["segment", "--image", s(&pgm), "--radius", "2", "--k", "1", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    let out = reachseg(&["segment", "--image", s(&pgm), "--radius", "2", "--seed", "1", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_and_example() {
    let out = reachseg(&["verify", "--suite", "metrics"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: PASS"));
    assert_eq!(code(&reachseg(&["verify", "--suite", "nope"])), 2);

    let out = reachseg(&["example-ball", "--radius", "2", "--grid", "100"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(code(&reachseg(&["example-ball", "--optimize"])), 2);
}

#[test]
fn regularize_mask() {
    let dir = tempfile::tempdir().unwrap();
    let pgm = dir.path().join("mask.pgm");
    write_pgm(&ball_image(3.0, 120).unwrap(), &pgm).unwrap();
    let out_file = dir.path().join("regions.json");
    let out = reachseg(&[
        "regularize", "--mask", s(&pgm), "--radius", "2", "--pixel-size", "0.125", "--out", s(&out_file),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let regions = reachseg::io::read_regions(&out_file).unwrap();
    assert_eq!(regions.len(), 1);
    assert!(reachseg::check_regions(&regions, 2.0, reachseg::sphere::REGULARIZE_TOL).unwrap().pass);
}
