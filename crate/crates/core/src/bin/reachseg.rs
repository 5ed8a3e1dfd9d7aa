//! Command-line front end. Exit codes: 0 success/pass, 1 fail/infeasible,
//! 2 usage error, 3 I/O or parse error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use reachseg::energy::{total_energy, EnergyParams, LayeredSegmentation, PhiModel};
use reachseg::example::{example_ball, OptimizerRun};
use reachseg::geometry::Point2;
use reachseg::io::{self, IoError};
use reachseg::optimizer::{optimize_fixed_k, optimize_variable_k, Schedule};
use reachseg::raster::{BinaryMask, RasterImage};
use reachseg::sphere::{check_regions, regularize_raster_with_tol, DEFAULT_TOL, REGULARIZE_TOL};
use reachseg::verify::{run_suite, Suite};

#[derive(Parser, Debug)]
#[command(name = "reachseg", version, about = "Layered segmentation with a uniform ball-condition constraint")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Test a region file against the ball condition; exit 0 iff it passes.
    Check(CheckArgs),
    /// Evaluate the layered functional for a segmentation on an image.
    Energy(EnergyArgs),
    /// Search for a low-energy feasible segmentation of an image.
    Segment(SegmentArgs),
    /// Run a diagnostic suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Reproduce the ball-minimizer demonstration.
    ExampleBall(ExampleArgs),
    /// Turn a binary image into feasible regions by disk opening and closing.
    Regularize(RegularizeArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// key=value file supplying defaults for any long flag of the subcommand.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Frame {
    /// Side length of one pixel in image units.
    #[arg(long, default_value_t = 1.0)]
    pixel_size: f64,
    /// x coordinate of the lower-left image corner.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    origin_x: f64,
    /// y coordinate of the lower-left image corner.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    origin_y: f64,
}

impl Frame {
    fn origin(&self) -> Point2 {
        Point2::new(self.origin_x, self.origin_y)
    }
}

#[derive(Args, Debug)]
struct Weights {
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// power:P, nm:NU,A,B or quadratic:C0,C2
    #[arg(long, default_value = "power:2")]
    phi: String,
}

impl Weights {
    fn params(&self) -> Result<EnergyParams, Failure> {
        let phi: PhiModel = self.phi.parse().map_err(|e| Failure::usage(format!("{e}")))?;
        EnergyParams::new(self.alpha, self.beta, self.gamma, self.radius, phi).map_err(|e| Failure::usage(e.to_string()))
    }
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Region document; an array is checked as one multi-component set.
    region_file: PathBuf,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    image: PathBuf,
    /// Region document listing the layers, frontmost first.
    #[arg(long)]
    layers: PathBuf,
    #[command(flatten)]
    weights: Weights,
    #[command(flatten)]
    frame: Frame,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    weights: Weights,
    #[command(flatten)]
    frame: Frame,
    /// Maximum number of layers.
    #[arg(long, conflicts_with = "variable_k")]
    k: Option<usize>,
    /// Let the layer count vary, bounded by floor(G/(beta pi R^2)).
    #[arg(long)]
    variable_k: bool,
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long)]
    seed: u64,
    /// Initial temperature (default: 0.05 of the seed energy).
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long, default_value_t = 0.995)]
    cooling: f64,
    /// Move size as a fraction of R.
    #[arg(long, default_value_t = 0.1)]
    move_scale: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// metrics, semicontinuity, compactness or equivalence
    #[arg(long)]
    suite: String,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExampleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 2.0)]
    radius: f64,
    /// Pixels per side of the frame.
    #[arg(long, default_value_t = 200)]
    grid: usize,
    /// Also run the optimizer from a perturbed disk.
    #[arg(long, requires = "seed")]
    optimize: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20_000)]
    iters: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegularizeArgs {
    #[command(flatten)]
    common: Common,
    /// Binary (or grayscale, thresholded) PGM mask.
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    radius: f64,
    /// Pixels with value >= threshold are foreground.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Acceptance tolerance for the extracted contours.
    #[arg(long, default_value_t = REGULARIZE_TOL)]
    tol: f64,
    #[command(flatten)]
    frame: Frame,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: 2, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Failure {
        Failure { code: 3, message: message.into() }
    }

    fn fail(message: impl Into<String>) -> Failure {
        Failure { code: 1, message: message.into() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Failure {
        match e {
            IoError::Config { .. } => Failure::usage(e.to_string()),
            _ => Failure::io(e.to_string()),
        }
    }
}

/// Outcome of a successful run: whether the command's pass condition held.
type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let argv = match with_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return ExitCode::from(f.code);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Expands `--config FILE` into flags placed before the user's own, so that
/// explicit flags win.
fn with_config(argv: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(sub_pos) = argv.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|p| p + 1)
    else {
        return Ok(argv);
    };
    let mut config = None;
    let mut rest = Vec::new();
    let mut it = argv[sub_pos + 1..].iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            config = it.next().cloned();
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(v.into());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(config) = config else {
        return Ok(argv);
    };
    let cmd = Cli::command();
    let name = argv[sub_pos].to_string_lossy().into_owned();
    let Some(sub) = cmd.find_subcommand(&name) else {
        return Ok(argv);
    };
    let flags: Vec<(String, bool)> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(|l| (l.to_string(), a.get_action().takes_values())))
        .filter(|(l, _)| l != "config" && l != "help")
        .collect();
    let valid: Vec<&str> = flags.iter().map(|(l, _)| l.as_str()).collect();
    let entries = io::read_config(Path::new(&config), &valid)?;

    let mut out: Vec<OsString> = argv[..=sub_pos].to_vec();
    for (key, value) in entries {
        let takes_value = flags.iter().find(|(l, _)| *l == key).is_some_and(|f| f.1);
        if takes_value {
            out.push(format!("--{key}").into());
            out.push(value.into());
        } else {
            match value.as_str() {
                "true" | "yes" | "1" => out.push(format!("--{key}").into()),
                "false" | "no" | "0" => {}
                other => return Err(Failure::usage(format!("config key {key}: expected true or false, got {other:?}"))),
            }
        }
    }
    out.extend(rest);
    Ok(out)
}

fn run(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Check(a) => check(a),
        Cmd::Energy(a) => energy(a),
        Cmd::Segment(a) => segment(a),
        Cmd::Verify(a) => verify(a),
        Cmd::ExampleBall(a) => example(a),
        Cmd::Regularize(a) => regularize(a),
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

fn read_image(path: &Path, frame: &Frame) -> Result<RasterImage, Failure> {
    if !(frame.pixel_size > 0.0) {
        return Err(Failure::usage("--pixel-size must be positive"));
    }
    Ok(io::read_pgm(path, frame.pixel_size, frame.origin())?)
}

fn check(a: CheckArgs) -> Outcome {
    let regions = io::read_regions(&a.region_file)?;
    let report = check_regions(&regions, a.radius, a.tol).map_err(|e| Failure::fail(e.to_string()))?;
    print!("{}", json(&report));
    Ok(report.pass)
}

fn energy(a: EnergyArgs) -> Outcome {
    let params = a.weights.params()?;
    let img = read_image(&a.image, &a.frame)?;
    let seg = LayeredSegmentation::new(io::read_regions(&a.layers)?);
    let breakdown = total_energy(&seg, &img, &params).map_err(|e| Failure::fail(e.to_string()))?;
    print!("{}", json(&breakdown));
    Ok(breakdown.feasible)
}

fn segment(a: SegmentArgs) -> Outcome {
    let params = a.weights.params()?;
    if a.k.is_none() && !a.variable_k {
        return Err(Failure::usage("one of --k or --variable-k is required"));
    }
    let schedule = Schedule {
        iterations: a.iters,
        t0: a.t0,
        cooling: a.cooling,
        seed: a.seed,
        move_scale: a.move_scale,
    };
    schedule.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let img = read_image(&a.image, &a.frame)?;
    let report = match a.k {
        Some(k) => optimize_fixed_k(&img, &params, &schedule, k),
        None => optimize_variable_k(&img, &params, &schedule),
    }
    .map_err(|e| Failure::fail(e.to_string()))?;

    fs::create_dir_all(&a.out).map_err(|e| Failure::io(format!("{}: {e}", a.out.display())))?;
    let layers = &report.final_segmentation.layers;
    for (i, layer) in layers.iter().enumerate() {
        io::write_regions(&a.out.join(format!("layer_{i}.json")), std::slice::from_ref(layer))?;
    }
    io::write_text(&a.out.join("segmentation.json"), &(io::regions_to_json(layers) + "\n"))?;
    io::write_text(&a.out.join("energy.json"), &json(&report.final_breakdown))?;
    io::write_text(&a.out.join("trace.csv"), &report.trace_csv())?;
    io::write_text(&a.out.join("moves.json"), &json(&report.move_stats))?;
    io::write_label_image(&report.final_segmentation, img.grid(), &a.out.join("labels.pgm"))?;
    println!(
        "layers {}  seed energy {}  best energy {}  feasible {}",
        layers.len(),
        report.seed_energy,
        report.best_energy,
        report.feasible
    );
    Ok(report.feasible)
}

fn verify(a: VerifyArgs) -> Outcome {
    let suite: Suite = a.suite.parse().map_err(Failure::usage)?;
    if !(a.radius > 0.0) {
        return Err(Failure::usage("--radius must be positive"));
    }
    let report = run_suite(suite, a.radius).map_err(|e| Failure::fail(e.to_string()))?;
    let text = report.to_text();
    match &a.out {
        Some(p) => io::write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(report.pass())
}

fn example(a: ExampleArgs) -> Outcome {
    let run = a.seed.filter(|_| a.optimize).map(|seed| OptimizerRun { seed, iterations: a.iters });
    let report = example_ball(a.radius, a.grid, run).map_err(|e| Failure::usage(e.to_string()))?;
    let text = report.to_text();
    match &a.out {
        Some(p) => io::write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(report.disk_wins)
}

fn regularize(a: RegularizeArgs) -> Outcome {
    let img = read_image(&a.mask, &a.frame)?;
    let data = img.values().iter().map(|&v| v >= a.threshold).collect();
    let mask = BinaryMask::new(*img.grid(), data).map_err(|e| Failure::io(e.to_string()))?;
    let regions = regularize_raster_with_tol(&mask, a.radius, a.tol).map_err(|e| Failure::usage(e.to_string()))?;
    io::write_text(&a.out, &(io::regions_to_json(&regions) + "\n"))?;
    println!("{} region(s) written to {}", regions.len(), a.out.display());
    Ok(true)
}
