//! Named diagnostic suites behind the `verify` subcommand. Each suite yields a
//! pass/fail table plus raw comma-separated metrics.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::convergence::{
    analyze_sequence, auto_frame, counterexample_pair, equivalence_probe, generate_family, hausdorff_distance,
    l1_distance, standard_pairs, ConvergenceError, Family, SequenceTolerances,
};
use crate::energy::PhiModel;
use crate::geometry::{Point2, Region};
use crate::shapes;

/// Terms per generated sequence.
pub const FAMILY_TERMS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Metrics,
    Semicontinuity,
    Compactness,
    Equivalence,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Metrics, Suite::Semicontinuity, Suite::Compactness, Suite::Equivalence];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Metrics => "metrics",
            Suite::Semicontinuity => "semicontinuity",
            Suite::Compactness => "compactness",
            Suite::Equivalence => "equivalence",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown suite {s:?}; expected metrics, semicontinuity, compactness or equivalence"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub radius: f64,
    pub rows: Vec<SuiteRow>,
    /// Header line plus one line per raw measurement.
    pub raw_csv: String,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite {} at R = {}", self.suite, self.radius);
        for r in &self.rows {
            let _ = writeln!(s, "{:<4} {:<48} {}", if r.pass { "PASS" } else { "FAIL" }, r.check, r.detail);
        }
        let _ = writeln!(s, "overall: {}", if self.pass() { "PASS" } else { "FAIL" });
        s.push('\n');
        s.push_str(&self.raw_csv);
        s
    }
}

struct Builder {
    rows: Vec<SuiteRow>,
    csv: String,
}

impl Builder {
    fn new(header: &str) -> Builder {
        Builder { rows: Vec::new(), csv: format!("{header}\n") }
    }

    fn row(&mut self, check: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.rows.push(SuiteRow { check: check.into(), pass, detail: detail.into() });
    }

    fn raw(&mut self, line: String) {
        self.csv.push_str(&line);
        self.csv.push('\n');
    }
}

const FAMILIES: [Family; 3] = [Family::ShrinkingRadialPerturbation, Family::TranslationDecay, Family::RadiusDecay];

/// Runs one suite at radius `R` (`R > 0`).
pub fn run_suite(suite: Suite, radius: f64) -> Result<SuiteReport, ConvergenceError> {
    let (rows, raw_csv) = match suite {
        Suite::Metrics => metrics(radius)?,
        Suite::Semicontinuity | Suite::Compactness => sequences(suite, radius)?,
        Suite::Equivalence => equivalence(radius)?,
    };
    Ok(SuiteReport { suite, radius, rows, raw_csv })
}

fn metrics(radius: f64) -> Result<(Vec<SuiteRow>, String), ConvergenceError> {
    let mut b = Builder::new("case,hausdorff,l1");
    let r = radius;
    let h = r / 32.0;
    let o = Point2::default();
    let disk = |c: Point2, rad: f64| shapes::disk_with_spacing(c, rad, h.min(rad / 32.0));

    let a = vec![disk(o, r)?];
    let b1 = vec![disk(o, 1.1 * r)?];
    let c = vec![disk(Point2::new(0.3 * r, 0.0), r)?];
    let d = vec![disk(Point2::new(-0.2 * r, 0.25 * r), 1.3 * r)?];
    let frame = auto_frame([a.as_slice(), b1.as_slice(), c.as_slice(), d.as_slice()], 800)?;

    let h_same = hausdorff_distance(&a, &a)?;
    let h_conc = hausdorff_distance(&a, &b1)?;
    let h_shift = hausdorff_distance(&a, &c)?;
    let l1_conc = l1_distance(&a, &b1, &frame);
    let l1_expected = std::f64::consts::PI * r * r * (1.21 - 1.0);
    b.raw(format!("identical,{h_same},{}", l1_distance(&a, &a, &frame)));
    b.raw(format!("concentric 1.1,{h_conc},{l1_conc}"));
    b.raw(format!("shift 0.3,{h_shift},{}", l1_distance(&a, &c, &frame)));
    b.row("hausdorff identical = 0", h_same == 0.0, format!("{h_same}"));
    b.row(
        "hausdorff concentric = 0.1R",
        (h_conc - 0.1 * r).abs() <= 1e-3 * r,
        format!("{h_conc:.6} vs {:.6}", 0.1 * r),
    );
    b.row(
        "hausdorff translated = 0.3R",
        (h_shift - 0.3 * r).abs() <= 1e-3 * r,
        format!("{h_shift:.6} vs {:.6}", 0.3 * r),
    );
    b.row(
        "l1 concentric annulus area",
        (l1_conc - l1_expected).abs() <= 0.02 * l1_expected,
        format!("{l1_conc:.6} vs {l1_expected:.6}"),
    );

    let sets = [&a, &b1, &c, &d];
    let mut sym = 0.0f64;
    let mut triangle_ok = true;
    let mut l1_ok = true;
    for x in sets {
        for y in sets {
            let hxy = hausdorff_distance(x, y)?;
            sym = sym.max((hxy - hausdorff_distance(y, x)?).abs());
            let area: f64 = x.iter().chain(y.iter()).map(Region::area).sum();
            l1_ok &= l1_distance(x, y, &frame) <= area + 1e-9;
            for z in sets {
                triangle_ok &= hxy <= hausdorff_distance(x, z)? + hausdorff_distance(z, y)? + 1e-12;
            }
        }
    }
    b.row("hausdorff symmetric", sym <= 1e-12, format!("max asymmetry {sym:e}"));
    b.row("hausdorff triangle inequality", triangle_ok, "all sampled triples");
    b.row("l1 <= area(A) + area(B)", l1_ok, "all sampled pairs");
    Ok((b.rows, b.csv))
}

fn sequences(suite: Suite, radius: f64) -> Result<(Vec<SuiteRow>, String), ConvergenceError> {
    let phi = PhiModel::power(2.0).expect("valid exponent");
    let tol = SequenceTolerances::default();
    let mut b = Builder::new("family,term,hausdorff_to_limit,l1_to_limit,perimeter,f_value");
    for family in FAMILIES {
        let (seq, limit) = generate_family(family, radius, FAMILY_TERMS)?;
        let rep = analyze_sequence(&seq, &limit, radius, &phi, &tol)?;
        for (i, t) in rep.terms.iter().enumerate() {
            b.raw(format!(
                "{},{},{},{},{},{}",
                family.name(),
                i + 1,
                t.hausdorff_to_limit,
                t.l1_to_limit,
                t.perimeter,
                t.f_value
            ));
        }
        let last = rep.terms.last().expect("nonempty sequence");
        match suite {
            Suite::Semicontinuity => {
                let tail_min = rep.terms[rep.terms.len() - rep.terms.len().div_ceil(4).max(1)..]
                    .iter()
                    .map(|t| t.f_value)
                    .fold(f64::INFINITY, f64::min);
                b.row(
                    format!("{}: liminf inequality ({})", family.name(), rep.label),
                    rep.semicontinuity_ok,
                    format!("F(limit) = {:.6}, tail min F = {tail_min:.6}", rep.limit_f),
                );
            }
            _ => {
                b.row(
                    format!("{}: perimeter converges", family.name()),
                    rep.perimeter_converges,
                    format!("last {:.6} vs limit {:.6}", last.perimeter, rep.limit_perimeter),
                );
                let shrinking = last.hausdorff_to_limit < rep.terms[0].hausdorff_to_limit
                    && last.l1_to_limit < rep.terms[0].l1_to_limit;
                b.row(
                    format!("{}: hausdorff and l1 shrink", family.name()),
                    shrinking,
                    format!("hausdorff {:.3e}, l1 {:.3e} at the last term", last.hausdorff_to_limit, last.l1_to_limit),
                );
                b.row(format!("{}: limit in class", family.name()), rep.limit_feasible, "");
            }
        }
    }
    Ok((b.rows, b.csv))
}

fn equivalence(radius: f64) -> Result<(Vec<SuiteRow>, String), ConvergenceError> {
    let mut pairs = standard_pairs(radius)?;
    let counter = pairs.len();
    pairs.push(counterexample_pair(radius)?);
    let rep = equivalence_probe(&pairs, radius)?;
    let mut b = Builder::new("pair,l1,hausdorff,in_class");
    for (i, m) in rep.pairs.iter().enumerate() {
        b.raw(format!("{i},{},{},{}", m.l1, m.hausdorff, m.in_class));
    }
    let identical = rep.pairs[0];
    b.row(
        "identical pair has zero distances",
        identical.l1 == 0.0 && identical.hausdorff == 0.0,
        format!("l1 {}, hausdorff {}", identical.l1, identical.hausdorff),
    );
    let monotone = rep.deciles.windows(2).all(|w| w[0].max_hausdorff <= w[1].max_hausdorff);
    let small = rep.deciles.first().map_or(f64::INFINITY, |d| d.max_hausdorff);
    b.row(
        "in-class hausdorff shrinks with l1",
        monotone && small <= 0.1 * radius,
        format!("lowest decile max hausdorff {small:.4e}"),
    );
    b.row(
        "out-of-class counterexample flagged",
        rep.counterexamples == vec![counter],
        format!("l1 {:.4e}, hausdorff {:.4}", rep.pairs[counter].l1, rep.pairs[counter].hausdorff),
    );
    Ok((b.rows, b.csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_at_unit_radius() {
        for s in Suite::ALL {
            let rep = run_suite(s, 1.0).unwrap();
            assert!(rep.pass(), "{}", rep.to_text());
            assert!(rep.raw_csv.lines().count() > 1);
        }
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }
}
