use std::f64::consts::PI;

use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use reachseg::convergence::hausdorff_distance;
use reachseg::energy::{curvature_energy, total_energy};
use reachseg::io::{parse_regions, regions_to_json};
use reachseg::optimizer::metropolis;
use reachseg::{check_region, shapes, EnergyParams, Grid, LayeredSegmentation, PhiModel, Point2, RasterImage, DEFAULT_TOL};

fn point() -> impl Strategy<Value = Point2> {
    (-20.0..20.0f64, -20.0..20.0f64).prop_map(|(x, y)| Point2::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn area_and_perimeter_follow_similarity(c in point(), r in 0.5..5.0f64, s in 0.2..4.0f64) {
        let d = shapes::stadium(c, r, 2.0 * r, r / 10.0).unwrap();
        let t = d.translated(Point2::new(3.0, -7.0));
        prop_assert!((t.area() - d.area()).abs() <= 1e-9 * d.area());
        let sc = d.scaled(s);
        prop_assert!((sc.area() - s * s * d.area()).abs() <= 1e-9 * sc.area());
        prop_assert!((sc.perimeter() - s * d.perimeter()).abs() <= 1e-9 * sc.perimeter());
    }

    #[test]
    fn disks_at_least_r_pass(r in 0.3..4.0f64, k in 1.0..3.0f64, c in point()) {
        let d = shapes::disk_with_spacing(c, k * r, r / 16.0).unwrap();
        prop_assert!(check_region(&d, r, DEFAULT_TOL).unwrap().pass);
    }

    #[test]
    fn disks_well_below_r_fail(r in 0.3..4.0f64, k in 0.3..0.9f64) {
        let d = shapes::disk_with_spacing(Point2::default(), k * r, r / 16.0).unwrap();
        let rep = check_region(&d, r, DEFAULT_TOL).unwrap();
        prop_assert!(!rep.pass);
        prop_assert!(rep.per_vertex.iter().all(|v| !v.interior_ok));
    }

    #[test]
    fn membership_is_scale_equivariant(cap in 0.8..1.5f64, len in 0.0..4.0f64, s in 0.25..4.0f64) {
        let st = shapes::stadium(Point2::default(), cap, len, 0.05).unwrap();
        let a = check_region(&st, 1.0, DEFAULT_TOL).unwrap();
        let b = check_region(&st.scaled(s), s, DEFAULT_TOL).unwrap();
        prop_assert_eq!(a.pass, b.pass);
        prop_assert!((a.worst_violation - b.worst_violation).abs() < 1e-9);
    }

    #[test]
    fn circle_curvature_energy_matches_closed_form(r in 0.5..10.0f64) {
        let d = shapes::disk(Point2::default(), r, 512).unwrap();
        let e = curvature_energy(d.outer(), &PhiModel::power(2.0).unwrap());
        let exact = 2.0 * PI * r + 2.0 * PI / r;
        prop_assert!((e - exact).abs() <= 0.01 * exact);
    }

    #[test]
    fn total_curvature_at_least_two_pi(amp in 0.0..0.4f64, freq in 2u32..8, n in 64usize..400) {
        let c = shapes::perturbed_circle(Point2::default(), 3.0, amp, freq, n).unwrap();
        prop_assert!(c.outer().total_absolute_curvature() >= 2.0 * PI - 1e-9);
    }

    #[test]
    fn region_json_round_trips_exactly(c in point(), r in 0.5..5.0f64, n in 8usize..200) {
        let regions = vec![shapes::disk(c, r, n).unwrap(), shapes::annulus(c, 3.0 * r, r, r / 4.0).unwrap()];
        let back = parse_regions(&regions_to_json(&regions)).unwrap();
        prop_assert_eq!(back, regions);
    }

    #[test]
    fn hausdorff_symmetric_and_matches_offsets(dx in -2.0..2.0f64, dr in 0.0..1.0f64) {
        let a = vec![shapes::disk(Point2::default(), 2.0, 256).unwrap()];
        let b = vec![shapes::disk(Point2::new(dx, 0.0), 2.0 + dr, 256).unwrap()];
        let h = hausdorff_distance(&a, &b).unwrap();
        prop_assert!((h - hausdorff_distance(&b, &a).unwrap()).abs() < 1e-12);
        // concentric-then-shifted circles: distance is |dx| + dr
        prop_assert!((h - (dx.abs() + dr)).abs() <= 0.02);
    }

    #[test]
    fn energy_terms_sum_to_total(shift in -1.0..1.0f64, r in 1.0..2.5f64) {
        let grid = Grid::square(-8.0, 8.0, 64).unwrap();
        let img = RasterImage::from_fn(grid, |p| if p.norm() <= 2.0 { 1.0 } else { 0.0 }).unwrap();
        let params = EnergyParams::new(10.0, 1.0, 1.0, 1.0, PhiModel::power(2.0).unwrap()).unwrap();
        let seg = LayeredSegmentation::new(vec![
            shapes::disk_with_spacing(Point2::new(shift, 0.0), r, 0.1).unwrap(),
            shapes::disk_with_spacing(Point2::new(shift + 1.0, 1.0), 1.0, 0.1).unwrap(),
        ]);
        let b = total_energy(&seg, &img, &params).unwrap();
        let sum: f64 = b.fidelity_background
            + b.fidelity_per_layer.iter().sum::<f64>()
            + b.area_terms.iter().sum::<f64>()
            + b.curvature_terms.iter().sum::<f64>();
        prop_assert!((b.g - sum).abs() <= 1e-9 * b.g);
        prop_assert!(b.fidelity_per_layer.iter().all(|&f| f >= 0.0));
    }

    #[test]
    fn metropolis_rules(delta in -10.0..10.0f64, t in 0.0..5.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if delta < 0.0 {
            prop_assert!(metropolis(delta, t, &mut rng));
        }
        prop_assert!(!metropolis(0.0, t, &mut rng));
        prop_assert!(!metropolis(delta.abs() + 1e-9, 0.0, &mut rng));
    }
}
