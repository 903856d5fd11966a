use varspline::cylinder::{bump_energy, class_energy, parabola, square_scan};
use varspline::{
    dirichlet_sequence, minimize, natural_periodic_sequence, parabola_energy, OptimizerOptions,
    WindingProblem, GOLDEN,
};

#[test]
fn optimizer_matches_exact_class_energy_on_the_cover() {
    let r = 0.625;
    let scan = square_scan(r, Some(0.0), 10).unwrap();
    let best = &scan.argmin;
    let wp = WindingProblem::new(r, best.m, best.k0, Some(0.0)).unwrap();
    let (curve, rep) = minimize(&wp.cylinder_problem().unwrap(), 512, &OptimizerOptions::default()).unwrap();
    assert!(rep.converged);
    let rel = (rep.final_energy - best.energy_f).abs() / best.energy_f;
    assert!(rel <= 1e-3, "relative energy error {rel}");
    assert!(curve.coords().chunks(2).all(|p| p[1] == 0.0));
}

#[test]
fn scan_energies_grow_away_from_the_argmin() {
    let scan = square_scan(GOLDEN, Some(0.0), 12).unwrap();
    let a = scan.argmin.clone();
    for k in -12..=12 {
        for dir in [-1i64, 1] {
            let mut m = a.m;
            let mut prev = scan.cell(m, k).unwrap().energy_int;
            let mut increasing_tail = true;
            let mut seen_increase = false;
            while let Some(c) = scan.cell(m + dir, k) {
                if c.energy_int > prev {
                    seen_increase = true;
                } else if seen_increase {
                    increasing_tail = false;
                }
                prev = c.energy_int;
                m += dir;
            }
            assert!(increasing_tail, "column k0 = {k}");
        }
    }
    for m in -12..=12 {
        let row: Vec<f64> = (-12..=12).map(|k| scan.cell(m, k).unwrap().energy_int).collect();
        let lo = row.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(row[lo..].windows(2).all(|w| w[1] > w[0]));
        assert!(row[..=lo].windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn aligned_rational_class_has_zero_energy() {
    let c = class_energy(0.5, 0, 1, Some(1.0)).unwrap();
    assert!(c.energy_int < 1e-24);
    assert_eq!(parabola(0.5, 1, 0), (0.0, 1.0));
}

#[test]
fn rational_middle_knot_is_flagged() {
    assert_eq!(WindingProblem::new(0.625, 0, 1, None).unwrap().rational_form(), Some((5, 8)));
    assert_eq!(WindingProblem::new(GOLDEN, 0, 1, None).unwrap().rational_form(), None);
    assert!(WindingProblem::new(1.2, 0, 1, None).is_err());
}

#[test]
fn parabola_bounds_the_natural_class_spline() {
    for (m, k) in [(0, 1), (2, 4), (-3, -5), (10, 17)] {
        let spline = class_energy(GOLDEN, m, k, None).unwrap().energy_int;
        assert!(spline <= parabola_energy(GOLDEN, k, m) * (1.0 + 1e-12));
    }
}

#[test]
fn dirichlet_gaps_and_speeds() {
    let seq = dirichlet_sequence(GOLDEN, 10_000).unwrap();
    assert!(seq.windows(2).all(|w| w[1].gap <= w[0].gap));
    let at_100 = dirichlet_sequence(GOLDEN, 100).unwrap().pop().unwrap();
    assert!(seq.last().unwrap().gap < at_100.gap);
    assert!(seq.iter().any(|e| e.initial_speed > 1e3));
    for e in &seq {
        assert!((e.energy_f - 0.5 * e.energy_int).abs() <= 1e-15 * e.energy_int);
    }
}

#[test]
fn bump_energy_scales_like_inverse_cube() {
    let d = 0.2;
    let e = [bump_energy(d), bump_energy(d / 2.0), bump_energy(d / 4.0)];
    for w in e.windows(2) {
        let slope = (w[1] / w[0]).log2() / -1.0;
        assert!((-3.2..=-2.8).contains(&slope), "slope {slope}");
    }
}

#[test]
fn natural_periodic_support_must_fit() {
    assert!(natural_periodic_sequence(0.9, 100, 0.2).is_err());
    let seq = natural_periodic_sequence(GOLDEN, 1000, 0.1).unwrap();
    assert!(seq.windows(2).all(|w| w[1].energy_int <= w[0].energy_int));
}
