mod common;

use varspline::{
    minimize, solve_exact, verify, Candidate, ChartCurve, ManifoldModel, OptimizerOptions,
    TimeGrid,
};

#[test]
fn sphere_minimizers_pass_grid_tolerances() {
    for site in [Some(0), Some(1), Some(2), None] {
        let p = common::three_knot(ManifoldModel::sphere(), site);
        for m in [64, 128] {
            let (curve, rep) = minimize(&p, m, &OptimizerOptions::default()).unwrap();
            assert!(rep.converged);
            let v = verify(&Candidate::Discrete(curve), &p).unwrap();
            assert!(v.passed(), "site {site:?} M {m}: {v:?}");
        }
    }
}

#[test]
fn residuals_shrink_under_refinement() {
    let p = common::three_knot(ManifoldModel::sphere(), Some(0));
    let report = |m| {
        let (curve, _) = minimize(&p, m, &OptimizerOptions::default()).unwrap();
        verify(&Candidate::Discrete(curve), &p).unwrap()
    };
    let (a, b) = (report(64), report(128));
    assert!(b.el_max() < a.el_max() / 3.0);
    assert!(b.junctions.max_constrained_jump(2) < a.junctions.max_constrained_jump(2));
    assert!(b.junctions.max_natural() < a.junctions.max_natural());
}

#[test]
fn exact_flat_solutions_pass() {
    for site in [Some(0), Some(2), Some(4), None] {
        let p = common::planar_four(site);
        let v = verify(&Candidate::Exact(solve_exact(&p).unwrap()), &p).unwrap();
        assert!(v.passed(), "{v:?}");
        assert!(v.h.is_none());
    }
}

#[test]
fn wiggly_curve_fails() {
    let p = common::three_knot(ManifoldModel::sphere(), Some(0));
    let curve = ChartCurve::from_fn(TimeGrid::unit(64).unwrap(), ManifoldModel::sphere(), |t| {
        vec![0.1 + 0.3 * (9.0 * t).sin(), 0.7 * t + 0.2 * (13.0 * t).cos() - 0.2]
    })
    .unwrap();
    let v = verify(&Candidate::Discrete(curve), &p).unwrap();
    assert!(!v.passed());
    assert!(v.el_max() > 1.0);
}

#[test]
fn verification_is_deterministic() {
    let p = common::three_knot(ManifoldModel::sphere(), Some(1));
    let (curve, _) = minimize(&p, 64, &OptimizerOptions::default()).unwrap();
    let a = verify(&Candidate::Discrete(curve.clone()), &p).unwrap();
    let b = verify(&Candidate::Discrete(curve), &p).unwrap();
    assert_eq!(a, b);
}
