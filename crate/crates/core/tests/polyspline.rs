mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varspline::{
    assemble_system, exact_energy, minimize, solve_exact, Error, InterpolationProblem, Knot,
    ManifoldModel, OptimizerOptions, PiecewisePolynomial, RowKind, VelocityConstraint,
};

const DEG: usize = 6;

fn falling(p: usize, d: usize) -> f64 {
    (0..d).map(|i| (p - i) as f64).product()
}

/// Feasible perturbation space: C¹ piecewise polynomials of degree `DEG − 1`
/// vanishing at every knot, with zero derivative at the velocity site.
fn perturbation_basis(breaks: &[f64], site: usize) -> DMatrix<f64> {
    let n = breaks.len() - 1;
    let cols = n * DEG;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let row_at = |i: usize, s: f64, d: usize, sign: f64| {
        let mut r = vec![0.0; cols];
        for p in d..DEG {
            r[i * DEG + p] = sign * falling(p, d) * s.powi((p - d) as i32);
        }
        r
    };
    for i in 0..n {
        let h = breaks[i + 1] - breaks[i];
        rows.push(row_at(i, 0.0, 0, 1.0));
        rows.push(row_at(i, h, 0, 1.0));
        if i + 1 < n {
            let a = row_at(i, h, 1, 1.0);
            let b = row_at(i + 1, 0.0, 1, -1.0);
            rows.push(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        }
    }
    if site < n {
        rows.push(row_at(site, 0.0, 1, 1.0));
    } else {
        rows.push(row_at(n - 1, breaks[n] - breaks[n - 1], 1, 1.0));
    }
    // zero-padded to square so the SVD returns a full right basis
    let c = DMatrix::from_fn(cols, cols, |r, k| rows.get(r).map_or(0.0, |row| row[k]));
    let svd = c.svd(false, true);
    let vt = svd.v_t.unwrap();
    let null: Vec<usize> = (0..cols).filter(|&i| svd.singular_values[i] <= 1e-10).collect();
    DMatrix::from_fn(cols, null.len(), |r, c| vt[(null[c], r)])
}

fn energy_of(breaks: &[f64], coeffs: &[Vec<f64>]) -> f64 {
    let poly = PiecewisePolynomial {
        order: 3,
        dim: 1,
        breakpoints: breaks.to_vec(),
        coeffs: coeffs.iter().map(|c| vec![c.clone()]).collect(),
    };
    exact_energy(&poly).energy_int
}

#[test]
fn exact_solution_beats_random_feasible_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for site in [0usize, 1, 3] {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(1),
            vec![
                Knot::new(0.0, vec![0.0]),
                Knot::new(0.3, vec![1.0]),
                Knot::new(0.6, vec![-0.5]),
                Knot::new(1.0, vec![0.4]),
            ],
            Some((site, vec![0.7])),
        )
        .unwrap();
        let poly = solve_exact(&p).unwrap();
        let base_e = exact_energy(&poly).energy_int;
        let basis = perturbation_basis(&poly.breakpoints, site);
        assert!(basis.ncols() > 0);
        let n = poly.intervals();
        for _ in 0..100 {
            let w = nalgebra::DVector::from_fn(basis.ncols(), |_, _| rng.gen_range(-1.0..1.0));
            let xi = &basis * w;
            let eps: f64 = rng.gen_range(1e-3..1.0);
            let coeffs: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..DEG)
                        .map(|q| eps * xi[i * DEG + q] + poly.coeffs[i][0].get(q).copied().unwrap_or(0.0))
                        .collect()
                })
                .collect();
            let e = energy_of(&poly.breakpoints, &coeffs);
            assert!(e >= base_e - 1e-12 * base_e.max(1.0), "site {site}: {e} < {base_e}");
        }
    }
}

#[test]
fn optimizer_agrees_with_exact_solution_in_the_plane() {
    let p = common::planar_four(Some(0));
    let poly = solve_exact(&p).unwrap();
    let (curve, rep) = minimize(&p, 512, &OptimizerOptions::default()).unwrap();
    assert!(rep.converged);
    let mut sup: f64 = 0.0;
    for (i, t) in curve.grid().times().into_iter().enumerate() {
        let seg = poly.eval(t, 0);
        for q in 0..2 {
            sup = sup.max((curve.node(i)[q] - seg[q]).abs());
        }
    }
    assert!(sup <= 1e-3, "sup error {sup}");
    assert!((rep.final_energy - exact_energy(&poly).energy_f).abs() <= 1e-3 * exact_energy(&poly).energy_f);
}

#[test]
fn collinear_data_gives_the_line() {
    for site in [0, 2, 4] {
        let knots = (0..=4).map(|i| Knot::new(i as f64 / 4.0, vec![i as f64 / 4.0])).collect();
        let p = InterpolationProblem::cubic(ManifoldModel::euclidean(1), knots, Some((site, vec![1.0]))).unwrap();
        let poly = solve_exact(&p).unwrap();
        assert!(exact_energy(&poly).energy_f < 1e-24);
        for t in [0.1, 0.33, 0.9] {
            assert!((poly.eval(t, 0)[0] - t).abs() < 1e-13);
        }
    }
}

#[test]
fn cubic_example_values() {
    let poly = solve_exact(&common::cubic_benchmark()).unwrap();
    assert_eq!(poly.eval(1.0, 0)[0], 1.0);
    assert!(poly.eval(1.0, 2)[0].abs() < 1e-14);
    assert_eq!(poly.eval(0.5, 4)[0], 0.0);
}

#[test]
fn curved_manifolds_are_refused() {
    let p = common::three_knot(ManifoldModel::sphere(), Some(0));
    assert!(matches!(solve_exact(&p), Err(Error::Unsupported(_))));
}

#[test]
fn too_many_intervals_refused() {
    let knots = (0..=51).map(|i| Knot::new(i as f64 / 51.0, vec![0.0])).collect();
    let p = InterpolationProblem::cubic(ManifoldModel::euclidean(1), knots, None).unwrap();
    assert!(matches!(solve_exact(&p), Err(Error::Conditioning { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn constraint_count_is_2kn(
        n in 1usize..=6,
        k in 2usize..=4,
        site_pick in 0usize..=7,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let site = site_pick % (n + 1);
        let mut times: Vec<f64> = (1..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        prop_assume!(times.windows(2).all(|w| w[1] - w[0] > 0.02));
        prop_assume!(times.iter().all(|&t| t > 0.02 && t < 0.98));
        let mut all = vec![0.0];
        all.extend(times);
        all.push(1.0);
        let n = all.len() - 1;
        let site = site.min(n);
        let knots = all.iter().map(|&t| Knot::new(t, vec![rng.gen_range(-1.0..1.0)])).collect();
        let velocity = VelocityConstraint {
            site,
            derivs: (1..k).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect(),
        };
        let p = InterpolationProblem::new(ManifoldModel::euclidean(1), k, knots, Some(velocity)).unwrap();
        let sys = assemble_system(&p).unwrap();
        prop_assert_eq!(sys.size(), 2 * k * n);
        prop_assert_eq!(sys.rows.len(), 2 * k * n);
        let interp = sys.rows.iter().filter(|r| matches!(r, RowKind::Interpolation { .. })).count();
        prop_assert_eq!(interp, 2 * n);
        let poly = sys.solve().unwrap();
        prop_assert!(sys.max_residual(&poly) <= 1e-9);
    }
}
