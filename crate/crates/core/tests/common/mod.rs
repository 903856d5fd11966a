#![allow(dead_code)]

use varspline::{InterpolationProblem, Knot, ManifoldModel};

/// `γ(0) = 0`, `γ(1) = 1`, `γ̇(0) = 0`; exact solution `3t²/2 − t³/2`.
pub fn cubic_benchmark() -> InterpolationProblem {
    InterpolationProblem::cubic(
        ManifoldModel::euclidean(1),
        vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
        Some((0, vec![0.0])),
    )
    .unwrap()
}

pub fn cubic_benchmark_exact(t: f64) -> f64 {
    1.5 * t * t - 0.5 * t * t * t
}

/// Three knots in a chart of the given manifold, velocity `(0, 1)` at `site`.
pub fn three_knot(manifold: ManifoldModel, site: Option<usize>) -> InterpolationProblem {
    InterpolationProblem::cubic(
        manifold,
        vec![
            Knot::new(0.0, vec![0.1, 0.0]),
            Knot::new(0.5, vec![0.6, 0.5]),
            Knot::new(1.0, vec![-0.2, 0.7]),
        ],
        site.map(|s| (s, vec![0.0, 1.0])),
    )
    .unwrap()
}

/// Four equispaced planar knots, velocity at `site`.
pub fn planar_four(site: Option<usize>) -> InterpolationProblem {
    InterpolationProblem::cubic(
        ManifoldModel::euclidean(2),
        vec![
            Knot::new(0.0, vec![0.0, 0.0]),
            Knot::new(0.25, vec![1.0, 0.5]),
            Knot::new(0.5, vec![0.5, 1.5]),
            Knot::new(0.75, vec![-0.5, 1.0]),
            Knot::new(1.0, vec![0.0, -0.5]),
        ],
        site.map(|s| (s, vec![1.0, -1.0])),
    )
    .unwrap()
}
