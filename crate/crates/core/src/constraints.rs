//! Elimination of the interpolation and velocity constraints on a grid.
//!
//! Knot nodes are pinned. The prescribed velocity is imposed through the
//! one-sided second-order difference at its site (forward at `t = 0`,
//! backward at `t = 1`, one of each at an interior site). Each such
//! constraint is solved for the node next to the site:
//!
//! ```text
//! forward:  x[s+1] = ¾ x[s] + ¼ x[s+2] + ½ h v
//! backward: x[s-1] = ¾ x[s] + ¼ x[s-2] − ½ h v
//! ```
//!
//! All remaining nodes are free. The feasible set is therefore an affine image
//! of the free coordinates and every iterate satisfies the constraints exactly.

use crate::curve::{ChartCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::problem::InterpolationProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
enum NodeRule {
    Pinned,
    Free(usize),
    /// `x = offset + coef · x[source]`, with `source` a free node.
    Tied { source: usize, coef: f64 },
}

/// Affine map from free node coordinates to a feasible curve.
#[derive(Debug, Clone)]
pub struct Parametrization {
    dim: usize,
    rules: Vec<NodeRule>,
    /// Pinned values, or the constant part of tied nodes (node-major).
    offsets: Vec<f64>,
    free_nodes: Vec<usize>,
}

impl Parametrization {
    pub fn new(problem: &InterpolationProblem, grid: &TimeGrid) -> Result<Self> {
        let dim = problem.manifold().dim();
        let m = grid.m();
        if m < 4 {
            return Err(Error::InfeasibleGrid(format!("need M >= 4, got {m}")));
        }
        let knot_nodes = knot_nodes(problem, grid)?;
        let n = grid.len();
        let mut rules = vec![NodeRule::Free(usize::MAX); n];
        let mut offsets = vec![0.0; n * dim];
        for (knot, &node) in problem.knots().iter().zip(&knot_nodes) {
            if rules[node] == NodeRule::Pinned {
                return Err(Error::InfeasibleGrid(format!(
                    "two knots share grid node {node}"
                )));
            }
            rules[node] = NodeRule::Pinned;
            offsets[node * dim..(node + 1) * dim].copy_from_slice(&knot.point.coords);
        }

        if let Some(vc) = problem.velocity() {
            let s = knot_nodes[vc.site];
            let v = &vc.derivs[0];
            let h = grid.h();
            let mut ties = Vec::new();
            if s < m {
                ties.push((s + 1, s + 2, 1.0));
            }
            if s > 0 {
                if s < 2 {
                    return Err(Error::InfeasibleGrid(
                        "velocity site too close to the start".into(),
                    ));
                }
                ties.push((s - 1, s - 2, -1.0));
            }
            for (node, source, sign) in ties {
                if source > m {
                    return Err(Error::InfeasibleGrid("velocity site too close to the end".into()));
                }
                if rules[node] != NodeRule::Free(usize::MAX) {
                    return Err(Error::InfeasibleGrid(format!(
                        "node {node} next to the velocity site is a knot; refine the grid"
                    )));
                }
                if matches!(rules[source], NodeRule::Tied { .. }) {
                    return Err(Error::InfeasibleGrid(
                        "velocity stencils overlap; refine the grid".into(),
                    ));
                }
                for k in 0..dim {
                    offsets[node * dim + k] = 0.75 * offsets[s * dim + k] + sign * 0.5 * h * v[k];
                }
                if rules[source] == NodeRule::Pinned {
                    for k in 0..dim {
                        offsets[node * dim + k] += 0.25 * offsets[source * dim + k];
                    }
                    rules[node] = NodeRule::Pinned;
                } else {
                    rules[node] = NodeRule::Tied { source, coef: 0.25 };
                }
            }
        }

        let mut free_nodes = Vec::new();
        for (i, r) in rules.iter_mut().enumerate() {
            if let NodeRule::Free(p) = r {
                *p = free_nodes.len();
                free_nodes.push(i);
            }
        }
        Ok(Self {
            dim,
            rules,
            offsets,
            free_nodes,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of free nodes (parameters are `dim` times this).
    pub fn free_node_count(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn is_free(&self, node: usize) -> bool {
        matches!(self.rules[node], NodeRule::Free(_))
    }

    /// Free-node parameter index of `node`, if it is free.
    pub fn param_of(&self, node: usize) -> Option<usize> {
        match self.rules[node] {
            NodeRule::Free(p) => Some(p),
            _ => None,
        }
    }

    /// Node-major coordinates from the free parameters.
    pub fn expand(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut x = self.offsets.clone();
        for (p, &node) in self.free_nodes.iter().enumerate() {
            x[node * d..(node + 1) * d].copy_from_slice(&z[p * d..(p + 1) * d]);
        }
        for (node, rule) in self.rules.iter().enumerate() {
            if let NodeRule::Tied { source, coef } = *rule {
                for k in 0..d {
                    x[node * d + k] += coef * x[source * d + k];
                }
            }
        }
        x
    }

    /// Free parameters read off a node-major coordinate array.
    pub fn extract(&self, coords: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut z = Vec::with_capacity(self.free_nodes.len() * d);
        for &node in &self.free_nodes {
            z.extend_from_slice(&coords[node * d..(node + 1) * d]);
        }
        z
    }

    /// Gradient with respect to the free parameters from a full node gradient.
    pub fn reduce(&self, raw: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut gz = self.extract(raw);
        for (node, rule) in self.rules.iter().enumerate() {
            if let NodeRule::Tied { source, coef } = *rule {
                if let NodeRule::Free(p) = self.rules[source] {
                    for k in 0..d {
                        gz[p * d + k] += coef * raw[node * d + k];
                    }
                }
            }
        }
        gz
    }

    /// Reduced gradient scattered back onto free nodes, zero elsewhere.
    pub fn mask(&self, raw: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let gz = self.reduce(raw);
        let mut out = vec![0.0; raw.len()];
        for (p, &node) in self.free_nodes.iter().enumerate() {
            out[node * d..(node + 1) * d].copy_from_slice(&gz[p * d..(p + 1) * d]);
        }
        out
    }

    /// Sparse row of the parametrization: node `i` as `offset + Σ coef · z[param]`.
    pub(crate) fn node_terms(&self, node: usize) -> Option<(usize, f64)> {
        match self.rules[node] {
            NodeRule::Pinned => None,
            NodeRule::Free(p) => Some((p, 1.0)),
            NodeRule::Tied { source, coef } => match self.rules[source] {
                NodeRule::Free(p) => Some((p, coef)),
                _ => None,
            },
        }
    }
}

/// Grid node of every knot, or an error naming a workable grid size.
pub fn knot_nodes(problem: &InterpolationProblem, grid: &TimeGrid) -> Result<Vec<usize>> {
    problem
        .knots()
        .iter()
        .map(|k| {
            grid.node_of(k.t).ok_or_else(|| Error::KnotOffGrid {
                t: k.t,
                m: grid.m(),
                suggested: crate::curve::suggest_grid_near(&problem.knot_times(), grid.m()).ok(),
            })
        })
        .collect()
}

/// Piecewise-linear chart interpolation of the knots, adjusted to satisfy the
/// discrete velocity constraint.
pub fn initial_curve(problem: &InterpolationProblem, m: usize) -> Result<ChartCurve> {
    let grid = TimeGrid::unit(m)?;
    let param = Parametrization::new(problem, &grid)?;
    let nodes = knot_nodes(problem, &grid)?;
    let d = problem.manifold().dim();
    let knots = problem.knots();
    let mut coords = vec![0.0; grid.len() * d];
    for seg in 0..nodes.len() - 1 {
        let (a, b) = (nodes[seg], nodes[seg + 1]);
        let (pa, pb) = (&knots[seg].point.coords, &knots[seg + 1].point.coords);
        for i in a..=b {
            let s = (i - a) as f64 / (b - a) as f64;
            for k in 0..d {
                coords[i * d + k] = (1.0 - s) * pa[k] + s * pb[k];
            }
        }
    }
    let z = param.extract(&coords);
    ChartCurve::new(grid, problem.manifold().clone(), param.expand(&z))
}

/// Largest deviation of the one-sided discrete velocities at the site from the prescribed vector.
pub fn velocity_residual(curve: &ChartCurve, problem: &InterpolationProblem) -> Result<f64> {
    let Some(vc) = problem.velocity() else {
        return Ok(0.0);
    };
    let nodes = knot_nodes(problem, curve.grid())?;
    let s = nodes[vc.site];
    let h = curve.grid().h();
    let m = curve.grid().m();
    let mut worst: f64 = 0.0;
    for k in 0..curve.dim() {
        let v = vc.derivs[0][k];
        if s < m {
            let fwd = (-3.0 * curve.node(s)[k] + 4.0 * curve.node(s + 1)[k]
                - curve.node(s + 2)[k])
                / (2.0 * h);
            worst = worst.max((fwd - v).abs());
        }
        if s > 0 {
            let bwd = (3.0 * curve.node(s)[k] - 4.0 * curve.node(s - 1)[k]
                + curve.node(s - 2)[k])
                / (2.0 * h);
            worst = worst.max((bwd - v).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldModel;
    use crate::problem::Knot;

    #[test]
    fn single_segment_without_velocity_is_the_line() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(1),
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            None,
        )
        .unwrap();
        let c = initial_curve(&p, 8).unwrap();
        for (i, t) in c.grid().times().iter().enumerate() {
            assert!((c.node(i)[0] - t).abs() < 1e-15);
        }
    }

    #[test]
    fn knot_lands_on_its_node() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(2),
            vec![
                Knot::new(0.0, vec![0.0, 0.0]),
                Knot::new(0.3, vec![2.0, -1.0]),
                Knot::new(1.0, vec![1.0, 1.0]),
            ],
            None,
        )
        .unwrap();
        let c = initial_curve(&p, 10).unwrap();
        assert_eq!(c.node(3), &[2.0, -1.0]);
        let err = initial_curve(&p, 16).unwrap_err();
        assert!(matches!(err, Error::KnotOffGrid { suggested: Some(20), .. }));
    }

    #[test]
    fn velocity_constraint_holds_at_every_site_kind() {
        for site in 0..3 {
            let p = InterpolationProblem::cubic(
                ManifoldModel::euclidean(2),
                vec![
                    Knot::new(0.0, vec![0.0, 0.0]),
                    Knot::new(0.5, vec![1.0, 2.0]),
                    Knot::new(1.0, vec![3.0, 0.0]),
                ],
                Some((site, vec![0.7, -1.3])),
            )
            .unwrap();
            let c = initial_curve(&p, 20).unwrap();
            assert!(velocity_residual(&c, &p).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn forward_velocity_at_start_matches() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(1),
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            Some((0, vec![0.25])),
        )
        .unwrap();
        let c = initial_curve(&p, 10).unwrap();
        let v = crate::curve::velocity(&c).unwrap();
        assert!((v.node(0)[0] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn reduce_is_adjoint_of_expand() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(1),
            vec![
                Knot::new(0.0, vec![0.0]),
                Knot::new(0.5, vec![1.0]),
                Knot::new(1.0, vec![0.0]),
            ],
            Some((1, vec![2.0])),
        )
        .unwrap();
        let grid = TimeGrid::unit(12).unwrap();
        let par = Parametrization::new(&p, &grid).unwrap();
        let n = par.free_node_count();
        let base = par.expand(&vec![0.0; n]);
        // linear part L: z -> expand(z) - expand(0); check <L z, w> == <z, L^T w>
        let z: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let w: Vec<f64> = (0..13).map(|i| (i as f64 * 1.3).cos()).collect();
        let lz: Vec<f64> = par.expand(&z).iter().zip(&base).map(|(a, b)| a - b).collect();
        let lhs: f64 = lz.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = z.iter().zip(par.reduce(&w)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
