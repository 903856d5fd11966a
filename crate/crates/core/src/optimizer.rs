//! Minimization of the discrete spline energy over the free node coordinates.

use serde::{Deserialize, Serialize};

use crate::constraints::{initial_curve, Parametrization};
use crate::curve::{velocity, ChartCurve};
use crate::energy::DiscreteEnergy;
use crate::error::{Error, Result};
use crate::manifold::{ManifoldModel, TangentVec};
use crate::problem::InterpolationProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerOptions {
    /// Threshold on the sup-norm of the reduced gradient.
    pub tol_grad: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Step shrink factor in backtracking, in `(0, 1)`.
    pub backtrack: f64,
    /// Sufficient-decrease constant of the Armijo rule.
    pub c1: f64,
    /// L-BFGS history length; 0 gives gradient descent.
    pub memory: usize,
    /// Scale steps by the inverse of the flat second-difference Hessian.
    pub precondition: bool,
    /// Energy bound `c²` for the speed monitor; defaults to twice the initial energy.
    pub coercivity_c2: Option<f64>,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tol_grad: 1e-9,
            max_iter: 2000,
            initial_step: 1.0,
            backtrack: 0.5,
            c1: 1e-4,
            memory: 10,
            precondition: true,
            coercivity_c2: None,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(m.into()));
        if !(self.tol_grad > 0.0) {
            return bad("tol_grad must be positive");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack factor must lie in (0, 1)");
        }
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return bad("c1 must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if let Some(c2) = self.coercivity_c2 {
            if !(c2 >= 0.0) {
                return bad("coercivity bound must be nonnegative");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    /// Gradient below `tol_grad`.
    Converged,
    /// No further decrease possible and the gradient is at its rounding floor.
    RoundingFloor,
    MaxIter,
    /// Backtracking failed with the gradient above its rounding floor.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub grid_m: usize,
    pub final_energy: f64,
    pub final_grad_norm: f64,
    /// Estimated size of the gradient's floating-point noise at the final iterate.
    pub gradient_floor: f64,
    pub energy_trace: Vec<f64>,
    /// `sup_t g(γ̇, γ̇)` at every accepted iterate.
    pub speed_trace: Vec<f64>,
    pub coercivity_c2: f64,
    pub coercivity_violations: usize,
    pub termination: TerminationReason,
    pub converged: bool,
}

/// Outcome of [`coercivity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoercivityCheck {
    pub passed: bool,
    pub max_speed_sq: f64,
    pub bound: f64,
}

/// Checks `sup_t g(γ̇, γ̇) ≤ (c + √(c² + h₀))²` with `h₀ = g(v, v)`.
///
/// `c2` is the bound on `∫ g(D_t γ̇, D_t γ̇)`, i.e. twice the spline energy.
pub fn coercivity_check(curve: &ChartCurve, v: &TangentVec, c2: f64) -> Result<CoercivityCheck> {
    let h0 = curve.manifold().inner(&v.base.coords, &v.comp, &v.comp)?;
    Ok(speed_check(curve, h0, c2)?.0)
}

fn speed_check(curve: &ChartCurve, h0: f64, c2: f64) -> Result<(CoercivityCheck, f64)> {
    let vel = velocity(curve)?;
    let m = curve.manifold();
    let mut sup: f64 = 0.0;
    for i in 0..curve.len() {
        sup = sup.max(m.inner(curve.node(i), vel.node(i), vel.node(i))?);
    }
    let c = c2.max(0.0).sqrt();
    let bound = (c + (c2.max(0.0) + h0).sqrt()).powi(2);
    // allow rounding in the discrete speeds
    let passed = sup <= bound * (1.0 + 1e-12) + 1e-14;
    Ok((
        CoercivityCheck {
            passed,
            max_speed_sq: sup,
            bound,
        },
        h0,
    ))
}

/// Minimizes from the piecewise-linear initial curve on a grid of `m` steps.
pub fn minimize(
    problem: &InterpolationProblem,
    m: usize,
    opts: &OptimizerOptions,
) -> Result<(ChartCurve, ConvergenceReport)> {
    let init = initial_curve(problem, m)?;
    minimize_from(problem, &init, opts)
}

/// Minimizes starting from `start`, whose constrained nodes are overwritten
/// so the start is feasible.
pub fn minimize_from(
    problem: &InterpolationProblem,
    start: &ChartCurve,
    opts: &OptimizerOptions,
) -> Result<(ChartCurve, ConvergenceReport)> {
    opts.validate()?;
    if problem.order() != 2 {
        return Err(Error::Unsupported(format!(
            "numerical minimization supports order 2 only, got {}",
            problem.order()
        )));
    }
    if start.manifold() != problem.manifold() {
        return Err(Error::InvalidProblem(
            "start curve lives on a different manifold".into(),
        ));
    }
    let grid = start.grid().clone();
    let manifold = problem.manifold().clone();
    let par = Parametrization::new(problem, &grid)?;
    let energy = DiscreteEnergy::for_problem(problem, grid.clone())?;
    let d = manifold.dim();

    let eval = |z: &[f64]| -> Option<(f64, Vec<f64>)> {
        let x = par.expand(z);
        let (e, raw) = energy.value_and_gradient(&manifold, &x).ok()?;
        e.is_finite().then(|| (e, par.reduce(&raw)))
    };

    let mut z = par.extract(start.coords());
    let (mut e, mut g) = eval(&z).ok_or_else(|| {
        Error::InvalidProblem("initial curve leaves the chart".into())
    })?;
    let precond = if opts.precondition && !z.is_empty() {
        Some(BandedCholesky::flat_hessian(&energy, &par, &manifold, &par.expand(&z))?)
    } else {
        None
    };
    let apply_p = |v: &[f64]| -> Vec<f64> {
        match &precond {
            Some(p) => p.solve_dims(v, d),
            None => v.to_vec(),
        }
    };

    let c2 = opts.coercivity_c2.unwrap_or(2.0 * e);
    let h0_fixed = match problem.prescribed_velocity() {
        Some(v) => Some(manifold.inner(&v.base.coords, &v.comp, &v.comp)?),
        None => None,
    };
    let mut energy_trace = vec![e];
    let mut speed_trace = Vec::new();
    let mut violations = 0;
    let mut monitor = |z: &[f64], speeds: &mut Vec<f64>| -> Result<()> {
        let curve = ChartCurve::new(grid.clone(), manifold.clone(), par.expand(z))?;
        let h0 = match h0_fixed {
            Some(h) => h,
            None => {
                let v = velocity(&curve)?;
                manifold.inner(curve.node(0), v.node(0), v.node(0))?
            }
        };
        let (chk, _) = speed_check(&curve, h0, c2)?;
        speeds.push(chk.max_speed_sq);
        if !chk.passed {
            violations += 1;
        }
        Ok(())
    };
    monitor(&z, &mut speed_trace)?;

    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    let mut termination = TerminationReason::MaxIter;
    loop {
        let gnorm = sup(&g);
        if gnorm <= opts.tol_grad {
            termination = TerminationReason::Converged;
            break;
        }
        if gnorm <= gradient_floor(&energy, &manifold, &par.expand(&z)) {
            termination = TerminationReason::RoundingFloor;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let mut dir = lbfgs_direction(&g, &hist, &apply_p);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = apply_p(&g).iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        // predicted decrease below the resolution of the energy itself
        if -slope <= 16.0 * f64::EPSILON * e.abs() {
            termination = TerminationReason::RoundingFloor;
            break;
        }
        let mut step = opts.initial_step;
        let mut accepted = None;
        for _ in 0..60 {
            let zt: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            if let Some((et, gt)) = eval(&zt) {
                // once energy differences drop below rounding, fall back on the
                // directional derivative (approximate Wolfe condition)
                let flat_enough = et <= e && dot(&gt, &dir) <= -0.8 * slope;
                if et <= e + opts.c1 * step * slope || flat_enough {
                    accepted = Some((zt, et, gt));
                    break;
                }
            }
            step *= opts.backtrack;
        }
        let Some((zn, en, gn)) = accepted else {
            let floor = gradient_floor(&energy, &manifold, &par.expand(&z));
            termination = if gnorm <= 100.0 * floor {
                TerminationReason::RoundingFloor
            } else {
                TerminationReason::LineSearchFailed
            };
            break;
        };
        iterations += 1;
        if opts.memory > 0 {
            let s: Vec<f64> = zn.iter().zip(&z).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-300 {
                if hist.len() == opts.memory {
                    hist.remove(0);
                }
                hist.push((s, y, 1.0 / sy));
            }
        }
        z = zn;
        e = en;
        g = gn;
        energy_trace.push(e);
        monitor(&z, &mut speed_trace)?;
    }

    let x = par.expand(&z);
    let floor = gradient_floor(&energy, &manifold, &x);
    let curve = ChartCurve::new(grid.clone(), manifold.clone(), x)?;
    let converged = matches!(
        termination,
        TerminationReason::Converged | TerminationReason::RoundingFloor
    );
    let report = ConvergenceReport {
        iterations,
        grid_m: grid.m(),
        final_energy: e,
        final_grad_norm: sup(&g),
        gradient_floor: floor,
        energy_trace,
        speed_trace,
        coercivity_c2: c2,
        coercivity_violations: violations,
        termination,
        converged,
    };
    Ok((curve, report))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn lbfgs_direction(
    g: &[f64],
    hist: &[(Vec<f64>, Vec<f64>, f64)],
    apply_p: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alpha = vec![0.0; hist.len()];
    for (i, (s, y, rho)) in hist.iter().enumerate().rev() {
        alpha[i] = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= alpha[i] * yi);
    }
    let mut r = apply_p(&q);
    if let Some((s, y, _)) = hist.last() {
        let py = apply_p(y);
        let yhy = dot(y, &py);
        if yhy > 0.0 {
            let gamma = dot(s, y) / yhy;
            r.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for (i, (s, y, rho)) in hist.iter().enumerate() {
        let beta = rho * dot(y, &r);
        r.iter_mut().zip(s).for_each(|(ri, si)| *ri += (alpha[i] - beta) * si);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}

/// Rough bound on the floating-point noise of the node gradient.
fn gradient_floor(energy: &DiscreteEnergy, manifold: &ManifoldModel, x: &[f64]) -> f64 {
    let d = manifold.dim();
    let h = energy.grid().h();
    let h2inv = 1.0 / (h * h);
    let mut per_node = vec![0.0; energy.grid().len()];
    for s in energy.samples() {
        let scale = if manifold.is_flat() {
            1.0
        } else {
            manifold.conformal_factor(&x[s.node * d..(s.node + 1) * d])
        };
        let amag: f64 = s
            .accel
            .iter()
            .map(|&(j, c)| {
                (0..d).fold(0.0_f64, |m, k| m.max((x[j * d + k] - x[s.node * d + k]).abs())) * c.abs()
            })
            .sum::<f64>()
            * h2inv;
        for &(j, c) in &s.accel {
            per_node[j] += s.weight * c.abs() * h2inv * scale * amag;
        }
    }
    f64::EPSILON * per_node.iter().fold(0.0, |m: f64, v| m.max(*v))
}

/// Cholesky factor of a symmetric positive-definite band matrix.
struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `l[i][k]` holds `L[i][i - bw + k]`.
    l: Vec<f64>,
}

impl BandedCholesky {
    /// Hessian of `½ Σ w λ² |A x / h²|²` in the free parameters, one dimension.
    fn flat_hessian(
        energy: &DiscreteEnergy,
        par: &Parametrization,
        manifold: &ManifoldModel,
        x: &[f64],
    ) -> Result<Self> {
        let d = manifold.dim();
        let n = par.free_node_count();
        let h = energy.grid().h();
        let h2inv = 1.0 / (h * h);
        let rows: Vec<(f64, Vec<(usize, f64)>)> = energy
            .samples()
            .iter()
            .map(|s| {
                let scale = if manifold.is_flat() {
                    1.0
                } else {
                    manifold.conformal_factor(&x[s.node * d..(s.node + 1) * d])
                };
                let mut terms: Vec<(usize, f64)> = Vec::new();
                for &(j, c) in &s.accel {
                    if let Some((p, coef)) = par.node_terms(j) {
                        match terms.iter_mut().find(|t| t.0 == p) {
                            Some(t) => t.1 += c * coef * h2inv,
                            None => terms.push((p, c * coef * h2inv)),
                        }
                    }
                }
                (s.weight * scale, terms)
            })
            .collect();
        let bw = rows
            .iter()
            .flat_map(|(_, t)| {
                t.iter()
                    .flat_map(move |a| t.iter().map(move |b| a.0.abs_diff(b.0)))
            })
            .max()
            .unwrap_or(0);
        let width = bw + 1;
        let mut a = vec![0.0; n * width];
        for (w, terms) in &rows {
            for &(p, cp) in terms {
                for &(q, cq) in terms {
                    if q <= p {
                        a[p * width + (bw - (p - q))] += w * cp * cq;
                    }
                }
            }
        }
        // in-place banded Cholesky
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = i.saturating_sub(bw).max(j.saturating_sub(bw));
                let mut sum = a[i * width + (bw - (i - j))];
                for k in k0..j {
                    sum -= a[i * width + (bw - (i - k))] * a[j * width + (bw - (j - k))];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::SingularSystem { rcond: 0.0 });
                    }
                    a[i * width + bw] = sum.sqrt();
                } else {
                    a[i * width + (bw - (i - j))] = sum / a[j * width + bw];
                }
            }
        }
        Ok(Self { n, bw, l: a })
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.l[i * w + (bw - (i - k))] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= self.l[k * w + (bw - (k - i))] * b[k];
            }
            b[i] = s / self.l[i * w + bw];
        }
    }

    /// Applies the inverse to a node-major vector with `d` components per node.
    fn solve_dims(&self, v: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        let mut col = vec![0.0; self.n];
        for k in 0..d {
            for i in 0..self.n {
                col[i] = v[i * d + k];
            }
            self.solve(&mut col);
            for i in 0..self.n {
                out[i * d + k] = col[i];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::TimeGrid;
    use crate::manifold::ChartPoint;
    use crate::problem::Knot;

    fn cubic_problem() -> InterpolationProblem {
        InterpolationProblem::cubic(
            ManifoldModel::euclidean(1),
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            Some((0, vec![0.0])),
        )
        .unwrap()
    }

    #[test]
    fn straight_line_without_velocity() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(2),
            vec![Knot::new(0.0, vec![0.0, 1.0]), Knot::new(1.0, vec![2.0, -1.0])],
            None,
        )
        .unwrap();
        let (_, rep) = minimize(&p, 32, &OptimizerOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.final_energy <= 1e-12);
    }

    #[test]
    fn cubic_benchmark_is_recovered() {
        let (c, rep) = minimize(&cubic_problem(), 128, &OptimizerOptions::default()).unwrap();
        assert!(rep.converged, "{:?}", rep.termination);
        let err = c
            .grid()
            .times()
            .iter()
            .enumerate()
            .map(|(i, t)| (c.node(i)[0] - (1.5 * t * t - 0.5 * t * t * t)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        assert!((rep.final_energy - 1.5).abs() < 1e-3);
        assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rep.coercivity_violations, 0);
    }

    #[test]
    fn gradient_descent_also_decreases() {
        let opts = OptimizerOptions {
            memory: 0,
            max_iter: 50,
            precondition: false,
            initial_step: 1e-6,
            ..Default::default()
        };
        let (_, rep) = minimize(&cubic_problem(), 16, &opts).unwrap();
        assert!(rep.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.energy_trace.last() < rep.energy_trace.first());
    }

    #[test]
    fn order_three_is_refused() {
        let p = InterpolationProblem::new(
            ManifoldModel::euclidean(1),
            3,
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            None,
        )
        .unwrap();
        assert!(matches!(
            minimize(&p, 16, &OptimizerOptions::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn coercivity_examples() {
        let g = TimeGrid::unit(20).unwrap();
        let line = ChartCurve::from_fn(g.clone(), ManifoldModel::euclidean(2), |t| {
            vec![3.0 * t, -4.0 * t]
        })
        .unwrap();
        let v = TangentVec::new(ChartPoint::new(vec![0.0, 0.0]), vec![3.0, -4.0]).unwrap();
        let chk = coercivity_check(&line, &v, 0.0).unwrap();
        assert!(chk.passed);
        assert!((chk.max_speed_sq - 25.0).abs() < 1e-10);

        let bump = ChartCurve::from_fn(g, ManifoldModel::euclidean(1), |t| {
            vec![100.0 * (std::f64::consts::PI * t).sin().powi(2)]
        })
        .unwrap();
        let v0 = TangentVec::new(ChartPoint::new(vec![0.0]), vec![0.0]).unwrap();
        assert!(!coercivity_check(&bump, &v0, 1e-6).unwrap().passed);
    }

    #[test]
    fn sphere_problem_converges() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::sphere(),
            vec![Knot::new(0.0, vec![0.1, 0.0]), Knot::new(1.0, vec![0.6, 0.5])],
            Some((0, vec![0.0, 1.0])),
        )
        .unwrap();
        let (_, rep) = minimize(&p, 64, &OptimizerOptions::default()).unwrap();
        assert!(rep.converged, "{:?} {}", rep.termination, rep.final_grad_norm);
        assert_eq!(rep.coercivity_violations, 0);
    }
}
