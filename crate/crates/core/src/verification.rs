//! Numerical certificates for the conclusions of the regularity theory:
//! the spline equation on each knot interval, C² junctions away from the
//! velocity site, natural end conditions and the affine-plus-curvature
//! structure of the covariant acceleration.

use serde::{Deserialize, Serialize};

use crate::constraints::knot_nodes;
use crate::covariant::{covariant_derivative_along, covariant_integral, parallel_frame};
use crate::curve::{covariant_acceleration, velocity, ChartCurve, VectorField};
use crate::energy::spline_energy;
use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::polyspline::{exact_energy, PiecewisePolynomial};
use crate::problem::InterpolationProblem;

/// Samples per interval used when checking exact polynomials.
const EXACT_SAMPLES: usize = 64;
/// Nodes skipped next to each breakpoint in the discrete spline-equation residual.
const EDGE_SKIP: usize = 5;
/// Nodes skipped next to each breakpoint in the discrete structure fit.
const FIT_SKIP: usize = 2;
/// Minimum grid steps per knot interval for discrete checks.
pub const MIN_STEPS_PER_INTERVAL: usize = 12;

/// A solution to certify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum Candidate {
    Exact(PiecewisePolynomial),
    Discrete(ChartCurve),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResidual {
    pub interval: usize,
    pub sup: f64,
    /// `(t, |residual|_g)` at every evaluated sample.
    pub profile: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionJump {
    pub knot: usize,
    pub t: f64,
    pub velocity_site: bool,
    /// `(derivative order, jump norm)`; order 2 is `|Δ D_t γ̇|_g`.
    pub jumps: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalValue {
    pub knot: usize,
    /// `(derivative order, norm)`.
    pub values: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionReport {
    pub jumps: Vec<JunctionJump>,
    pub natural: Vec<NaturalValue>,
}

impl JunctionReport {
    /// Largest jump that the theory requires to vanish.
    ///
    /// At an interior velocity site only orders below the spline order are bound.
    pub fn max_constrained_jump(&self, order: usize) -> f64 {
        self.jumps
            .iter()
            .flat_map(|j| {
                j.jumps
                    .iter()
                    .filter(move |(l, _)| !j.velocity_site || *l < order)
                    .map(|(_, v)| *v)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_natural(&self) -> f64 {
        self.natural
            .iter()
            .flat_map(|n| n.values.iter().map(|(_, v)| *v))
            .fold(0.0, f64::max)
    }
}

/// Least-squares fit of `D_t γ̇ − η_γ` by `ν + tζ` with parallel `ν, ζ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFit {
    pub interval: usize,
    /// Relative L² misfit (absolute when the fitted field vanishes).
    pub misfit: f64,
    /// `ν` at the interval start, chart components.
    pub nu: Vec<f64>,
    /// `ζ` at the interval start, chart components.
    pub zeta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub el_residual_max: Vec<f64>,
    pub junctions: JunctionReport,
    pub structure: Vec<StructureFit>,
    pub h: Option<f64>,
    pub m: Option<usize>,
    /// `(∫ g(D_t γ̇, D_t γ̇))^{1/2}`, the scale used by grid tolerances.
    pub accel_scale: f64,
}

impl VerificationReport {
    pub fn el_max(&self) -> f64 {
        self.el_residual_max.iter().copied().fold(0.0, f64::max)
    }

    pub fn structure_max(&self) -> f64 {
        self.structure.iter().map(|s| s.misfit).fold(0.0, f64::max)
    }

    /// Whether every certificate is within its default tolerance.
    pub fn passed(&self) -> bool {
        self.passes(&Tolerances::for_report(self))
    }

    /// Whether every certificate is within `tol` (order-2 jumps at an interior
    /// velocity site are reported only).
    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.el_max() <= tol.el
            && self.junctions.max_constrained_jump(2) <= tol.junction
            && self.junctions.max_natural() <= tol.natural
            && self.structure_max() <= tol.structure
    }
}

/// Pass thresholds for [`VerificationReport::passes`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub el: f64,
    pub junction: f64,
    pub natural: f64,
    pub structure: f64,
}

impl Tolerances {
    /// Thresholds for exact polynomial solutions.
    pub fn exact() -> Self {
        Self {
            el: 1e-8,
            junction: 1e-8,
            natural: 1e-8,
            structure: 1e-8,
        }
    }

    /// Thresholds for a discrete minimizer with grid step `h` whose
    /// acceleration has L² norm `scale`.
    ///
    /// Every certificate of a discrete minimizer decays like `h²`; the
    /// constants leave a margin of about ten over sphere and flat test problems.
    pub fn grid(h: f64, scale: f64) -> Self {
        let h2 = h * h;
        let s = scale.max(1.0);
        Self {
            el: 2000.0 * s * h2,
            junction: 200.0 * s * h2,
            natural: 200.0 * s * h2,
            structure: 100.0 * h2,
        }
    }

    /// [`Tolerances::exact`] or [`Tolerances::grid`] as fits the report.
    pub fn for_report(report: &VerificationReport) -> Self {
        match report.h {
            Some(h) => Self::grid(h, report.accel_scale),
            None => Self::exact(),
        }
    }
}

/// Runs every certificate.
pub fn verify(candidate: &Candidate, problem: &InterpolationProblem) -> Result<VerificationReport> {
    check_compatible(candidate, problem)?;
    let el = el_residual(candidate, problem)?;
    let junctions = junction_report(candidate, problem)?;
    let structure = if problem.order() == 2 {
        (0..problem.intervals())
            .map(|i| dubois_structure_check(candidate, problem, i))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let (h, m, accel_scale) = match candidate {
        Candidate::Exact(p) => (None, None, exact_energy(p).energy_int.sqrt()),
        Candidate::Discrete(c) => (
            Some(c.grid().h()),
            Some(c.grid().m()),
            (2.0 * spline_energy(c)?).sqrt(),
        ),
    };
    Ok(VerificationReport {
        el_residual_max: el.iter().map(|r| r.sup).collect(),
        junctions,
        structure,
        h,
        m,
        accel_scale,
    })
}

fn check_compatible(candidate: &Candidate, problem: &InterpolationProblem) -> Result<()> {
    match candidate {
        Candidate::Exact(p) => {
            if !problem.manifold().is_flat() {
                return Err(Error::Unsupported(
                    "exact candidates exist only on flat manifolds".into(),
                ));
            }
            if p.dim != problem.manifold().dim() || p.order != problem.order() {
                return Err(Error::InvalidProblem(
                    "polynomial does not match the problem's order or dimension".into(),
                ));
            }
            if p.breakpoints.len() != problem.knots().len()
                || p
                    .breakpoints
                    .iter()
                    .zip(problem.knot_times())
                    .any(|(a, b)| (a - b).abs() > 1e-12)
            {
                return Err(Error::InvalidProblem(
                    "polynomial breakpoints differ from the knot times".into(),
                ));
            }
        }
        Candidate::Discrete(c) => {
            if c.manifold() != problem.manifold() {
                return Err(Error::InvalidProblem("curve and problem manifolds differ".into()));
            }
            if problem.order() != 2 {
                return Err(Error::Unsupported(
                    "discrete certificates are implemented for order 2".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Knot-node index ranges of a discrete curve, each at least [`MIN_STEPS_PER_INTERVAL`] long.
fn interval_nodes(curve: &ChartCurve, problem: &InterpolationProblem) -> Result<Vec<usize>> {
    let nodes = knot_nodes(problem, curve.grid())?;
    if nodes.windows(2).any(|w| w[1] - w[0] < MIN_STEPS_PER_INTERVAL) {
        return Err(Error::InfeasibleGrid(format!(
            "verification needs at least {MIN_STEPS_PER_INTERVAL} grid steps per knot interval"
        )));
    }
    Ok(nodes)
}

fn gnorm(m: &ManifoldModel, x: &[f64], v: &[f64]) -> Result<f64> {
    Ok(m.inner(x, v, v)?.max(0.0).sqrt())
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Sup of `|D_t³γ̇ + R(D_t γ̇, γ̇)γ̇|_g` on each knot interval.
///
/// Exact candidates report `|γ^{(2k)}|`; discrete ones compose three discrete
/// covariant derivatives per interval and skip five nodes at each breakpoint.
pub fn el_residual(
    candidate: &Candidate,
    problem: &InterpolationProblem,
) -> Result<Vec<IntervalResidual>> {
    check_compatible(candidate, problem)?;
    match candidate {
        Candidate::Exact(p) => Ok((0..p.intervals())
            .map(|i| {
                let (a, b) = (p.breakpoints[i], p.breakpoints[i + 1]);
                let profile: Vec<(f64, f64)> = (0..=EXACT_SAMPLES)
                    .map(|s| {
                        let t = a + (b - a) * s as f64 / EXACT_SAMPLES as f64;
                        (t, euclid(&on_piece(p, i, t, 2 * p.order)))
                    })
                    .collect();
                let sup = profile.iter().map(|x| x.1).fold(0.0, f64::max);
                IntervalResidual { interval: i, sup, profile }
            })
            .collect()),
        Candidate::Discrete(curve) => {
            let nodes = interval_nodes(curve, problem)?;
            let man = curve.manifold();
            let mut out = Vec::new();
            for (i, w) in nodes.windows(2).enumerate() {
                let sub = curve.slice(w[0], w[1])?;
                let vel = velocity(&sub)?;
                let a1 = covariant_acceleration(&sub)?;
                let a2 = covariant_derivative_along(&sub, &a1)?;
                let a3 = covariant_derivative_along(&sub, &a2)?;
                let mut profile = Vec::new();
                for n in EDGE_SKIP..sub.len() - EDGE_SKIP {
                    let x = sub.node(n);
                    let curv = man.curvature_at(x)?;
                    let rt = curv.apply(a1.node(n), vel.node(n), vel.node(n));
                    let r: Vec<f64> = a3.node(n).iter().zip(rt).map(|(a, b)| a + b).collect();
                    profile.push((sub.grid().time(n), gnorm(man, x, &r)?));
                }
                let sup = profile.iter().map(|x| x.1).fold(0.0, f64::max);
                out.push(IntervalResidual { interval: i, sup, profile });
            }
            Ok(out)
        }
    }
}

/// One-sided covariant acceleration at node `s` from the left (`dir = -1`) or right (`dir = 1`).
fn one_sided(curve: &ChartCurve, s: usize, right: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = curve.dim();
    let h = curve.grid().h();
    let idx = |k: usize| if right { s + k } else { s - k };
    let sign = if right { 1.0 } else { -1.0 };
    let mut acc = vec![0.0; d];
    let mut vel = vec![0.0; d];
    let x = curve.node(s);
    for (k, c) in [2.0, -5.0, 4.0, -1.0].into_iter().enumerate() {
        for q in 0..d {
            acc[q] += c * (curve.node(idx(k))[q] - x[q]) / (h * h);
        }
    }
    for (k, c) in [-1.5, 2.0, -0.5].into_iter().enumerate() {
        for q in 0..d {
            vel[q] += sign * c * (curve.node(idx(k))[q] - x[q]) / h;
        }
    }
    let corr = curve.manifold().christoffel_at(x)?.contract(&vel, &vel);
    acc.iter_mut().zip(corr).for_each(|(a, c)| *a += c);
    Ok((acc, vel))
}

/// Junction jumps at interior knots and natural-condition values at the ends.
pub fn junction_report(
    candidate: &Candidate,
    problem: &InterpolationProblem,
) -> Result<JunctionReport> {
    check_compatible(candidate, problem)?;
    let n = problem.intervals();
    let site = problem.velocity_site();
    let times = problem.knot_times();
    let mut jumps = Vec::new();
    let mut natural = Vec::new();
    match candidate {
        Candidate::Exact(p) => {
            let k = p.order;
            for (i, &t) in times.iter().enumerate().take(n).skip(1) {
                let js = (1..=2 * k - 2)
                    .map(|l| {
                        let a = p.eval(t, l);
                        let b = p.eval_right(t, l);
                        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - x).collect();
                        (l, euclid(&diff))
                    })
                    .collect();
                jumps.push(JunctionJump {
                    knot: i,
                    t,
                    velocity_site: site == Some(i),
                    jumps: js,
                });
            }
            for knot in [0, n] {
                if problem.has_natural_condition(knot) {
                    let t = times[knot];
                    let values = (k..=2 * k - 2)
                        .map(|l| {
                            let v = if knot == 0 { p.eval_right(t, l) } else { p.eval(t, l) };
                            (l, euclid(&v))
                        })
                        .collect();
                    natural.push(NaturalValue { knot, values });
                }
            }
        }
        Candidate::Discrete(curve) => {
            let nodes = interval_nodes(curve, problem)?;
            let man = curve.manifold();
            for i in 1..n {
                let s = nodes[i];
                let (al, vl) = one_sided(curve, s, false)?;
                let (ar, vr) = one_sided(curve, s, true)?;
                let x = curve.node(s);
                let dv: Vec<f64> = vr.iter().zip(&vl).map(|(a, b)| a - b).collect();
                let da: Vec<f64> = ar.iter().zip(&al).map(|(a, b)| a - b).collect();
                jumps.push(JunctionJump {
                    knot: i,
                    t: times[i],
                    velocity_site: site == Some(i),
                    jumps: vec![(1, gnorm(man, x, &dv)?), (2, gnorm(man, x, &da)?)],
                });
            }
            let m = curve.grid().m();
            for (knot, node, right) in [(0, 0, true), (n, m, false)] {
                if problem.has_natural_condition(knot) {
                    let (a, _) = one_sided(curve, node, right)?;
                    natural.push(NaturalValue {
                        knot,
                        values: vec![(2, gnorm(man, curve.node(node), &a)?)],
                    });
                }
            }
        }
    }
    Ok(JunctionReport { jumps, natural })
}

/// Weighted linear regression of each frame component on global `t`.
fn affine_fit(
    times: &[f64],
    weights: &[f64],
    comps: &[Vec<f64>],
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let sw: f64 = weights.iter().sum();
    let st: f64 = weights.iter().zip(times).map(|(w, t)| w * t).sum::<f64>() / sw;
    let stt: f64 = weights
        .iter()
        .zip(times)
        .map(|(w, t)| w * (t - st) * (t - st))
        .sum();
    let mut nu = Vec::new();
    let mut zeta = Vec::new();
    let mut resid2 = 0.0;
    let mut total2 = 0.0;
    for c in comps {
        let mean: f64 = weights.iter().zip(c).map(|(w, v)| w * v).sum::<f64>() / sw;
        let cov: f64 = weights
            .iter()
            .zip(times)
            .zip(c)
            .map(|((w, t), v)| w * (t - st) * (v - mean))
            .sum();
        let slope = cov / stt;
        let icept = mean - slope * st;
        for ((w, t), v) in weights.iter().zip(times).zip(c) {
            let r = v - icept - slope * t;
            resid2 += w * r * r;
            total2 += w * v * v;
        }
        nu.push(icept);
        zeta.push(slope);
    }
    (nu, zeta, resid2.sqrt(), total2.sqrt())
}

/// Evaluates the piece of interval `i`, also at its right breakpoint.
fn on_piece(p: &PiecewisePolynomial, i: usize, t: f64, order: usize) -> Vec<f64> {
    if t >= p.breakpoints[i + 1] {
        p.eval(t, order)
    } else {
        p.eval_right(t, order)
    }
}

fn relative(num: f64, den: f64) -> f64 {
    if den < 1e-12 {
        num
    } else {
        num / den
    }
}

/// Fits `D_t γ̇ − η_γ = ν + tζ` on knot interval `interval`.
///
/// `η_γ` is the double covariant integral of `R(γ̇, D_t γ̇)γ̇` from the
/// interval start; `ν`, `ζ` are parallel fields expanded in a transported
/// orthonormal frame.
pub fn dubois_structure_check(
    candidate: &Candidate,
    problem: &InterpolationProblem,
    interval: usize,
) -> Result<StructureFit> {
    check_compatible(candidate, problem)?;
    if problem.order() != 2 {
        return Err(Error::Unsupported("structure check is defined for order 2".into()));
    }
    if interval >= problem.intervals() {
        return Err(Error::InvalidProblem(format!("no knot interval {interval}")));
    }
    match candidate {
        Candidate::Exact(p) => {
            let (a, b) = (p.breakpoints[interval], p.breakpoints[interval + 1]);
            let times: Vec<f64> = (0..=EXACT_SAMPLES)
                .map(|s| a + (b - a) * s as f64 / EXACT_SAMPLES as f64)
                .collect();
            let weights = trapezoid(times.len());
            let samples: Vec<Vec<f64>> = times.iter().map(|&t| on_piece(p, interval, t, 2)).collect();
            let comps: Vec<Vec<f64>> = (0..p.dim)
                .map(|q| samples.iter().map(|s| s[q]).collect())
                .collect();
            let (nu, zeta, r, tot) = affine_fit(&times, &weights, &comps);
            Ok(StructureFit {
                interval,
                misfit: relative(r, tot),
                nu,
                zeta,
            })
        }
        Candidate::Discrete(curve) => {
            let nodes = interval_nodes(curve, problem)?;
            let sub = curve.slice(nodes[interval], nodes[interval + 1])?;
            let man = sub.manifold();
            let d = sub.dim();
            let vel = velocity(&sub)?;
            let acc = covariant_acceleration(&sub)?;
            let mut src = VectorField::zeros(d, sub.len());
            for n in 0..sub.len() {
                let r = man
                    .curvature_at(sub.node(n))?
                    .apply(vel.node(n), acc.node(n), vel.node(n));
                src.node_mut(n).copy_from_slice(&r);
            }
            let eta = covariant_integral(&sub, &covariant_integral(&sub, &src)?)?;
            let target = acc.sub(&eta);
            let frame = parallel_frame(&sub)?;
            // the fit skips the nodes next to each breakpoint, where one-sided
            // constraint stencils leave an O(h) kink in the acceleration
            let fit_nodes = FIT_SKIP..sub.len() - FIT_SKIP;
            let times = sub.grid().times()[fit_nodes.clone()].to_vec();
            let weights = trapezoid(times.len());
            let comps: Vec<Vec<f64>> = frame
                .iter()
                .map(|e| {
                    fit_nodes
                        .clone()
                        .map(|n| man.inner(sub.node(n), target.node(n), e.node(n)))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            let (nu_f, zeta_f, r, tot) = affine_fit(&times, &weights, &comps);
            let expand = |c: &[f64]| -> Vec<f64> {
                (0..d)
                    .map(|q| (0..d).map(|a| c[a] * frame[a].node(0)[q]).sum())
                    .collect()
            };
            Ok(StructureFit {
                interval,
                misfit: relative(r, tot),
                nu: expand(&nu_f),
                zeta: expand(&zeta_f),
            })
        }
    }
}

fn trapezoid(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    w
}

/// `|E(γ) − E(γ reversed)|`.
pub fn reversal_check(candidate: &Candidate) -> Result<f64> {
    Ok(match candidate {
        Candidate::Exact(p) => {
            (exact_energy(p).energy_int - exact_energy(&p.reversed()).energy_int).abs()
        }
        Candidate::Discrete(c) => (spline_energy(c)? - spline_energy(&c.reversed())?).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::TimeGrid;
    use crate::polyspline::solve_exact;
    use crate::problem::Knot;

    fn flat_problem(site: usize) -> InterpolationProblem {
        InterpolationProblem::cubic(
            ManifoldModel::euclidean(2),
            vec![
                Knot::new(0.0, vec![0.0, 0.0]),
                Knot::new(0.25, vec![1.0, 0.5]),
                Knot::new(0.5, vec![0.2, 1.0]),
                Knot::new(1.0, vec![-1.0, 0.0]),
            ],
            Some((site, vec![1.0, -1.0])),
        )
        .unwrap()
    }

    #[test]
    fn exact_solutions_pass() {
        for site in 0..4 {
            let p = flat_problem(site);
            let c = Candidate::Exact(solve_exact(&p).unwrap());
            let rep = verify(&c, &p).unwrap();
            assert!(rep.passes(&Tolerances::exact()), "site {site}: {rep:?}");
        }
    }

    #[test]
    fn interior_site_has_reported_acceleration_jump() {
        let p = flat_problem(1);
        let c = Candidate::Exact(solve_exact(&p).unwrap());
        let j = junction_report(&c, &p).unwrap();
        let at_site = j.jumps.iter().find(|j| j.velocity_site).unwrap();
        assert!(at_site.jumps[0].1 < 1e-9);
        assert!(at_site.jumps[1].1 > 1e-3);
    }

    #[test]
    fn structure_recovers_affine_coefficients() {
        let p = flat_problem(0);
        let poly = solve_exact(&p).unwrap();
        let c = Candidate::Exact(poly.clone());
        for i in 0..3 {
            let fit = dubois_structure_check(&c, &p, i).unwrap();
            let t0 = poly.breakpoints[i];
            let c2 = &poly.coeffs[i];
            for q in 0..2 {
                // γ'' = 2 c2 + 6 c3 (t − t0)
                let zeta = 6.0 * c2[q][3];
                let nu = 2.0 * c2[q][2] - zeta * t0;
                assert!((fit.zeta[q] - zeta).abs() < 1e-8);
                assert!((fit.nu[q] - nu).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn discrete_flat_cubic_sampled_is_nearly_critical() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(1),
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            Some((0, vec![0.0])),
        )
        .unwrap();
        let poly = solve_exact(&p).unwrap();
        let curve = poly.to_curve(TimeGrid::unit(32).unwrap(), p.manifold().clone()).unwrap();
        let rep = verify(&Candidate::Discrete(curve), &p).unwrap();
        assert!(rep.el_max() < 1e-6, "{}", rep.el_max());
        assert!(rep.junctions.max_natural() < 1e-9);
        assert!(rep.structure_max() < 1e-10);
    }

    #[test]
    fn random_curve_fails() {
        let p = flat_problem(0);
        let curve = ChartCurve::from_fn(TimeGrid::unit(64).unwrap(), p.manifold().clone(), |t| {
            vec![(7.0 * t).sin(), (5.0 * t * t).cos()]
        })
        .unwrap();
        let rep = verify(&Candidate::Discrete(curve), &p).unwrap();
        assert!(!rep.passed());
        assert!(rep.structure_max() > 1e-3);
    }

    #[test]
    fn reversal_is_symmetric() {
        let c = ChartCurve::from_fn(TimeGrid::unit(40).unwrap(), ManifoldModel::sphere(), |t| {
            vec![t.sin() * 0.5, t * t * t - 0.2]
        })
        .unwrap();
        let e = spline_energy(&c).unwrap();
        assert!(reversal_check(&Candidate::Discrete(c)).unwrap() <= 1e-12 * e);
    }
}
