//! Discrete spline energy and its exact gradient.
//!
//! The energy is a weighted sum of samples `w/2 · g(x_n)(a, a)` with
//! `a = ẍ + Γ(x_n)(ẋ, ẋ)`. Interior nodes use the compact second difference
//! with the central first difference and trapezoid weight `h`. Endpoint
//! samples carry weight `h/2`: a natural end uses the four-point one-sided
//! second difference, an end carrying the prescribed velocity uses the
//! three-point one. An interior velocity site is split into a left and a right
//! half-sample built from one-sided stencils, so the curve may have a kink in
//! its acceleration there.

use crate::constraints::{knot_nodes, Parametrization};
use crate::curve::{ChartCurve, TimeGrid, VectorField};
use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::problem::InterpolationProblem;

const FWD: [f64; 3] = [-1.5, 2.0, -0.5];
const BWD: [f64; 3] = [1.5, -2.0, 0.5];

#[derive(Debug, Clone)]
pub(crate) struct Sample {
    /// Node where metric and connection are evaluated.
    pub node: usize,
    pub weight: f64,
    /// Second-difference coefficients, to be divided by `h²`.
    pub accel: Vec<(usize, f64)>,
    /// First-difference coefficients, to be divided by `h`.
    pub vel: Vec<(usize, f64)>,
}

/// Sample layout of the discrete energy on one grid.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    grid: TimeGrid,
    samples: Vec<Sample>,
}

impl DiscreteEnergy {
    /// Layout with natural end stencils at both ends and no velocity site.
    pub fn natural(grid: TimeGrid) -> Result<Self> {
        Self::with_site(grid, None)
    }

    /// Layout matching the velocity site of `problem`, if any.
    pub fn for_problem(problem: &InterpolationProblem, grid: TimeGrid) -> Result<Self> {
        let site = match problem.velocity_site() {
            Some(j) => Some(knot_nodes(problem, &grid)?[j]),
            None => None,
        };
        Self::with_site(grid, site)
    }

    fn with_site(grid: TimeGrid, site: Option<usize>) -> Result<Self> {
        let m = grid.m();
        if m < 4 {
            return Err(Error::InfeasibleGrid(format!("energy needs M >= 4, got {m}")));
        }
        let h = grid.h();
        let mut samples = Vec::with_capacity(m + 2);
        let fwd = |s: usize| (0..3).map(|k| (s + k, FWD[k])).collect::<Vec<_>>();
        let bwd = |s: usize| (0..3).map(|k| (s - k, BWD[k])).collect::<Vec<_>>();
        for i in 0..=m {
            let at_site = site == Some(i);
            if i == 0 {
                let accel = if at_site {
                    vec![(0, 1.0), (1, -2.0), (2, 1.0)]
                } else {
                    vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
                };
                samples.push(Sample { node: 0, weight: 0.5 * h, accel, vel: fwd(0) });
            } else if i == m {
                let accel = if at_site {
                    vec![(m, 1.0), (m - 1, -2.0), (m - 2, 1.0)]
                } else {
                    vec![(m, 2.0), (m - 1, -5.0), (m - 2, 4.0), (m - 3, -1.0)]
                };
                samples.push(Sample { node: m, weight: 0.5 * h, accel, vel: bwd(m) });
            } else if at_site {
                if i < 2 || i + 2 > m {
                    return Err(Error::InfeasibleGrid(
                        "interior velocity site needs two nodes on each side".into(),
                    ));
                }
                samples.push(Sample {
                    node: i,
                    weight: 0.5 * h,
                    accel: vec![(i, 1.0), (i - 1, -2.0), (i - 2, 1.0)],
                    vel: bwd(i),
                });
                samples.push(Sample {
                    node: i,
                    weight: 0.5 * h,
                    accel: vec![(i, 1.0), (i + 1, -2.0), (i + 2, 1.0)],
                    vel: fwd(i),
                });
            } else {
                samples.push(Sample {
                    node: i,
                    weight: h,
                    accel: vec![(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)],
                    vel: vec![(i - 1, -0.5), (i + 1, 0.5)],
                });
            }
        }
        Ok(Self { grid, samples })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub(crate) fn samples(&self) -> &[Sample] {
        &self.samples
    }

    fn check(&self, manifold: &ManifoldModel, coords: &[f64]) -> Result<usize> {
        let d = manifold.dim();
        let want = d * self.grid.len();
        if coords.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                got: coords.len(),
            });
        }
        Ok(d)
    }

    fn sample_state(&self, s: &Sample, coords: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.h();
        let mut acc = vec![0.0; d];
        let mut vel = vec![0.0; d];
        // stencil weights sum to zero; differencing against the sample node
        // avoids cancellation in absolute coordinates
        let base = &coords[s.node * d..(s.node + 1) * d];
        for &(j, c) in &s.accel {
            for k in 0..d {
                acc[k] += c * (coords[j * d + k] - base[k]);
            }
        }
        for &(j, c) in &s.vel {
            for k in 0..d {
                vel[k] += c * (coords[j * d + k] - base[k]);
            }
        }
        let (h2inv, hinv) = (1.0 / (h * h), 1.0 / h);
        acc.iter_mut().for_each(|a| *a *= h2inv);
        vel.iter_mut().for_each(|v| *v *= hinv);
        (acc, vel)
    }

    /// Energy `½ Σ w g(a, a)` of node-major chart coordinates.
    pub fn value(&self, manifold: &ManifoldModel, coords: &[f64]) -> Result<f64> {
        let d = self.check(manifold, coords)?;
        let mut total = 0.0;
        for s in &self.samples {
            let (mut a, u) = self.sample_state(s, coords, d);
            let x = &coords[s.node * d..(s.node + 1) * d];
            if manifold.is_flat() {
                total += 0.5 * s.weight * a.iter().map(|v| v * v).sum::<f64>();
                continue;
            }
            let geo = manifold.local_geometry(x)?;
            let corr = geo.christoffel.contract(&u, &u);
            a.iter_mut().zip(corr).for_each(|(ai, c)| *ai += c);
            total += 0.5 * s.weight * geo.inner(&a, &a);
        }
        Ok(total)
    }

    /// Energy and its gradient with respect to every node coordinate.
    pub fn value_and_gradient(
        &self,
        manifold: &ManifoldModel,
        coords: &[f64],
    ) -> Result<(f64, Vec<f64>)> {
        let d = self.check(manifold, coords)?;
        let h = self.grid.h();
        let (h2inv, hinv) = (1.0 / (h * h), 1.0 / h);
        let mut grad = vec![0.0; coords.len()];
        let mut total = 0.0;
        for s in &self.samples {
            let (mut a, u) = self.sample_state(s, coords, d);
            let n = s.node;
            if manifold.is_flat() {
                total += 0.5 * s.weight * a.iter().map(|v| v * v).sum::<f64>();
                for &(j, c) in &s.accel {
                    for k in 0..d {
                        grad[j * d + k] += s.weight * c * h2inv * a[k];
                    }
                }
                continue;
            }
            let geo = manifold.local_geometry(&coords[n * d..(n + 1) * d])?;
            let gam = &geo.christoffel;
            let corr = gam.contract(&u, &u);
            a.iter_mut().zip(corr).for_each(|(ai, c)| *ai += c);
            total += 0.5 * s.weight * geo.inner(&a, &a);
            let lam: Vec<f64> = geo.lower(&a).iter().map(|l| s.weight * l).collect();

            // explicit dependence of g and Γ on the sample node
            for c in 0..d {
                let mut gc = 0.0;
                for p in 0..d {
                    for q in 0..d {
                        gc += 0.5 * s.weight * geo.dg(c, p, q) * a[p] * a[q];
                    }
                }
                for b in 0..d {
                    let mut t = 0.0;
                    for p in 0..d {
                        for q in 0..d {
                            t += geo.dgamma(c, b, p, q) * u[p] * u[q];
                        }
                    }
                    gc += lam[b] * t;
                }
                grad[n * d + c] += gc;
            }
            for &(j, c) in &s.accel {
                for k in 0..d {
                    grad[j * d + k] += c * h2inv * lam[k];
                }
            }
            // ∂a^b/∂u^e = 2 Γ^b_pe u^p
            let mut du = vec![0.0; d];
            for (e, due) in du.iter_mut().enumerate() {
                for b in 0..d {
                    for p in 0..d {
                        *due += 2.0 * lam[b] * gam.get(b, p, e) * u[p];
                    }
                }
            }
            for &(j, c) in &s.vel {
                for k in 0..d {
                    grad[j * d + k] += c * hinv * du[k];
                }
            }
        }
        Ok((total, grad))
    }
}

/// Discrete spline energy `½ ∫ g(D_t γ̇, D_t γ̇)` with natural end stencils.
pub fn spline_energy(curve: &ChartCurve) -> Result<f64> {
    DiscreteEnergy::natural(curve.grid().clone())?.value(curve.manifold(), curve.coords())
}

/// Gradient of the problem's discrete energy with respect to the free
/// parameters, scattered onto their nodes; pinned and eliminated nodes are 0.
pub fn energy_gradient(curve: &ChartCurve, problem: &InterpolationProblem) -> Result<VectorField> {
    let grid = curve.grid().clone();
    let par = Parametrization::new(problem, &grid)?;
    let energy = DiscreteEnergy::for_problem(problem, grid)?;
    let (_, raw) = energy.value_and_gradient(curve.manifold(), curve.coords())?;
    VectorField::from_flat(curve.dim(), par.mask(&raw))
}
