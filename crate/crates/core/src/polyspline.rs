//! Exact flat-space k-splines as piecewise polynomials of degree `2k − 1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curve::{ChartCurve, TimeGrid};
use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::problem::InterpolationProblem;

/// Largest number of intervals accepted by the monomial assembly.
pub const MAX_INTERVALS: usize = 50;


/// Piecewise polynomial; piece `i` is `Σ_p c[i][d][p] (t − t_i)^p` on `[t_i, t_{i+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    pub order: usize,
    pub dim: usize,
    pub breakpoints: Vec<f64>,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

/// One family of constraint rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum RowKind {
    Interpolation { interval: usize, right_end: bool },
    Prescribed { interval: usize, order: usize },
    Junction { knot: usize, order: usize },
    Natural { knot: usize, order: usize },
}

/// Square linear system for the coefficients, shared by all dimensions.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: DMatrix<f64>,
    /// One column per dimension.
    pub rhs: DMatrix<f64>,
    pub rows: Vec<RowKind>,
    pub order: usize,
    pub breakpoints: Vec<f64>,
}

fn falling(p: usize, l: usize) -> f64 {
    ((p - l + 1)..=p).map(|v| v as f64).product()
}

/// Coefficients of the order-`l` derivative row at local offset `s`.
fn deriv_row(n_coef: usize, l: usize, s: f64) -> Vec<f64> {
    (0..n_coef)
        .map(|p| if p < l { 0.0 } else { falling(p, l) * s.powi((p - l) as i32) })
        .collect()
}

pub fn assemble_system(problem: &InterpolationProblem) -> Result<LinearSystem> {
    if !problem.manifold().is_flat() {
        return Err(Error::Unsupported(format!(
            "exact solves need a flat manifold, got {}",
            problem.manifold().name()
        )));
    }
    let n = problem.intervals();
    if n > MAX_INTERVALS {
        return Err(Error::Conditioning {
            intervals: n,
            limit: MAX_INTERVALS,
        });
    }
    let k = problem.order();
    let nc = 2 * k;
    let unknowns = nc * n;
    let d = problem.manifold().dim();
    let t = problem.knot_times();
    let len = |i: usize| t[i + 1] - t[i];
    let knots = problem.knots();
    let site = problem.velocity_site();

    let mut rows: Vec<(RowKind, Vec<(usize, Vec<f64>)>, Vec<f64>)> = Vec::new();
    let zero = vec![0.0; d];
    for i in 0..n {
        rows.push((
            RowKind::Interpolation { interval: i, right_end: false },
            vec![(i, deriv_row(nc, 0, 0.0))],
            knots[i].point.coords.clone(),
        ));
        rows.push((
            RowKind::Interpolation { interval: i, right_end: true },
            vec![(i, deriv_row(nc, 0, len(i)))],
            knots[i + 1].point.coords.clone(),
        ));
    }
    if let (Some(j), Some(vc)) = (site, problem.velocity()) {
        for l in 1..k {
            let v = &vc.derivs[l - 1];
            if j > 0 {
                rows.push((
                    RowKind::Prescribed { interval: j - 1, order: l },
                    vec![(j - 1, deriv_row(nc, l, len(j - 1)))],
                    v.clone(),
                ));
            }
            if j < n {
                rows.push((
                    RowKind::Prescribed { interval: j, order: l },
                    vec![(j, deriv_row(nc, l, 0.0))],
                    v.clone(),
                ));
            }
        }
    }
    for i in 1..n {
        if site == Some(i) {
            continue;
        }
        for l in 1..=2 * k - 2 {
            let right: Vec<f64> = deriv_row(nc, l, 0.0).iter().map(|v| -v).collect();
            rows.push((
                RowKind::Junction { knot: i, order: l },
                vec![(i - 1, deriv_row(nc, l, len(i - 1))), (i, right)],
                zero.clone(),
            ));
        }
    }
    for (knot, interval, s) in [(0, 0, 0.0), (n, n - 1, len(n - 1))] {
        if site == Some(knot) {
            continue;
        }
        for l in k..=2 * k - 2 {
            rows.push((
                RowKind::Natural { knot, order: l },
                vec![(interval, deriv_row(nc, l, s))],
                zero.clone(),
            ));
        }
    }

    if rows.len() != unknowns {
        return Err(Error::CountMismatch {
            rows: rows.len(),
            unknowns,
        });
    }
    let mut matrix = DMatrix::zeros(unknowns, unknowns);
    let mut rhs = DMatrix::zeros(unknowns, d);
    let mut kinds = Vec::with_capacity(unknowns);
    for (r, (kind, blocks, b)) in rows.into_iter().enumerate() {
        for (interval, coefs) in blocks {
            for (p, c) in coefs.into_iter().enumerate() {
                matrix[(r, interval * nc + p)] = c;
            }
        }
        for (dd, v) in b.into_iter().enumerate() {
            rhs[(r, dd)] = v;
        }
        kinds.push(kind);
    }
    Ok(LinearSystem {
        matrix,
        rhs,
        rows: kinds,
        order: k,
        breakpoints: t,
    })
}

impl LinearSystem {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Solves by LU with partial pivoting after row and column equilibration.
    ///
    /// Refuses when the equilibrated matrix has reciprocal condition below `16 n ε`.
    pub fn solve(&self) -> Result<PiecewisePolynomial> {
        let nc = 2 * self.order;
        let n = self.breakpoints.len() - 1;
        let size = self.size();
        let d = self.rhs.ncols();
        // unknowns c_p h^p per interval, rows by their largest entry
        let col_scale: Vec<f64> = (0..size)
            .map(|c| {
                let (i, p) = (c / nc, c % nc);
                (self.breakpoints[i + 1] - self.breakpoints[i]).powi(-(p as i32))
            })
            .collect();
        let mut a = self.matrix.clone();
        for c in 0..size {
            a.column_mut(c).scale_mut(col_scale[c]);
        }
        let mut b = self.rhs.clone();
        for r in 0..size {
            let m = a.row(r).amax();
            if m > 0.0 {
                a.row_mut(r).scale_mut(1.0 / m);
                b.row_mut(r).scale_mut(1.0 / m);
            }
        }
        let sv = a.clone().svd(false, false).singular_values;
        let rcond = if sv.max() > 0.0 { sv.min() / sv.max() } else { 0.0 };
        if !(rcond >= 16.0 * size as f64 * f64::EPSILON) {
            return Err(Error::SingularSystem { rcond });
        }
        let x = a.lu().solve(&b).ok_or(Error::SingularSystem { rcond })?;
        let coeffs = (0..n)
            .map(|i| {
                (0..d)
                    .map(|dd| {
                        (0..nc)
                            .map(|p| x[(i * nc + p, dd)] * col_scale[i * nc + p])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(PiecewisePolynomial {
            order: self.order,
            dim: d,
            breakpoints: self.breakpoints.clone(),
            coeffs,
        })
    }

    /// Largest componentwise backward error `|Ax − b|ᵢ / (1 + |bᵢ| + Σⱼ|aᵢⱼ xⱼ|)`.
    pub fn max_residual(&self, poly: &PiecewisePolynomial) -> f64 {
        let nc = 2 * self.order;
        let mut worst: f64 = 0.0;
        for dd in 0..self.rhs.ncols() {
            let x = DVector::from_fn(self.size(), |c, _| poly.coeffs[c / nc][dd][c % nc]);
            let r = &self.matrix * &x;
            for row in 0..self.size() {
                let b = self.rhs[(row, dd)];
                let mag: f64 = (0..self.size()).map(|c| (self.matrix[(row, c)] * x[c]).abs()).sum();
                worst = worst.max((r[row] - b).abs() / (1.0 + b.abs() + mag));
            }
        }
        worst
    }
}

/// Assembles and solves the exact spline for a flat problem.
pub fn solve_exact(problem: &InterpolationProblem) -> Result<PiecewisePolynomial> {
    assemble_system(problem)?.solve()
}

/// Energy integrals of a piecewise polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactEnergy {
    /// `∫ |γ^{(k)}|²`.
    pub energy_int: f64,
    /// The spline functional: `½ ∫ |γ''|²` for `k = 2`, `∫ |γ^{(k)}|²` otherwise.
    pub energy_f: f64,
}

pub fn exact_energy(poly: &PiecewisePolynomial) -> ExactEnergy {
    let k = poly.order;
    let mut sum = Neumaier::default();
    for (i, piece) in poly.coeffs.iter().enumerate() {
        let h = poly.breakpoints[i + 1] - poly.breakpoints[i];
        for c in piece {
            let q: Vec<f64> = (k..c.len()).map(|p| c[p] * falling(p, k)).collect();
            for (a, qa) in q.iter().enumerate() {
                for (b, qb) in q.iter().enumerate() {
                    let e = (a + b + 1) as i32;
                    sum.add(qa * qb * h.powi(e) / e as f64);
                }
            }
        }
    }
    let energy_int = sum.total();
    ExactEnergy {
        energy_int,
        energy_f: if k == 2 { 0.5 * energy_int } else { energy_int },
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl PiecewisePolynomial {
    pub fn intervals(&self) -> usize {
        self.breakpoints.len() - 1
    }

    fn eval_piece(&self, i: usize, t: f64, order: usize) -> Vec<f64> {
        let s = t - self.breakpoints[i];
        self.coeffs[i]
            .iter()
            .map(|c| {
                // Horner on the differentiated coefficients
                let mut acc = 0.0;
                for p in (order..c.len()).rev() {
                    acc = acc * s + c[p] * falling(p, order);
                }
                acc
            })
            .collect()
    }

    /// Derivative of the given order; at an interior breakpoint the left piece is used.
    pub fn eval(&self, t: f64, order: usize) -> Vec<f64> {
        let n = self.intervals();
        let i = (1..n).rev().find(|&i| self.breakpoints[i] < t).unwrap_or(0);
        self.eval_piece(i, t, order)
    }

    /// Like [`eval`](Self::eval) but taking the right piece at breakpoints.
    pub fn eval_right(&self, t: f64, order: usize) -> Vec<f64> {
        let n = self.intervals();
        let i = (1..n).rev().find(|&i| self.breakpoints[i] <= t).unwrap_or(0);
        self.eval_piece(i, t, order)
    }

    /// The same curve traversed backwards, `t ↦ γ(1 − t)`.
    pub fn reversed(&self) -> Self {
        let n = self.intervals();
        let t0 = self.breakpoints[0];
        let t1 = self.breakpoints[n];
        let breakpoints = self.breakpoints.iter().rev().map(|t| t0 + t1 - t).collect();
        let coeffs = (0..n)
            .rev()
            .map(|i| {
                let h = self.breakpoints[i + 1] - self.breakpoints[i];
                self.coeffs[i]
                    .iter()
                    .map(|c| {
                        // p(h − s) expanded in powers of s
                        let mut out = vec![0.0; c.len()];
                        for (p, cp) in c.iter().enumerate() {
                            let mut binom = 1.0;
                            for q in 0..=p {
                                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                                out[q] += cp * binom * sign * h.powi((p - q) as i32);
                                binom = binom * (p - q) as f64 / (q + 1) as f64;
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Self {
            order: self.order,
            dim: self.dim,
            breakpoints,
            coeffs,
        }
    }

    /// Samples the polynomial on a grid as a chart curve.
    pub fn to_curve(&self, grid: TimeGrid, manifold: ManifoldModel) -> Result<ChartCurve> {
        if manifold.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: manifold.dim(),
            });
        }
        ChartCurve::from_fn(grid, manifold, |t| self.eval(t, 0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Knot, VelocityConstraint};

    fn e1() -> ManifoldModel {
        ManifoldModel::euclidean(1)
    }

    #[test]
    fn cubic_benchmark() {
        let p = InterpolationProblem::cubic(
            e1(),
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            Some((0, vec![0.0])),
        )
        .unwrap();
        let sys = assemble_system(&p).unwrap();
        assert_eq!(sys.size(), 4);
        let poly = sys.solve().unwrap();
        let c = &poly.coeffs[0][0];
        for (got, want) in c.iter().zip([0.0, 0.0, 1.5, -0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((exact_energy(&poly).energy_f - 1.5).abs() < 1e-12);
        assert_eq!(poly.eval(1.0, 0), vec![1.0]);
        assert!(poly.eval(1.0, 2)[0].abs() < 1e-12);
        assert_eq!(poly.eval(0.3, 4), vec![0.0]);
    }

    #[test]
    fn collinear_data_gives_the_line() {
        let knots = (0..=4)
            .map(|i| {
                let t = i as f64 / 4.0;
                Knot::new(t, vec![t])
            })
            .collect();
        let p = InterpolationProblem::cubic(e1(), knots, Some((0, vec![1.0]))).unwrap();
        let poly = solve_exact(&p).unwrap();
        assert!(exact_energy(&poly).energy_int.abs() < 1e-20);
        for t in [0.1, 0.5, 0.77] {
            assert!((poly.eval(t, 0)[0] - t).abs() < 1e-14);
        }
    }

    #[test]
    fn order_three_line() {
        let p = InterpolationProblem::new(
            e1(),
            3,
            vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])],
            Some(VelocityConstraint {
                site: 0,
                derivs: vec![vec![1.0], vec![0.0]],
            }),
        )
        .unwrap();
        let poly = solve_exact(&p).unwrap();
        for t in [0.2, 0.9] {
            assert!((poly.eval(t, 0)[0] - t).abs() < 1e-13);
        }
    }

    #[test]
    fn reversal_preserves_values_and_energy() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::euclidean(2),
            vec![
                Knot::new(0.0, vec![0.0, 1.0]),
                Knot::new(0.4, vec![1.0, -1.0]),
                Knot::new(1.0, vec![0.5, 2.0]),
            ],
            Some((1, vec![1.0, 0.0])),
        )
        .unwrap();
        let poly = solve_exact(&p).unwrap();
        let rev = poly.reversed();
        for t in [0.0, 0.25, 0.4, 0.6, 1.0] {
            let a = poly.eval(t, 0);
            let b = rev.eval(1.0 - t, 0);
            assert!((a[0] - b[0]).abs() < 1e-13 && (a[1] - b[1]).abs() < 1e-13);
        }
        let (ea, eb) = (exact_energy(&poly).energy_int, exact_energy(&rev).energy_int);
        assert!((ea - eb).abs() <= 1e-12 * ea);
    }

    #[test]
    fn refuses_curved_and_huge_problems() {
        let p = InterpolationProblem::cubic(
            ManifoldModel::sphere(),
            vec![Knot::new(0.0, vec![0.0, 0.0]), Knot::new(1.0, vec![0.5, 0.0])],
            None,
        )
        .unwrap();
        assert!(matches!(assemble_system(&p), Err(Error::Unsupported(_))));
        let knots = (0..=60).map(|i| Knot::new(i as f64 / 60.0, vec![0.0])).collect();
        let big = InterpolationProblem::cubic(e1(), knots, None).unwrap();
        assert!(matches!(assemble_system(&big), Err(Error::Conditioning { .. })));
    }
}
