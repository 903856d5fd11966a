//! Winding-class experiments on the flat cylinder of perimeter one.
//!
//! Curves live on the universal cover: the angular coordinate is measured in
//! winding units and winding classes are explicit integers.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::polyspline::{exact_energy, solve_exact};
use crate::problem::{InterpolationProblem, Knot, VelocityConstraint};
use crate::rational::{convergents, small_rational};

/// The golden-ratio conjugate `(√5 − 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Three-knot problem `γ(0) = 0`, `γ(r) = m + ½`, `γ(1) = k₀` on the cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingProblem {
    pub r: f64,
    pub m: i64,
    pub k0: i64,
    pub v: Option<f64>,
}

impl WindingProblem {
    pub fn new(r: f64, m: i64, k0: i64, v: Option<f64>) -> Result<Self> {
        check_r(r)?;
        Ok(Self { r, m, k0, v })
    }

    /// `p/q` when `r` is a rational with denominator at most 10⁴.
    pub fn rational_form(&self) -> Option<(i64, i64)> {
        small_rational(self.r, 10_000, 1e-14)
    }

    /// The one-dimensional problem in the angular coordinate.
    ///
    /// Without `v` both ends carry natural conditions.
    pub fn angular_problem(&self) -> Result<InterpolationProblem> {
        self.build(ManifoldModel::euclidean(1), |x| vec![x])
    }

    /// The same problem on the cylinder chart, height fixed at zero.
    pub fn cylinder_problem(&self) -> Result<InterpolationProblem> {
        self.build(ManifoldModel::FlatCylinder, |x| vec![x, 0.0])
    }

    fn build(
        &self,
        manifold: ManifoldModel,
        lift: impl Fn(f64) -> Vec<f64>,
    ) -> Result<InterpolationProblem> {
        let knots = vec![
            Knot::new(0.0, lift(0.0)),
            Knot::new(self.r, lift(self.m as f64 + 0.5)),
            Knot::new(1.0, lift(self.k0 as f64)),
        ];
        let velocity = self.v.map(|v| VelocityConstraint {
            site: 0,
            derivs: vec![lift(v)],
        });
        InterpolationProblem::new(manifold, 2, knots, velocity)
    }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!("middle knot time must lie in (0, 1), got {r}")))
    }
}

/// `∫₀¹ q̈²` for the quadratic through `(0,0)`, `(r, m+½)`, `(1,k₀)`.
pub fn parabola_energy(r: f64, k0: i64, m: i64) -> f64 {
    let gap = m as f64 + 0.5 - k0 as f64 * r;
    4.0 * gap * gap / ((r * r - r) * (r * r - r))
}

/// Coefficients `(a, b)` of that quadratic `q(t) = a t² + b t`.
pub fn parabola(r: f64, k0: i64, m: i64) -> (f64, f64) {
    let a = (m as f64 + 0.5 - k0 as f64 * r) / (r * r - r);
    (a, k0 as f64 - a)
}

/// One row of a Dirichlet scan: the best class with `1 ≤ k₀ ≤ k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletEntry {
    pub k_max: i64,
    pub k0: i64,
    pub m: i64,
    /// `|m + ½ − k₀ r|`
    pub gap: f64,
    pub energy_int: f64,
    pub energy_f: f64,
    /// `q̇(0)` of the parabola.
    pub initial_speed: f64,
}

impl DirichletEntry {
    fn new(r: f64, k_max: i64, k0: i64, m: i64) -> Self {
        let energy_int = parabola_energy(r, k0, m);
        Self {
            k_max,
            k0,
            m,
            gap: signed_gap(r, k0, m).abs(),
            energy_int,
            energy_f: 0.5 * energy_int,
            initial_speed: parabola(r, k0, m).1,
        }
    }
}

fn signed_gap(r: f64, k0: i64, m: i64) -> f64 {
    m as f64 + 0.5 - k0 as f64 * r
}

fn nearest_m(r: f64, k0: i64) -> i64 {
    (k0 as f64 * r - 0.5).round() as i64
}

/// Exhaustive scan over `k₀ = 1..=k_max`; ties keep the smaller `k₀`.
pub fn best_class(r: f64, k_max: i64) -> Result<DirichletEntry> {
    dirichlet_sequence(r, k_max).map(|mut s| s.pop().expect("non-empty schedule"))
}

/// Best classes for `K = 1, 2, 4, …` and finally `K = k_max`.
pub fn dirichlet_sequence(r: f64, k_max: i64) -> Result<Vec<DirichletEntry>> {
    check_r(r)?;
    if k_max < 1 {
        return Err(Error::InvalidProblem(format!("K_max must be at least 1, got {k_max}")));
    }
    let mut out = Vec::new();
    let mut best = (f64::INFINITY, 0i64, 0i64);
    let mut next = 1i64;
    for k in 1..=k_max {
        let m = nearest_m(r, k);
        let gap = signed_gap(r, k, m).abs();
        if gap < best.0 {
            best = (gap, k, m);
        }
        if k == next || k == k_max {
            out.push(DirichletEntry::new(r, k, best.1, best.2));
            next = next.saturating_mul(2);
        }
    }
    Ok(out)
}

/// The values of `k₀ ≤ k_max` at which the best gap strictly improves.
pub fn record_classes(r: f64, k_max: i64) -> Vec<(i64, i64)> {
    let mut best = f64::INFINITY;
    let mut out = Vec::new();
    for k in 1..=k_max {
        let m = nearest_m(r, k);
        let gap = signed_gap(r, k, m).abs();
        if gap < best {
            best = gap;
            out.push((k, m));
        }
    }
    out
}

/// Classes `(q, (p−1)/2)` from convergents `p/q` of `2r` with odd `p`, `q ≤ k_max`.
///
/// For badly approximable `r` these coincide with [`record_classes`].
pub fn convergent_classes(r: f64, k_max: i64) -> Vec<(i64, i64)> {
    convergents(2.0 * r, 64)
        .into_iter()
        .take_while(|&(_, q)| q <= k_max)
        .filter(|&(p, q)| q >= 1 && p.rem_euclid(2) == 1)
        .map(|(p, q)| (q, (p - 1) / 2))
        .collect()
}

/// Energy of one class in a winding scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub m: i64,
    pub k0: i64,
    pub energy_int: f64,
    pub energy_f: f64,
}

/// Exact spline energies over a rectangle of classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingScan {
    pub r: f64,
    pub v: Option<f64>,
    pub m_range: (i64, i64),
    pub k_range: (i64, i64),
    /// Row-major in `m`, then `k₀`.
    pub cells: Vec<ScanCell>,
    pub argmin: ScanCell,
}

impl WindingScan {
    pub fn cell(&self, m: i64, k0: i64) -> Option<&ScanCell> {
        if m < self.m_range.0 || m > self.m_range.1 || k0 < self.k_range.0 || k0 > self.k_range.1 {
            return None;
        }
        let width = (self.k_range.1 - self.k_range.0 + 1) as usize;
        self.cells
            .get((m - self.m_range.0) as usize * width + (k0 - self.k_range.0) as usize)
    }

    /// Cells with `m` or `k₀` on the edge of the window.
    pub fn boundary(&self) -> impl Iterator<Item = &ScanCell> {
        self.cells.iter().filter(move |c| {
            c.m == self.m_range.0
                || c.m == self.m_range.1
                || c.k0 == self.k_range.0
                || c.k0 == self.k_range.1
        })
    }

    pub fn min_boundary_energy(&self) -> f64 {
        self.boundary().map(|c| c.energy_int).fold(f64::INFINITY, f64::min)
    }
}

/// Exact spline energy of one class.
pub fn class_energy(r: f64, m: i64, k0: i64, v: Option<f64>) -> Result<ScanCell> {
    let problem = WindingProblem::new(r, m, k0, v)?.angular_problem()?;
    let e = exact_energy(&solve_exact(&problem)?);
    Ok(ScanCell {
        m,
        k0,
        energy_int: e.energy_int,
        energy_f: e.energy_f,
    })
}

/// Solves every class in the window; the argmin breaks ties by `(m, k₀)`.
pub fn constrained_winding_scan(
    r: f64,
    v: Option<f64>,
    m_range: RangeInclusive<i64>,
    k_range: RangeInclusive<i64>,
) -> Result<WindingScan> {
    check_r(r)?;
    if m_range.is_empty() || k_range.is_empty() {
        return Err(Error::InvalidProblem("winding window is empty".into()));
    }
    let pairs: Vec<(i64, i64)> = m_range
        .clone()
        .flat_map(|m| k_range.clone().map(move |k| (m, k)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(m, k)| class_energy(r, m, k, v))
        .collect::<Result<Vec<_>>>()?;
    let argmin = cells
        .iter()
        .min_by(|a, b| {
            a.energy_int
                .total_cmp(&b.energy_int)
                .then(a.m.cmp(&b.m))
                .then(a.k0.cmp(&b.k0))
        })
        .cloned()
        .expect("non-empty window");
    Ok(WindingScan {
        r,
        v,
        m_range: (*m_range.start(), *m_range.end()),
        k_range: (*k_range.start(), *k_range.end()),
        cells,
        argmin,
    })
}

/// Square window `[−w, w]²`.
pub fn square_scan(r: f64, v: Option<f64>, w: i64) -> Result<WindingScan> {
    constrained_winding_scan(r, v, -w..=w, -w..=w)
}

/// Coefficients of `(1 − s²)³` in ascending powers of `s`.
const BUMP: [f64; 7] = [1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0];

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(p, a)| p as f64 * a).collect()
}

fn poly_eval(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * s + a)
}

/// `∫₀¹ φ̈²` for the bump `φ(t) = (1 − ((t−r)/δ)²)³` on `(r−δ, r+δ)`.
pub fn bump_energy(delta: f64) -> f64 {
    let d2 = poly_derivative(&poly_derivative(&BUMP));
    let mut sq = vec![0.0; 2 * d2.len() - 1];
    for (i, a) in d2.iter().enumerate() {
        for (j, b) in d2.iter().enumerate() {
            sq[i + j] += a * b;
        }
    }
    let over_unit: f64 = sq
        .iter()
        .enumerate()
        .filter(|(p, _)| p % 2 == 0)
        .map(|(p, a)| 2.0 * a / (p as f64 + 1.0))
        .sum();
    over_unit / delta.powi(3)
}

/// `γ(t) = k₀ t + α φ(t)` with `α = m + ½ − k₀ r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalPeriodicCurve {
    pub r: f64,
    pub delta: f64,
    pub k_max: i64,
    pub k0: i64,
    pub m: i64,
    pub alpha: f64,
    pub energy_int: f64,
    pub energy_f: f64,
}

impl NaturalPeriodicCurve {
    pub fn new(r: f64, delta: f64, k0: i64, m: i64) -> Result<Self> {
        check_support(r, delta)?;
        let alpha = signed_gap(r, k0, m);
        let energy_int = alpha * alpha * bump_energy(delta);
        Ok(Self {
            r,
            delta,
            k_max: k0,
            k0,
            m,
            alpha,
            energy_int,
            energy_f: 0.5 * energy_int,
        })
    }

    /// Derivative of the given order at `t`.
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let line = match order {
            0 => self.k0 as f64 * t,
            1 => self.k0 as f64,
            _ => 0.0,
        };
        let s = (t - self.r) / self.delta;
        if s.abs() >= 1.0 {
            return line;
        }
        let mut c = BUMP.to_vec();
        for _ in 0..order {
            c = poly_derivative(&c);
        }
        line + self.alpha * poly_eval(&c, s) / self.delta.powi(order as i32)
    }
}

fn check_support(r: f64, delta: f64) -> Result<()> {
    check_r(r)?;
    if delta > 0.0 && r - delta > 0.0 && r + delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProblem(format!(
            "bump support [{}, {}] must lie inside (0, 1)",
            r - delta,
            r + delta
        )))
    }
}

/// Bump-perturbed lines along the Dirichlet classes of [`dirichlet_sequence`].
pub fn natural_periodic_sequence(r: f64, k_max: i64, delta: f64) -> Result<Vec<NaturalPeriodicCurve>> {
    check_support(r, delta)?;
    dirichlet_sequence(r, k_max)?
        .into_iter()
        .map(|e| {
            NaturalPeriodicCurve::new(r, delta, e.k0, e.m).map(|c| NaturalPeriodicCurve {
                k_max: e.k_max,
                ..c
            })
        })
        .collect()
}
