//! Uniform time grids, chart curves and discrete vector fields along them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldModel;
use crate::rational;

/// Tolerance for deciding that a time coincides with a grid node, in units of the step.
const NODE_TOL: f64 = 1e-9;

/// Uniform grid `t0, t0 + h, …, t1` with `m` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    m: usize,
}

impl TimeGrid {
    /// The grid `0, 1/M, …, 1`.
    pub fn unit(m: usize) -> Result<Self> {
        Self::new(0.0, 1.0, m)
    }

    pub fn new(t0: f64, t1: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InfeasibleGrid(format!("grid needs M >= 2, got {m}")));
        }
        if !(t1 > t0) {
            return Err(Error::InfeasibleGrid(format!("empty time interval [{t0}, {t1}]")));
        }
        Ok(Self { t0, t1, m })
    }

    /// Number of steps (node count minus one).
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t1
    }

    pub fn h(&self) -> f64 {
        (self.t1 - self.t0) / self.m as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.m {
            self.t1
        } else {
            self.t0 + (self.t1 - self.t0) * (i as f64 / self.m as f64)
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.time(i)).collect()
    }

    /// Index of the node at time `t`, if `t` is a node.
    pub fn node_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.h();
        let i = x.round();
        if (x - i).abs() <= NODE_TOL && i >= 0.0 && i <= self.m as f64 {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Sub-grid spanning nodes `a..=b`.
    pub fn slice(&self, a: usize, b: usize) -> Result<Self> {
        Self::new(self.time(a), self.time(b), b - a)
    }
}

/// Least M for which all `times` in `[0,1]` are grid nodes.
///
/// Times without a denominator up to 10⁶ are reported as irrational.
pub fn suggest_grid(times: &[f64]) -> Result<usize> {
    rational::common_denominator(times, 1_000_000, 1e-14)
        .map(|q| q as usize)
        .map_err(Error::IrrationalKnot)
}

/// Least multiple of [`suggest_grid`] that is at least `at_least`.
pub fn suggest_grid_near(times: &[f64], at_least: usize) -> Result<usize> {
    let base = suggest_grid(times)?.max(1);
    Ok(base * at_least.div_ceil(base).max(1))
}

/// A discrete vector field: one `dim`-vector per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    dim: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(dim: usize, nodes: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * nodes],
        }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds a field by evaluating `f` at every node index.
    pub fn from_fn(dim: usize, nodes: usize, mut f: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(dim * nodes);
        for i in 0..nodes {
            let v = f(i);
            debug_assert_eq!(v.len(), dim);
            data.extend_from_slice(&v);
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn slice(&self, a: usize, b: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[a * self.dim..(b + 1) * self.dim].to_vec(),
        }
    }

    /// Largest Euclidean component norm over nodes `range`.
    pub fn max_norm_over(&self, range: std::ops::Range<usize>) -> f64 {
        range
            .map(|i| self.node(i).iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// A curve sampled on a uniform grid in a manifold chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartCurve {
    grid: TimeGrid,
    manifold: ManifoldModel,
    coords: Vec<f64>,
}

impl ChartCurve {
    /// `coords` is node-major: `coords[i * dim + d]`.
    pub fn new(grid: TimeGrid, manifold: ManifoldModel, coords: Vec<f64>) -> Result<Self> {
        let dim = manifold.dim();
        if coords.len() != dim * grid.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * grid.len(),
                got: coords.len(),
            });
        }
        for x in coords.chunks(dim) {
            manifold.check(x)?;
        }
        Ok(Self {
            grid,
            manifold,
            coords,
        })
    }

    /// Samples `f(t)` at every node.
    pub fn from_fn(
        grid: TimeGrid,
        manifold: ManifoldModel,
        mut f: impl FnMut(f64) -> Vec<f64>,
    ) -> Result<Self> {
        let mut coords = Vec::with_capacity(grid.len() * manifold.dim());
        for t in grid.times() {
            coords.extend(f(t));
        }
        Self::new(grid, manifold, coords)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn manifold(&self) -> &ManifoldModel {
        &self.manifold
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Replaces the coordinates, revalidating chart admissibility.
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, self.manifold.clone(), coords)
    }

    /// Same nodes traversed backwards on the same grid.
    pub fn reversed(&self) -> Self {
        let d = self.dim();
        let mut coords = Vec::with_capacity(self.coords.len());
        for i in (0..self.len()).rev() {
            coords.extend_from_slice(&self.coords[i * d..(i + 1) * d]);
        }
        Self {
            grid: self.grid,
            manifold: self.manifold.clone(),
            coords,
        }
    }

    /// Restriction to nodes `a..=b`, on the corresponding sub-grid.
    pub fn slice(&self, a: usize, b: usize) -> Result<Self> {
        let d = self.dim();
        Ok(Self {
            grid: self.grid.slice(a, b)?,
            manifold: self.manifold.clone(),
            coords: self.coords[a * d..(b + 1) * d].to_vec(),
        })
    }

    pub fn as_field(&self) -> VectorField {
        VectorField {
            dim: self.dim(),
            data: self.coords.clone(),
        }
    }
}

/// Second-order first-derivative stencil at node `i` of `n` nodes: `(offsets, weights)` scaled by `1/h`.
pub(crate) fn d1_stencil(i: usize, n: usize) -> [(usize, f64); 3] {
    if i == 0 {
        [(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if i == n - 1 {
        [(n - 1, 1.5), (n - 2, -2.0), (n - 3, 0.5)]
    } else {
        [(i - 1, -0.5), (i, 0.0), (i + 1, 0.5)]
    }
}

/// Second-order second-derivative stencil (scaled by `1/h²`): compact interior,
/// four-point one-sided at the ends.
pub(crate) fn d2_stencil(i: usize, n: usize) -> Vec<(usize, f64)> {
    if i == 0 {
        vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if i == n - 1 {
        vec![(n - 1, 2.0), (n - 2, -5.0), (n - 3, 4.0), (n - 4, -1.0)]
    } else {
        vec![(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
    }
}

/// Applies the first-derivative stencil to a node-major array.
pub(crate) fn differentiate(values: &[f64], dim: usize, h: f64) -> Vec<f64> {
    let n = values.len() / dim;
    let mut out = vec![0.0; values.len()];
    for i in 0..n {
        for (j, w) in d1_stencil(i, n) {
            if w == 0.0 {
                continue;
            }
            for d in 0..dim {
                out[i * dim + d] += w * values[j * dim + d] / h;
            }
        }
    }
    out
}

/// Chart velocity by second-order differences (central inside, one-sided at the ends).
pub fn velocity(curve: &ChartCurve) -> Result<VectorField> {
    if curve.grid.m() < 2 {
        return Err(Error::InfeasibleGrid("velocity needs M >= 2".into()));
    }
    Ok(VectorField {
        dim: curve.dim(),
        data: differentiate(&curve.coords, curve.dim(), curve.grid.h()),
    })
}

/// Covariant acceleration `D_t γ̇ = ẍ + Γ(x)(ẋ, ẋ)` at every node.
///
/// `ẍ` uses the compact three-point stencil inside and four-point one-sided
/// stencils at the ends, so it is exact on cubic polynomials.
pub fn covariant_acceleration(curve: &ChartCurve) -> Result<VectorField> {
    let n = curve.len();
    if n < 4 {
        return Err(Error::InfeasibleGrid("acceleration needs M >= 3".into()));
    }
    let d = curve.dim();
    let h2 = curve.grid.h() * curve.grid.h();
    let vel = velocity(curve)?;
    let mut out = VectorField::zeros(d, n);
    for i in 0..n {
        let x = curve.node(i);
        let gam = curve.manifold.christoffel_at(x)?;
        let corr = gam.contract(vel.node(i), vel.node(i));
        let a = out.node_mut(i);
        for (j, w) in d2_stencil(i, n) {
            for k in 0..d {
                a[k] += w * curve.coords[j * d + k] / h2;
            }
        }
        for k in 0..d {
            a[k] += corr[k];
        }
    }
    Ok(out)
}
