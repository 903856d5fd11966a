//! Model manifolds in a single global chart.
//!
//! Three models are supported: Euclidean space, the flat cylinder (worked on
//! its universal cover, first coordinate in winding units so one turn has
//! length one) and the unit 2-sphere in a stereographic chart. Each model
//! supplies its metric, Christoffel symbols and Riemann tensor in chart
//! coordinates, plus the first derivatives of metric and connection needed by
//! the exact discrete energy gradient.
//!
//! Curvature convention: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, so the
//! unit sphere satisfies `R(X,Y)Z = g(Y,Z)X − g(X,Z)Y`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default chart radius beyond which sphere evaluations are refused.
pub const DEFAULT_RHO_POLE: f64 = 10.0;

/// Stereographic chart of the unit sphere, projecting from `pole`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereChart {
    pole: [f64; 3],
    rho_pole: f64,
}

impl Default for SphereChart {
    fn default() -> Self {
        Self {
            pole: [0.0, 0.0, 1.0],
            rho_pole: DEFAULT_RHO_POLE,
        }
    }
}

impl SphereChart {
    pub fn new(pole: [f64; 3], rho_pole: f64) -> Result<Self> {
        let n = norm3(&pole);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidProblem("sphere pole must be a nonzero vector".into()));
        }
        if !(rho_pole > 0.0) {
            return Err(Error::InvalidProblem("pole-proximity radius must be positive".into()));
        }
        Ok(Self {
            pole: [pole[0] / n, pole[1] / n, pole[2] / n],
            rho_pole,
        })
    }

    pub fn pole(&self) -> [f64; 3] {
        self.pole
    }

    pub fn rho_pole(&self) -> f64 {
        self.rho_pole
    }

    /// Orthonormal basis `(e1, e2)` of the projection plane.
    fn frame(&self) -> ([f64; 3], [f64; 3]) {
        let p = self.pole;
        let seed = if p[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let d = dot3(&seed, &p);
        let mut e1 = [seed[0] - d * p[0], seed[1] - d * p[1], seed[2] - d * p[2]];
        let n = norm3(&e1);
        e1.iter_mut().for_each(|c| *c /= n);
        let e2 = [
            p[1] * e1[2] - p[2] * e1[1],
            p[2] * e1[0] - p[0] * e1[2],
            p[0] * e1[1] - p[1] * e1[0],
        ];
        (e1, e2)
    }

    /// Inverse stereographic projection: chart point to unit vector in R³.
    pub fn to_sphere(&self, u: &[f64]) -> [f64; 3] {
        let (e1, e2) = self.frame();
        let p = self.pole;
        let s = u[0] * u[0] + u[1] * u[1];
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = (2.0 * u[0] * e1[k] + 2.0 * u[1] * e2[k] + (s - 1.0) * p[k]) / (s + 1.0);
        }
        out
    }

    /// Stereographic projection of a point on the unit sphere.
    pub fn from_sphere(&self, x: &[f64; 3]) -> Result<[f64; 2]> {
        let n = norm3(x);
        let y = [x[0] / n, x[1] / n, x[2] / n];
        let (e1, e2) = self.frame();
        let denom = 1.0 - dot3(&y, &self.pole);
        if denom <= 0.0 {
            return Err(Error::PoleProximity {
                radius: f64::INFINITY,
                limit: self.rho_pole,
            });
        }
        let u = [dot3(&y, &e1) / denom, dot3(&y, &e2) / denom];
        let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
        if r >= self.rho_pole {
            return Err(Error::PoleProximity {
                radius: r,
                limit: self.rho_pole,
            });
        }
        Ok(u)
    }
}

/// One of the built-in model manifolds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldModel {
    Euclidean { dim: usize },
    FlatCylinder,
    Sphere(SphereChart),
}

/// Chart coordinates of a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Tangent vector in chart components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVec {
    pub base: ChartPoint,
    pub comp: Vec<f64>,
}

impl TangentVec {
    pub fn new(base: ChartPoint, comp: Vec<f64>) -> Result<Self> {
        if base.coords.len() != comp.len() {
            return Err(Error::DimensionMismatch {
                expected: base.coords.len(),
                got: comp.len(),
            });
        }
        Ok(Self { base, comp })
    }
}

/// Christoffel symbols `Γ^k_ij`, stored as `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let d = self.dim;
        self.data[(k * d + i) * d + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `Γ^k_ij u^i w^j`.
    pub fn contract(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    acc += self.get(k, i, j) * u[i] * w[j];
                }
            }
            *o = acc;
        }
        out
    }
}

/// Riemann tensor `R^l_ijk` with `R(∂_i,∂_j)∂_k = R^l_ijk ∂_l`, stored `[l][i][j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curvature {
    dim: usize,
    data: Vec<f64>,
}

impl Curvature {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let d = self.dim;
        self.data[((l * d + i) * d + j) * d + k]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `R(X,Y)Z`.
    pub fn apply(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (l, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let xy = x[i] * y[j];
                    if xy == 0.0 {
                        continue;
                    }
                    for k in 0..d {
                        acc += self.get(l, i, j, k) * xy * z[k];
                    }
                }
            }
            *o = acc;
        }
        out
    }
}

/// Metric and connection data plus their first chart derivatives.
///
/// Flat models leave the derivative arrays empty and report `flat = true`.
#[derive(Debug, Clone)]
pub(crate) struct LocalGeometry {
    pub flat: bool,
    pub dim: usize,
    /// `g_ab`, row-major.
    pub metric: Vec<f64>,
    /// `∂_c g_ab` stored `[c][a][b]`.
    pub d_metric: Vec<f64>,
    pub christoffel: Christoffel,
    /// `∂_c Γ^k_ij` stored `[c][k][i][j]`.
    pub d_christoffel: Vec<f64>,
}

impl LocalGeometry {
    #[inline]
    pub fn g(&self, a: usize, b: usize) -> f64 {
        self.metric[a * self.dim + b]
    }

    #[inline]
    pub fn dg(&self, c: usize, a: usize, b: usize) -> f64 {
        let d = self.dim;
        self.d_metric[(c * d + a) * d + b]
    }

    #[inline]
    pub fn dgamma(&self, c: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.d_christoffel[((c * d + k) * d + i) * d + j]
    }

    /// Lower an index: `g_ab v^b`.
    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|a| (0..d).map(|b| self.g(a, b) * v[b]).sum())
            .collect()
    }

    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                acc += self.g(a, b) * u[a] * w[b];
            }
        }
        acc
    }
}

impl ManifoldModel {
    pub fn euclidean(dim: usize) -> Self {
        ManifoldModel::Euclidean { dim }
    }

    pub fn sphere() -> Self {
        ManifoldModel::Sphere(SphereChart::default())
    }

    pub fn dim(&self) -> usize {
        match self {
            ManifoldModel::Euclidean { dim } => *dim,
            ManifoldModel::FlatCylinder | ManifoldModel::Sphere(_) => 2,
        }
    }

    /// Euclidean and cylinder charts carry the identity metric.
    pub fn is_flat(&self) -> bool {
        !matches!(self, ManifoldModel::Sphere(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ManifoldModel::Euclidean { .. } => "euclidean",
            ManifoldModel::FlatCylinder => "flat-cylinder",
            ManifoldModel::Sphere(_) => "sphere",
        }
    }

    /// Validates that `x` is an admissible chart point.
    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProblem("non-finite chart coordinate".into()));
        }
        if let ManifoldModel::Sphere(chart) = self {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r >= chart.rho_pole {
                return Err(Error::PoleProximity {
                    radius: r,
                    limit: chart.rho_pole,
                });
            }
        }
        Ok(())
    }

    /// Conformal factor `λ²` with `g = λ² I` (all built-in models are conformally flat).
    pub(crate) fn conformal_factor(&self, x: &[f64]) -> f64 {
        match self {
            ManifoldModel::Sphere(_) => {
                let s = x[0] * x[0] + x[1] * x[1];
                4.0 / ((1.0 + s) * (1.0 + s))
            }
            _ => 1.0,
        }
    }

    pub fn metric(&self, x: &ChartPoint) -> Result<DMatrix<f64>> {
        self.check(&x.coords)?;
        let d = self.dim();
        Ok(DMatrix::identity(d, d) * self.conformal_factor(&x.coords))
    }

    pub fn christoffel(&self, x: &ChartPoint) -> Result<Christoffel> {
        Ok(self.local_geometry(&x.coords)?.christoffel)
    }

    pub fn curvature(&self, x: &ChartPoint) -> Result<Curvature> {
        self.curvature_at(&x.coords)
    }

    /// Metric inner product `g_x(u, w)`.
    pub fn inner(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<f64> {
        self.check(x)?;
        let lam2 = self.conformal_factor(x);
        Ok(lam2 * u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
    }

    pub fn norm(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        Ok(self.inner(x, u, u)?.max(0.0).sqrt())
    }

    pub(crate) fn christoffel_at(&self, x: &[f64]) -> Result<Christoffel> {
        Ok(self.local_geometry(x)?.christoffel)
    }

    pub(crate) fn curvature_at(&self, x: &[f64]) -> Result<Curvature> {
        let geo = self.local_geometry(x)?;
        let d = geo.dim;
        let mut data = vec![0.0; d * d * d * d];
        if !geo.flat {
            let gam = &geo.christoffel;
            for l in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            let mut v = geo.dgamma(i, l, j, k) - geo.dgamma(j, l, i, k);
                            for m in 0..d {
                                v += gam.get(l, i, m) * gam.get(m, j, k)
                                    - gam.get(l, j, m) * gam.get(m, i, k);
                            }
                            data[((l * d + i) * d + j) * d + k] = v;
                        }
                    }
                }
            }
        }
        Ok(Curvature { dim: d, data })
    }

    pub(crate) fn local_geometry(&self, x: &[f64]) -> Result<LocalGeometry> {
        self.check(x)?;
        let d = self.dim();
        match self {
            ManifoldModel::Euclidean { .. } | ManifoldModel::FlatCylinder => {
                let mut metric = vec![0.0; d * d];
                for a in 0..d {
                    metric[a * d + a] = 1.0;
                }
                Ok(LocalGeometry {
                    flat: true,
                    dim: d,
                    metric,
                    d_metric: Vec::new(),
                    christoffel: Christoffel::zeros(d),
                    d_christoffel: Vec::new(),
                })
            }
            ManifoldModel::Sphere(_) => Ok(conformal_sphere_geometry(x)),
        }
    }
}

/// Stereographic metric `g = e^{2φ} δ` with `φ = ln 2 − ln(1 + |u|²)`.
fn conformal_sphere_geometry(u: &[f64]) -> LocalGeometry {
    const D: usize = 2;
    let s = u[0] * u[0] + u[1] * u[1];
    let q = 1.0 + s;
    let e2phi = 4.0 / (q * q);
    let dphi = [-2.0 * u[0] / q, -2.0 * u[1] / q];
    let mut ddphi = [[0.0; D]; D];
    for (i, row) in ddphi.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let delta = if i == j { 1.0 } else { 0.0 };
            *v = -2.0 * delta / q + 4.0 * u[i] * u[j] / (q * q);
        }
    }
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let metric = vec![e2phi, 0.0, 0.0, e2phi];
    let mut d_metric = vec![0.0; D * D * D];
    for c in 0..D {
        for a in 0..D {
            d_metric[(c * D + a) * D + a] = 2.0 * dphi[c] * e2phi;
        }
    }
    let mut christoffel = Christoffel::zeros(D);
    let mut d_christoffel = vec![0.0; D * D * D * D];
    for k in 0..D {
        for i in 0..D {
            for j in 0..D {
                let g = delta(k, i) * dphi[j] + delta(k, j) * dphi[i] - delta(i, j) * dphi[k];
                christoffel.set(k, i, j, g);
                for c in 0..D {
                    d_christoffel[((c * D + k) * D + i) * D + j] = delta(k, i) * ddphi[j][c]
                        + delta(k, j) * ddphi[i][c]
                        - delta(i, j) * ddphi[k][c];
                }
            }
        }
    }
    LocalGeometry {
        flat: false,
        dim: D,
        metric,
        d_metric,
        christoffel,
        d_christoffel,
    }
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
