//! Covariant calculus along discrete curves.
//!
//! Derivatives use the second-order stencils of [`crate::curve::velocity`].
//! Transport and covariant integration step the linear ODE
//! `μ̇ = η − Γ(x)(ẋ, μ)` with classical RK4 on the curve grid; half-step
//! positions come from the cubic Hermite interpolant through the nodes and
//! their discrete velocities, so the ODE is exactly transport along that C¹
//! curve.

use crate::curve::{differentiate, velocity, ChartCurve, VectorField};
use crate::error::{Error, Result};
use crate::manifold::{Christoffel, TangentVec};

/// `(D_t v)^k = dv^k/dt + Γ^k_ij ẋ^i v^j` at every node.
pub fn covariant_derivative_along(curve: &ChartCurve, v: &VectorField) -> Result<VectorField> {
    check_field(curve, v)?;
    let d = curve.dim();
    let vel = velocity(curve)?;
    let dv = differentiate(v.as_flat(), d, curve.grid().h());
    let mut out = VectorField::from_flat(d, dv)?;
    if curve.manifold().is_flat() {
        return Ok(out);
    }
    for i in 0..curve.len() {
        let gam = curve.manifold().christoffel_at(curve.node(i))?;
        let corr = gam.contract(vel.node(i), v.node(i));
        for (o, c) in out.node_mut(i).iter_mut().zip(corr) {
            *o += c;
        }
    }
    Ok(out)
}

/// Parallel transport of `v0` (based at the first node) along the curve.
pub fn parallel_transport(curve: &ChartCurve, v0: &TangentVec) -> Result<VectorField> {
    let start = curve.node(0);
    if v0.comp.len() != curve.dim() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim(),
            got: v0.comp.len(),
        });
    }
    let off = v0
        .base
        .coords
        .iter()
        .zip(start)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if off > 1e-12 * (1.0 + start.iter().map(|c| c.abs()).fold(0.0, f64::max)) {
        return Err(Error::InvalidProblem(
            "transported vector must be based at the curve start".into(),
        ));
    }
    Stepper::new(curve)?.integrate(&v0.comp, None)
}

/// Covariant integral of `eta`: the field `μ` with `μ(start) = 0` and `D_t μ = η`.
pub fn covariant_integral(curve: &ChartCurve, eta: &VectorField) -> Result<VectorField> {
    check_field(curve, eta)?;
    let zero = vec![0.0; curve.dim()];
    Stepper::new(curve)?.integrate(&zero, Some(eta))
}

/// Parallel-transported copies of the chart basis scaled to be g-orthonormal at the start.
pub(crate) fn parallel_frame(curve: &ChartCurve) -> Result<Vec<VectorField>> {
    let d = curve.dim();
    let x0 = curve.node(0);
    let stepper = Stepper::new(curve)?;
    (0..d)
        .map(|a| {
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            let n = curve.manifold().norm(x0, &e)?;
            e[a] = 1.0 / n;
            stepper.integrate(&e, None)
        })
        .collect()
}

fn check_field(curve: &ChartCurve, v: &VectorField) -> Result<()> {
    if v.dim() != curve.dim() || v.len() != curve.len() {
        return Err(Error::DimensionMismatch {
            expected: curve.dim() * curve.len(),
            got: v.dim() * v.len(),
        });
    }
    Ok(())
}

/// Precomputed node and half-step geometry for RK4 along one curve.
struct Stepper<'a> {
    curve: &'a ChartCurve,
    vel: VectorField,
    mid_vel: VectorField,
    node_gamma: Vec<Christoffel>,
    mid_gamma: Vec<Christoffel>,
}

impl<'a> Stepper<'a> {
    fn new(curve: &'a ChartCurve) -> Result<Self> {
        let d = curve.dim();
        let n = curve.len();
        let h = curve.grid().h();
        let vel = velocity(curve)?;
        let mut mid_pos = VectorField::zeros(d, n - 1);
        let mut mid_vel = VectorField::zeros(d, n - 1);
        for i in 0..n - 1 {
            let (x0, x1) = (curve.node(i), curve.node(i + 1));
            let (v0, v1) = (vel.node(i), vel.node(i + 1));
            let p = mid_pos.node_mut(i);
            for k in 0..d {
                p[k] = 0.5 * (x0[k] + x1[k]) + h * (v0[k] - v1[k]) / 8.0;
            }
            let q = mid_vel.node_mut(i);
            for k in 0..d {
                q[k] = 1.5 * (x1[k] - x0[k]) / h - 0.25 * (v0[k] + v1[k]);
            }
        }
        let m = curve.manifold();
        let node_gamma = (0..n)
            .map(|i| m.christoffel_at(curve.node(i)))
            .collect::<Result<Vec<_>>>()?;
        let mid_gamma = (0..n - 1)
            .map(|i| m.christoffel_at(mid_pos.node(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            curve,
            vel,
            mid_vel,
            node_gamma,
            mid_gamma,
        })
    }

    fn integrate(&self, y0: &[f64], eta: Option<&VectorField>) -> Result<VectorField> {
        let d = self.curve.dim();
        let n = self.curve.len();
        let h = self.curve.grid().h();
        let flat = self.curve.manifold().is_flat();
        let mut out = VectorField::zeros(d, n);
        out.node_mut(0).copy_from_slice(y0);
        let mut y = y0.to_vec();
        let zero = vec![0.0; d];

        let rhs = |gam: &Christoffel, xdot: &[f64], src: &[f64], y: &[f64]| -> Vec<f64> {
            if flat {
                return src.to_vec();
            }
            let c = gam.contract(xdot, y);
            src.iter().zip(c).map(|(s, c)| s - c).collect()
        };

        for i in 0..n - 1 {
            let (s0, smid, s1) = match eta {
                Some(e) => (e.node(i).to_vec(), midpoint_value(e, i), e.node(i + 1).to_vec()),
                None => (zero.clone(), zero.clone(), zero.clone()),
            };
            let g0 = &self.node_gamma[i];
            let gm = &self.mid_gamma[i];
            let g1 = &self.node_gamma[i + 1];
            let v0 = self.vel.node(i);
            let vm = self.mid_vel.node(i);
            let v1 = self.vel.node(i + 1);

            let k1 = rhs(g0, v0, &s0, &y);
            let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
            let k2 = rhs(gm, vm, &smid, &y2);
            let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
            let k3 = rhs(gm, vm, &smid, &y3);
            let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
            let k4 = rhs(g1, v1, &s1, &y4);
            for k in 0..d {
                y[k] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
            }
            out.node_mut(i + 1).copy_from_slice(&y);
        }
        Ok(out)
    }
}

/// Cubic Lagrange interpolation of a node field at the midpoint of step `i`.
fn midpoint_value(f: &VectorField, i: usize) -> Vec<f64> {
    let n = f.len();
    let d = f.dim();
    if n < 4 {
        return (0..d)
            .map(|k| 0.5 * (f.node(i)[k] + f.node(i + 1)[k]))
            .collect();
    }
    let j0 = i.saturating_sub(1).min(n - 4);
    let t = i as f64 + 0.5;
    let mut out = vec![0.0; d];
    for a in 0..4 {
        let ja = (j0 + a) as f64;
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                let jb = (j0 + b) as f64;
                w *= (t - jb) / (ja - jb);
            }
        }
        for k in 0..d {
            out[k] += w * f.node(j0 + a)[k];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::TimeGrid;
    use crate::manifold::{ChartPoint, ManifoldModel};

    fn sphere_arc(m: usize) -> ChartCurve {
        let g = TimeGrid::unit(m).unwrap();
        ChartCurve::from_fn(g, ManifoldModel::sphere(), |t| {
            vec![0.8 * t - 0.3 + 0.2 * (3.0 * t).sin(), 0.5 * t * t - 0.2 * t + 0.1]
        })
        .unwrap()
    }

    #[test]
    fn euclidean_derivatives() {
        let g = TimeGrid::unit(20).unwrap();
        let c = ChartCurve::from_fn(g, ManifoldModel::euclidean(2), |t| vec![t.sin(), t * t])
            .unwrap();
        let constant = VectorField::from_fn(2, 21, |_| vec![1.0, -2.0]);
        let dc = covariant_derivative_along(&c, &constant).unwrap();
        assert!(dc.max_norm_over(0..21) < 1e-12);
        let times = g.times();
        let linear = VectorField::from_fn(2, 21, |i| vec![times[i], 0.0]);
        let dl = covariant_derivative_along(&c, &linear).unwrap();
        for i in 0..21 {
            assert!((dl.node(i)[0] - 1.0).abs() < 1e-12 && dl.node(i)[1].abs() < 1e-12);
        }
    }

    #[test]
    fn euclidean_transport_is_constant() {
        let g = TimeGrid::unit(10).unwrap();
        let c = ChartCurve::from_fn(g, ManifoldModel::euclidean(3), |t| vec![t, t * t, 1.0])
            .unwrap();
        let v0 = TangentVec::new(ChartPoint::new(vec![0.0, 0.0, 1.0]), vec![1.0, 2.0, 3.0])
            .unwrap();
        let v = parallel_transport(&c, &v0).unwrap();
        for i in 0..11 {
            assert_eq!(v.node(i), &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn zero_vector_transports_to_zero() {
        let c = sphere_arc(50);
        let v0 = TangentVec::new(ChartPoint::new(c.node(0).to_vec()), vec![0.0, 0.0]).unwrap();
        let v = parallel_transport(&c, &v0).unwrap();
        assert_eq!(v.max_norm_over(0..51), 0.0);
    }

    #[test]
    fn sphere_transport_preserves_norm() {
        let c = sphere_arc(1000);
        let m = c.manifold().clone();
        let x0 = c.node(0);
        let raw = [0.3, 0.9];
        let n = m.norm(x0, &raw).unwrap();
        let v0 = TangentVec::new(
            ChartPoint::new(x0.to_vec()),
            raw.iter().map(|r| r / n).collect(),
        )
        .unwrap();
        let v = parallel_transport(&c, &v0).unwrap();
        for i in 0..c.len() {
            let ni = m.norm(c.node(i), v.node(i)).unwrap();
            assert!((ni - 1.0).abs() <= 1e-8, "node {i}: {ni}");
        }
    }

    #[test]
    fn transported_field_has_second_order_small_derivative() {
        let err = |m: usize| {
            let c = sphere_arc(m);
            let v0 = TangentVec::new(ChartPoint::new(c.node(0).to_vec()), vec![0.4, -0.2])
                .unwrap();
            let v = parallel_transport(&c, &v0).unwrap();
            covariant_derivative_along(&c, &v)
                .unwrap()
                .max_norm_over(0..c.len())
        };
        let (e1, e2, e3) = (err(40), err(80), err(160));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 > 1.8 && o2 > 1.8, "orders {o1} {o2}");
    }

    #[test]
    fn covariant_integral_basics() {
        let g = TimeGrid::unit(16).unwrap();
        let c = ChartCurve::from_fn(g, ManifoldModel::euclidean(2), |t| vec![t, -t]).unwrap();
        let zero = VectorField::zeros(2, 17);
        assert_eq!(covariant_integral(&c, &zero).unwrap(), zero);
        let e1 = VectorField::from_fn(2, 17, |_| vec![1.0, 0.0]);
        let mu = covariant_integral(&c, &e1).unwrap();
        for (i, t) in g.times().iter().enumerate() {
            assert!((mu.node(i)[0] - t).abs() < 1e-14 && mu.node(i)[1] == 0.0);
        }
    }

    #[test]
    fn covariant_integral_round_trip_is_second_order() {
        let err = |m: usize| {
            let c = sphere_arc(m);
            let times = c.grid().times();
            let eta = VectorField::from_fn(2, m + 1, |i| {
                let t = times[i];
                vec![(2.0 * t).cos(), t * t - 0.5]
            });
            let mu = covariant_integral(&c, &eta).unwrap();
            let back = covariant_derivative_along(&c, &mu).unwrap();
            back.sub(&eta).max_norm_over(1..m)
        };
        let (e1, e2, e3) = (err(32), err(64), err(128));
        let o1 = (e1 / e2).log2();
        let o2 = (e2 / e3).log2();
        assert!(o1 > 1.7 && o2 > 1.7, "orders {o1} {o2} ({e1:e} {e2:e} {e3:e})");
    }
}
