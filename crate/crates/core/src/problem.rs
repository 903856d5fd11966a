use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, ManifoldModel, TangentVec};

/// An interpolation knot `(t_i, p_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub t: f64,
    pub point: ChartPoint,
}

impl Knot {
    pub fn new(t: f64, coords: Vec<f64>) -> Self {
        Self {
            t,
            point: ChartPoint::new(coords),
        }
    }
}

/// Prescribed derivatives `D_t^{ℓ-1} γ̇(t_j) = v_ℓ`, `ℓ = 1..k-1`, at knot `site`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityConstraint {
    pub site: usize,
    pub derivs: Vec<Vec<f64>>,
}

/// Knots, spline order and at most one site with prescribed derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationProblem {
    manifold: ManifoldModel,
    order: usize,
    knots: Vec<Knot>,
    velocity: Option<VelocityConstraint>,
}

impl InterpolationProblem {
    pub fn new(
        manifold: ManifoldModel,
        order: usize,
        knots: Vec<Knot>,
        velocity: Option<VelocityConstraint>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidProblem(msg));
        if order < 2 {
            return invalid(format!("spline order must be at least 2, got {order}"));
        }
        if knots.len() < 2 {
            return invalid("at least two knots are required".into());
        }
        if knots[0].t != 0.0 {
            return invalid(format!("first knot time must be 0, got {}", knots[0].t));
        }
        let last = knots[knots.len() - 1].t;
        if last != 1.0 {
            return invalid(format!("last knot time must be 1, got {last}"));
        }
        for (i, w) in knots.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return invalid(format!(
                    "knot times must increase strictly (knots {i} and {})",
                    i + 1
                ));
            }
        }
        for k in &knots {
            manifold.check(&k.point.coords)?;
        }
        if let Some(vc) = &velocity {
            if vc.site >= knots.len() {
                return invalid(format!(
                    "velocity site {} out of range 0..{}",
                    vc.site,
                    knots.len() - 1
                ));
            }
            if vc.derivs.len() != order - 1 {
                return invalid(format!(
                    "order {order} needs {} prescribed derivative vectors, got {}",
                    order - 1,
                    vc.derivs.len()
                ));
            }
            for v in &vc.derivs {
                if v.len() != manifold.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: manifold.dim(),
                        got: v.len(),
                    });
                }
                if v.iter().any(|c| !c.is_finite()) {
                    return invalid("non-finite prescribed derivative".into());
                }
            }
        }
        Ok(Self {
            manifold,
            order,
            knots,
            velocity,
        })
    }

    /// Cubic (`k = 2`) problem with an optional velocity at knot `site`.
    pub fn cubic(
        manifold: ManifoldModel,
        knots: Vec<Knot>,
        velocity: Option<(usize, Vec<f64>)>,
    ) -> Result<Self> {
        let vc = velocity.map(|(site, v)| VelocityConstraint {
            site,
            derivs: vec![v],
        });
        Self::new(manifold, 2, knots, vc)
    }

    pub fn manifold(&self) -> &ManifoldModel {
        &self.manifold
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn knot_times(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.t).collect()
    }

    /// Number of knot intervals `N`.
    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn velocity(&self) -> Option<&VelocityConstraint> {
        self.velocity.as_ref()
    }

    pub fn velocity_site(&self) -> Option<usize> {
        self.velocity.as_ref().map(|v| v.site)
    }

    /// The prescribed first derivative as a tangent vector at its knot.
    pub fn prescribed_velocity(&self) -> Option<TangentVec> {
        self.velocity.as_ref().map(|vc| TangentVec {
            base: self.knots[vc.site].point.clone(),
            comp: vc.derivs[0].clone(),
        })
    }

    /// Whether knot `i` is an extreme carrying natural conditions.
    pub fn has_natural_condition(&self, i: usize) -> bool {
        let n = self.intervals();
        (i == 0 || i == n) && self.velocity_site() != Some(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_knots() -> Vec<Knot> {
        vec![Knot::new(0.0, vec![0.0]), Knot::new(1.0, vec![1.0])]
    }

    #[test]
    fn validates_times_and_counts() {
        let e1 = ManifoldModel::euclidean(1);
        assert!(InterpolationProblem::cubic(e1.clone(), line_knots(), Some((0, vec![0.0]))).is_ok());
        let dup = vec![
            Knot::new(0.0, vec![0.0]),
            Knot::new(0.5, vec![1.0]),
            Knot::new(0.5, vec![2.0]),
            Knot::new(1.0, vec![3.0]),
        ];
        assert!(InterpolationProblem::cubic(e1.clone(), dup, None).is_err());
        let bad_end = vec![Knot::new(0.0, vec![0.0]), Knot::new(0.9, vec![1.0])];
        assert!(InterpolationProblem::cubic(e1.clone(), bad_end, None).is_err());
        let k3 = InterpolationProblem::new(
            e1.clone(),
            3,
            line_knots(),
            Some(VelocityConstraint {
                site: 0,
                derivs: vec![vec![1.0]],
            }),
        );
        assert!(k3.is_err());
        assert!(InterpolationProblem::cubic(e1, line_knots(), Some((2, vec![0.0]))).is_err());
    }

    #[test]
    fn natural_condition_sites() {
        let e1 = ManifoldModel::euclidean(1);
        let p = InterpolationProblem::cubic(e1.clone(), line_knots(), Some((0, vec![0.0]))).unwrap();
        assert!(!p.has_natural_condition(0));
        assert!(p.has_natural_condition(1));
        let free = InterpolationProblem::cubic(e1, line_knots(), None).unwrap();
        assert!(free.has_natural_condition(0) && free.has_natural_condition(1));
    }
}
