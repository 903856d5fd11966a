//! TOML problem files with located validation errors.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use toml::Spanned;
use varspline::{
    InterpolationProblem, Knot, ManifoldModel, SphereChart, VelocityConstraint,
};

use crate::error::{CliError, Location};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    manifold: Spanned<RawManifold>,
    #[serde(default = "default_order")]
    order: Spanned<usize>,
    knot: Spanned<Vec<RawKnot>>,
    velocity: Option<Spanned<RawVelocity>>,
    winding: Option<Spanned<Vec<Spanned<i64>>>>,
    #[serde(default)]
    solver: SolverSection,
}

fn default_order() -> Spanned<usize> {
    Spanned::new(0..0, 2)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifold {
    kind: Spanned<String>,
    dim: Option<Spanned<usize>>,
    pole: Option<[f64; 3]>,
    rho_pole: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKnot {
    t: Spanned<f64>,
    p: Spanned<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVelocity {
    site: Spanned<usize>,
    derivs: Spanned<Vec<Vec<f64>>>,
}

/// Optional `[solver]` defaults; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// A parsed and validated problem file.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: InterpolationProblem,
    pub solver: SolverSection,
    /// Integer lifts added to the first chart coordinate on the cylinder.
    pub winding: Option<Vec<i64>>,
    source: String,
    knot_t_spans: Vec<Range<usize>>,
}

impl ProblemFile {
    pub fn parse(source: &str) -> Result<Self, CliError> {
        let raw: RawFile = toml::from_str(source).map_err(|e| {
            CliError::parse(e.message().to_string(), None, e.span().map(|s| Location::of(source, s.start)))
        })?;
        let at = |span: Range<usize>| Some(Location::of(source, span.start));
        let fail = |msg: String, field: &str, span: Range<usize>| {
            Err(CliError::parse(msg, Some(field.to_string()), at(span)))
        };

        let man = raw.manifold.get_ref();
        let manifold = match man.kind.get_ref().as_str() {
            "euclidean" => {
                let Some(dim) = &man.dim else {
                    return fail("euclidean manifold needs `dim`".into(), "manifold.dim", raw.manifold.span());
                };
                if *dim.get_ref() == 0 {
                    return fail("dimension must be positive".into(), "manifold.dim", dim.span());
                }
                ManifoldModel::euclidean(*dim.get_ref())
            }
            "flat-cylinder" => ManifoldModel::FlatCylinder,
            "sphere" => {
                let chart = SphereChart::new(man.pole.unwrap_or([0.0, 0.0, 1.0]), man.rho_pole.unwrap_or(10.0))
                    .map_err(|e| CliError::parse(e.to_string(), Some("manifold".into()), at(raw.manifold.span())))?;
                ManifoldModel::Sphere(chart)
            }
            other => {
                return fail(
                    format!("unknown manifold kind `{other}` (expected euclidean, flat-cylinder or sphere)"),
                    "manifold.kind",
                    man.kind.span(),
                )
            }
        };
        if man.dim.is_some() && !matches!(manifold, ManifoldModel::Euclidean { .. }) {
            return fail("`dim` applies to euclidean manifolds only".into(), "manifold.dim", raw.manifold.span());
        }
        let dim = manifold.dim();

        let order = *raw.order.get_ref();
        if order < 2 {
            return fail(format!("order must be at least 2, got {order}"), "order", raw.order.span());
        }

        let knots_raw = raw.knot.get_ref();
        if knots_raw.len() < 2 {
            return fail("at least two [[knot]] entries are required".into(), "knot", raw.knot.span());
        }
        let winding = match &raw.winding {
            None => None,
            Some(w) => {
                if !matches!(manifold, ManifoldModel::FlatCylinder) {
                    return fail("winding targets apply to flat-cylinder problems only".into(), "winding", w.span());
                }
                if w.get_ref().len() != knots_raw.len() {
                    return fail(
                        format!("{} winding targets for {} knots", w.get_ref().len(), knots_raw.len()),
                        "winding",
                        w.span(),
                    );
                }
                Some(w.get_ref().iter().map(|x| *x.get_ref()).collect::<Vec<_>>())
            }
        };

        let mut knots = Vec::with_capacity(knots_raw.len());
        for (i, k) in knots_raw.iter().enumerate() {
            let t = *k.t.get_ref();
            let field = format!("knot[{i}].t");
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return fail(format!("knot time {t} outside [0, 1]"), &field, k.t.span());
            }
            if i == 0 && t != 0.0 {
                return fail(format!("first knot time must be 0, got {t}"), &field, k.t.span());
            }
            if i + 1 == knots_raw.len() && t != 1.0 {
                return fail(format!("last knot time must be 1, got {t}"), &field, k.t.span());
            }
            if i > 0 {
                let prev = *knots_raw[i - 1].t.get_ref();
                if t == prev {
                    return fail(format!("duplicate knot time {t} (also knot[{}])", i - 1), &field, k.t.span());
                }
                if t < prev {
                    return fail(format!("knot times must increase: {t} after {prev}"), &field, k.t.span());
                }
            }
            let mut p = k.p.get_ref().clone();
            if p.len() != dim {
                return fail(
                    format!("point has {} coordinates, manifold dimension is {dim}", p.len()),
                    &format!("knot[{i}].p"),
                    k.p.span(),
                );
            }
            if let Some(w) = &winding {
                p[0] += w[i] as f64;
            }
            knots.push(Knot::new(t, p));
        }

        let velocity = match &raw.velocity {
            None => None,
            Some(v) => {
                let site = *v.get_ref().site.get_ref();
                if site >= knots.len() {
                    return fail(
                        format!("velocity site {site} out of range (0..{})", knots.len() - 1),
                        "velocity.site",
                        v.get_ref().site.span(),
                    );
                }
                let derivs = v.get_ref().derivs.get_ref().clone();
                if derivs.len() != order - 1 {
                    return fail(
                        format!("order {order} needs {} derivative vectors, got {}", order - 1, derivs.len()),
                        "velocity.derivs",
                        v.get_ref().derivs.span(),
                    );
                }
                if let Some(bad) = derivs.iter().position(|d| d.len() != dim) {
                    return fail(
                        format!("derivative {} has wrong dimension (expected {dim})", bad + 1),
                        "velocity.derivs",
                        v.get_ref().derivs.span(),
                    );
                }
                Some(VelocityConstraint { site, derivs })
            }
        };

        let problem = InterpolationProblem::new(manifold, order, knots, velocity)
            .map_err(|e| CliError::parse(e.to_string(), None, None))?;
        Ok(Self {
            problem,
            solver: raw.solver,
            winding,
            source: source.to_string(),
            knot_t_spans: knots_raw.iter().map(|k| k.t.span()).collect(),
        })
    }

    /// Location of the `t` value of knot `i`.
    pub fn knot_location(&self, i: usize) -> Option<Location> {
        self.knot_t_spans.get(i).map(|s| Location::of(&self.source, s.start))
    }
}
