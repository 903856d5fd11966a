//! Variational interpolating splines on Riemannian model manifolds.

pub mod constraints;
pub mod covariant;
pub mod curve;
pub mod cylinder;
pub mod energy;
pub mod error;
pub mod manifold;
pub mod optimizer;
pub mod polyspline;
pub mod problem;
pub mod rational;
pub mod verification;

pub use constraints::{initial_curve, velocity_residual, Parametrization};
pub use covariant::{covariant_derivative_along, covariant_integral, parallel_transport};
pub use cylinder::{
    constrained_winding_scan, dirichlet_sequence, natural_periodic_sequence, parabola_energy, DirichletEntry,
    NaturalPeriodicCurve, ScanCell, WindingProblem, WindingScan, GOLDEN,
};
pub use curve::{covariant_acceleration, velocity, ChartCurve, TimeGrid, VectorField};
pub use energy::{energy_gradient, spline_energy, DiscreteEnergy};
pub use error::{Error, Result};
pub use manifold::{ChartPoint, Christoffel, Curvature, ManifoldModel, SphereChart, TangentVec};
pub use problem::{InterpolationProblem, Knot, VelocityConstraint};
pub use optimizer::{coercivity_check, minimize, minimize_from, CoercivityCheck, ConvergenceReport, OptimizerOptions, TerminationReason};
pub use polyspline::{assemble_system, exact_energy, solve_exact, ExactEnergy, LinearSystem, PiecewisePolynomial, RowKind};
pub use verification::{dubois_structure_check, el_residual, junction_report, reversal_check, verify, Candidate, Tolerances, VerificationReport};
