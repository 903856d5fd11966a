use thiserror::Error;

/// Errors raised by the spline library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A sphere chart point came within the pole-proximity radius.
    #[error("chart point at radius {radius} is within pole proximity (limit {limit})")]
    PoleProximity { radius: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    /// A knot time does not coincide with a node of the requested grid.
    #[error("knot time {t} is not a node of a grid with M = {m}{}", suggestion(.suggested))]
    KnotOffGrid {
        t: f64,
        m: usize,
        suggested: Option<usize>,
    },

    /// A knot time has no small-denominator rational representation.
    #[error("knot time {0} is not representable on any uniform grid")]
    IrrationalKnot(f64),

    /// The grid is too coarse to host the constraint stencils.
    #[error("infeasible grid: {0}")]
    InfeasibleGrid(String),

    /// `rcond` is the reciprocal 2-norm condition number after equilibration.
    #[error("linear system is singular (reciprocal condition {rcond:e})")]
    SingularSystem { rcond: f64 },

    #[error("constraint count mismatch: assembled {rows} rows for {unknowns} unknowns")]
    CountMismatch { rows: usize, unknowns: usize },

    #[error("refusing {intervals} intervals: monomial basis is ill-conditioned beyond {limit}")]
    Conditioning { intervals: usize, limit: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn suggestion(s: &Option<usize>) -> String {
    match s {
        Some(m) => format!(" (try M = {m})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
