use num_complex::Complex64;
use thiserror::Error;

/// Failures raised anywhere in the library.
///
/// Variants are grouped by the subsystem that raises them; callers that only
/// care about "numerical failure vs. bad input" can use [`Error::is_input_error`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // transport
    #[error("path comes within {distance:.3e} of singular point {point} (clearance {clearance:.3e})")]
    ClearanceViolation {
        point: Complex64,
        distance: f64,
        clearance: f64,
    },
    #[error("adaptive step fell below {min_step:.1e} at parameter {s:.6} of segment {segment}")]
    StepUnderflow { segment: usize, s: f64, min_step: f64 },
    #[error("step budget of {max_steps} exhausted on segment {segment}")]
    StepLimit { segment: usize, max_steps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coefficient matrix is not finite at z = {0}")]
    NonFiniteCoefficient(Complex64),
    #[error("basepoint lies inside the loop circle (distance {distance:.3e} <= radius {radius:.3e})")]
    BasepointInsideCircle { distance: f64, radius: f64 },
    #[error("point {0} lies on the path")]
    PointOnPath(Complex64),
    #[error("path is not closed: starts at {start}, ends at {end}")]
    PathNotClosed { start: Complex64, end: Complex64 },
    #[error("paths do not join: first ends at {end}, second starts at {start}")]
    DisjointPaths { end: Complex64, start: Complex64 },

    // oper
    #[error("t(z) evaluated at puncture {0}")]
    EvaluationAtPuncture(Complex64),
    #[error("oper configuration is not sealed (constraint residuals {0:?})")]
    UnsealedConfig(Vec<f64>),
    #[error("invalid oper configuration: {0}")]
    InvalidConfig(String),

    // monodromy
    #[error("loop product defect {defect:.3e} exceeds {threshold:.1e}")]
    ProductDefectExceeded { defect: f64, threshold: f64 },
    #[error("word references generator {index} but only {count} exist")]
    BadWord { index: usize, count: usize },

    // real-oper finder
    #[error("least-squares iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
    #[error("reality Jacobian is singular at mu = {0}")]
    SingularJacobian(Complex64),

    // eigen-section
    #[error("invariant form nullspace is not one-dimensional (sigma_2 = {sigma2:.3e})")]
    IrreducibilityRequired { sigma2: f64 },
    #[error("no invariant Hermitian form: smallest singular value {sigma1:.3e} above threshold")]
    NotRealOper { sigma1: f64 },
    #[error("section samples do not form a regular stencil: {0}")]
    StencilTooCoarse(String),

    // abelian
    #[error("branch points collide: separation {0:.3e}")]
    BranchPointCollision(f64),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("period system is singular (condition {0:.3e})")]
    SingularPeriodSystem(f64),
    #[error("path passes within {distance:.3e} of branch point {point}")]
    PathThroughBranchPoint { point: Complex64, distance: f64 },
    #[error("path ends on sheet {found} but the target point is on sheet {expected}")]
    SheetMismatch { expected: i8, found: i8 },
    #[error("finite-difference stencil reaches within {distance:.3e} of a branch point")]
    StencilNearBranchPoint { distance: f64 },

    // plumbing
    #[error("configuration error: {0}")]
    ConfigParse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::ConfigParse(_) | Error::InvalidConfig(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
