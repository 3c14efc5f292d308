use thiserror::Error;

/// Errors surfaced by the solvers, reductions and the study harness.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not nilpotent: no power up to {dim} falls below tolerance (best residual {best_residual:.3e} at power {best_power})")]
    NotNilpotent {
        dim: usize,
        best_power: usize,
        best_residual: f64,
    },

    #[error("matrix is numerically singular (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },

    #[error("matrix exponential overflowed the representable range")]
    Overflow,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parse error at byte {offset}: expected {expected}")]
    Parse { offset: usize, expected: String },

    #[error("quadrature failed to converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e} after {subdivisions} subdivisions")]
    QuadratureFailure {
        estimate: f64,
        tolerance: f64,
        subdivisions: usize,
    },

    #[error("pencil is not regular: det(sE - A) vanishes at all {samples} sample points")]
    NotRegular { samples: usize },

    #[error("slow/fast basis concatenation is ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("perturbation family member N_{index} is singular")]
    SingularMember { index: usize },

    #[error("custom perturbation family has no member for index {index}")]
    MissingIndex { index: usize },

    #[error("piecewise forcing has smoothness order {got} but the solver requires at least {required}")]
    InsufficientSmoothness { required: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("eigenvalue iteration failed to converge")]
    EigenFailure,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
