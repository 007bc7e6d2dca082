use thiserror::Error;

/// Failure modes shared across the tensor, geometry and connection layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is degenerate: |det g| = {0:.3e}")]
    DegenerateMetric(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("operator is not self-adjoint with respect to g: residual {0:.3e}")]
    NotSelfAdjoint(f64),

    #[error("structure is not almost Hermitian: sup |f^2 + I| = {0:.3e}")]
    NotAlmostHermitian(f64),

    #[error("I - f^2 is numerically singular: |det| = {0:.3e}")]
    SingularP(f64),

    #[error("Reeb field is not parallel: sup |nabla xi| = {0:.3e}")]
    ReebNotParallel(f64),

    #[error("kernel/complement split cannot support the solve: residual {0:.3e}")]
    KernelSplitUnavailable(f64),

    #[error("invalid factor weight lambda = {0}; must be > 0")]
    InvalidLambda(f64),

    #[error("structure relations violated: {what} residual {residual:.3e}")]
    StructureMismatch { what: &'static str, residual: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("identity needs {0}, which was not supplied")]
    MissingInput(&'static str),

    #[error("unknown manifold '{0}'")]
    UnknownManifold(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("sampling rejected {rejected} of {drawn} draws; domain looks degenerate")]
    SamplingExhausted { rejected: usize, drawn: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
