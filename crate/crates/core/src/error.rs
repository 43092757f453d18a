use thiserror::Error;

/// Errors produced by the sparsification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("graph is disconnected")]
    Disconnected,

    #[error(
        "graph is too close to disconnected: second-smallest Laplacian eigenvalue {lambda2:e} below {threshold:e}"
    )]
    IllConditioned { lambda2: f64, threshold: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("symmetric eigendecomposition did not converge ({0})")]
    Eigen(&'static str),

    #[error("barrier violated: eigenvalue gap {gap:e} to the {side} barrier is below the margin")]
    BarrierViolation { side: &'static str, gap: f64 },

    #[error("potential overflow: 1/gap = {inverse_gap:.3} exceeds the exponent limit")]
    PotentialOverflow { inverse_gap: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no factor has a positive inner product with the objective matrix")]
    NoPositiveDirection,

    #[error("oracle sample budget is zero (lambda_min(B) * tr(B^-1) = {0:.6} < 1)")]
    EmptySampleBudget(f64),

    #[error("rejection loop exhausted: {attempts} consecutive rejections at inner step {step}")]
    RejectionExhausted { step: usize, attempts: usize },

    #[error("packing SDP solver did not converge after {iterations} iterations (primal {primal:.6e}, dual bound {dual:.6e})")]
    SdpNonConvergence {
        iterations: usize,
        primal: f64,
        dual: f64,
    },

    #[error("matrix exponential argument overflows (L * lambda_max = {0:.3})")]
    ExponentOverflow(f64),

    #[error("factor set has no edge provenance")]
    MissingProvenance,

    #[error("iteration cap of {0} exceeded")]
    MaxIterations(usize),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
