use thiserror::Error;

pub type Result<T> = std::result::Result<T, PimError>;

#[derive(Debug, Error)]
pub enum PimError {
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("resolution {0} too small to place interior and boundary points")]
    ResolutionTooSmall(usize),

    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: non-positive {which} weight {value}")]
    NonPositiveWeight {
        line: usize,
        which: &'static str,
        value: f64,
    },

    #[error("line {line}: boundary flag set without area weight")]
    MissingAreaWeight { line: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("singular matrix: pivot {pivot:e} at column {column} below threshold {threshold:e}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("no convergence after {iterations} iterations (relative residual {residual:e}, target {tol:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("point {point:?} is outside the kernel support of the cloud")]
    OutOfSupport { point: Vec<f64> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
