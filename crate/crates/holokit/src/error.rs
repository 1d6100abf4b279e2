use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("polynomial is not real: term (z^{z:?}, zbar^{zbar:?}) has no conjugate partner")]
    NonReal { z: Vec<u32>, zbar: Vec<u32> },
    #[error("malformed polynomial: imaginary part {0:e} at evaluation point")]
    Malformed(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("point is not strictly inside the domain: {0}")]
    OutsideDomain(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("not strongly pseudoconvex: {0}")]
    NotStronglyPseudoconvex(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("ambiguous closest point: {0}")]
    Ambiguity(String),
    #[error("convexity violation: {0}")]
    ConvexityViolation(String),
    #[error("envelope violation: {0}")]
    EnvelopeViolation(String),
    #[error("not converging: {0}")]
    NonConvergence(String),
    #[error("schema error at byte {offset}: {msg}")]
    Schema { offset: usize, msg: String },
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown preset: {0}")]
    UnknownPreset(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Budget(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
