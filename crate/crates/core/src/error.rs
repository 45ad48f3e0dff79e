use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular input: {0}")]
    SingularInput(String),
    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fixed-point iteration did not converge after {iterations} iterations (last residual {last:.3e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("U_T violation: {0}")]
    UtViolation(String),
    #[error("inadmissible collapse group {group:?}: {reason}")]
    InadmissibleGroup { group: Vec<usize>, reason: String },
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
