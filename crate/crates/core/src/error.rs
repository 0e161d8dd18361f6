use thiserror::Error;

/// Errors raised while configuring or running a formation simulation.
#[derive(Error, Debug)]
pub enum Error {
    /// A configuration value violates an invariant. `field` is a dotted path
    /// into the scenario document (e.g. `robots[3].com_offset`).
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// The input matrix of a robot cannot be inverted, so wheel torques
    /// cannot be recovered from the commanded acceleration.
    #[error("input matrix of robot {robot} is numerically singular (det = {det:e})")]
    SingularInput { robot: usize, det: f64 },

    #[error("transformation matrix is numerically singular")]
    SingularTransform,

    #[error("state became non-finite at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },

    #[error("failed to parse scenario: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Dimension { .. } | Error::Parse(_) => 2,
            Error::SingularInput { .. } | Error::SingularTransform | Error::Divergence { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
