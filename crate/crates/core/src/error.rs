use thiserror::Error;

/// Failure modes shared by every simulator stage.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A dense object would exceed its configured size cap.
    #[error("capacity exceeded: {what} needs {required} elements, cap is {cap}")]
    Capacity {
        what: &'static str,
        required: u128,
        cap: u128,
    },

    /// The requested measurement record has zero (or underflowing) probability.
    #[error("impossible outcome: outcome probability {0:e} is zero")]
    ImpossibleOutcome(f64),

    /// A numerical object failed a physicality check (Hermiticity, positivity).
    #[error("numerical validity: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 1,
            Error::Capacity { .. } => 2,
            Error::ImpossibleOutcome(_) | Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
