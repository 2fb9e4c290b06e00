use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} is outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("jump law rejected at pi = {pi}, r = {r}: {reason}")]
    JumpLaw { pi: f64, r: f64, reason: String },

    #[error("grid: {0}")]
    Grid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("claim: {0}")]
    Claim(String),

    #[error("data: {0}")]
    Data(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
