use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("entropy argument {0} is below the vacuum limit 1")]
    EntropyDomain(f64),

    #[error("non-physical covariance matrix: {0}")]
    NonPhysical(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("correction factor mismatch for user {user}: psd gives {from_psd}, parameters say {configured}")]
    CorrectionMismatch {
        user: u8,
        from_psd: f64,
        configured: f64,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
