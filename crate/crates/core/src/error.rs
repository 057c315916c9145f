use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "strong-coupling condition violated: 2 g0^2 = {two_g0_sq} < kappa * gamma = {kappa_gamma}"
    )]
    StrongCouplingViolated { two_g0_sq: f64, kappa_gamma: f64 },

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error(
        "integration failed at t = {time}: {reason} (step = {step:e}, accepted steps = {accepted})"
    )]
    Integration {
        time: f64,
        step: f64,
        accepted: usize,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
