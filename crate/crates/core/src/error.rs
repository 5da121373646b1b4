use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("regression fit unavailable: {0}")]
    FitUnavailable(String),

    #[error("regression validation unavailable: no trajectory reached the particle cap")]
    ValidationUnavailable,

    #[error("trimmed mean unavailable: {len} values cannot lose {removed} from each end")]
    TrimUnavailable { len: usize, removed: usize },

    #[error("intermittency ratio undefined: trimmed moment is zero")]
    RatioUndefined,

    #[error("step size {dt} violates the RK4 stability guard; use dt < {suggested}")]
    StepSize { dt: f64, suggested: f64 },

    #[error("unknown model id {0} (expected 1..=10)")]
    UnknownModel(u32),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::FitUnavailable(_) => "fit_unavailable",
            Error::ValidationUnavailable => "validation_unavailable",
            Error::TrimUnavailable { .. } => "trim_unavailable",
            Error::RatioUndefined => "ratio_undefined",
            Error::StepSize { .. } => "step_size",
            Error::UnknownModel(_) => "unknown_model",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
