use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    /// A position left the guarded neighbourhood of the domain, usually
    /// because the time step is too large for the drift magnitude.
    #[error("step-size error: position {position} is too far outside [{a}, {b}]")]
    StepSize { position: f64, a: f64, b: f64 },

    #[error("grid resolution error: cell Péclet number {peclet:.3} exceeds 2 at face {face}")]
    Resolution { peclet: f64, face: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The objective became NaN or infinite during optimization.
    #[error("non-finite objective {value} at theta = {theta:?}")]
    NonFinite { value: f64, theta: Vec<f64> },

    #[error("tensor budget exceeded: {0}")]
    Budget(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input or configuration rather than by
    /// a numerical breakdown. The CLI maps these to exit status 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::Config(_)
                | Error::Model(_)
                | Error::Domain(_)
                | Error::Budget(_)
                | Error::Usage(_)
                | Error::Resolution { .. }
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}
