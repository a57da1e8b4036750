use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; `path` is the offending key path.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("state became non-finite at t = {time}{}", path.map(|p| format!(" (path {p})")).unwrap_or_default())]
    NumericRange { time: f64, path: Option<usize> },

    #[error("transition decomposition failed: channel-removed factor is ill-conditioned (condition number {condition:.3e}) at t = {time}")]
    Decomposition { condition: f64, time: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e}){}", if diagnostics.is_empty() { String::new() } else { format!("; {diagnostics}") })]
    Convergence {
        iterations: usize,
        residual: f64,
        diagnostics: String,
    },

    #[error("map sends a sample outside the domain: {0}")]
    Domain(String),

    #[error("potential is not finite at {center:?}")]
    Potential { center: Vec<f64> },

    #[error("absolute continuity violated: p[{index}] = {p} > 0 but q[{index}] = 0")]
    AbsoluteContinuity { index: usize, p: f64 },

    #[error("game error: {0}")]
    Game(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Dimension(_) => 2,
            Error::Convergence { .. } => 3,
            Error::NumericRange { .. } => 4,
            Error::Resource(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
