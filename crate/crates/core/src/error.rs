use thiserror::Error;

/// Errors produced by the design and delay engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter was outside its admissible range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The continuation region `(f_k, e_k]` at an interim stage is empty.
    #[error(
        "empty continuation region at stage {stage}: futility {futility} >= efficacy {efficacy}"
    )]
    EmptyContinuation {
        stage: usize,
        futility: f64,
        efficacy: f64,
    },

    /// A root search could not bracket its target.
    #[error("root not bracketed while solving for {what} in [{lo}, {hi}]")]
    RootNotBracketed {
        what: &'static str,
        lo: f64,
        hi: f64,
    },

    /// The requested power cannot be reached within the sample-size limit.
    #[error("power {target} not attainable with maximum sample size <= {limit:.2}")]
    PowerUnattainable { target: f64, limit: f64 },

    /// Two per-stage vectors disagree in length.
    #[error("dimension mismatch: expected {expected} stages, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Scenario or table parse failure, with a 1-based line number when known.
    #[error("{}", match .line { Some(l) => format!("line {l}: {msg}"), None => msg.clone() })]
    Config { line: Option<usize>, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by user configuration rather than numerics or I/O.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Config { .. }
                | Error::DimensionMismatch { .. }
                | Error::EmptyContinuation { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
