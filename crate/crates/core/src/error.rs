use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A pair of joint action profiles that agree on one player's action but
/// induce different transition rows.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct ControllerWitness {
    pub player: usize,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("state {state}: no single player controls the transitions")]
    Violation {
        state: usize,
        witnesses: Vec<ControllerWitness>,
    },

    #[error("transition graph disconnected: no path from state {from} to state {to}")]
    Disconnected { from: usize, to: usize },

    #[error("state {state} is unstructured (neither zero-sum nor identical-interest)")]
    Unstructured { state: usize },

    #[error("generator infeasible after {attempts} attempts: {reason}")]
    Infeasible { attempts: usize, reason: String },

    #[error("fixed-point iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error(
        "strategic-equivalence residual {residual:e} at stage {stage}, state {state}, player {player}"
    )]
    EquivalenceViolation {
        stage: usize,
        state: usize,
        player: usize,
        residual: f64,
    },

    #[error("index mismatch: {0}")]
    IndexMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by unreadable or malformed input rather than
    /// by the content of a well-formed document.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Io(_) | Error::Csv(_) | Error::ShapeMismatch(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
