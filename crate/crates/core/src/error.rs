use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("action index {index} out of range for {num_actions} actions")]
    ActionOutOfRange { index: usize, num_actions: usize },

    #[error("invalid feedback graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("not a probability vector: {0}")]
    NotASimplex(String),

    #[error(
        "exact independence number is limited to {max} actions (got {num_actions}); \
         use the greedy upper bound instead"
    )]
    IndependenceTooLarge { num_actions: usize, max: usize },

    #[error("invalid context distribution: {0}")]
    InvalidDistribution(String),

    #[error("second-moment matrix is singular (smallest eigenvalue {lambda_min:e})")]
    SingularSecondMoment { lambda_min: f64 },

    #[error("invalid adversary: {0}")]
    InvalidAdversary(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schedule infeasible: {0}")]
    Schedule(String),

    #[error("non-finite score for action {action}")]
    NonFiniteScore { action: usize },

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("negative loss {loss} observed for action {action}; implicit exploration requires nonnegative losses")]
    NegativeLoss { action: usize, loss: f64 },

    #[error("round {round}: {source}")]
    AtRound {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("trial {trial} of {algorithm}: {source}")]
    AtTrial {
        algorithm: String,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("verification precondition: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_round(self, round: usize) -> Self {
        Error::AtRound {
            round,
            source: Box::new(self),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
