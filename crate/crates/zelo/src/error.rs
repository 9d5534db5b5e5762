use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for {n} candidates")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("candidate compared against itself at index {0}")]
    SelfComparison(usize),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("budget {budget} exceeds the {max} available pairs")]
    BudgetTooLarge { budget: usize, max: usize },

    #[error("comparison graph is disconnected: {} components with sizes {:?}",
            components.len(),
            components.iter().map(|c| c.len()).collect::<Vec<_>>())]
    DisconnectedGraph { components: Vec<Vec<usize>> },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("judge {judge_id} failed: {message}")]
    JudgeFailure { judge_id: String, message: String },

    #[error("malformed output from judge {judge_id}: {message}")]
    MalformedJudgeOutput { judge_id: String, message: String },

    #[error("{failed} of {total} judges failed, fewer than {required} verdicts remain")]
    TooManyJudgeFailures { failed: usize, total: usize, required: usize },

    #[error("judge pool exhausted after {attempts} attempts: {message}")]
    PoolExhausted { attempts: usize, message: String },

    #[error("unknown document id {0}")]
    UnknownDocument(String),

    #[error("unknown query id {0}")]
    UnknownQuery(String),

    #[error("duplicate id {0}")]
    DuplicateId(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("{path}: {message}")]
    File { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable lowercase slug for machine-parseable CLI error lines.
    pub fn kind_slug(&self) -> &'static str {
        match self {
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::SelfComparison(_) => "self_comparison",
            Error::InvalidParam(_) => "invalid_param",
            Error::BudgetTooLarge { .. } => "budget_too_large",
            Error::DisconnectedGraph { .. } => "disconnected_graph",
            Error::NonFinite(_) => "non_finite",
            Error::JudgeFailure { .. } => "judge_failure",
            Error::MalformedJudgeOutput { .. } => "malformed_judge_output",
            Error::TooManyJudgeFailures { .. } => "too_many_judge_failures",
            Error::PoolExhausted { .. } => "pool_exhausted",
            Error::UnknownDocument(_) => "unknown_document",
            Error::UnknownQuery(_) => "unknown_query",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::File { .. } => "file",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
