use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {kind} id {id}")]
    UnknownId { kind: &'static str, id: usize },

    #[error("concept {0} has no related exercises and cannot be used as a goal")]
    UnusableGoal(usize),

    #[error("feedback must be -1 or +1, got {0}")]
    InvalidFeedback(i64),

    #[error("action {0} is not a node of the session subgraph")]
    ActionNotInSubgraph(String),

    #[error("invalid action {0} for this session")]
    InvalidAction(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("triple store is empty")]
    EmptyTripleStore,

    #[error("interaction matrix has no observed entries")]
    EmptyInteractions,

    #[error("concept {0} has no exercises")]
    NoExercises(usize),

    #[error("exercise {0} covers no concept")]
    UncoveredExercise(usize),

    #[error("session already terminated")]
    SessionTerminated,

    #[error("prerequisite cycle: {}", format_cycle(.0))]
    PrerequisiteCycle(Vec<usize>),

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}:{line}: dangling {kind} id {id}", .path.display())]
    DanglingId {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        id: usize,
    },

    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    UnderfullBuffer { len: usize, batch: usize },

    #[error("infeasible dataset spec: {0}")]
    InfeasibleSpec(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownId { .. } => "unknown_id",
            Error::UnusableGoal(_) => "unusable_goal",
            Error::InvalidFeedback(_) => "invalid_feedback",
            Error::ActionNotInSubgraph(_) => "action_not_in_subgraph",
            Error::InvalidAction(_) => "invalid_action",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::EmptyTripleStore => "empty_triple_store",
            Error::EmptyInteractions => "empty_interactions",
            Error::NoExercises(_) => "no_exercises",
            Error::UncoveredExercise(_) => "uncovered_exercise",
            Error::SessionTerminated => "session_terminated",
            Error::PrerequisiteCycle(_) => "prerequisite_cycle",
            Error::Parse { .. } => "parse",
            Error::DanglingId { .. } => "dangling_id",
            Error::UnderfullBuffer { .. } => "underfull_buffer",
            Error::InfeasibleSpec(_) => "infeasible_spec",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}

fn format_cycle(cycle: &[usize]) -> String {
    cycle
        .iter()
        .map(|c| format!("c{c}"))
        .collect::<Vec<_>>()
        .join(" -> ")
}
