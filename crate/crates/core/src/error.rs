use thiserror::Error;

use crate::solver::SnsSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("task Jacobian is rank deficient (rank {rank}, expected {expected})")]
    SingularTask { rank: usize, expected: usize },

    /// The iteration cap was reached. Carries the best feasible fallback seen.
    #[error("solver did not terminate within {iterations} iterations{}", tick_context(*.tick, *.time))]
    SolverDivergence {
        iterations: usize,
        best: Box<SnsSolution>,
        tick: Option<usize>,
        time: Option<f64>,
    },

    #[error("oracle budget exceeded: {0}")]
    OracleBudget(String),

    #[error("parse error{}: {message}", line_suffix(*.line))]
    Parse { line: Option<usize>, message: String },

    #[error("invalid `{field}`{}: {message}", line_suffix(*.line))]
    Validation {
        field: String,
        line: Option<usize>,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

fn line_suffix(line: Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

fn tick_context(tick: Option<usize>, time: Option<f64>) -> String {
    match (tick, time) {
        (Some(k), Some(t)) => format!(" (tick {k}, t = {t} s)"),
        _ => String::new(),
    }
}
