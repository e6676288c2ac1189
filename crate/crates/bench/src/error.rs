use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BUDGET: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error(transparent)]
    Solver(#[from] ameta::Error),
    #[error("{0}")]
    Invariant(String),
}

impl BenchError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Format { .. } => EXIT_USAGE,
            Self::Invariant(_) => EXIT_INVARIANT,
            Self::Solver(e) => solver_exit_code(e),
        }
    }
}

fn solver_exit_code(e: &ameta::Error) -> i32 {
    use ameta::{Error, ProblemError};
    match e {
        Error::AtIteration { source, .. } => solver_exit_code(source),
        Error::Config(_) | Error::MissingContext(_) | Error::NoClosedForm(_) => EXIT_USAGE,
        Error::Problem(
            ProblemError::Invalid(_) | ProblemError::Dimension { .. } | ProblemError::MissingOracle { .. },
        ) => EXIT_USAGE,
        Error::InnerBudget { .. } => EXIT_BUDGET,
        Error::Problem(ProblemError::NonFinite { .. })
        | Error::NotPsd { .. }
        | Error::RootFinder { .. }
        | Error::LambdaSearch { .. }
        | Error::RestartStage { .. } => EXIT_INVARIANT,
    }
}

impl From<ameta::ProblemError> for BenchError {
    fn from(e: ameta::ProblemError) -> Self {
        Self::Solver(e.into())
    }
}

pub type BenchResult<T> = Result<T, BenchError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_errors_map_through() {
        let inner = ameta::Error::InnerBudget { budget: 3, achieved: 1.0 };
        let e = BenchError::Solver(ameta::Error::AtIteration { iter: 4, source: Box::new(inner) });
        assert_eq!(e.exit_code(), EXIT_BUDGET);
        let e = BenchError::Solver(ameta::Error::RestartStage { stage: 1, before: 1.0, after: 0.9 });
        assert_eq!(e.exit_code(), EXIT_INVARIANT);
        assert_eq!(BenchError::usage("x").exit_code(), EXIT_USAGE);
    }
}
