use thiserror::Error;

use crate::problem::ProblemError;

#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("subproblem matrix is not positive semidefinite (min eigenvalue {min_eig:e}); input is nonconvex")]
    NotPsd { min_eig: f64 },
    #[error("scalar root finder did not converge after {iters} iterations")]
    RootFinder { iters: usize },
    #[error("no closed-form subproblem solution: {0}")]
    NoClosedForm(&'static str),
    #[error("criterion context is missing `{0}`")]
    MissingContext(&'static str),
    #[error("inner solver exhausted its budget of {budget} iterations (subproblem gradient norm {achieved:e})")]
    InnerBudget { budget: usize, achieved: f64 },
    #[error(
        "step-size search failed after {resolves} subproblem solves (last η = {last_eta}); H may be below (p+1)·L_p"
    )]
    LambdaSearch { resolves: usize, last_eta: f64 },
    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("restart stage {stage} did not halve the distance to the solution ({before:e} -> {after:e})")]
    RestartStage { stage: usize, before: f64, after: f64 },
}

impl Error {
    pub(crate) fn at(self, iter: usize) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration { iter, source: Box::new(e) },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
