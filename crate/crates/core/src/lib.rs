//! Accelerated meta-algorithm for composite convex minimization `F = f + g`.
//!
//! An outer accelerated loop repeatedly minimizes a regularized Taylor model of `f` plus
//! `g`, with a step size chosen so the step lands in a prescribed band. Restarts,
//! Catalyst-style acceleration and gradient sliding are built on top of the same loop.

pub mod baselines;
pub mod catalyst;
pub mod engine;
pub mod error;
pub mod ledger;
pub mod problem;
pub mod restart;
pub mod sliding;
pub mod subsolver;
pub mod verify;

pub use error::{Error, Result};
pub use ledger::{CallKind, Level, OracleLedger, Side, Trace, TraceRecord};
pub use problem::{Component, CompositeProblem, Oracle, Part, ProblemError};
