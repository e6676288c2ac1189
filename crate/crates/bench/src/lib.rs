//! Benchmark harness: problem files, runs with weighted oracle accounting, CSV traces,
//! cross-method comparisons and the property battery.

pub mod cli;
pub mod compare;
pub mod config;
pub mod error;
pub mod files;
pub mod runner;
pub mod trace_csv;

pub use error::{BenchError, BenchResult};
