//! Reference methods the benchmark compares against.

mod acdm;
mod fgm;
mod ms;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use acdm::{acdm_minimize, acdm_run, sampling_probabilities, Acdm, AcdmConfig};
pub use fgm::fgm_run;
pub use ms::{ms_run, MsConfig};

use crate::engine::StopReason;
use crate::ledger::Trace;
use crate::problem::CompositeProblem;

/// Iteration cap and optional gap target shared by the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    pub max_iters: usize,
    /// Needs a known `F*`; ignored otherwise.
    pub target_gap: Option<f64>,
}

impl RunLimits {
    pub fn iters(max_iters: usize) -> Self {
        Self { max_iters, target_gap: None }
    }

    pub(crate) fn reached(&self, problem: &CompositeProblem, objective: f64) -> bool {
        match (self.target_gap, problem.f_star) {
            (Some(eps), Some(f_star)) => objective - f_star <= eps,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub y: DVector<f64>,
    pub trace: Trace,
    pub stop: StopReason,
}
