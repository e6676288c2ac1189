//! Accelerated proximal point: the outer loop with `f ≡ 0` and `p = 1`.
//!
//! Each subproblem is `min g(y) + H/2 ‖y − x̃‖²`, handed to an unaccelerated inner method
//! and stopped by the contraction rule, whose threshold involves only `H`, `L_g` and the
//! current points. No global accuracy target enters the inner stop.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{am_run_with, AmConfig, AmOutput, StopReason};
use crate::error::{Error, Result};
use crate::ledger::{OracleLedger, Trace, TraceRecord};
use crate::problem::CompositeProblem;
use crate::restart::{initial_radius, restart_run, stage_count, RestartSchedule, StageReport};
use crate::subsolver::{Criterion, InexactSubsolver, InnerSolver};

/// Rate inflation of the outer loop under the contraction rule.
pub const INEXACT_INFLATION: f64 = 12.0 / 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalystConfig {
    /// Proximal regularization `H`.
    pub h: f64,
    /// Outer iterations when not restarting.
    pub max_iters: usize,
    /// Gap at which to stop; with restarts it also fixes the stage count.
    pub target_gap: Option<f64>,
    /// Restart with this strong convexity modulus.
    pub restart_modulus: Option<f64>,
}

/// Rule used to stop the inner method. Carries the constants it depends on, so callers can
/// confirm that none of them is an accuracy target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerStopRule {
    pub criterion: Criterion,
    pub h: f64,
    pub lip_g: f64,
}

impl InnerStopRule {
    /// Always `false`: the threshold is `Hρ/(1+ρ)‖x̃ − ỹ‖` with `ρ = H/(3H + 2L_g)`.
    pub fn depends_on_target(&self) -> bool {
        false
    }
}

pub struct Catalyst<'a> {
    problem: &'a CompositeProblem,
    config: CatalystConfig,
    subsolver: InexactSubsolver,
    rule: InnerStopRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalystOutput {
    pub y: DVector<f64>,
    pub trace: Trace,
    pub stop: StopReason,
    pub stages: Vec<StageReport>,
}

/// Builds the proximal-point solver around `inner`.
///
/// `problem` must have `f ≡ 0` and a smooth `g` with known gradient Lipschitz constant.
pub fn catalyst_wrap<'a>(
    problem: &'a CompositeProblem,
    inner: Box<dyn InnerSolver>,
    config: CatalystConfig,
) -> Result<Catalyst<'a>> {
    if !problem.f.is_zero() {
        return Err(Error::Config("the proximal-point wrapper expects f ≡ 0".into()));
    }
    let lip_g = problem.lip_g1.ok_or(Error::Config("the proximal-point wrapper needs L_g".into()))?;
    if !(config.h > 0.0) {
        return Err(Error::Config(format!("H must be positive, got {}", config.h)));
    }
    let rule = InnerStopRule { criterion: Criterion::Contraction, h: config.h, lip_g };
    let subsolver = InexactSubsolver { order: 1, criterion: Criterion::Contraction, inner };
    Ok(Catalyst { problem, config, subsolver, rule })
}

impl Catalyst<'_> {
    pub fn inner_stop_rule(&self) -> InnerStopRule {
        self.rule
    }

    fn am_config(&self) -> AmConfig {
        let mut cfg = AmConfig::new(1, self.config.h).with_max_iters(self.config.max_iters);
        cfg.target_gap = self.config.target_gap;
        cfg
    }

    pub fn run(
        &mut self,
        x0: &DVector<f64>,
        ledger: &mut OracleLedger,
        observer: &mut dyn FnMut(&TraceRecord) -> bool,
    ) -> Result<CatalystOutput> {
        let cfg = self.am_config();
        match self.config.restart_modulus {
            None => {
                let out: AmOutput =
                    am_run_with(self.problem, &cfg, x0, &mut self.subsolver, ledger, &mut |it| observer(it.record))?;
                let mut trace = out.trace;
                trace.method = "catalyst".into();
                Ok(CatalystOutput { y: out.y, trace, stop: out.stop, stages: Vec::new() })
            }
            Some(mu) => {
                let r0 = initial_radius(self.problem, x0, None)?;
                let stages = match self.config.target_gap {
                    Some(eps) => stage_count(r0, 2.0, mu, eps),
                    None => 1,
                };
                let mut sched = RestartSchedule::new(r0, 2.0, mu, 1, self.config.h, stages);
                sched.inflation = INEXACT_INFLATION;
                let out = restart_run(self.problem, &cfg, &sched, x0, &mut self.subsolver, ledger, observer)?;
                let mut trace = out.trace;
                trace.method = "catalyst".into();
                Ok(CatalystOutput { y: out.y, trace, stop: out.stop, stages: out.stages })
            }
        }
    }
}
