//! Restarts for uniformly convex objectives.
//!
//! Stage `k` runs the accelerated loop for `N_k` iterations from the previous stage's
//! output. `N_k` is the smallest count whose rate bound, combined with uniform convexity,
//! certifies that the distance to the solution halves.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{am_run_with, AmConfig, StopReason};
use crate::error::{Error, Result};
use crate::ledger::{OracleLedger, Trace, TraceRecord};
use crate::problem::{factorial, CompositeProblem, Part};
use crate::subsolver::Subsolver;

/// `c_p = 2^{p−1} (p+1)^{(3p+1)/2} / p!`; `c₁ = 4`, `c₂ = 3^{3.5}`.
pub fn rate_constant(p: u32) -> f64 {
    let pf = f64::from(p);
    2f64.powi(p as i32 - 1) * (pf + 1.0).powf((3.0 * pf + 1.0) / 2.0) / factorial(p)
}

/// Rate bound `c_p H R^{p+1} / k^{(3p+1)/2}` of the accelerated loop.
pub fn rate_bound(p: u32, h: f64, radius: f64, k: usize) -> f64 {
    let pf = f64::from(p);
    rate_constant(p) * h * radius.powf(pf + 1.0) / (k as f64).powf((3.0 * pf + 1.0) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartSchedule {
    /// Upper bound on `‖x₀ − x*‖`.
    pub r0: f64,
    /// Uniform convexity exponent.
    pub r: f64,
    pub sigma_r: f64,
    pub p: u32,
    pub h: f64,
    /// Number of stages.
    pub stages: usize,
    /// Multiplies `c_p`, for inexact subproblem solves whose rate bound is inflated.
    pub inflation: f64,
}

impl RestartSchedule {
    pub fn new(r0: f64, r: f64, sigma_r: f64, p: u32, h: f64, stages: usize) -> Self {
        Self { r0, r, sigma_r, p, h, stages, inflation: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r0 > 0.0
            && self.r >= 2.0
            && self.r <= f64::from(self.p) + 1.0
            && self.sigma_r > 0.0
            && self.h > 0.0
            && self.inflation >= 1.0;
        if !ok {
            return Err(Error::Config(format!("bad restart schedule {self:?}")));
        }
        Ok(())
    }

    /// `R_k = R₀ 2^{−k}`.
    pub fn radius(&self, k: usize) -> f64 {
        self.r0 * 0.5f64.powi(k as i32)
    }
}

/// `N_k = max{⌈(r c_p H 2^r / σ_r · R_k^{p+1−r})^{2/(3p+1)}⌉, 1}`.
pub fn nk_schedule(k: usize, sched: &RestartSchedule) -> usize {
    let p = f64::from(sched.p);
    let base = sched.r * sched.inflation * rate_constant(sched.p) * sched.h * 2f64.powf(sched.r) / sched.sigma_r
        * sched.radius(k).powf(p + 1.0 - sched.r);
    let n = base.powf(2.0 / (3.0 * p + 1.0)).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Stages needed so that the final certified gap `σ_r/r · R_K^r` is at most `eps`:
/// `⌈log₂(R₀ (σ_r/(r ε))^{1/r})⌉`, at least one.
pub fn stage_count(r0: f64, r: f64, sigma_r: f64, eps: f64) -> usize {
    let s = (r0 * (sigma_r / (r * eps)).powf(1.0 / r)).log2().ceil();
    if s.is_finite() && s >= 1.0 {
        s as usize
    } else {
        1
    }
}

/// Upper bound on `‖x₀ − x*‖`: the true distance when `x*` is known, otherwise
/// `2 ((r/σ_r)(F(x₀) − lower))^{1/r}` from uniform convexity.
pub fn initial_radius(problem: &CompositeProblem, x0: &DVector<f64>, lower_bound: Option<f64>) -> Result<f64> {
    if let Some(xs) = &problem.x_star {
        return Ok((x0 - xs).norm());
    }
    let uc = problem.uniform_convexity.ok_or(Error::Config("initial radius needs uniform convexity data".into()))?;
    let lower = lower_bound
        .or(problem.f_star)
        .ok_or(Error::Config("initial radius needs a known x*, F* or a lower bound".into()))?;
    let gap = problem.eval_value(Part::Total, x0)? - lower;
    Ok(2.0 * uc.radius_bound(gap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub iters: usize,
    pub scheduled: usize,
    /// `R_k`.
    pub radius: f64,
    /// `‖z_k − x*‖` and `‖z_{k+1} − x*‖` when `x*` is known.
    pub dist_before: Option<f64>,
    pub dist_after: Option<f64>,
    pub objective: f64,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutput {
    pub y: DVector<f64>,
    pub trace: Trace,
    pub stages: Vec<StageReport>,
    pub stop: StopReason,
}

/// Runs the stages in sequence; trace iterations are numbered across stages.
///
/// With a known `x*`, a stage ending farther than `R_k/2` from it is an error: the
/// schedule's certificate failed, which means `σ_r` was overestimated.
pub fn restart_run(
    problem: &CompositeProblem,
    base: &AmConfig,
    sched: &RestartSchedule,
    x0: &DVector<f64>,
    subsolver: &mut dyn Subsolver,
    ledger: &mut OracleLedger,
    observer: &mut dyn FnMut(&TraceRecord) -> bool,
) -> Result<RestartOutput> {
    sched.validate()?;
    if base.p != sched.p || base.h != sched.h {
        return Err(Error::Config("restart schedule and loop config disagree on p or H".into()));
    }
    let started = Instant::now();
    let mut trace = Trace::new("am-restart", problem.eval_value(Part::Total, x0)?);
    let mut z = x0.clone();
    let mut reports = Vec::with_capacity(sched.stages);
    let (mut iter_offset, mut inner_offset) = (0usize, 0u64);
    let mut stop = StopReason::MaxIters;
    for k in 0..sched.stages {
        let n_k = nk_schedule(k, sched);
        let cfg = AmConfig { max_iters: n_k, ..base.clone() };
        let dist_before = problem.x_star.as_ref().map(|xs| (&z - xs).norm());
        let mut halted = false;
        let out = am_run_with(problem, &cfg, &z, subsolver, ledger, &mut |it| {
            let mut rec = it.record.clone();
            rec.iter += iter_offset;
            rec.inner_cum += inner_offset;
            rec.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
            let keep = observer(&rec);
            trace.records.push(rec);
            halted |= !keep;
            keep
        })?;
        iter_offset += out.trace.records.len();
        inner_offset += out.inner_iters;
        z = out.y;
        let dist_after = problem.x_star.as_ref().map(|xs| (&z - xs).norm());
        let report = StageReport {
            stage: k,
            iters: out.trace.records.len(),
            scheduled: n_k,
            radius: sched.radius(k),
            dist_before,
            dist_after,
            objective: problem.eval_value(Part::Total, &z)?,
            stop: out.stop,
        };
        reports.push(report);
        if let (Some(before), Some(after)) = (dist_before, dist_after) {
            let r_k = sched.radius(k);
            if out.stop == StopReason::MaxIters && after > 0.5 * r_k + 1e-9 * (1.0 + r_k) {
                return Err(Error::RestartStage { stage: k, before, after });
            }
        }
        match out.stop {
            StopReason::TargetGap | StopReason::GradientBound | StopReason::Stationary => {
                stop = out.stop;
                break;
            }
            StopReason::Observer if halted => {
                stop = StopReason::Observer;
                break;
            }
            _ => {}
        }
    }
    Ok(RestartOutput { y: z, trace, stages: reports, stop })
}
