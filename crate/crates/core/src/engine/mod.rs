//! The outer accelerated loop.
//!
//! Each iteration picks a step parameter `λ`, forms the momentum point `x̃`, solves the
//! regularized model subproblem there and accepts the result once
//! `η = λ H ‖y − x̃‖^{p−1}/p!` lies in the step band. The dual sequence `x` then takes an
//! extragradient step with weight `a`.

mod potential;
mod steps;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use potential::{potential_diagnostic, PotentialTracker};
pub use steps::{
    check_step_condition, extrapolate, gradient_step, half_step_lambda, momentum_update, sigma_residual, step_ratio,
    StepBand, StepClass,
};

use crate::error::{Error, Result};
use crate::ledger::{Level, OracleLedger, Trace, TraceRecord};
use crate::problem::{factorial, CompositeProblem, Part, TaylorModel};
use crate::subsolver::{SubSolution, SubproblemSpec, Subsolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearchConfig {
    /// Growth factor for the bracketing phase.
    pub growth: f64,
    /// Subproblem solves allowed per outer iteration.
    pub max_resolves: usize,
    /// Relative bracket width `λ_hi/λ_lo − 1` at which the search gives up.
    pub bracket_tol: f64,
}

impl Default for LambdaSearchConfig {
    fn default() -> Self {
        Self { growth: 2.0, max_resolves: 60, bracket_tol: 1e-12 }
    }
}

/// Deliberate defects used to check that the verification suites catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Momentum uses `√(λ² + λA)` instead of `√(λ² + 4λA)`.
    MomentumWithoutFour,
    /// Step band upper end raised to 1.
    BandUpperOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmConfig {
    /// Model order `p`.
    pub p: u32,
    /// Regularization scale `H`.
    pub h: f64,
    /// Inexactness level of the σ-residual condition.
    pub sigma: f64,
    pub max_iters: usize,
    /// Stop once the gap (or its certified upper bound) falls below this.
    pub target_gap: Option<f64>,
    /// Track the estimating-function potential.
    pub diagnostics: bool,
    #[serde(default)]
    pub lambda_search: LambdaSearchConfig,
    /// Replaces the default `[½, p/(p+1)]` band when set.
    #[serde(default)]
    pub band: Option<StepBand>,
    #[serde(default)]
    pub fault: Option<Fault>,
}

impl AmConfig {
    pub fn new(p: u32, h: f64) -> Self {
        Self {
            p,
            h,
            // With η = ½ the exact first-order step has residual ½ + L/(2H) ≤ ¾ when H ≥ 2L.
            sigma: if p == 1 { 0.75 } else { 0.5 },
            max_iters: 100,
            target_gap: None,
            diagnostics: false,
            lambda_search: LambdaSearchConfig::default(),
            band: None,
            fault: None,
        }
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_diagnostics(mut self) -> Self {
        self.diagnostics = true;
        self
    }

    pub fn with_target_gap(mut self, eps: f64) -> Self {
        self.target_gap = Some(eps);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("order p must be at least 1".into()));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("H must be positive, got {}", self.h)));
        }
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::Config(format!("σ must lie in [0, 1), got {}", self.sigma)));
        }
        let ls = &self.lambda_search;
        if !(ls.growth > 1.0) || ls.max_resolves == 0 {
            return Err(Error::Config("λ-search needs growth > 1 and at least one solve".into()));
        }
        if let Some(b) = self.band {
            if !(b.lower > 0.0 && b.lower <= b.upper) {
                return Err(Error::Config(format!("bad step band {b:?}")));
            }
        }
        Ok(())
    }

    pub fn effective_band(&self) -> StepBand {
        let mut band = self.band.unwrap_or_else(|| StepBand::for_order(self.p));
        if self.fault == Some(Fault::BandUpperOne) {
            band.upper = 1.0;
        }
        band
    }

    fn momentum(&self, a_total: f64, lambda: f64) -> (f64, f64) {
        if self.fault == Some(Fault::MomentumWithoutFour) {
            let a = 0.5 * (lambda + (lambda * lambda + lambda * a_total).sqrt());
            return (a, a_total + a);
        }
        momentum_update(a_total, lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmState {
    pub k: usize,
    /// `A_k`.
    pub a_total: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda_last: Option<f64>,
    pub potential: Option<PotentialTracker>,
}

impl AmState {
    pub fn start(x0: &DVector<f64>, diagnostics: Option<f64>) -> Self {
        Self {
            k: 0,
            a_total: 0.0,
            x: x0.clone(),
            y: x0.clone(),
            lambda_last: None,
            potential: diagnostics.map(|sigma| PotentialTracker::new(x0, sigma)),
        }
    }
}

/// An accepted iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub lambda: f64,
    pub a_next: f64,
    pub a_total_next: f64,
    pub x_tilde: DVector<f64>,
    pub y_next: DVector<f64>,
    pub dist: f64,
    pub eta: f64,
    pub resolve_count: usize,
    pub sub_grad_norm: f64,
    pub inner_iters: usize,
    pub sigma_residual: f64,
    pub grad_f_y: DVector<f64>,
    pub grad_g_y: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    TargetGap,
    /// Gap certified through the uniform-convexity gradient bound.
    GradientBound,
    /// `x̃` was stationary for the model.
    Stationary,
    Observer,
}

/// What an observer sees after each accepted iteration.
pub struct Iteration<'a> {
    pub state: &'a AmState,
    pub outcome: &'a StepOutcome,
    pub record: &'a TraceRecord,
    /// `F(y_{k})` after the update.
    pub objective: f64,
    /// `(ψ_k(x_k) − A_k F(y_k), potential lower bound)` when diagnostics are on.
    pub potential: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmOutput {
    pub y: DVector<f64>,
    pub state: AmState,
    pub trace: Trace,
    pub stop: StopReason,
    pub total_resolves: usize,
    pub max_resolves: usize,
    pub inner_iters: u64,
}

struct Trial {
    lambda: f64,
    a_next: f64,
    a_total_next: f64,
    x_tilde: DVector<f64>,
    model: TaylorModel,
    sol: SubSolution,
    dist: f64,
    eta: f64,
}

enum Search {
    Accepted(Trial, usize),
    Stationary(Trial),
}

struct Runner<'a> {
    problem: &'a CompositeProblem,
    config: &'a AmConfig,
    subsolver: &'a mut dyn Subsolver,
    ledger: &'a mut OracleLedger,
    inner_iters: u64,
    /// `H` as used: for `p = 1` it may sit a few ulps above the configured value so that
    /// `η = ½` holds exactly.
    h: f64,
    half_lambda: f64,
}

impl Runner<'_> {
    fn build_model(&mut self, center: &DVector<f64>) -> Result<TaylorModel> {
        let p = self.problem;
        let f_center = p.eval_value_counted(Part::F, center, self.ledger, Level::Outer)?;
        let grad = p.eval_grad_counted(Part::F, center, self.ledger, Level::Outer)?;
        let hess = match self.config.p {
            1 => None,
            _ => {
                if !p.f.is_zero() {
                    self.ledger.record(Level::Outer, crate::Side::F, crate::CallKind::Hessian, 1);
                }
                Some(p.eval_hessian(Part::F, center)?)
            }
        };
        Ok(TaylorModel::from_parts(self.config.p, center.clone(), f_center, grad, hess, self.h)?)
    }

    fn trial(&mut self, state: &AmState, lambda: f64) -> Result<Trial> {
        let (a_next, a_total_next) = self.config.momentum(state.a_total, lambda);
        let x_tilde = extrapolate(state.a_total, a_next, &state.y, &state.x);
        let model = self.build_model(&x_tilde)?;
        let spec =
            SubproblemSpec { problem: self.problem, model: &model, lambda: Some(lambda), sigma: self.config.sigma };
        let sol = self.subsolver.solve(&spec, self.ledger)?;
        self.inner_iters += sol.inner_iters as u64;
        let dist = (&sol.y - &x_tilde).norm();
        let eta = step_ratio(lambda, self.h, self.config.p, dist);
        Ok(Trial { lambda, a_next, a_total_next, x_tilde, model, sol, dist, eta })
    }

    fn is_stationary(t: &Trial) -> bool {
        t.dist <= 1e-12 * (1.0 + t.x_tilde.norm())
    }

    fn search(&mut self, state: &AmState) -> Result<Search> {
        let cfg = self.config;
        let band = cfg.effective_band();
        if cfg.p == 1 {
            let t = self.trial(state, self.half_lambda)?;
            return Ok(if Self::is_stationary(&t) { Search::Stationary(t) } else { Search::Accepted(t, 1) });
        }
        if state.a_total == 0.0 {
            // x̃ = x₀ whatever λ is, so one solve fixes ‖y − x̃‖ and λ follows in closed form.
            let mut t = self.trial(state, 1.0 / cfg.h)?;
            if Self::is_stationary(&t) {
                return Ok(Search::Stationary(t));
            }
            let target = 0.5 * (band.lower + band.upper);
            let lambda = target * factorial(cfg.p) / (cfg.h * t.dist.powi(cfg.p as i32 - 1));
            let (a, total) = cfg.momentum(0.0, lambda);
            t.lambda = lambda;
            t.a_next = a;
            t.a_total_next = total;
            t.eta = step_ratio(lambda, cfg.h, cfg.p, t.dist);
            if band.contains(t.eta) {
                return Ok(Search::Accepted(t, 1));
            }
        }
        let ls = cfg.lambda_search;
        let mut lambda = state.lambda_last.unwrap_or(1.0 / cfg.h);
        let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
        let mut last_eta = f64::NAN;
        for resolves in 1..=ls.max_resolves {
            let t = self.trial(state, lambda)?;
            if Self::is_stationary(&t) {
                return Ok(Search::Stationary(t));
            }
            last_eta = t.eta;
            match band.classify(t.eta) {
                StepClass::Accepted => return Ok(Search::Accepted(t, resolves)),
                StepClass::TooSmall => lo = Some(lambda),
                StepClass::TooLarge => hi = Some(lambda),
            }
            lambda = match (lo, hi) {
                (Some(l), Some(h)) => {
                    if h / l - 1.0 <= ls.bracket_tol {
                        break;
                    }
                    (l * h).sqrt()
                }
                (Some(l), None) => l * ls.growth,
                (None, Some(h)) => h / ls.growth,
                (None, None) => unreachable!(),
            };
        }
        Err(Error::LambdaSearch { resolves: ls.max_resolves, last_eta })
    }
}

/// Runs the outer loop with a fresh ledger and no observer.
pub fn am_run(
    problem: &CompositeProblem,
    config: &AmConfig,
    x0: &DVector<f64>,
    subsolver: &mut dyn Subsolver,
) -> Result<(AmOutput, OracleLedger)> {
    let mut ledger = OracleLedger::default();
    let out = am_run_with(problem, config, x0, subsolver, &mut ledger, &mut |_| true)?;
    Ok((out, ledger))
}

/// Runs the outer loop, recording oracle calls on `ledger` and calling `observer` after
/// each accepted iteration; the run stops when the observer returns `false`.
pub fn am_run_with(
    problem: &CompositeProblem,
    config: &AmConfig,
    x0: &DVector<f64>,
    subsolver: &mut dyn Subsolver,
    ledger: &mut OracleLedger,
    observer: &mut dyn FnMut(&Iteration<'_>) -> bool,
) -> Result<AmOutput> {
    config.validate()?;
    problem.validate()?;
    if subsolver.order() != config.p {
        return Err(Error::Config(format!("subsolver order {} does not match p = {}", subsolver.order(), config.p)));
    }
    let started = Instant::now();
    let mut state = AmState::start(x0, config.diagnostics.then_some(config.sigma));
    let f0 = problem.eval_value(Part::Total, x0)?;
    let mut trace = Trace::new("am", f0);
    let (half_lambda, h) = if config.p == 1 { half_step_lambda(config.h) } else { (f64::NAN, config.h) };
    let mut runner = Runner { problem, config, subsolver, ledger, inner_iters: 0, h, half_lambda };
    let mut total_resolves = 0;
    let mut max_resolves = 0;
    let mut stop = StopReason::MaxIters;

    while state.k < config.max_iters {
        let iter = state.k + 1;
        let trial = match runner.search(&state).map_err(|e| e.at(iter))? {
            Search::Accepted(t, n) => {
                total_resolves += n;
                max_resolves = max_resolves.max(n);
                (t, n)
            }
            Search::Stationary(t) => {
                let f_t = problem.eval_value(Part::Total, &t.sol.y)?;
                if f_t < problem.eval_value(Part::Total, &state.y)? {
                    state.y = t.sol.y;
                }
                stop = StopReason::Stationary;
                break;
            }
        };
        let (t, resolve_count) = trial;
        let y = t.sol.y.clone();
        let grad_f_y = problem.eval_grad_counted(Part::F, &y, runner.ledger, Level::Outer)?;
        let grad_g_y = if problem.g.is_smooth() || !t.sol.exact {
            problem.eval_grad_counted(Part::G, &y, runner.ledger, Level::Outer)?
        } else {
            // The subgradient that zeroes the subproblem's stationarity condition.
            -t.model.regularized_gradient(&y)
        };
        let x_next = gradient_step(&state.x, t.a_next, &grad_f_y, &grad_g_y);
        let sigma_res = sigma_residual(&y, &t.x_tilde, t.lambda, &grad_f_y, &grad_g_y);
        let f_y = problem.eval_value_counted(Part::Total, &y, runner.ledger, Level::Outer)?;
        let grad_total = &grad_f_y + &grad_g_y;
        if let Some(pt) = state.potential.as_mut() {
            pt.update(t.a_next, t.a_total_next, t.lambda, f_y, &grad_total, &y, t.dist);
        }

        state.k = iter;
        state.a_total = t.a_total_next;
        state.x = x_next;
        state.y = y.clone();
        state.lambda_last = Some(t.lambda);

        let potential = state.potential.as_ref().map(|pt| potential_diagnostic(pt, state.a_total, f_y));
        let mut record = TraceRecord::new(iter, f_y, runner.ledger, runner.inner_iters);
        record.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
        record.eta = Some(t.eta);
        record.sigma_res = Some(sigma_res);
        record.psi_gap = potential.map(|(gap, _)| gap);

        let outcome = StepOutcome {
            lambda: t.lambda,
            a_next: t.a_next,
            a_total_next: t.a_total_next,
            x_tilde: t.x_tilde,
            y_next: y,
            dist: t.dist,
            eta: t.eta,
            resolve_count,
            sub_grad_norm: t.sol.grad_norm,
            inner_iters: t.sol.inner_iters,
            sigma_residual: sigma_res,
            grad_f_y,
            grad_g_y,
        };
        let keep_going =
            observer(&Iteration { state: &state, outcome: &outcome, record: &record, objective: f_y, potential });
        trace.records.push(record);

        if let Some(eps) = config.target_gap {
            if let Some(f_star) = problem.f_star {
                if f_y - f_star <= eps {
                    stop = StopReason::TargetGap;
                    break;
                }
            } else if let Some(uc) = problem.uniform_convexity {
                if uc.gap_bound(grad_total.norm()) <= eps {
                    stop = StopReason::GradientBound;
                    break;
                }
            }
        }
        if !keep_going {
            stop = StopReason::Observer;
            break;
        }
    }

    let inner_iters = runner.inner_iters;
    Ok(AmOutput { y: state.y.clone(), state, trace, stop, total_resolves, max_resolves, inner_iters })
}
