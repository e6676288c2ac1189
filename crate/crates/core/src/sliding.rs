//! Oracle separation: an outer loop on `f` whose subproblems are solved by a restarted
//! inner loop on `g`, so that `f` and `g` calls scale with their own smoothness.
//!
//! First order only. The subproblem `⟨∇f(x̃), y⟩ + g(y) + H_f/2 ‖y − x̃‖²` is
//! `H_f`-strongly convex; the inner loop treats `g` as its smooth part and the linear
//! plus quadratic remainder as an exactly solvable composite term.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{am_run_with, AmConfig, AmOutput, Iteration, StopReason};
use crate::error::{Error, Result};
use crate::ledger::{Level, OracleLedger, Side};
use crate::problem::{Component, CompositeProblem, Part};
use crate::restart::{nk_schedule, RestartSchedule};
use crate::subsolver::{
    criterion_check, solve_sub_p1, Criterion, CriterionContext, ExactSubsolver, SubSolution, SubproblemSpec, Subsolver,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlidingConfig {
    /// Outer regularization, at least `2 L_f`.
    pub hf: f64,
    /// Inner regularization is `2 L_g` times this factor.
    pub hg_scale: f64,
    /// Rule checked after every inner stage.
    pub criterion: Criterion,
    pub max_iters: usize,
    pub target_gap: Option<f64>,
    /// Inner stages allowed per subproblem.
    pub max_stages: usize,
}

impl SlidingConfig {
    pub fn new(hf: f64) -> Self {
        Self { hf, hg_scale: 1.0, criterion: Criterion::Contraction, max_iters: 100, target_gap: None, max_stages: 64 }
    }
}

/// Solves each outer subproblem with restarted inner runs on `g`.
pub struct SlidingSubsolver {
    pub hg_scale: f64,
    pub criterion: Criterion,
    pub max_stages: usize,
}

impl Subsolver for SlidingSubsolver {
    fn order(&self) -> u32 {
        1
    }

    fn criterion(&self) -> Criterion {
        self.criterion
    }

    fn solve(&mut self, spec: &SubproblemSpec<'_>, ledger: &mut OracleLedger) -> Result<SubSolution> {
        let problem = spec.problem;
        let model = spec.model;
        if problem.g.is_zero() {
            return solve_sub_p1(model, &problem.g);
        }
        let lip_g = problem.lip_g1.ok_or(Error::Config("oracle separation needs L_g".into()))?;
        let hf = model.reg_h();
        let center = model.center();
        let lin = model.grad_center();
        let rest = Component::Isotropic {
            center: center.clone(),
            weight: hf,
            linear: lin.clone(),
            offset: model.f_center() - lin.dot(center),
        };
        let inner_problem = CompositeProblem::new(problem.g.clone(), rest)?.with_uniform_convexity(2.0, hf);
        let hg = 2.0 * lip_g * self.hg_scale;

        let sub_grad_at = |y: &DVector<f64>, ledger: &mut OracleLedger| -> Result<DVector<f64>> {
            Ok(model.regularized_gradient(y) + problem.eval_grad_counted(Part::G, y, ledger, Level::Inner)?)
        };
        let accept = |y: &DVector<f64>, sub_grad: &DVector<f64>, ledger: &mut OracleLedger| -> Result<bool> {
            let full_grad = if self.criterion.needs_full_gradient() {
                let gf = problem.eval_grad_counted(Part::F, y, ledger, Level::Inner)?;
                Some(sub_grad - model.regularized_gradient(y) + gf)
            } else {
                None
            };
            let ctx = CriterionContext {
                order: 1,
                reg_h: hf,
                center,
                point: y,
                sub_grad: Some(sub_grad),
                full_grad: full_grad.as_ref(),
                lambda: spec.lambda,
                lip_g1: Some(lip_g),
                sigma: Some(spec.sigma),
            };
            criterion_check(self.criterion, &ctx)
        };

        let g0 = sub_grad_at(center, ledger)?;
        let r0 = g0.norm() / hf;
        if r0 == 0.0 {
            return Ok(SubSolution { y: center.clone(), grad_norm: 0.0, inner_iters: 0, exact: false });
        }
        let sched = RestartSchedule::new(r0, 2.0, hf, 1, hg, self.max_stages);
        let base = AmConfig::new(1, hg);
        let mut inner_ledger = OracleLedger::new(ledger.weight_full());
        let mut z = center.clone();
        let mut iters = 0usize;
        let mut last_norm = g0.norm();
        let mut done = false;
        for k in 0..self.max_stages {
            let cfg = AmConfig { max_iters: nk_schedule(k, &sched), ..base.clone() };
            let out = am_run_with(
                &inner_problem,
                &cfg,
                &z,
                &mut ExactSubsolver { order: 1 },
                &mut inner_ledger,
                &mut |_| true,
            )?;
            iters += out.trace.records.len();
            z = out.y;
            let sub_grad = sub_grad_at(&z, ledger)?;
            last_norm = sub_grad.norm();
            // A stationary inner run is as exact as the inner loop can certify.
            if out.stop == StopReason::Stationary || accept(&z, &sub_grad, ledger)? {
                done = true;
                break;
            }
        }
        // Inner calls on its smooth part are g calls; the synthetic remainder is free.
        ledger.absorb(&inner_ledger, |_, side| (side == Side::F).then_some((Level::Inner, Side::G)));
        if !done {
            return Err(Error::InnerBudget { budget: self.max_stages, achieved: last_norm });
        }
        Ok(SubSolution { y: z, grad_norm: last_norm, inner_iters: iters, exact: false })
    }
}

/// Outer loop on `f` with sliding subproblem solves; `f` calls land in the outer ledger
/// rows and `g` calls in the inner ones.
pub fn sliding_run(
    problem: &CompositeProblem,
    config: &SlidingConfig,
    x0: &DVector<f64>,
    ledger: &mut OracleLedger,
    observer: &mut dyn FnMut(&Iteration<'_>) -> bool,
) -> Result<AmOutput> {
    if !(config.hg_scale > 0.0) || config.max_stages == 0 {
        return Err(Error::Config("sliding needs a positive inner scale and at least one stage".into()));
    }
    let mut cfg = AmConfig::new(1, config.hf).with_max_iters(config.max_iters);
    cfg.target_gap = config.target_gap;
    let mut sub =
        SlidingSubsolver { hg_scale: config.hg_scale, criterion: config.criterion, max_stages: config.max_stages };
    let mut out = am_run_with(problem, &cfg, x0, &mut sub, ledger, observer)?;
    out.trace.method = "sliding".into();
    Ok(out)
}

/// Weighted `(f, g)` oracle counts of a run.
pub fn separated_counts(ledger: &OracleLedger) -> (f64, f64) {
    (ledger.weighted(Side::F), ledger.weighted(Side::G))
}
