//! Accelerated hybrid proximal extragradient (Monteiro–Svaiter) with a fixed step.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{RunLimits, RunOutput};
use crate::engine::{extrapolate, momentum_update, StopReason};
use crate::error::{Error, Result};
use crate::ledger::{Level, OracleLedger, Trace, TraceRecord};
use crate::problem::{CompositeProblem, Part};
use crate::subsolver::{InnerSolver, ProximalObjective};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsConfig {
    /// Smoothness scale; the proximal step is `λ = 1/(2L)`.
    pub l: f64,
    /// Relative inexactness of the proximal solves.
    pub sigma: f64,
}

impl MsConfig {
    pub fn lambda(&self) -> f64 {
        0.5 / self.l
    }
}

/// Outer loop sharing the momentum recursion of the accelerated loop, but each step solves
/// the proximal problem `min F(y) + ‖y − x̃‖²/(2λ)` on the whole objective, inexactly,
/// until `‖y − (x̃ − λ∇F(y))‖ ≤ σ‖y − x̃‖`.
///
/// The proximal objective's gradient is `∇F(y) + (y − x̃)/λ`, so the residual equals
/// `λ‖∇φ(y)‖` and checking it costs nothing extra. Needs a smooth `g`.
pub fn ms_run(
    problem: &CompositeProblem,
    config: &MsConfig,
    inner: &mut dyn InnerSolver,
    x0: &DVector<f64>,
    limits: &RunLimits,
    ledger: &mut OracleLedger,
    observer: &mut dyn FnMut(&TraceRecord) -> bool,
) -> Result<RunOutput> {
    if !(config.l > 0.0) || !(0.0..1.0).contains(&config.sigma) {
        return Err(Error::Config(format!("bad proximal-extragradient config {config:?}")));
    }
    if !problem.g.is_smooth() {
        return Err(Error::Config("the proximal-extragradient baseline needs a smooth g".into()));
    }
    problem.validate()?;
    let lambda = config.lambda();
    let sigma = config.sigma;
    let mut trace = Trace::new("ms", problem.eval_value(Part::Total, x0)?);
    let (mut a_total, mut x, mut y) = (0.0f64, x0.clone(), x0.clone());
    let mut inner_cum = 0u64;
    let mut stop = StopReason::MaxIters;
    for iter in 1..=limits.max_iters {
        let (a, a_next) = momentum_update(a_total, lambda);
        let x_tilde = extrapolate(a_total, a, &y, &x);
        let obj = ProximalObjective { problem, center: &x_tilde, weight: 1.0 / lambda, level: Level::Inner };
        let mut accept = |yc: &DVector<f64>, grad: &DVector<f64>, _: &mut OracleLedger| -> Result<bool> {
            Ok(lambda * grad.norm() <= sigma * (yc - &x_tilde).norm())
        };
        let res = inner.minimize(&obj, &x_tilde, &mut accept, ledger).map_err(|e| e.at(iter))?;
        if !res.converged {
            return Err(Error::InnerBudget { budget: res.iters, achieved: res.grad.norm() }.at(iter));
        }
        inner_cum += res.iters as u64;
        let dist = (&res.y - &x_tilde).norm();
        if dist <= 1e-12 * (1.0 + x_tilde.norm()) {
            y = res.y;
            stop = StopReason::Stationary;
            break;
        }
        let grad_y = &res.grad - (&res.y - &x_tilde) / lambda;
        x.axpy(-a, &grad_y, 1.0);
        y = res.y;
        a_total = a_next;

        let f_y = problem.eval_value(Part::Total, &y)?;
        let mut rec = TraceRecord::new(iter, f_y, ledger, inner_cum);
        rec.sigma_res = Some(lambda * res.grad.norm() / dist);
        let keep = observer(&rec);
        trace.records.push(rec);
        if limits.reached(problem, f_y) {
            stop = StopReason::TargetGap;
            break;
        }
        if !keep {
            stop = StopReason::Observer;
            break;
        }
    }
    Ok(RunOutput { y, trace, stop })
}
