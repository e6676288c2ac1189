//! Fast gradient method in constant-step estimating-sequence form.

use nalgebra::DVector;

use super::{RunLimits, RunOutput};
use crate::engine::StopReason;
use crate::error::{Error, Result};
use crate::ledger::{Level, OracleLedger, Trace, TraceRecord};
use crate::problem::{CompositeProblem, Part};

/// Accelerated gradient method with step `1/L`.
///
/// Weights follow `L a² = A + a`. A smooth `g` is handled through its gradient; a
/// nonsmooth one through its prox, so the step becomes a gradient-mapping step.
pub fn fgm_run(
    problem: &CompositeProblem,
    l: f64,
    x0: &DVector<f64>,
    limits: &RunLimits,
    ledger: &mut OracleLedger,
    observer: &mut dyn FnMut(&TraceRecord) -> bool,
) -> Result<RunOutput> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Config(format!("L must be positive, got {l}")));
    }
    problem.validate()?;
    let smooth_g = problem.g.is_smooth();
    let mut trace = Trace::new("fgm", problem.eval_value(Part::Total, x0)?);
    let mut a_total = 0.0f64;
    let mut v = x0.clone();
    let mut y = x0.clone();
    let mut stop = StopReason::MaxIters;
    for iter in 1..=limits.max_iters {
        let a = (1.0 + (1.0 + 4.0 * l * a_total).sqrt()) / (2.0 * l);
        let a_next = a_total + a;
        let x_tilde = (&y * a_total + &v * a) / a_next;
        let mapping = if smooth_g {
            problem.eval_grad_counted(Part::Total, &x_tilde, ledger, Level::Outer)?
        } else {
            let grad_f = problem.eval_grad_counted(Part::F, &x_tilde, ledger, Level::Outer)?;
            let point = problem
                .g
                .prox(&(&x_tilde - &grad_f / l), 1.0 / l)
                .ok_or(Error::NoClosedForm("nonsmooth g without a prox map"))?;
            (&x_tilde - point) * l
        };
        y = &x_tilde - &mapping / l;
        v.axpy(-a, &mapping, 1.0);
        a_total = a_next;

        let f_y = problem.eval_value(Part::Total, &y)?;
        let rec = TraceRecord::new(iter, f_y, ledger, 0);
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
