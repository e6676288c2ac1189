//! Solvers for the per-iteration subproblem
//! `min_y Ω_p(f, x̃; y) + g(y) + H/(p+1)! ‖y − x̃‖^{p+1}`.

mod exact;
mod inner;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use exact::{solve_sub_p1, solve_sub_p2};
pub use inner::{
    ExactQuadratic, GradientDescent, InnerObjective, InnerResult, InnerSolver, ModelObjective, ProximalObjective,
    StopFn,
};

use crate::error::{Error, Result};
use crate::ledger::{CallKind, Level, OracleLedger, Side};
use crate::problem::{CompositeProblem, TaylorModel};

/// Acceptance rule for an approximate subproblem solution `ỹ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Stationarity to rounding level.
    Exact,
    /// `‖∇Ω̃(ỹ)‖ ≤ ‖∇F(ỹ)‖ / (4p(p+1))`.
    GradRatio,
    /// `‖∇Ω̃(ỹ)‖ ≤ Hρ/(1+ρ) ‖x̃ − ỹ‖` with `ρ = H/(3H + 2L_g)`. Sufficient for
    /// `‖ỹ − y*‖ ≤ ρ‖x̃ − y*‖` when the subproblem is `H`-strongly convex, and independent
    /// of any target accuracy.
    Contraction,
    /// `‖ỹ − (x̃ − λ∇F(ỹ))‖ ≤ σ‖ỹ − x̃‖`.
    SigmaResidual,
}

impl Criterion {
    /// Whether checking the rule needs `∇F(ỹ)`, which costs an extra `f` call.
    pub fn needs_full_gradient(self) -> bool {
        matches!(self, Criterion::GradRatio | Criterion::SigmaResidual)
    }
}

pub fn grad_ratio_coefficient(p: u32) -> f64 {
    1.0 / (4.0 * f64::from(p) * f64::from(p + 1))
}

pub fn contraction_rho(h: f64, lip_g1: f64) -> f64 {
    h / (3.0 * h + 2.0 * lip_g1)
}

/// Everything a criterion may look at. Fields a rule does not use can stay `None`.
#[derive(Debug, Clone, Copy)]
pub struct CriterionContext<'a> {
    pub order: u32,
    pub reg_h: f64,
    pub center: &'a DVector<f64>,
    pub point: &'a DVector<f64>,
    /// `∇Ω̃(ỹ)`.
    pub sub_grad: Option<&'a DVector<f64>>,
    /// `∇F(ỹ)`.
    pub full_grad: Option<&'a DVector<f64>>,
    pub lambda: Option<f64>,
    pub lip_g1: Option<f64>,
    pub sigma: Option<f64>,
}

/// Pure predicate for the acceptance rules.
pub fn criterion_check(kind: Criterion, ctx: &CriterionContext<'_>) -> Result<bool> {
    let sub = || ctx.sub_grad.ok_or(Error::MissingContext("sub_grad"));
    let full = || ctx.full_grad.ok_or(Error::MissingContext("full_grad"));
    Ok(match kind {
        Criterion::Exact => {
            let scale = 1.0 + ctx.full_grad.map_or(0.0, |g| g.norm());
            sub()?.norm() <= 1e-9 * scale
        }
        Criterion::GradRatio => sub()?.norm() <= grad_ratio_coefficient(ctx.order) * full()?.norm(),
        Criterion::Contraction => {
            let lg = ctx.lip_g1.ok_or(Error::MissingContext("lip_g1"))?;
            let rho = contraction_rho(ctx.reg_h, lg);
            sub()?.norm() <= ctx.reg_h * rho / (1.0 + rho) * (ctx.center - ctx.point).norm()
        }
        Criterion::SigmaResidual => {
            let lambda = ctx.lambda.ok_or(Error::MissingContext("lambda"))?;
            let sigma = ctx.sigma.ok_or(Error::MissingContext("sigma"))?;
            let target = ctx.center - full()? * lambda;
            (ctx.point - target).norm() <= sigma * (ctx.point - ctx.center).norm()
        }
    })
}

/// One subproblem instance handed to a [`Subsolver`].
#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub problem: &'a CompositeProblem,
    pub model: &'a TaylorModel,
    /// Step parameter of the current trial, used by the σ-residual rule.
    pub lambda: Option<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubSolution {
    pub y: DVector<f64>,
    /// `‖∇Ω̃(ỹ)‖`.
    pub grad_norm: f64,
    pub inner_iters: usize,
    pub exact: bool,
}

/// Anything that can produce `y_{k+1}` from a model.
pub trait Subsolver {
    fn order(&self) -> u32;
    fn criterion(&self) -> Criterion;
    fn solve(&mut self, spec: &SubproblemSpec<'_>, ledger: &mut OracleLedger) -> Result<SubSolution>;
}

/// Closed-form (`p = 1`) or root-finding (`p = 2`) solves.
#[derive(Debug, Clone, Copy)]
pub struct ExactSubsolver {
    pub order: u32,
}

impl Subsolver for ExactSubsolver {
    fn order(&self) -> u32 {
        self.order
    }

    fn criterion(&self) -> Criterion {
        Criterion::Exact
    }

    fn solve(&mut self, spec: &SubproblemSpec<'_>, _ledger: &mut OracleLedger) -> Result<SubSolution> {
        match self.order {
            1 => solve_sub_p1(spec.model, &spec.problem.g),
            2 => solve_sub_p2(spec.model, &spec.problem.g),
            p => Err(Error::Config(format!("no exact subproblem solver for order {p}"))),
        }
    }
}

/// Iterative solves by an [`InnerSolver`] until `criterion` holds.
pub struct InexactSubsolver {
    pub order: u32,
    pub criterion: Criterion,
    pub inner: Box<dyn InnerSolver>,
}

impl Subsolver for InexactSubsolver {
    fn order(&self) -> u32 {
        self.order
    }

    fn criterion(&self) -> Criterion {
        self.criterion
    }

    fn solve(&mut self, spec: &SubproblemSpec<'_>, ledger: &mut OracleLedger) -> Result<SubSolution> {
        solve_sub_inner(spec, self.criterion, self.inner.as_mut(), ledger)
    }
}

/// Runs `inner` on the subproblem from `x̃` until `criterion` accepts.
///
/// `∇F(ỹ)` for the ratio and residual rules is assembled from `∇Ω̃(ỹ)` (which already
/// contains `∇g(ỹ)`) plus one counted `f` gradient.
pub fn solve_sub_inner(
    spec: &SubproblemSpec<'_>,
    criterion: Criterion,
    inner: &mut dyn InnerSolver,
    ledger: &mut OracleLedger,
) -> Result<SubSolution> {
    let model = spec.model;
    let problem = spec.problem;
    let obj = ModelObjective { model, g: &problem.g };
    let lip_g1 = problem.lip_g1;
    let mut stop = |y: &DVector<f64>, sub_grad: &DVector<f64>, ledger: &mut OracleLedger| -> Result<bool> {
        let full_grad = if criterion.needs_full_gradient() {
            if !problem.f.is_zero() {
                ledger.record(Level::Inner, Side::F, CallKind::FullGrad, 1);
            }
            Some(sub_grad - model.regularized_gradient(y) + problem.eval_grad(crate::Part::F, y)?)
        } else {
            None
        };
        let ctx = CriterionContext {
            order: model.order(),
            reg_h: model.reg_h(),
            center: model.center(),
            point: y,
            sub_grad: Some(sub_grad),
            full_grad: full_grad.as_ref(),
            lambda: spec.lambda,
            lip_g1,
            sigma: Some(spec.sigma),
        };
        criterion_check(criterion, &ctx)
    };
    let result = inner.minimize(&obj, model.center(), &mut stop, ledger)?;
    let grad_norm = result.grad.norm();
    if !result.converged {
        return Err(Error::InnerBudget { budget: result.iters, achieved: grad_norm });
    }
    Ok(SubSolution { y: result.y, grad_norm, inner_iters: result.iters, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_taylor_model, random_quadratic, QuadraticSpec};
    use nalgebra::dvector;

    fn ctx<'a>(center: &'a DVector<f64>, point: &'a DVector<f64>, sub: &'a DVector<f64>) -> CriterionContext<'a> {
        CriterionContext {
            order: 1,
            reg_h: 1.0,
            center,
            point,
            sub_grad: Some(sub),
            full_grad: None,
            lambda: None,
            lip_g1: None,
            sigma: None,
        }
    }

    #[test]
    fn coefficients() {
        assert_eq!(grad_ratio_coefficient(1), 1.0 / 8.0);
        assert_eq!(grad_ratio_coefficient(2), 1.0 / 24.0);
        let rho = contraction_rho(2.0, 2.0);
        assert!((rho - 0.2).abs() < 1e-15);
        assert!((2.0 * rho / (1.0 + rho) - 2.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exact_solution_passes_grad_ratio() {
        let (c, y, zero, big) = (dvector![0.0], dvector![1.0], dvector![0.0], dvector![5.0]);
        let mut cx = ctx(&c, &y, &zero);
        cx.full_grad = Some(&big);
        assert!(criterion_check(Criterion::GradRatio, &cx).unwrap());
    }

    #[test]
    fn contraction_fails_at_center() {
        let (c, g) = (dvector![1.0, 1.0], dvector![1e-3, 0.0]);
        let mut cx = ctx(&c, &c, &g);
        cx.lip_g1 = Some(1.0);
        assert!(!criterion_check(Criterion::Contraction, &cx).unwrap());
    }

    #[test]
    fn missing_context_is_an_error() {
        let (c, y, g) = (dvector![0.0], dvector![1.0], dvector![0.0]);
        let cx = ctx(&c, &y, &g);
        assert_eq!(criterion_check(Criterion::Contraction, &cx), Err(Error::MissingContext("lip_g1")));
        assert_eq!(criterion_check(Criterion::SigmaResidual, &cx), Err(Error::MissingContext("lambda")));
    }

    #[test]
    fn sigma_residual_on_exact_first_order_step() {
        // f = ½x², exact step with H = 1 from x̃ = 1 lands at 0; with λ = ½ the residual is ½.
        let (c, y, sub, full) = (dvector![1.0], dvector![0.0], dvector![0.0], dvector![0.0]);
        let mut cx = ctx(&c, &y, &sub);
        cx.full_grad = Some(&full);
        cx.lambda = Some(0.5);
        cx.sigma = Some(1.0);
        assert!(criterion_check(Criterion::SigmaResidual, &cx).unwrap());
        cx.sigma = Some(0.999);
        assert!(!criterion_check(Criterion::SigmaResidual, &cx).unwrap());
    }

    #[test]
    fn exact_inner_matches_closed_form() {
        for seed in 0..5 {
            let p = random_quadratic(&QuadraticSpec { dim: 10, mu: 0.1, l: 5.0, g_l: Some(2.0), seed }).unwrap();
            let xt = DVector::from_fn(10, |i, _| (i as f64).sin());
            let model = build_taylor_model(&p, 1, &xt, 10.0).unwrap();
            let spec = SubproblemSpec { problem: &p, model: &model, lambda: None, sigma: 0.5 };
            let mut ledger = OracleLedger::default();
            let closed = ExactSubsolver { order: 1 }.solve(&spec, &mut ledger).unwrap();
            let mut inexact =
                InexactSubsolver { order: 1, criterion: Criterion::GradRatio, inner: Box::new(ExactQuadratic) };
            let sol = inexact.solve(&spec, &mut ledger).unwrap();
            assert_eq!(sol.inner_iters, 1);
            assert!((sol.y - closed.y).norm() <= 1e-9);
        }
    }

    #[test]
    fn gradient_descent_meets_contraction_rule() {
        let p = random_quadratic(&QuadraticSpec { dim: 6, mu: 0.0, l: 1.0, g_l: Some(4.0), seed: 3 }).unwrap();
        let xt = DVector::from_element(6, 1.0);
        let model = build_taylor_model(&p, 1, &xt, 2.0).unwrap();
        let spec = SubproblemSpec { problem: &p, model: &model, lambda: None, sigma: 0.5 };
        let mut ledger = OracleLedger::default();
        let sol = solve_sub_inner(&spec, Criterion::Contraction, &mut GradientDescent::default(), &mut ledger).unwrap();
        let rho = contraction_rho(2.0, p.lip_g1.unwrap());
        assert!(sol.grad_norm <= 2.0 * rho / (1.0 + rho) * (&xt - &sol.y).norm());
        assert_eq!(ledger.count(Level::Inner, Side::F, CallKind::FullGrad), 0);
        assert!(ledger.count(Level::Inner, Side::G, CallKind::FullGrad) as usize > sol.inner_iters);
    }
}
