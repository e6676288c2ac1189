//! Iterative solvers for the regularized subproblems and the objectives they run on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ledger::{CallKind, Level, OracleLedger, Side};
use crate::problem::{Component, CompositeProblem, TaylorModel};

/// Smooth strongly convex objective seen by an inner solver.
///
/// Gradient and partial calls record their oracle cost on the ledger.
pub trait InnerObjective {
    fn dim(&self) -> usize;
    fn value(&self, y: &DVector<f64>) -> f64;
    fn gradient(&self, y: &DVector<f64>, ledger: &mut OracleLedger) -> DVector<f64>;
    fn partial(&self, y: &DVector<f64>, i: usize, ledger: &mut OracleLedger) -> f64;
    /// Lipschitz constant of the gradient, if known.
    fn lipschitz(&self) -> Option<f64>;
    fn coord_lipschitz(&self) -> Option<Vec<f64>>;
    fn strong_convexity(&self) -> f64;
    /// `(M, v)` with `∇φ(y) = M y + v` when the objective is quadratic.
    fn quadratic(&self) -> Option<(DMatrix<f64>, DVector<f64>)>;
}

/// Stop predicate: `(y, ∇φ(y), ledger) -> done`.
pub type StopFn<'a> = dyn FnMut(&DVector<f64>, &DVector<f64>, &mut OracleLedger) -> Result<bool> + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct InnerResult {
    pub y: DVector<f64>,
    /// Objective gradient at `y`, as last seen by the stop predicate.
    pub grad: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
}

pub trait InnerSolver {
    fn name(&self) -> &'static str;
    fn minimize(
        &mut self,
        obj: &dyn InnerObjective,
        start: &DVector<f64>,
        stop: &mut StopFn<'_>,
        ledger: &mut OracleLedger,
    ) -> Result<InnerResult>;
}

fn record(ledger: &mut OracleLedger, level: Level, component: &Component, side: Side, kind: CallKind) {
    if !component.is_zero() {
        ledger.record(level, side, kind, 1);
    }
}

/// `Ω_p(f, x̃; y) + g(y) + H/(p+1)! ‖y − x̃‖^{p+1}`. The model is prebuilt, so only `g`
/// costs oracle calls.
pub struct ModelObjective<'a> {
    pub model: &'a TaylorModel,
    pub g: &'a Component,
}

impl InnerObjective for ModelObjective<'_> {
    fn dim(&self) -> usize {
        self.model.center().len()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        self.model.regularized_value(y) + self.g.value(y)
    }

    fn gradient(&self, y: &DVector<f64>, ledger: &mut OracleLedger) -> DVector<f64> {
        record(ledger, Level::Inner, self.g, Side::G, CallKind::FullGrad);
        self.model.regularized_gradient(y) + self.g.gradient(y)
    }

    fn partial(&self, y: &DVector<f64>, i: usize, ledger: &mut OracleLedger) -> f64 {
        record(ledger, Level::Inner, self.g, Side::G, CallKind::CoordGrad);
        let c = self.model.center();
        let reg = match self.model.order() {
            1 => self.model.reg_h() * (y[i] - c[i]),
            _ => self.model.reg_h() / 2.0 * (y - c).norm() * (y[i] - c[i]),
        };
        self.model.partial(y, i) + reg + self.g.partial(y, i)
    }

    fn lipschitz(&self) -> Option<f64> {
        (self.model.order() == 1).then_some(())?;
        Some(self.g.lipschitz_grad()? + self.model.reg_h())
    }

    fn coord_lipschitz(&self) -> Option<Vec<f64>> {
        (self.model.order() == 1).then_some(())?;
        let h = self.model.reg_h();
        Some(self.g.coord_lipschitz()?.into_iter().map(|l| l + h).collect())
    }

    fn strong_convexity(&self) -> f64 {
        if self.model.order() == 1 {
            self.model.reg_h()
        } else {
            0.0
        }
    }

    fn quadratic(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        if self.model.order() != 1 {
            return None;
        }
        let (q, lin) = self.g.quadratic_form()?;
        let h = self.model.reg_h();
        let d = self.dim();
        Some((q + DMatrix::identity(d, d) * h, self.model.grad_center() + lin - self.model.center() * h))
    }
}

/// `F(y) + weight/2 ‖y − center‖²`, the proximal-point subproblem on the full objective.
/// With `weight = 0` it is `F` itself.
pub struct ProximalObjective<'a> {
    pub problem: &'a CompositeProblem,
    pub center: &'a DVector<f64>,
    pub weight: f64,
    /// Level the oracle calls are booked at.
    pub level: Level,
}

impl InnerObjective for ProximalObjective<'_> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        self.problem.f.value(y) + self.problem.g.value(y) + 0.5 * self.weight * (y - self.center).norm_squared()
    }

    fn gradient(&self, y: &DVector<f64>, ledger: &mut OracleLedger) -> DVector<f64> {
        record(ledger, self.level, &self.problem.f, Side::F, CallKind::FullGrad);
        record(ledger, self.level, &self.problem.g, Side::G, CallKind::FullGrad);
        self.problem.f.gradient(y) + self.problem.g.gradient(y) + (y - self.center) * self.weight
    }

    fn partial(&self, y: &DVector<f64>, i: usize, ledger: &mut OracleLedger) -> f64 {
        record(ledger, self.level, &self.problem.f, Side::F, CallKind::CoordGrad);
        record(ledger, self.level, &self.problem.g, Side::G, CallKind::CoordGrad);
        self.problem.f.partial(y, i) + self.problem.g.partial(y, i) + self.weight * (y[i] - self.center[i])
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.problem.f.lipschitz_grad()? + self.problem.g.lipschitz_grad()? + self.weight)
    }

    fn coord_lipschitz(&self) -> Option<Vec<f64>> {
        let lf = self.problem.f.coord_lipschitz()?;
        let lg = self.problem.g.coord_lipschitz()?;
        Some(lf.iter().zip(&lg).map(|(a, b)| a + b + self.weight).collect())
    }

    fn strong_convexity(&self) -> f64 {
        self.weight
    }

    fn quadratic(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let (qf, lf) = self.problem.f.quadratic_form()?;
        let (qg, lg) = self.problem.g.quadratic_form()?;
        let d = self.dim();
        Some((qf + qg + DMatrix::identity(d, d) * self.weight, lf + lg - self.center * self.weight))
    }
}

/// Plain gradient descent with step `1/L`.
#[derive(Debug, Clone)]
pub struct GradientDescent {
    pub max_iters: usize,
    /// Overrides `1/L` when set.
    pub step: Option<f64>,
}

impl Default for GradientDescent {
    fn default() -> Self {
        Self { max_iters: 100_000, step: None }
    }
}

impl InnerSolver for GradientDescent {
    fn name(&self) -> &'static str {
        "gd"
    }

    fn minimize(
        &mut self,
        obj: &dyn InnerObjective,
        start: &DVector<f64>,
        stop: &mut StopFn<'_>,
        ledger: &mut OracleLedger,
    ) -> Result<InnerResult> {
        let step = match self.step {
            Some(s) => s,
            None => 1.0 / obj.lipschitz().ok_or(Error::NoClosedForm("gradient descent needs a Lipschitz constant"))?,
        };
        let mut y = start.clone();
        let mut grad = obj.gradient(&y, ledger);
        for iters in 0..=self.max_iters {
            if stop(&y, &grad, ledger)? {
                return Ok(InnerResult { y, grad, iters, converged: true });
            }
            if iters == self.max_iters {
                break;
            }
            y.axpy(-step, &grad, 1.0);
            grad = obj.gradient(&y, ledger);
        }
        Ok(InnerResult { y, grad, iters: self.max_iters, converged: false })
    }
}

/// Direct linear solve for quadratic objectives; one gradient call to certify the result.
#[derive(Debug, Clone, Default)]
pub struct ExactQuadratic;

impl InnerSolver for ExactQuadratic {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn minimize(
        &mut self,
        obj: &dyn InnerObjective,
        _start: &DVector<f64>,
        stop: &mut StopFn<'_>,
        ledger: &mut OracleLedger,
    ) -> Result<InnerResult> {
        let (m, v) = obj.quadratic().ok_or(Error::NoClosedForm("objective is not quadratic"))?;
        let rhs = -v;
        let y = match m.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => m.lu().solve(&rhs).ok_or(Error::NotPsd { min_eig: 0.0 })?,
        };
        let grad = obj.gradient(&y, ledger);
        let converged = stop(&y, &grad, ledger)?;
        Ok(InnerResult { y, grad, iters: 1, converged })
    }
}
