use nalgebra::{DMatrix, DVector};

use super::{CompositeProblem, Part, ProblemError};

/// Degree-`p` Taylor expansion of `f` at `center`, together with the regularization
/// scale `H` of the `H/(p+1)! ‖y − center‖^{p+1}` term.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorModel {
    order: u32,
    center: DVector<f64>,
    f_center: f64,
    grad_center: DVector<f64>,
    hess_center: Option<DMatrix<f64>>,
    reg_h: f64,
}

pub(crate) fn factorial(p: u32) -> f64 {
    (1..=p).map(f64::from).product()
}

impl TaylorModel {
    /// Assembles a model from already evaluated derivatives. A Hessian must be supplied
    /// exactly when `order == 2`.
    pub fn from_parts(
        order: u32,
        center: DVector<f64>,
        f_center: f64,
        grad_center: DVector<f64>,
        hess_center: Option<DMatrix<f64>>,
        reg_h: f64,
    ) -> Result<Self, ProblemError> {
        if !(reg_h > 0.0) {
            return Err(ProblemError::Invalid(format!("regularization H must be positive, got {reg_h}")));
        }
        match (order, &hess_center) {
            (1, None) | (2, Some(_)) => {}
            (2, None) => return Err(ProblemError::MissingOracle { part: "f", oracle: "Hessian" }),
            (1, Some(_)) => return Err(ProblemError::Invalid("first-order model takes no Hessian".into())),
            _ => return Err(ProblemError::Invalid(format!("unsupported model order {order}"))),
        }
        Ok(Self { order, center, f_center, grad_center, hess_center, reg_h })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn f_center(&self) -> f64 {
        self.f_center
    }

    pub fn grad_center(&self) -> &DVector<f64> {
        &self.grad_center
    }

    pub fn hess_center(&self) -> Option<&DMatrix<f64>> {
        self.hess_center.as_ref()
    }

    pub fn reg_h(&self) -> f64 {
        self.reg_h
    }

    /// `Ω_p(f, x̃; y)`.
    pub fn value(&self, y: &DVector<f64>) -> f64 {
        let h = y - &self.center;
        let mut v = self.f_center + self.grad_center.dot(&h);
        if let Some(b) = &self.hess_center {
            v += 0.5 * h.dot(&(b * &h));
        }
        v
    }

    /// `∇_y Ω_p(f, x̃; y)`.
    pub fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.hess_center {
            Some(b) => &self.grad_center + b * (y - &self.center),
            None => self.grad_center.clone(),
        }
    }

    /// `∂ᵢ Ω_p(f, x̃; y)`.
    pub fn partial(&self, y: &DVector<f64>, i: usize) -> f64 {
        match &self.hess_center {
            Some(b) => {
                self.grad_center[i]
                    + b.row(i).iter().zip(y.iter().zip(self.center.iter())).map(|(a, (u, c))| a * (u - c)).sum::<f64>()
            }
            None => self.grad_center[i],
        }
    }

    /// Value of the regularizer `H/(p+1)! ‖y − x̃‖^{p+1}`.
    pub fn regularizer(&self, y: &DVector<f64>) -> f64 {
        let p = self.order;
        self.reg_h / factorial(p + 1) * (y - &self.center).norm().powi(p as i32 + 1)
    }

    /// Gradient of the regularizer, `H/p! ‖y − x̃‖^{p−1} (y − x̃)`.
    pub fn regularizer_gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let p = self.order;
        let h = y - &self.center;
        let scale = self.reg_h / factorial(p) * h.norm().powi(p as i32 - 1);
        h * scale
    }

    /// `Ω_p(f, x̃; y) + H/(p+1)! ‖y − x̃‖^{p+1}`.
    pub fn regularized_value(&self, y: &DVector<f64>) -> f64 {
        self.value(y) + self.regularizer(y)
    }

    pub fn regularized_gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        self.gradient(y) + self.regularizer_gradient(y)
    }
}

/// Builds `Ω_p(f, x̃; ·)` from the problem's `f` oracles.
pub fn build_taylor_model(
    problem: &CompositeProblem,
    order: u32,
    center: &DVector<f64>,
    reg_h: f64,
) -> Result<TaylorModel, ProblemError> {
    let f_center = problem.eval_value(Part::F, center)?;
    let grad = problem.eval_grad(Part::F, center)?;
    let hess = match order {
        2 => Some(problem.eval_hessian(Part::F, center)?),
        _ => None,
    };
    TaylorModel::from_parts(order, center.clone(), f_center, grad, hess, reg_h)
}
