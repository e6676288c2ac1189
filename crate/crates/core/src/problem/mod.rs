//! Objective side: composite problems `F = f + g`, their oracles, Taylor models,
//! generators and numerical self-checks.

mod check;
mod component;
mod generate;
mod sparse;
mod taylor;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::{fd_check_grad, hessian_lipschitz_sampled, taylor_remainder_check, TaylorCheck};
pub use component::{Component, Oracle};
pub use generate::{
    gen_logsumexp_quadratic, lasso, quartic, random_quadratic, ExperimentSpec, LambdaMix, QuadraticSpec,
};
pub use sparse::{estimate_lf, CscMatrix};
pub(crate) use taylor::factorial;
pub use taylor::{build_taylor_model, TaylorModel};

use crate::ledger::{CallKind, Level, OracleLedger, Side};

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite {what} at the evaluation point (diverged run)")]
    NonFinite { what: &'static str },
    #[error("component `{part}` has no {oracle} oracle")]
    MissingOracle { part: &'static str, oracle: &'static str },
    #[error("invalid problem: {0}")]
    Invalid(String),
}

/// Which piece of `F = f + g` an evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    F,
    G,
    Total,
}

impl Part {
    fn label(self) -> &'static str {
        match self {
            Part::F => "f",
            Part::G => "g",
            Part::Total => "F",
        }
    }
}

/// `F(y) ≥ F(x) + ⟨∇F(x), y − x⟩ + σ/r ‖y − x‖^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformConvexity {
    pub r: f64,
    pub sigma: f64,
}

impl UniformConvexity {
    /// Upper bound on `F(y) − F*` from the gradient norm at `y`:
    /// `(r−1)/r · (1/σ)^{1/(r−1)} · ‖∇F(y)‖^{r/(r−1)}`.
    pub fn gap_bound(&self, grad_norm: f64) -> f64 {
        let r = self.r;
        (r - 1.0) / r * (1.0 / self.sigma).powf(1.0 / (r - 1.0)) * grad_norm.powf(r / (r - 1.0))
    }

    /// Upper bound on `‖y − x*‖` from a function gap, `(r·gap/σ)^{1/r}`.
    pub fn radius_bound(&self, gap: f64) -> f64 {
        (self.r * gap.max(0.0) / self.sigma).powf(1.0 / self.r)
    }
}

/// `min_x F(x) = f(x) + g(x)` with metadata about smoothness and the solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeProblem {
    pub f: Component,
    pub g: Component,
    /// `L_{p,f}` keyed by the derivative order `p`; values may be upper bounds.
    pub lip_f: BTreeMap<u32, f64>,
    /// Lipschitz constant of `∇g`, when `g` is smooth.
    pub lip_g1: Option<f64>,
    pub uniform_convexity: Option<UniformConvexity>,
    pub x_star: Option<DVector<f64>>,
    pub f_star: Option<f64>,
    /// Suggested starting point.
    pub x0: Option<DVector<f64>>,
    /// Generator parameters, when the problem came from [`gen_logsumexp_quadratic`].
    pub spec: Option<ExperimentSpec>,
}

impl CompositeProblem {
    pub fn new(f: Component, g: Component) -> Result<Self, ProblemError> {
        if f.dim() != g.dim() {
            return Err(ProblemError::Dimension { expected: f.dim(), got: g.dim() });
        }
        if f.dim() == 0 {
            return Err(ProblemError::Invalid("dimension must be at least 1".into()));
        }
        let mut lip_f = BTreeMap::new();
        if let Some(l) = f.lipschitz_grad() {
            lip_f.insert(1, l);
        }
        if f.quadratic_form().is_some() {
            lip_f.insert(2, 0.0);
        }
        Ok(Self {
            lip_g1: g.lipschitz_grad(),
            f,
            g,
            lip_f,
            uniform_convexity: None,
            x_star: None,
            f_star: None,
            x0: None,
            spec: None,
        })
    }

    pub fn with_lip_f(mut self, order: u32, l: f64) -> Self {
        self.lip_f.insert(order, l);
        self
    }

    pub fn with_uniform_convexity(mut self, r: f64, sigma: f64) -> Self {
        self.uniform_convexity = Some(UniformConvexity { r, sigma });
        self
    }

    /// Records a known minimizer and fills `f_star` from it.
    pub fn with_solution(mut self, x_star: DVector<f64>) -> Self {
        self.f_star = Some(self.f.value(&x_star) + self.g.value(&x_star));
        self.x_star = Some(x_star);
        self
    }

    pub fn with_x0(mut self, x0: DVector<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.f.dim() != self.g.dim() {
            return Err(ProblemError::Dimension { expected: self.f.dim(), got: self.g.dim() });
        }
        if self.lip_f.values().chain(self.lip_g1.iter()).any(|l| !(*l >= 0.0)) {
            return Err(ProblemError::Invalid("Lipschitz constants must be nonnegative".into()));
        }
        if let Some(uc) = self.uniform_convexity {
            if !(uc.sigma > 0.0) || !(uc.r >= 2.0) {
                return Err(ProblemError::Invalid(format!("uniform convexity needs σ > 0 and r ≥ 2, got {uc:?}")));
            }
        }
        for v in [&self.x_star, &self.x0].into_iter().flatten() {
            self.check_dim(v)?;
        }
        Ok(())
    }

    pub fn lip(&self, order: u32) -> Option<f64> {
        self.lip_f.get(&order).copied()
    }

    pub fn component(&self, part: Part) -> Option<&Component> {
        match part {
            Part::F => Some(&self.f),
            Part::G => Some(&self.g),
            Part::Total => None,
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), ProblemError> {
        if x.len() != self.dim() {
            return Err(ProblemError::Dimension { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    /// `f(x)`, `g(x)` or `F(x)`.
    pub fn eval_value(&self, part: Part, x: &DVector<f64>) -> Result<f64, ProblemError> {
        self.check_dim(x)?;
        let v = match part {
            Part::F => self.f.value(x),
            Part::G => self.g.value(x),
            Part::Total => self.f.value(x) + self.g.value(x),
        };
        if !v.is_finite() {
            return Err(ProblemError::NonFinite { what: "value" });
        }
        Ok(v)
    }

    /// Same as [`eval_value`](Self::eval_value) and records value calls on `ledger`.
    pub fn eval_value_counted(
        &self,
        part: Part,
        x: &DVector<f64>,
        ledger: &mut OracleLedger,
        level: Level,
    ) -> Result<f64, ProblemError> {
        let v = self.eval_value(part, x)?;
        for side in self.counted_sides(part) {
            ledger.record(level, side, CallKind::Value, 1);
        }
        Ok(v)
    }

    /// (Sub)gradient of `f`, `g` or `F`.
    pub fn eval_grad(&self, part: Part, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        self.check_dim(x)?;
        let grad = match part {
            Part::F => self.f.gradient(x),
            Part::G => self.g.gradient(x),
            Part::Total => self.f.gradient(x) + self.g.gradient(x),
        };
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFinite { what: "gradient" });
        }
        Ok(grad)
    }

    /// Gradient evaluation counted as one full-gradient call per side.
    pub fn eval_grad_counted(
        &self,
        part: Part,
        x: &DVector<f64>,
        ledger: &mut OracleLedger,
        level: Level,
    ) -> Result<DVector<f64>, ProblemError> {
        let grad = self.eval_grad(part, x)?;
        for side in self.counted_sides(part) {
            ledger.record(level, side, CallKind::FullGrad, 1);
        }
        Ok(grad)
    }

    pub fn eval_hessian(&self, part: Part, x: &DVector<f64>) -> Result<DMatrix<f64>, ProblemError> {
        self.check_dim(x)?;
        let hess = match part {
            Part::Total => self.f.hessian(x).zip(self.g.hessian(x)).map(|(a, b)| a + b),
            p => self.component(p).and_then(|c| c.hessian(x)),
        };
        hess.ok_or(ProblemError::MissingOracle { part: part.label(), oracle: "Hessian" })
    }
}

fn sides(part: Part) -> &'static [Side] {
    match part {
        Part::F => &[Side::F],
        Part::G => &[Side::G],
        Part::Total => &[Side::F, Side::G],
    }
}

impl CompositeProblem {
    /// Sides of `part` that cost an oracle call; an identically zero piece is free.
    fn counted_sides(&self, part: Part) -> impl Iterator<Item = Side> + '_ {
        sides(part).iter().copied().filter(move |s| match s {
            Side::F => !self.f.is_zero(),
            Side::G => !self.g.is_zero(),
        })
    }
}
