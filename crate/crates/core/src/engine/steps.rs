//! The scalar and vector recursions of the outer loop.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::problem::factorial;

/// `a' = (λ + √(λ² + 4λA))/2`, `A' = A + a'`, so that `λA' = a'²`.
pub fn momentum_update(a_total: f64, lambda: f64) -> (f64, f64) {
    let a = 0.5 * (lambda + (lambda * lambda + 4.0 * lambda * a_total).sqrt());
    (a, a_total + a)
}

/// `x̃ = (A y + a x) / (A + a)`; exactly `x` on the first iteration.
pub fn extrapolate(a_total: f64, a_next: f64, y: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    if a_total == 0.0 {
        return x.clone();
    }
    let total = a_total + a_next;
    y * (a_total / total) + x * (a_next / total)
}

/// `η = λ H ‖y − x̃‖^{p−1} / p!`.
pub fn step_ratio(lambda: f64, h: f64, p: u32, dist: f64) -> f64 {
    if p == 1 {
        return lambda * h;
    }
    lambda * h * dist.powi(p as i32 - 1) / factorial(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepClass {
    TooSmall,
    Accepted,
    TooLarge,
}

/// Acceptance window for `η`; the default is `[½, p/(p+1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBand {
    pub lower: f64,
    pub upper: f64,
}

impl StepBand {
    pub fn for_order(p: u32) -> Self {
        Self { lower: 0.5, upper: f64::from(p) / f64::from(p + 1) }
    }

    pub fn classify(&self, eta: f64) -> StepClass {
        if eta < self.lower {
            StepClass::TooSmall
        } else if eta > self.upper {
            StepClass::TooLarge
        } else {
            StepClass::Accepted
        }
    }

    pub fn contains(&self, eta: f64) -> bool {
        self.classify(eta) == StepClass::Accepted
    }
}

pub fn check_step_condition(lambda: f64, h: f64, p: u32, dist: f64) -> StepClass {
    StepBand::for_order(p).classify(step_ratio(lambda, h, p, dist))
}

/// `(λ, H')` with `fl(λ·H') = ½` exactly and `H'` at most a few ulps above `H`.
///
/// Some `H` admit no such `λ` at all, so `H` itself is nudged upward when needed; a larger
/// `H` only strengthens the regularization.
pub fn half_step_lambda(h: f64) -> (f64, f64) {
    let mut h_adj = h;
    for _ in 0..64 {
        let base = 0.5 / h_adj;
        let (mut up, mut down) = (base, base);
        if base * h_adj == 0.5 {
            return (base, h_adj);
        }
        for _ in 0..8 {
            up = up.next_up();
            down = down.next_down();
            for l in [up, down] {
                if l * h_adj == 0.5 {
                    return (l, h_adj);
                }
            }
        }
        h_adj = h_adj.next_up();
    }
    (0.5 / h, h)
}

/// `x' = x − a (∇f(y) + g'(y))`.
pub fn gradient_step(x: &DVector<f64>, a_next: f64, grad_f_y: &DVector<f64>, grad_g_y: &DVector<f64>) -> DVector<f64> {
    x - (grad_f_y + grad_g_y) * a_next
}

/// `‖y − (x̃ − λ(∇f(y) + g'(y)))‖ / ‖y − x̃‖`, or 0 when `y = x̃`.
pub fn sigma_residual(
    y: &DVector<f64>,
    x_tilde: &DVector<f64>,
    lambda: f64,
    grad_f_y: &DVector<f64>,
    grad_g_y: &DVector<f64>,
) -> f64 {
    let dist = (y - x_tilde).norm();
    if dist == 0.0 {
        return 0.0;
    }
    (y - x_tilde + (grad_f_y + grad_g_y) * lambda).norm() / dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;
    use proptest::prelude::*;

    #[test]
    fn momentum_examples() {
        assert_eq!(momentum_update(0.0, 2.0), (2.0, 2.0));
        let (a, total) = momentum_update(1.0, 1.0);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((a - golden).abs() < 1e-15);
        assert!((total - 1.0 - golden).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn momentum_identity(a_total in 0.0f64..1e6, lambda in 1e-6f64..1e3) {
            let (a, total) = momentum_update(a_total, lambda);
            prop_assert!(a > 0.0);
            prop_assert!((lambda * total - a * a).abs() <= 1e-12 * (lambda * total));
        }

        #[test]
        fn extrapolation_weights_sum_to_one(a_total in 1e-3f64..1e3, a in 1e-3f64..1e3, v in -10.0f64..10.0) {
            let x = extrapolate(a_total, a, &dvector![v], &dvector![v]);
            prop_assert!((x[0] - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn extrapolation_examples() {
        assert_eq!(extrapolate(0.0, 3.0, &dvector![5.0], &dvector![7.0]), dvector![7.0]);
        assert_eq!(extrapolate(1.0, 1.0, &dvector![0.0], &dvector![2.0]), dvector![1.0]);
    }

    #[test]
    fn step_condition_examples() {
        assert_eq!(check_step_condition(0.5, 1.0, 1, 123.0), StepClass::Accepted);
        assert_eq!(check_step_condition(0.3, 2.0, 2, 1.0), StepClass::TooSmall);
        assert_eq!(check_step_condition(1.0, 2.0, 2, 1.0), StepClass::TooLarge);
        assert_eq!(check_step_condition(0.6, 2.0, 2, 1.0), StepClass::Accepted);
    }

    #[test]
    fn half_step_is_exact() {
        let mut misses = 0;
        for i in 1..20_000 {
            let h = 0.37 * i as f64 + 1e-3 * (i as f64).sin();
            let (l, h_adj) = half_step_lambda(h);
            if l * h_adj != 0.5 {
                misses += 1;
            }
            assert!(h_adj >= h && h_adj - h <= 1e-13 * h);
            assert!((l - 0.5 / h).abs() <= 1e-13 * l);
        }
        assert_eq!(misses, 0);
    }

    #[test]
    fn gradient_step_examples() {
        let x = dvector![0.0, 0.0];
        assert_eq!(gradient_step(&x, 1.0, &dvector![1.0, 0.0], &dvector![0.0, 1.0]), dvector![-1.0, -1.0]);
        assert_eq!(gradient_step(&x, 3.0, &dvector![0.0, 0.0], &dvector![0.0, 0.0]), x);
    }

    #[test]
    fn sigma_residual_examples() {
        let z = dvector![0.0];
        assert_eq!(sigma_residual(&dvector![1.0], &dvector![1.0], 0.0, &z, &z), 0.0);
        // f = ½x², x̃ = 1, H = 1: y = 0, λ = ½, ∇f(y) = 0.
        assert_eq!(sigma_residual(&dvector![0.0], &dvector![1.0], 0.5, &z, &z), 1.0);
    }
}
