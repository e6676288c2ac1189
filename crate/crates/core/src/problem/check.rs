//! Numerical self-checks for oracles.

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::taylor::factorial;
use super::{build_taylor_model, Component, CompositeProblem, Oracle, Part, ProblemError};

/// Max componentwise relative error between the oracle gradient and central differences
/// of the value oracle. Each component is scaled by `max(1, |∂ᵢ|)`.
pub fn fd_check_grad(oracle: &dyn Oracle, x: &DVector<f64>, h: f64) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let grad = oracle.gradient(x);
    let mut probe = x.clone();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let xi = probe[i];
        probe[i] = xi + h;
        let up = oracle.value(&probe);
        probe[i] = xi - h;
        let down = oracle.value(&probe);
        probe[i] = xi;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / grad[i].abs().max(1.0));
    }
    worst
}

fn sample_in_ball(rng: &mut ChaCha8Rng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let d = center.len();
    let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let scale = radius * rng.random::<f64>().powf(1.0 / d as f64) / dir.norm().max(f64::MIN_POSITIVE);
    center + dir * scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaylorCheck {
    pub samples: usize,
    /// Largest observed `|f(y) − Ω_p(f, x̃; y)| / (L/(p+1)! ‖y − x̃‖^{p+1})`.
    pub worst_ratio: f64,
    /// Pairs exceeding the bound by more than `1e−9 (1 + |f(y)|)`.
    pub violations: usize,
}

/// Samples `(x̃, y)` pairs in the ball of `radius` around `center` and compares the
/// Taylor remainder against `L/(p+1)! ‖y − x̃‖^{p+1}`.
pub fn taylor_remainder_check(
    problem: &CompositeProblem,
    order: u32,
    lip: f64,
    center: &DVector<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<TaylorCheck, ProblemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_ratio = 0.0f64;
    let mut violations = 0;
    for _ in 0..samples {
        let xt = sample_in_ball(&mut rng, center, radius);
        let y = sample_in_ball(&mut rng, center, radius);
        let model = build_taylor_model(problem, order, &xt, 1.0)?;
        let fy = problem.eval_value(Part::F, &y)?;
        let remainder = (fy - model.value(&y)).abs();
        let bound = lip / factorial(order + 1) * (&y - &xt).norm().powi(order as i32 + 1);
        if remainder > bound + 1e-9 * (1.0 + fy.abs()) {
            violations += 1;
        }
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(remainder / bound);
        }
    }
    Ok(TaylorCheck { samples, worst_ratio, violations })
}

/// Sampled lower estimate of the Hessian-Lipschitz constant on a ball:
/// `max ‖∇²h(x) − ∇²h(y)‖₂ / ‖x − y‖` over random pairs.
pub fn hessian_lipschitz_sampled(
    component: &Component,
    center: &DVector<f64>,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let x = sample_in_ball(&mut rng, center, radius);
        let y = sample_in_ball(&mut rng, center, radius);
        let diff = component.hessian(&x)? - component.hessian(&y)?;
        let spectral = SymmetricEigen::new(diff).eigenvalues.amax();
        let dist = (&x - &y).norm();
        if dist > 0.0 {
            best = best.max(spectral / dist);
        }
    }
    Some(best)
}
