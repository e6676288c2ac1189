use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Estimating function `ψ_k(x) = ½‖x − x₀‖² + Σ aᵢ [F(yᵢ) + ⟨∇F(yᵢ), x − yᵢ⟩]`.
///
/// Since the linear terms only shift it, `ψ_k(x) = ψ_k(x_k) + ½‖x − x_k‖²`, so the minimizer
/// and minimum value are all that need storing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTracker {
    center: DVector<f64>,
    min_value: f64,
    weighted_steps: f64,
    sigma: f64,
}

impl PotentialTracker {
    pub fn new(x0: &DVector<f64>, sigma: f64) -> Self {
        Self { center: x0.clone(), min_value: 0.0, weighted_steps: 0.0, sigma }
    }

    /// Minimizer `x_k` of `ψ_k`.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// `ψ_k(x_k)`.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn value_at(&self, x: &DVector<f64>) -> f64 {
        self.min_value + 0.5 * (x - &self.center).norm_squared()
    }

    /// Adds `a [F(y) + ⟨∇F(y), · − y⟩]` and the step term `(A'/λ) ‖y − x̃‖²`.
    pub fn update(
        &mut self,
        a_next: f64,
        a_total_next: f64,
        lambda: f64,
        f_y: f64,
        grad_y: &DVector<f64>,
        y: &DVector<f64>,
        dist: f64,
    ) {
        self.min_value +=
            a_next * (f_y + grad_y.dot(&(&self.center - y))) - 0.5 * a_next * a_next * grad_y.norm_squared();
        self.center.axpy(-a_next, grad_y, 1.0);
        self.weighted_steps += a_total_next / lambda * dist * dist;
    }

    /// `(1 − σ²)/2 · Σ (Aᵢ/λᵢ) ‖yᵢ − x̃ᵢ₋₁‖²`.
    pub fn lower_bound(&self) -> f64 {
        0.5 * (1.0 - self.sigma * self.sigma) * self.weighted_steps
    }
}

/// `(ψ_k(x_k) − A_k F(y_k), (1 − σ²)/2 Σ (Aᵢ/λᵢ)‖yᵢ − x̃ᵢ₋₁‖²)`.
pub fn potential_diagnostic(tracker: &PotentialTracker, a_total: f64, f_y: f64) -> (f64, f64) {
    (tracker.min_value() - a_total * f_y, tracker.lower_bound())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn starts_at_zero() {
        let t = PotentialTracker::new(&dvector![1.0, 2.0], 0.5);
        assert_eq!(potential_diagnostic(&t, 0.0, 42.0), (0.0, 0.0));
    }

    #[test]
    fn minimum_matches_brute_force() {
        // Two linear terms on top of ½‖x − x₀‖²; compare against direct minimization.
        let x0 = dvector![1.0, -1.0];
        let mut t = PotentialTracker::new(&x0, 0.0);
        let steps =
            [(0.5, dvector![0.2, 0.1], 3.0, dvector![1.0, 2.0]), (1.5, dvector![-0.3, 0.4], -1.0, dvector![0.5, 0.0])];
        for (a, y, fy, g) in &steps {
            t.update(*a, 1.0, 1.0, *fy, g, y, 0.0);
        }
        let psi = |x: &DVector<f64>| {
            0.5 * (x - &x0).norm_squared() + steps.iter().map(|(a, y, fy, g)| a * (fy + g.dot(&(x - y)))).sum::<f64>()
        };
        let argmin = &x0 - steps.iter().fold(DVector::zeros(2), |acc, (a, _, _, g)| acc + g * *a);
        assert!((t.min_value() - psi(&argmin)).abs() < 1e-12);
        assert!((t.center() - &argmin).norm() < 1e-15);
        let probe = dvector![0.3, 0.9];
        assert!((t.value_at(&probe) - psi(&probe)).abs() < 1e-12);
    }
}
