//! Concrete objective pieces that can play the role of `f` or `g`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sparse::{estimate_lf, CscMatrix};

/// Minimal value/gradient access, used by the numerical self-checks.
pub trait Oracle {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// A convex function on `ℝ^d` with closed-form oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// The zero function.
    Zero { dim: usize },
    /// `½ xᵀQx − bᵀx + c` with `Q` symmetric positive semidefinite.
    Quadratic { q: DMatrix<f64>, b: DVector<f64>, c: f64 },
    /// `¼ Σ xᵢ⁴`.
    Quartic { dim: usize },
    /// `log Σⱼ exp(⟨Aⱼ, x⟩)` over the rows `Aⱼ` of `a`.
    LogSumExp { a: CscMatrix },
    /// `weight · ‖x‖₁`.
    L1 { dim: usize, weight: f64 },
    /// `⟨linear, x⟩ + weight/2 ‖x − center‖² + offset`.
    Isotropic { center: DVector<f64>, weight: f64, linear: DVector<f64>, offset: f64 },
}

fn softmax_weights(z: &DVector<f64>) -> (f64, DVector<f64>) {
    let zmax = z.max();
    let mut s = z.map(|v| (v - zmax).exp());
    let total = s.sum();
    s /= total;
    (zmax + total.ln(), s)
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Zero { dim } | Component::Quartic { dim } | Component::L1 { dim, .. } => *dim,
            Component::Quadratic { q, .. } => q.nrows(),
            Component::LogSumExp { a } => a.ncols(),
            Component::Isotropic { center, .. } => center.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Component::Zero { .. })
    }

    /// Whether the gradient oracle returns a true gradient rather than a subgradient.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, Component::L1 { .. })
    }

    /// `(Q, −b)` such that the component equals `½ xᵀQx + ⟨linear, x⟩ + const`, when it is
    /// (at most) quadratic.
    pub fn quadratic_form(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let d = self.dim();
        match self {
            Component::Zero { .. } => Some((DMatrix::zeros(d, d), DVector::zeros(d))),
            Component::Quadratic { q, b, .. } => Some((q.clone(), -b)),
            Component::Isotropic { center, weight, linear, .. } => {
                Some((DMatrix::identity(d, d) * *weight, linear - center * *weight))
            }
            _ => None,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Component::Zero { .. } => 0.0,
            Component::Quadratic { q, b, c } => 0.5 * x.dot(&(q * x)) - b.dot(x) + c,
            Component::Quartic { .. } => 0.25 * x.iter().map(|v| v.powi(4)).sum::<f64>(),
            Component::LogSumExp { a } => softmax_weights(&a.mul_vec(x)).0,
            Component::L1 { weight, .. } => weight * x.lp_norm(1),
            Component::Isotropic { center, weight, linear, offset } => {
                linear.dot(x) + 0.5 * weight * (x - center).norm_squared() + offset
            }
        }
    }

    /// Gradient, or the sign subgradient for the `L1` term.
    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Component::Zero { dim } => DVector::zeros(*dim),
            Component::Quadratic { q, b, .. } => q * x - b,
            Component::Quartic { .. } => x.map(|v| v.powi(3)),
            Component::LogSumExp { a } => {
                let (_, s) = softmax_weights(&a.mul_vec(x));
                a.tr_mul_vec(&s)
            }
            Component::L1 { weight, .. } => x.map(|v| if v == 0.0 { 0.0 } else { weight * v.signum() }),
            Component::Isotropic { center, weight, linear, .. } => linear + (x - center) * *weight,
        }
    }

    /// `∂ᵢ` of the component; one coordinate-oracle call.
    pub fn partial(&self, x: &DVector<f64>, i: usize) -> f64 {
        match self {
            Component::Zero { .. } => 0.0,
            Component::Quadratic { q, b, .. } => q.row(i).iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>() - b[i],
            Component::Quartic { .. } => x[i].powi(3),
            Component::LogSumExp { a } => {
                let (_, s) = softmax_weights(&a.mul_vec(x));
                a.column_dot(i, &s)
            }
            Component::L1 { weight, .. } => {
                if x[i] == 0.0 {
                    0.0
                } else {
                    weight * x[i].signum()
                }
            }
            Component::Isotropic { center, weight, linear, .. } => linear[i] + weight * (x[i] - center[i]),
        }
    }

    /// Dense Hessian; `None` for the nonsmooth `L1` term.
    pub fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let d = self.dim();
        match self {
            Component::Zero { .. } => Some(DMatrix::zeros(d, d)),
            Component::Quadratic { q, .. } => Some(q.clone()),
            Component::Quartic { .. } => Some(DMatrix::from_diagonal(&x.map(|v| 3.0 * v * v))),
            Component::LogSumExp { a } => {
                let (_, s) = softmax_weights(&a.mul_vec(x));
                let dense = a.to_dense();
                let weighted = DMatrix::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[(i, j)] * s[i]);
                let as_vec = dense.tr_mul(&s);
                Some(dense.tr_mul(&weighted) - &as_vec * as_vec.transpose())
            }
            Component::L1 { .. } => None,
            Component::Isotropic { weight, .. } => Some(DMatrix::identity(d, d) * *weight),
        }
    }

    /// `argmin_y step·h(y) + ½‖y − v‖²`, when available in closed form.
    pub fn prox(&self, v: &DVector<f64>, step: f64) -> Option<DVector<f64>> {
        match self {
            Component::Zero { .. } => Some(v.clone()),
            Component::Quadratic { q, b, .. } => {
                let d = q.nrows();
                let system = DMatrix::identity(d, d) + q * step;
                system.cholesky().map(|c| c.solve(&(v + b * step)))
            }
            Component::Quartic { .. } => Some(v.map(|vi| cubic_prox(vi, step))),
            Component::LogSumExp { .. } => None,
            Component::L1 { weight, .. } => {
                let t = weight * step;
                Some(v.map(|vi| vi.signum() * (vi.abs() - t).max(0.0)))
            }
            Component::Isotropic { center, weight, linear, .. } => {
                Some((v - linear * step + center * (step * weight)) / (1.0 + step * weight))
            }
        }
    }

    /// Lipschitz constant of the gradient, where one is available.
    ///
    /// For the log-sum-exp term this is the column estimate `max_k ‖A^{(k)}‖²`.
    pub fn lipschitz_grad(&self) -> Option<f64> {
        match self {
            Component::Zero { .. } => Some(0.0),
            Component::Quadratic { q, .. } => Some(q.clone().symmetric_eigenvalues().max().max(0.0)),
            Component::LogSumExp { a } => Some(estimate_lf(a)),
            Component::Isotropic { weight, .. } => Some(*weight),
            Component::Quartic { .. } | Component::L1 { .. } => None,
        }
    }

    /// Per-coordinate Lipschitz constants of the gradient.
    pub fn coord_lipschitz(&self) -> Option<Vec<f64>> {
        let d = self.dim();
        match self {
            Component::Zero { .. } => Some(vec![0.0; d]),
            Component::Quadratic { q, .. } => Some(q.diagonal().iter().copied().collect()),
            Component::LogSumExp { a } => {
                Some((0..d).map(|j| a.column(j).map(|(_, v)| v * v).fold(0.0, f64::max)).collect())
            }
            Component::Isotropic { weight, .. } => Some(vec![*weight; d]),
            Component::Quartic { .. } | Component::L1 { .. } => None,
        }
    }
}

/// Solves `y + step·y³ = v`.
fn cubic_prox(v: f64, step: f64) -> f64 {
    if v == 0.0 || step == 0.0 {
        return v;
    }
    // Newton from y = v decreases monotonically onto the root: the map is convex on the
    // side of v and overshoots are impossible.
    let mut y = v;
    for _ in 0..200 {
        let phi = y + step * y * y * y - v;
        let next = y - phi / (1.0 + 3.0 * step * y * y);
        if (next - y).abs() <= 1e-16 * (1.0 + y.abs()) {
            return next;
        }
        y = next;
    }
    y
}

impl Oracle for Component {
    fn dim(&self) -> usize {
        Component::dim(self)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        Component::value(self, x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        Component::gradient(self, x)
    }
}
