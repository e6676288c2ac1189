//! Closed-form and root-finding solvers for the regularized model subproblem.

use nalgebra::{DVector, SymmetricEigen};

use super::SubSolution;
use crate::error::{Error, Result};
use crate::problem::{Component, TaylorModel};

const ROOT_MAX_ITERS: usize = 200;

/// First-order step: `y = prox_{g/H}(x̃ − ∇f(x̃)/H)`.
pub fn solve_sub_p1(model: &TaylorModel, g: &Component) -> Result<SubSolution> {
    if model.order() != 1 {
        return Err(Error::Config(format!("first-order solver called with a model of order {}", model.order())));
    }
    let h = model.reg_h();
    let xt = model.center();
    let v = xt - model.grad_center() / h;
    let y = g.prox(&v, 1.0 / h).ok_or(Error::NoClosedForm("g has no prox map"))?;
    // Prox optimality makes the residual zero for nonsmooth g by construction.
    let grad_norm = if g.is_smooth() { (model.regularized_gradient(&y) + g.gradient(&y)).norm() } else { 0.0 };
    Ok(SubSolution { y, grad_norm, inner_iters: 0, exact: true })
}

/// Second-order step with cubic regularization.
///
/// A zero or quadratic `g` is folded into the model, giving `c + B h + (H/2)‖h‖ h = 0` for
/// the step `h = y − x̃`. With `B = V Λ Vᵀ` the step norm `r` solves
/// `r = ‖(Λ + (H/2) r I)⁻¹ Vᵀc‖`, whose right side decreases in `r`.
pub fn solve_sub_p2(model: &TaylorModel, g: &Component) -> Result<SubSolution> {
    let hess = model.hess_center().ok_or(Error::Config("second-order solver needs a Hessian model".into()))?;
    let (qg, lin_g) = g.quadratic_form().ok_or(Error::NoClosedForm("second-order solver needs g zero or quadratic"))?;
    let xt = model.center();
    let b = hess + &qg;
    let c = model.grad_center() + &qg * xt + lin_g;
    let reg = model.reg_h() / 2.0;

    let eig = SymmetricEigen::new(b.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let min_eig = eig.eigenvalues.min();
    if min_eig < -1e-9 * scale {
        return Err(Error::NotPsd { min_eig });
    }
    let lam = eig.eigenvalues.map(|v| v.max(0.0));
    let c_hat = eig.eigenvectors.tr_mul(&c);
    let c_norm = c.norm();

    let (r, iters) = if c_norm == 0.0 { (0.0, 0) } else { step_norm_root(&lam, &c_hat, reg, c_norm)? };
    let hv = -(&eig.eigenvectors * DVector::from_fn(lam.len(), |i, _| c_hat[i] / (lam[i] + reg * r)));
    let hv = if c_norm == 0.0 { DVector::zeros(xt.len()) } else { hv };
    let grad_norm = (&c + &b * &hv + &hv * (reg * hv.norm())).norm();
    Ok(SubSolution { y: xt + hv, grad_norm, inner_iters: iters, exact: true })
}

/// Safeguarded Newton on `φ(r) = ‖h(r)‖ − r` over `[0, r_max]`.
///
/// `r_max = min(√(2‖c‖/H), ‖c‖/λ_min)`: both make `‖h(r)‖ ≤ r`.
fn step_norm_root(lam: &DVector<f64>, c_hat: &DVector<f64>, reg: f64, c_norm: f64) -> Result<(f64, usize)> {
    let norm_and_slope = |r: f64| {
        let mut sq = 0.0;
        let mut cube = 0.0;
        for (l, c) in lam.iter().zip(c_hat.iter()) {
            let den = l + reg * r;
            sq += c * c / (den * den);
            cube += c * c / (den * den * den);
        }
        let n = sq.sqrt();
        (n, -reg * cube / n)
    };
    let min_lam = lam.min();
    let mut hi = (c_norm / reg).sqrt();
    if min_lam > 0.0 {
        hi = hi.min(c_norm / min_lam);
    }
    let mut lo = 0.0;
    let mut r = hi;
    for it in 0..ROOT_MAX_ITERS {
        let (n, slope) = norm_and_slope(r);
        let phi = n - r;
        if phi.abs() <= 1e-15 * r || hi - lo <= 1e-15 * hi {
            return Ok((r, it + 1));
        }
        if phi > 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let next = r - phi / (slope - 1.0);
        r = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    Err(Error::RootFinder { iters: ROOT_MAX_ITERS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{build_taylor_model, CompositeProblem};
    use nalgebra::{dmatrix, dvector, DMatrix};

    fn model_of(f: Component, g: Component, order: u32, center: DVector<f64>, h: f64) -> (TaylorModel, Component) {
        let p = CompositeProblem::new(f, g).unwrap();
        (build_taylor_model(&p, order, &center, h).unwrap(), p.g)
    }

    fn half_square(d: usize) -> Component {
        Component::Quadratic { q: DMatrix::identity(d, d), b: DVector::zeros(d), c: 0.0 }
    }

    #[test]
    fn p1_gradient_step_on_quadratic() {
        let (m, g) = model_of(half_square(1), Component::Zero { dim: 1 }, 1, dvector![1.0], 1.0);
        assert_eq!(solve_sub_p1(&m, &g).unwrap().y, dvector![0.0]);
    }

    #[test]
    fn p1_stationary_center() {
        let (m, g) = model_of(half_square(2), Component::Zero { dim: 2 }, 1, dvector![0.0, 0.0], 3.0);
        assert_eq!(solve_sub_p1(&m, &g).unwrap().y, dvector![0.0, 0.0]);
    }

    #[test]
    fn p1_soft_threshold() {
        let (m, g) = model_of(Component::Zero { dim: 1 }, Component::L1 { dim: 1, weight: 1.0 }, 1, dvector![2.0], 1.0);
        let y = solve_sub_p1(&m, &g).unwrap().y[0];
        // 1-D grid oracle on |y| + ½(y − 2)².
        let grid = (0..=40_000).map(|i| -1.0 + i as f64 * 1e-4);
        let best =
            grid.min_by(|a, b| (a.abs() + 0.5 * (a - 2.0).powi(2)).total_cmp(&(b.abs() + 0.5 * (b - 2.0).powi(2))));
        assert!((y - 1.0).abs() < 1e-15);
        assert!((y - best.unwrap()).abs() < 1e-4);
    }

    #[test]
    fn p2_scalar_cubic() {
        let (m, g) = model_of(half_square(1), Component::Zero { dim: 1 }, 2, dvector![1.0], 6.0);
        let sol = solve_sub_p2(&m, &g).unwrap();
        let expected = (7.0 - 13f64.sqrt()) / 6.0;
        assert!((sol.y[0] - expected).abs() < 1e-14, "{} vs {expected}", sol.y[0]);
        // 1-D grid oracle on the regularized model ½y² + |y − 1|³.
        let obj = |y: f64| 0.5 * y * y + (y - 1.0).abs().powi(3);
        let best = (0..=100_000).map(|i| i as f64 * 1e-5).min_by(|a, b| obj(*a).total_cmp(&obj(*b))).unwrap();
        assert!((sol.y[0] - best).abs() < 2e-5);
        assert!(sol.grad_norm < 1e-12);
    }

    #[test]
    fn p2_stationary_center() {
        let (m, g) = model_of(half_square(3), Component::Zero { dim: 3 }, 2, DVector::zeros(3), 2.0);
        let sol = solve_sub_p2(&m, &g).unwrap();
        assert_eq!(sol.y, DVector::zeros(3));
    }

    #[test]
    fn p2_small_regularization_approaches_newton() {
        let f = Component::Quadratic { q: DMatrix::identity(2, 2), b: dvector![1.0, -2.0], c: 0.0 };
        let xt = dvector![0.5, 0.5];
        let (m, g) = model_of(f, Component::Zero { dim: 2 }, 2, xt.clone(), 1e-8);
        let newton = &xt - m.grad_center();
        assert!((solve_sub_p2(&m, &g).unwrap().y - newton).norm() < 1e-6);
    }

    #[test]
    fn p2_folds_quadratic_g_and_handles_singular_b() {
        let f = Component::Quartic { dim: 2 };
        let g = Component::Quadratic { q: dmatrix![0.0, 0.0; 0.0, 1.0], b: dvector![0.0, 1.0], c: 0.0 };
        let (m, g) = model_of(f, g, 2, dvector![0.0, 0.0], 4.0);
        // Hessian of the quartic vanishes at the origin, so B is singular.
        let sol = solve_sub_p2(&m, &g).unwrap();
        assert!(sol.grad_norm < 1e-10);
        let total = m.regularized_gradient(&sol.y) + g.gradient(&sol.y);
        assert!(total.norm() < 1e-10);
    }

    #[test]
    fn p2_rejects_nonconvex_models() {
        let f = Component::Quadratic { q: dmatrix![-1.0, 0.0; 0.0, 1.0], b: dvector![1.0, 1.0], c: 0.0 };
        let (m, g) = model_of(f, Component::Zero { dim: 2 }, 2, dvector![0.0, 0.0], 1.0);
        assert!(matches!(solve_sub_p2(&m, &g), Err(Error::NotPsd { .. })));
    }
}
