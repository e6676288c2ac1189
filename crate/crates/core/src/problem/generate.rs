//! Seeded problem generators.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)` in a fixed order, so a
//! given parameter set produces bit-identical problems on every platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Component, CompositeProblem, CscMatrix, ProblemError};

/// How the simplex weights `λᵢ` of `G² = Σ λᵢ ẽᵢ ẽᵢᵀ` are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMix {
    /// i.i.d. `U(0, 1)` draws normalized to sum to one.
    #[default]
    UniformSimplex,
    /// `λᵢ = 1/n`.
    Equal,
}

/// Parameters of the sparse log-sum-exp plus quadratic benchmark instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Number of columns of `A` (the problem dimension).
    pub n: usize,
    /// Number of rows of `A`.
    pub m: usize,
    /// Expected fraction of nonzero entries of `A`.
    pub density: f64,
    pub seed: u64,
    #[serde(default)]
    pub lambda_mix: LambdaMix,
}

impl ExperimentSpec {
    /// Desk-scale default: 50 columns, 2000 rows, density 0.01.
    pub fn desk(seed: u64) -> Self {
        Self { n: 50, m: 2000, density: 0.01, seed, lambda_mix: LambdaMix::UniformSimplex }
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.n == 0 || self.m == 0 {
            return Err(ProblemError::Invalid("n and m must be positive".into()));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(ProblemError::Invalid(format!("density must lie in (0, 1], got {}", self.density)));
        }
        Ok(())
    }
}

/// `f(x) = log Σⱼ exp(⟨Aⱼ, x⟩)`, `g(x) = ½ xᵀG²x`, started at the origin.
pub fn gen_logsumexp_quadratic(spec: &ExperimentSpec) -> Result<CompositeProblem, ProblemError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, m) = (spec.n, spec.m);

    let columns = (0..n)
        .map(|_| {
            let mut col = Vec::new();
            for i in 0..m {
                if rng.random::<f64>() < spec.density {
                    col.push((i, rng.random_range(-1.0..1.0)));
                }
            }
            col
        })
        .collect();
    let a = CscMatrix::from_columns(m, columns);

    let e_tilde = DMatrix::from_fn(n, n, |_, _| rng.random_range(1.0..2.0));
    let weights = simplex_weights(&mut rng, n, spec.lambda_mix);
    let mut g2 = DMatrix::zeros(n, n);
    for (i, w) in weights.iter().enumerate() {
        let e = e_tilde.column(i);
        g2.ger(*w, &e, &e, 1.0);
    }

    let f = Component::LogSumExp { a };
    let g = Component::Quadratic { q: g2, b: DVector::zeros(n), c: 0.0 };
    let mut problem = CompositeProblem::new(f, g)?.with_x0(DVector::zeros(n));
    problem.spec = Some(*spec);
    Ok(problem)
}

/// Simplex weights drawn according to `mix`; they sum to one up to rounding.
pub(crate) fn simplex_weights(rng: &mut ChaCha8Rng, n: usize, mix: LambdaMix) -> Vec<f64> {
    match mix {
        LambdaMix::Equal => vec![1.0 / n as f64; n],
        LambdaMix::UniformSimplex => {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        }
    }
}

/// Random convex quadratic with prescribed spectrum bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpec {
    pub dim: usize,
    /// Smallest eigenvalue of `∇²f` (0 allowed).
    pub mu: f64,
    /// Largest eigenvalue of `∇²f`.
    pub l: f64,
    /// When set, `g` is an independent random quadratic with spectrum in `[0, g_l]`;
    /// otherwise `g ≡ 0`.
    pub g_l: Option<f64>,
    pub seed: u64,
}

fn random_spd(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let basis = gauss.qr().q();
    let eig = DVector::from_fn(dim, |i, _| match i {
        0 => lo,
        i if i + 1 == dim => hi,
        _ => rng.random_range(lo..=hi),
    });
    let m = &basis * DMatrix::from_diagonal(&eig) * basis.transpose();
    // exact symmetry
    (&m + m.transpose()) * 0.5
}

/// Quadratic test problem with a known minimizer, started at the origin.
///
/// The minimizer is drawn from `N(0, I)` and the linear term is chosen to make it
/// stationary, so `x*` is exact even when `μ = 0`.
pub fn random_quadratic(spec: &QuadraticSpec) -> Result<CompositeProblem, ProblemError> {
    if spec.dim == 0 || !(spec.l >= spec.mu && spec.mu >= 0.0) {
        return Err(ProblemError::Invalid(format!("bad quadratic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let qf = random_spd(&mut rng, d, spec.mu, spec.l);
    let qg = spec.g_l.map(|lg| random_spd(&mut rng, d, 0.0, lg));
    let x_star = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));

    let (f, g) = match qg {
        None => {
            let b = &qf * &x_star;
            (Component::Quadratic { q: qf, b, c: 0.0 }, Component::Zero { dim: d })
        }
        Some(qg) => {
            // Put the whole linear term into g so both parts stay convex quadratics.
            let b = (&qf + &qg) * &x_star;
            (Component::Quadratic { q: qf, b: DVector::zeros(d), c: 0.0 }, Component::Quadratic { q: qg, b, c: 0.0 })
        }
    };
    let mut problem = CompositeProblem::new(f, g)?.with_x0(DVector::zeros(d));
    problem = problem.with_solution(x_star);
    if spec.g_l.is_none() && spec.mu > 0.0 {
        problem = problem.with_uniform_convexity(2.0, spec.mu);
    }
    Ok(problem)
}

/// `f(x) = ¼ Σ xᵢ⁴`, `g ≡ 0`, minimized at the origin.
pub fn quartic(dim: usize, x0: DVector<f64>) -> Result<CompositeProblem, ProblemError> {
    let problem = CompositeProblem::new(Component::Quartic { dim }, Component::Zero { dim })?;
    if x0.len() != dim {
        return Err(ProblemError::Dimension { expected: dim, got: x0.len() });
    }
    Ok(problem.with_solution(DVector::zeros(dim)).with_x0(x0))
}

/// `½‖Ax − b‖² + reg·‖x‖₁` with Gaussian `A` (`m x n`) and a sparse planted signal.
pub fn lasso(n: usize, m: usize, reg: f64, seed: u64) -> Result<CompositeProblem, ProblemError> {
    if n == 0 || m == 0 || !(reg >= 0.0) {
        return Err(ProblemError::Invalid("lasso needs n, m > 0 and reg ≥ 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt());
    let signal = DVector::from_fn(n, |i, _| if i % 5 == 0 { rng.random_range(-1.0..1.0) } else { 0.0 });
    let noise = DVector::from_fn(m, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));
    let obs = &a * &signal + noise;
    let f = Component::Quadratic { q: a.tr_mul(&a), b: a.tr_mul(&obs), c: 0.5 * obs.norm_squared() };
    let g = Component::L1 { dim: n, weight: reg };
    Ok(CompositeProblem::new(f, g)?.with_x0(DVector::zeros(n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Part;

    #[test]
    fn generator_is_deterministic() {
        let spec = ExperimentSpec { n: 2, m: 2, density: 1.0, seed: 7, lambda_mix: LambdaMix::UniformSimplex };
        let a = gen_logsumexp_quadratic(&spec).unwrap();
        let b = gen_logsumexp_quadratic(&spec).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn simplex_weights_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 5, 50, 500] {
            let w = simplex_weights(&mut rng, n, LambdaMix::UniformSimplex);
            assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn density_concentrates() {
        let spec = ExperimentSpec::desk(1);
        let p = gen_logsumexp_quadratic(&spec).unwrap();
        let Component::LogSumExp { a } = &p.f else { panic!("expected log-sum-exp") };
        let expected = 0.01 * 2000.0 * 50.0;
        let nnz = a.nnz() as f64;
        assert!((nnz - expected).abs() <= 0.1 * expected, "nnz {nnz}");
        for j in 0..a.ncols() {
            assert!(a.column(j).all(|(_, v)| (-1.0..1.0).contains(&v)));
        }
    }

    #[test]
    fn rejects_zero_density() {
        let mut spec = ExperimentSpec::desk(1);
        spec.density = 0.0;
        assert!(gen_logsumexp_quadratic(&spec).is_err());
    }

    #[test]
    fn random_quadratic_solution_is_stationary() {
        for g_l in [None, Some(3.0)] {
            let p = random_quadratic(&QuadraticSpec { dim: 8, mu: 0.1, l: 4.0, g_l, seed: 11 }).unwrap();
            let x = p.x_star.clone().unwrap();
            assert!(p.eval_grad(Part::Total, &x).unwrap().norm() < 1e-10);
            assert!((p.lip(1).unwrap() - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn quadratic_g_spectrum_is_psd() {
        let p = gen_logsumexp_quadratic(&ExperimentSpec {
            n: 6,
            m: 30,
            density: 0.5,
            seed: 2,
            lambda_mix: LambdaMix::Equal,
        })
        .unwrap();
        let Component::Quadratic { q, .. } = &p.g else { panic!("expected quadratic g") };
        assert!(q.clone().symmetric_eigenvalues().min() > -1e-12);
    }
}
