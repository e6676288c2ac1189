//! Property battery behind `ambench verify`.
//!
//! Each suite runs small deterministic instances and checks one invariant at every
//! iteration. A [`Fault`] can be planted in the loop to confirm the suites notice it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::engine::{am_run_with, AmConfig, Fault, Iteration, StepBand};
use crate::error::{Error, Result};
use crate::ledger::{CallKind, Level, OracleLedger, Side, Trace};
use crate::problem::{
    build_taylor_model, fd_check_grad, gen_logsumexp_quadratic, lasso, quartic, random_quadratic,
    taylor_remainder_check, Component, CompositeProblem, ExperimentSpec, LambdaMix, Oracle, QuadraticSpec, TaylorModel,
};
use crate::restart::{initial_radius, nk_schedule, rate_bound, restart_run, RestartSchedule};
use crate::sliding::{sliding_run, SlidingConfig};
use crate::subsolver::{
    solve_sub_p1, solve_sub_p2, Criterion, ExactSubsolver, GradientDescent, InexactSubsolver, Subsolver,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyOptions {
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    /// First few violations, human readable.
    pub failures: Vec<String>,
}

pub const SUITES: &[&str] = &[
    "rate_p1",
    "rate_p2",
    "step_band",
    "momentum_identity",
    "sigma_condition",
    "potential_chain",
    "restart_halving",
    "taylor_remainder",
    "fd_checks",
    "nk_formula",
    "subproblem_equivalence",
    "criterion_inflation",
    "lambda_resolves",
    "determinism",
    "ledger_conservation",
];

const MAX_LISTED: usize = 10;

#[derive(Default)]
struct Tally {
    checks: usize,
    failed: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(msg());
            }
        }
    }

    fn fail(&mut self, msg: String) {
        self.check(false, || msg);
    }

    fn finish(self, name: &'static str) -> SuiteReport {
        let passed = self.failed == 0 && self.checks > 0;
        let mut failures = self.failures;
        if self.checks == 0 {
            failures.push("no checks ran".into());
        }
        if self.failed > failures.len() {
            failures.push(format!("... {} violations in total", self.failed));
        }
        SuiteReport { name, passed, checks: self.checks, failures }
    }
}

/// Per-iteration data the suites look at.
#[derive(Debug, Clone, PartialEq)]
struct Step {
    k: usize,
    gap: f64,
    eta: f64,
    lambda: f64,
    a_next: f64,
    a_total: f64,
    sigma_res: f64,
    resolves: usize,
    potential: Option<(f64, f64)>,
    objective: f64,
}

struct Fixture {
    name: &'static str,
    problem: CompositeProblem,
    config: AmConfig,
    /// `‖x₀ − x*‖`.
    radius: f64,
    /// Lipschitz constant of the order-`p` derivative used for the run.
    lip: f64,
}

impl Fixture {
    fn quadratic(fault: Option<Fault>) -> Self {
        let problem = random_quadratic(&QuadraticSpec { dim: 20, mu: 0.0, l: 1.0, g_l: None, seed: 1 }).unwrap();
        let lip = problem.lip(1).unwrap();
        let mut config = AmConfig::new(1, 2.0 * lip).with_max_iters(200).with_diagnostics();
        // Certified residual level for p = 1: (1 − η) + η L/H = ¾ at H = 2L.
        config.sigma = 0.75;
        config.fault = fault;
        let radius = (problem.x0.as_ref().unwrap() - problem.x_star.as_ref().unwrap()).norm();
        Self { name: "quadratic p=1", problem, config, radius, lip }
    }

    fn quartic(fault: Option<Fault>) -> Self {
        let x0 = DVector::from_fn(10, |i, _| 1.0 - 0.15 * i as f64);
        let radius = x0.norm();
        let problem = quartic(10, x0).unwrap();
        // ‖∇²f(x) − ∇²f(y)‖ = max 3|xᵢ + yᵢ||xᵢ − yᵢ| ≤ 6ρ‖x − y‖ on the ball of radius ρ = 2R.
        let lip = 12.0 * radius;
        let mut config = AmConfig::new(2, 3.0 * lip).with_max_iters(100).with_diagnostics();
        config.fault = fault;
        Self { name: "quartic p=2", problem, config, radius, lip }
    }

    fn run_with(&self, sub: &mut dyn Subsolver) -> Result<(Vec<Step>, Trace, OracleLedger)> {
        let f_star = self.problem.f_star.unwrap_or(0.0);
        let mut steps = Vec::new();
        let mut ledger = OracleLedger::default();
        let x0 = self.problem.x0.clone().unwrap();
        let out = am_run_with(&self.problem, &self.config, &x0, sub, &mut ledger, &mut |it: &Iteration<'_>| {
            steps.push(Step {
                k: it.state.k,
                gap: it.objective - f_star,
                eta: it.outcome.eta,
                lambda: it.outcome.lambda,
                a_next: it.outcome.a_next,
                a_total: it.outcome.a_total_next,
                sigma_res: it.outcome.sigma_residual,
                resolves: it.outcome.resolve_count,
                potential: it.potential,
                objective: it.objective,
            });
            true
        })?;
        Ok((steps, out.trace, ledger))
    }

    fn run(&self) -> Result<(Vec<Step>, Trace, OracleLedger)> {
        self.run_with(&mut ExactSubsolver { order: self.config.p })
    }
}

fn with_runs(tally: &mut Tally, fault: Option<Fault>, mut body: impl FnMut(&mut Tally, &Fixture, &[Step])) {
    for fx in [Fixture::quadratic(fault), Fixture::quartic(fault)] {
        match fx.run() {
            Ok((steps, _, _)) => body(tally, &fx, &steps),
            Err(e) => tally.fail(format!("{}: run failed: {e}", fx.name)),
        }
    }
}

fn rate_suite(opts: VerifyOptions, fx: Fixture, inflation: f64, sub: &mut dyn Subsolver) -> Tally {
    let mut t = Tally::default();
    match fx.run_with(sub) {
        Ok((steps, _, _)) => {
            for s in &steps {
                let bound = inflation * rate_bound(fx.config.p, fx.config.h, fx.radius, s.k);
                t.check(s.gap <= bound + 1e-9, || {
                    format!("{} k={}: gap {:e} > bound {:e}", fx.name, s.k, s.gap, bound)
                });
            }
        }
        Err(e) => t.fail(format!("{}: run failed: {e}", fx.name)),
    }
    let _ = opts;
    t
}

fn suite_step_band(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    with_runs(&mut t, opts.fault, |t, fx, steps| {
        let band = StepBand::for_order(fx.config.p);
        for s in steps {
            t.check(band.lower <= s.eta && s.eta <= band.upper, || {
                format!("{} k={}: η = {} outside [{}, {}]", fx.name, s.k, s.eta, band.lower, band.upper)
            });
        }
    });
    t
}

fn suite_momentum(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    with_runs(&mut t, opts.fault, |t, fx, steps| {
        for s in steps {
            let rel = (s.lambda * s.a_total - s.a_next * s.a_next).abs() / (s.lambda * s.a_total);
            t.check(rel <= 1e-12, || format!("{} k={}: |λA − a²|/λA = {rel:e}", fx.name, s.k));
        }
    });
    t
}

fn suite_sigma(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    with_runs(&mut t, opts.fault, |t, fx, steps| {
        for s in steps {
            // p = 2 exact steps satisfy the ½ level; for p = 1 the certified level is
            // (1 − η) + η L/H.
            let level = if fx.config.p == 1 { (1.0 - s.eta) + s.eta * fx.lip / fx.config.h } else { 0.5 };
            t.check(s.sigma_res <= level + 1e-9, || {
                format!("{} k={}: residual {} > {}", fx.name, s.k, s.sigma_res, level)
            });
        }
    });
    t
}

fn suite_potential(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    with_runs(&mut t, opts.fault, |t, fx, steps| {
        for s in steps {
            let Some((gap, lower)) = s.potential else {
                t.fail(format!("{} k={}: no potential recorded", fx.name, s.k));
                continue;
            };
            let tol = 1e-9 * (1.0 + s.a_total * s.objective.abs());
            t.check(gap >= lower - tol && lower >= 0.0, || {
                format!("{} k={}: ψ gap {gap:e} below lower bound {lower:e}", fx.name, s.k)
            });
        }
    });
    t
}

fn suite_restart(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let problem = random_quadratic(&QuadraticSpec { dim: 20, mu: 1.0, l: 100.0, g_l: None, seed: 3 }).unwrap();
    let x0 = problem.x0.clone().unwrap();
    let h = 2.0 * problem.lip(1).unwrap();
    let mut cfg = AmConfig::new(1, h);
    cfg.fault = opts.fault;
    let r0 = initial_radius(&problem, &x0, None).unwrap();
    let sched = RestartSchedule::new(r0, 2.0, 1.0, 1, h, 8);
    let mut ledger = OracleLedger::default();
    match restart_run(&problem, &cfg, &sched, &x0, &mut ExactSubsolver { order: 1 }, &mut ledger, &mut |_| true) {
        Ok(out) => {
            for s in &out.stages {
                let (before, after) = (s.dist_before.unwrap(), s.dist_after.unwrap());
                t.check(after <= 0.5 * before + 1e-9, || {
                    format!("stage {}: distance {before:e} -> {after:e}", s.stage)
                });
                t.check(s.iters <= nk_schedule(s.stage, &sched), || format!("stage {} overran its budget", s.stage));
            }
        }
        Err(e) => t.fail(format!("restart run failed: {e}")),
    }
    t
}

fn suite_taylor(_: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let quad = Fixture::quadratic(None);
    let qrt = Fixture::quartic(None);
    let mut lse = gen_logsumexp_quadratic(&ExperimentSpec {
        n: 20,
        m: 200,
        density: 0.1,
        seed: 2,
        lambda_mix: LambdaMix::UniformSimplex,
    })
    .unwrap();
    let lse_lip = lse.lip(1).unwrap();
    lse.x_star = Some(DVector::zeros(20));
    let cases: [(&str, &CompositeProblem, u32, f64, f64); 3] = [
        ("quadratic", &quad.problem, 1, quad.lip, quad.radius),
        ("quartic", &qrt.problem, 2, qrt.lip, qrt.radius),
        ("log-sum-exp", &lse, 1, lse_lip, 1.0),
    ];
    for (seed, (name, p, order, lip, radius)) in cases.into_iter().enumerate() {
        let center = p.x_star.clone().unwrap();
        match taylor_remainder_check(p, order, lip, &center, 2.0 * radius, 100, seed as u64) {
            Ok(c) => t.check(c.violations == 0, || {
                format!("{name}: {} violations, worst ratio {}", c.violations, c.worst_ratio)
            }),
            Err(e) => t.fail(format!("{name}: {e}")),
        }
    }
    t
}

/// Every component kind the library ships.
fn shipped_components(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Component)> {
    let d = 6;
    let lse =
        gen_logsumexp_quadratic(&ExperimentSpec { n: d, m: 30, density: 0.5, seed: 9, lambda_mix: LambdaMix::Equal })
            .unwrap();
    let quad = random_quadratic(&QuadraticSpec { dim: d, mu: 0.1, l: 5.0, g_l: None, seed: 4 }).unwrap();
    let center = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let linear = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    vec![
        ("zero", Component::Zero { dim: d }),
        ("quadratic", quad.f),
        ("quartic", Component::Quartic { dim: d }),
        ("log-sum-exp", lse.f),
        ("gram quadratic", lse.g),
        ("l1", Component::L1 { dim: d, weight: 0.7 }),
        ("isotropic", Component::Isotropic { center, weight: 2.0, linear, offset: 1.5 }),
    ]
}

fn suite_fd(_: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (name, c) in shipped_components(&mut rng) {
        for _ in 0..20 {
            let x = DVector::from_fn(c.dim(), |_, _| rng.random_range(-2.0..2.0));
            let err = fd_check_grad(&c as &dyn Oracle, &x, 1e-5);
            t.check(err <= 1e-5, || format!("{name}: finite-difference error {err:e}"));
        }
    }
    t
}

/// `N_k` evaluated in log space with `c_p` from a table.
fn nk_reference(k: usize, r0: f64, r: f64, sigma: f64, p: u32, h: f64) -> usize {
    let c = match p {
        1 => 4.0f64,
        2 => 3.0f64.powf(3.5),
        _ => unreachable!(),
    };
    let rk = r0 / 2f64.powi(k as i32);
    let log_inner =
        r.ln() + c.ln() + h.ln() + r * std::f64::consts::LN_2 - sigma.ln() + (f64::from(p) + 1.0 - r) * rk.ln();
    let n = (log_inner * 2.0 / (3.0 * f64::from(p) + 1.0)).exp().ceil();
    n.max(1.0) as usize
}

fn suite_nk(_: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let p = rng.random_range(1..=2u32);
        let r = rng.random_range(2.0..=f64::from(p) + 1.0);
        let sched = RestartSchedule::new(
            10f64.powf(rng.random_range(-2.0..2.0)),
            r,
            10f64.powf(rng.random_range(-3.0..3.0)),
            p,
            10f64.powf(rng.random_range(-2.0..4.0)),
            1,
        );
        let k = rng.random_range(0..10);
        let got = nk_schedule(k, &sched);
        let want = nk_reference(k, sched.r0, sched.r, sched.sigma_r, p, sched.h);
        t.check(got == want, || format!("{sched:?} k={k}: {got} != {want}"));
    }
    t
}

/// Damped Newton on the full regularized model, independent of the scalar-root solver.
fn newton_reference(model: &TaylorModel, g: &Component) -> DVector<f64> {
    let xt = model.center();
    let d = xt.len();
    let h = model.reg_h();
    let gq = g.hessian(xt).unwrap();
    let total = |y: &DVector<f64>| model.regularized_value(y) + g.value(y);
    let mut y = xt.clone();
    for _ in 0..200 {
        let grad = model.regularized_gradient(&y) + g.gradient(&y);
        if grad.norm() <= 1e-14 {
            break;
        }
        let s = &y - xt;
        let r = s.norm();
        let mut hess = model.hess_center().unwrap() + &gq + DMatrix::identity(d, d) * (h / 2.0 * r);
        if r > 0.0 {
            hess += &s * s.transpose() * (h / (2.0 * r));
        }
        let dir = hess.lu().solve(&(-&grad)).unwrap_or_else(|| -grad.clone());
        let f0 = total(&y);
        let mut step = 1.0;
        while step > 1e-12 && total(&(&y + &dir * step)) > f0 + 1e-4 * step * grad.dot(&dir) {
            step *= 0.5;
        }
        y += dir * step;
    }
    y
}

/// Proximal gradient with a half step on the first-order model.
fn prox_gradient_reference(model: &TaylorModel, g: &Component) -> DVector<f64> {
    let xt = model.center();
    let h = model.reg_h();
    let lip = h + g.lipschitz_grad().unwrap_or(0.0);
    let step = 0.5 / lip;
    let mut y = xt + DVector::from_element(xt.len(), 0.3);
    for _ in 0..20_000 {
        let smooth_grad = model.regularized_gradient(&y) + if g.is_smooth() { g.gradient(&y) } else { y.map(|_| 0.0) };
        let v = &y - smooth_grad * step;
        y = if g.is_smooth() { v } else { g.prox(&v, step).unwrap() };
    }
    y
}

fn suite_subproblem(_: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for i in 0..50 {
        let d = rng.random_range(1..=10);
        let seed = rng.random::<u64>();
        let base = random_quadratic(&QuadraticSpec { dim: d, mu: 0.1, l: 4.0, g_l: Some(2.0), seed }).unwrap();
        let xt = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = rng.random_range(0.5..20.0);
        let (order, g) = match i % 3 {
            0 => (1, base.g.clone()),
            1 => (1, Component::L1 { dim: d, weight: rng.random_range(0.1..2.0) }),
            _ => (2, base.g.clone()),
        };
        let problem = CompositeProblem::new(base.f.clone(), g.clone()).unwrap();
        let model = build_taylor_model(&problem, order, &xt, h).unwrap();
        let (got, want) = if order == 1 {
            (solve_sub_p1(&model, &g), prox_gradient_reference(&model, &g))
        } else {
            (solve_sub_p2(&model, &g), newton_reference(&model, &g))
        };
        match got {
            Ok(sol) => {
                let diff = (&sol.y - &want).norm();
                t.check(diff <= 1e-6, || format!("instance {i} (p={order}, d={d}): ‖Δy‖ = {diff:e}"));
            }
            Err(e) => t.fail(format!("instance {i}: {e}")),
        }
    }
    t
}

fn suite_resolves(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let mut fx = Fixture::quartic(opts.fault);
    fx.config.max_iters = 200;
    match fx.run() {
        Ok((steps, _, _)) => {
            for s in &steps {
                t.check(s.resolves <= 30, || format!("k={}: {} subproblem solves", s.k, s.resolves));
            }
        }
        Err(e) => t.fail(format!("quartic run failed: {e}")),
    }
    t
}

fn strip_clock(mut trace: Trace) -> Trace {
    for r in &mut trace.records {
        r.wall_ms = None;
    }
    trace
}

fn suite_determinism(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    for fx in [Fixture::quadratic(opts.fault), Fixture::quartic(opts.fault)] {
        match (fx.run(), fx.run()) {
            (Ok((sa, ta, la)), Ok((sb, tb, lb))) => {
                t.check(sa == sb, || format!("{}: iterations differ", fx.name));
                t.check(strip_clock(ta) == strip_clock(tb), || format!("{}: traces differ", fx.name));
                t.check(la == lb, || format!("{}: ledgers differ", fx.name));
            }
            _ => t.fail(format!("{}: run failed", fx.name)),
        }
    }
    t
}

fn conservation(t: &mut Tally, name: &str, ledger: &OracleLedger, trace: &Trace) {
    let w = ledger.weight_full();
    let mut by_entry = 0.0;
    for (_, _, kind, n) in ledger.entries() {
        by_entry += match kind {
            CallKind::FullGrad => w * n as f64,
            CallKind::CoordGrad => n as f64,
            _ => 0.0,
        };
    }
    let by_level: f64 =
        [Level::Outer, Level::Inner].iter().flat_map(|l| [Side::F, Side::G].map(|s| ledger.weighted_at(*l, s))).sum();
    let total = ledger.weighted_total();
    t.check((by_entry - total).abs() <= 1e-9 * (1.0 + total), || {
        format!("{name}: entries {by_entry} != total {total}")
    });
    t.check((by_level - total).abs() <= 1e-9 * (1.0 + total), || format!("{name}: levels {by_level} != total {total}"));
    if let Some(last) = trace.records.last() {
        let reported = last.wf_calls + last.wg_calls;
        t.check((reported - total).abs() <= 1e-9 * (1.0 + total), || {
            format!("{name}: trace reports {reported}, ledger holds {total}")
        });
    }
    let mut prev = (0.0, 0.0);
    for r in &trace.records {
        t.check(r.wf_calls >= prev.0 && r.wg_calls >= prev.1, || format!("{name}: counts decreased at {}", r.iter));
        prev = (r.wf_calls, r.wg_calls);
    }
}

fn suite_ledger(opts: VerifyOptions) -> Tally {
    let mut t = Tally::default();
    let composite = lasso(15, 30, 0.1, 5).unwrap();
    let mut cfg = AmConfig::new(1, 2.0 * composite.f.lipschitz_grad().unwrap()).with_max_iters(40);
    cfg.fault = opts.fault;
    let x0 = composite.x0.clone().unwrap();
    let mut ledger = OracleLedger::default();
    match am_run_with(&composite, &cfg, &x0, &mut ExactSubsolver { order: 1 }, &mut ledger, &mut |_| true) {
        Ok(out) => conservation(&mut t, "composite", &ledger, &out.trace),
        Err(e) => t.fail(format!("composite run failed: {e}")),
    }

    let split = random_quadratic(&QuadraticSpec { dim: 10, mu: 0.0, l: 1.0, g_l: Some(50.0), seed: 2 }).unwrap();
    let x0 = split.x0.clone().unwrap();
    let mut ledger = OracleLedger::default();
    let cfg = SlidingConfig { max_iters: 15, ..SlidingConfig::new(2.0) };
    match sliding_run(&split, &cfg, &x0, &mut ledger, &mut |_| true) {
        Ok(out) => {
            conservation(&mut t, "sliding", &ledger, &out.trace);
            let (nf, ng) = (ledger.weighted(Side::F), ledger.weighted(Side::G));
            t.check(nf + ng == ledger.weighted_total(), || format!("sliding: {nf} + {ng} != total"));
        }
        Err(e) => t.fail(format!("sliding run failed: {e}")),
    }

    let mut inexact =
        InexactSubsolver { order: 1, criterion: Criterion::GradRatio, inner: Box::new(GradientDescent::default()) };
    let fx = Fixture::quadratic(opts.fault);
    match fx.run_with(&mut inexact) {
        Ok((_, trace, ledger)) => conservation(&mut t, "inexact", &ledger, &trace),
        Err(e) => t.fail(format!("inexact run failed: {e}")),
    }
    t
}

/// Runs one suite by name.
pub fn run_suite(name: &str, opts: VerifyOptions) -> Result<SuiteReport> {
    let name: &'static str =
        SUITES.iter().copied().find(|s| *s == name).ok_or_else(|| Error::Config(format!("unknown suite `{name}`")))?;
    let tally = match name {
        "rate_p1" => rate_suite(opts, Fixture::quadratic(opts.fault), 1.0, &mut ExactSubsolver { order: 1 }),
        "rate_p2" => rate_suite(opts, Fixture::quartic(opts.fault), 1.0, &mut ExactSubsolver { order: 2 }),
        "step_band" => suite_step_band(opts),
        "momentum_identity" => suite_momentum(opts),
        "sigma_condition" => suite_sigma(opts),
        "potential_chain" => suite_potential(opts),
        "restart_halving" => suite_restart(opts),
        "taylor_remainder" => suite_taylor(opts),
        "fd_checks" => suite_fd(opts),
        "nk_formula" => suite_nk(opts),
        "subproblem_equivalence" => suite_subproblem(opts),
        "criterion_inflation" => {
            let mut sub = InexactSubsolver {
                order: 1,
                criterion: Criterion::GradRatio,
                inner: Box::new(GradientDescent::default()),
            };
            rate_suite(opts, Fixture::quadratic(opts.fault), 12.0 / 5.0, &mut sub)
        }
        "lambda_resolves" => suite_resolves(opts),
        "determinism" => suite_determinism(opts),
        "ledger_conservation" => suite_ledger(opts),
        _ => unreachable!(),
    };
    Ok(tally.finish(name))
}

/// Runs every suite in [`SUITES`] order.
pub fn verify_all(opts: VerifyOptions) -> Vec<SuiteReport> {
    SUITES.iter().map(|s| run_suite(s, opts).expect("listed suite")).collect()
}
