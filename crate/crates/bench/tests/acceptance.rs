//! Acceptance battery: one PASS/FAIL line per criterion with pinned tolerances.
//!
//! Runs without the libtest harness so the lines are always printed. Exits nonzero when a
//! criterion fails, except for lines listed in `KNOWN_UNATTAINABLE`, which still print FAIL.

use std::time::Instant;

use ambench::compare::{bundle, Ordering};
use ambench::config::{CriterionArg, FstarMode, InnerArg, Method, RunArgs};
use ambench::files::{hash_bytes, problem_bytes, LoadedProblem};
use ambench::runner::run_method;
use ambench::trace_csv::TraceFile;
use ameta::catalyst::{catalyst_wrap, CatalystConfig};
use ameta::engine::{am_run_with, AmConfig, Iteration};
use ameta::problem::{
    build_taylor_model, fd_check_grad, gen_logsumexp_quadratic, quartic, random_quadratic, ExperimentSpec, LambdaMix,
    QuadraticSpec,
};
use ameta::restart::{initial_radius, nk_schedule, restart_run, RestartSchedule};
use ameta::subsolver::{
    solve_sub_p1, solve_sub_p2, Criterion, ExactSubsolver, GradientDescent, InexactSubsolver, Subsolver,
};
use ameta::{CallKind, Component, CompositeProblem, Oracle, OracleLedger, Part, Side, Trace};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lines that cannot pass as stated; the analysis is kept with the project notes.
/// 4b: for p = 1 the band fixes η = ½, and the residual is then ½ + e/(2H) for curvature e
/// along the step, strictly above ½ on any quadratic.
const KNOWN_UNATTAINABLE: &[&str] = &["4b"];

const ABS_SLACK: f64 = 1e-9;

struct Line {
    id: &'static str,
    pass: bool,
    text: String,
}

#[derive(Default)]
struct Battery {
    lines: Vec<Line>,
    /// `(p, η)` of every accepted outer iteration seen in the battery.
    etas: Vec<(u32, f64)>,
    /// Pairs of CSV renderings of repeated runs.
    reruns: Vec<(String, String, String)>,
}

impl Battery {
    fn report(&mut self, id: &'static str, pass: bool, text: String) {
        self.lines.push(Line { id, pass, text });
    }
}

/// `c_p = 2^{p−1} (p+1)^{(3p+1)/2} / p!`.
fn rate_constant(p: u32) -> f64 {
    let pf = f64::from(p);
    let fact: f64 = (1..=p).map(f64::from).product();
    2f64.powf(pf - 1.0) * (pf + 1.0).powf((3.0 * pf + 1.0) / 2.0) / fact
}

struct Step {
    k: usize,
    gap: f64,
    eta: f64,
    sigma_res: f64,
    potential: Option<(f64, f64)>,
    a_total: f64,
    objective: f64,
}

fn run_am(problem: &CompositeProblem, cfg: &AmConfig, sub: &mut dyn Subsolver) -> (Vec<Step>, Trace) {
    let f_star = problem.f_star.unwrap();
    let mut steps = Vec::new();
    let mut ledger = OracleLedger::default();
    let x0 = problem.x0.clone().unwrap();
    let out = am_run_with(problem, cfg, &x0, sub, &mut ledger, &mut |it: &Iteration<'_>| {
        steps.push(Step {
            k: it.state.k,
            gap: it.objective - f_star,
            eta: it.outcome.eta,
            sigma_res: it.outcome.sigma_residual,
            potential: it.potential,
            a_total: it.outcome.a_total_next,
            objective: it.objective,
        });
        true
    })
    .expect("outer run");
    (steps, out.trace)
}

fn csv_of(trace: &Trace, f_star: f64) -> String {
    TraceFile::from_trace(trace, Some(f_star), false).to_csv_string()
}

fn envelope_check(steps: &[Step], p: u32, h: f64, radius: f64, inflation: f64) -> (bool, f64) {
    let c = rate_constant(p);
    let mut worst = 0.0f64;
    let mut ok = true;
    for s in steps {
        let bound = inflation * c * h * radius.powi(p as i32 + 1) / (s.k as f64).powf((3.0 * f64::from(p) + 1.0) / 2.0);
        ok &= s.gap <= bound + ABS_SLACK;
        worst = worst.max(s.gap / bound);
    }
    (ok, worst)
}

fn quadratic_suite() -> CompositeProblem {
    random_quadratic(&QuadraticSpec { dim: 20, mu: 0.0, l: 1.0, g_l: None, seed: 1 }).unwrap()
}

fn quartic_suite() -> CompositeProblem {
    quartic(10, DVector::from_fn(10, |i, _| 1.0 - 0.15 * i as f64)).unwrap()
}

fn dist0(p: &CompositeProblem) -> f64 {
    (p.x0.as_ref().unwrap() - p.x_star.as_ref().unwrap()).norm()
}

/// Largest `‖∇²f(x) − ∇²f(y)‖ / ‖x − y‖` over random pairs in a ball.
fn sampled_hessian_lipschitz(c: &Component, center: &DVector<f64>, radius: f64, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = center.len();
    let point = |rng: &mut ChaCha8Rng| loop {
        let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 {
            return center + v * radius;
        }
    };
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let (x, y) = (point(&mut rng), point(&mut rng));
        let diff = c.hessian(&x).unwrap() - c.hessian(&y).unwrap();
        best = best.max(diff.svd(false, false).singular_values.max() / (&x - &y).norm());
    }
    best
}

fn criteria_1_to_5_and_7(b: &mut Battery) {
    // Quadratic suite: p = 1, H = 2L.
    let quad = quadratic_suite();
    let l = quad.lip(1).unwrap();
    let h = 2.0 * l;
    let r = dist0(&quad);
    let mut cfg = AmConfig::new(1, h).with_max_iters(200).with_diagnostics();
    cfg.sigma = 0.75;
    let t = Instant::now();
    let (q_steps, q_trace) = run_am(&quad, &cfg, &mut ExactSubsolver { order: 1 });
    let q_time = t.elapsed().as_secs_f64();
    let (_, again) = run_am(&quad, &cfg, &mut ExactSubsolver { order: 1 });
    b.reruns.push((
        "quadratic p=1".into(),
        csv_of(&q_trace, quad.f_star.unwrap()),
        csv_of(&again, quad.f_star.unwrap()),
    ));
    let (ok, worst) = envelope_check(&q_steps, 1, h, r, 1.0);
    b.report(
        "1",
        ok && q_steps.len() == 200 && q_time < 5.0,
        format!("rate p=1, d=20, 200 its: max gap/bound {worst:.4} (slack {ABS_SLACK:e}), {q_time:.2}s (< 5s)"),
    );

    // Quartic suite: p = 2, H = 3·L₂ over the ball of radius 2R around x*.
    let qrt = quartic_suite();
    let rq = dist0(&qrt);
    let l2 = sampled_hessian_lipschitz(&qrt.f, qrt.x_star.as_ref().unwrap(), 2.0 * rq, 20_000, 7);
    let hq = 3.0 * l2;
    let cfg2 = AmConfig::new(2, hq).with_max_iters(100).with_diagnostics();
    let t = Instant::now();
    let (r_steps, r_trace) = run_am(&qrt, &cfg2, &mut ExactSubsolver { order: 2 });
    let r_time = t.elapsed().as_secs_f64();
    let (_, again) = run_am(&qrt, &cfg2, &mut ExactSubsolver { order: 2 });
    b.reruns.push(("quartic p=2".into(), csv_of(&r_trace, 0.0), csv_of(&again, 0.0)));
    let (ok, worst) = envelope_check(&r_steps, 2, hq, rq, 1.0);
    b.report(
        "2",
        ok && r_steps.len() == 100 && r_time < 30.0,
        format!(
            "rate p=2, quartic d=10, L2(ball)={l2:.4} sampled, 100 its: max gap/bound {worst:.4}, {r_time:.2}s (< 30s)"
        ),
    );

    // Criterion 7 before 3 so its η values join the band check.
    let mut inexact =
        InexactSubsolver { order: 1, criterion: Criterion::GradRatio, inner: Box::new(GradientDescent::default()) };
    let (i_steps, i_trace) = run_am(&quad, &cfg, &mut inexact);
    let mut inexact2 =
        InexactSubsolver { order: 1, criterion: Criterion::GradRatio, inner: Box::new(GradientDescent::default()) };
    let (_, again) = run_am(&quad, &cfg, &mut inexact2);
    b.reruns.push(("inexact p=1".into(), csv_of(&i_trace, quad.f_star.unwrap()), csv_of(&again, quad.f_star.unwrap())));
    let (ok7, worst7) = envelope_check(&i_steps, 1, h, r, 12.0 / 5.0);

    b.etas.extend(q_steps.iter().map(|s| (1, s.eta)));
    b.etas.extend(r_steps.iter().map(|s| (2, s.eta)));
    b.etas.extend(i_steps.iter().map(|s| (1, s.eta)));

    let max_q = q_steps.iter().map(|s| s.sigma_res).fold(0.0, f64::max);
    let max_r = r_steps.iter().map(|s| s.sigma_res).fold(0.0, f64::max);
    b.report("4a", max_r <= 0.5 + ABS_SLACK, format!("sigma residual p=2 exact: max {max_r:.6} (<= 0.5 + 1e-9)"));
    b.report("4b", max_q <= 0.5 + ABS_SLACK, format!("sigma residual p=1 exact: max {max_q:.6} (<= 0.5 + 1e-9)"));

    let mut ok5 = true;
    let mut margin = f64::INFINITY;
    for s in q_steps.iter().chain(&r_steps) {
        let Some((gap, lower)) = s.potential else {
            ok5 = false;
            continue;
        };
        let scale = 1.0 + s.a_total * s.objective.abs();
        ok5 &= gap >= lower - ABS_SLACK * scale;
        margin = margin.min((gap - lower) / scale);
    }
    b.report("5", ok5, format!("potential chain (sigma 3/4 p=1, 1/2 p=2): min (psi gap − bound)/scale {margin:.3e}"));

    b.report("7", ok7, format!("grad-ratio criterion + GD, bound x 12/5: max gap/bound {worst7:.4}"));
}

fn criterion_3(b: &mut Battery) {
    let mut bad = 0usize;
    for &(p, eta) in &b.etas {
        let upper = f64::from(p) / f64::from(p + 1);
        if !(0.5 <= eta && eta <= upper) {
            bad += 1;
        }
    }
    let n = b.etas.len();
    b.report("3", bad == 0 && n > 0, format!("step band [1/2, p/(p+1)] exactly: {bad} of {n} iterations outside"));
}

fn criterion_6(b: &mut Battery) {
    let problem = random_quadratic(&QuadraticSpec { dim: 20, mu: 1.0, l: 100.0, g_l: None, seed: 3 }).unwrap();
    let x0 = problem.x0.clone().unwrap();
    let h = 2.0 * problem.lip(1).unwrap();
    let r0 = initial_radius(&problem, &x0, None).unwrap();
    let sched = RestartSchedule::new(r0, 2.0, 1.0, 1, h, 8);
    let mut ledger = OracleLedger::default();
    let out = restart_run(
        &problem,
        &AmConfig::new(1, h),
        &sched,
        &x0,
        &mut ExactSubsolver { order: 1 },
        &mut ledger,
        &mut |_| true,
    );
    let (mut halving, mut worst, mut stages) = (true, 0.0f64, 0);
    match &out {
        Ok(o) => {
            for s in &o.stages {
                let (before, after) = (s.dist_before.unwrap(), s.dist_after.unwrap());
                halving &= after <= 0.5 * before + ABS_SLACK;
                worst = worst.max(after / before);
            }
            stages = o.stages.len();
        }
        Err(_) => halving = false,
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut mismatches = 0;
    for _ in 0..100 {
        let p = rng.random_range(1..=2u32);
        let pf = f64::from(p);
        let r = rng.random_range(2.0..=pf + 1.0);
        let r0 = 10f64.powf(rng.random_range(-2.0..2.0));
        let sigma = 10f64.powf(rng.random_range(-3.0..3.0));
        let h = 10f64.powf(rng.random_range(-2.0..4.0));
        let k = rng.random_range(0..10usize);
        let rk = r0 / 2f64.powi(k as i32);
        let base = r * rate_constant(p) * h * 2f64.powf(r) / sigma * rk.powf(pf + 1.0 - r);
        let want = (base.powf(2.0 / (3.0 * pf + 1.0)).ceil() as usize).max(1);
        let got = nk_schedule(k, &RestartSchedule::new(r0, r, sigma, p, h, 1));
        mismatches += usize::from(got != want);
    }
    let pass = halving && stages > 0 && mismatches == 0;
    b.report(
        "6",
        pass,
        format!("restart halving over {stages} stages: max ratio {worst:.4} (<= 1/2 + 1e-9); N_k mismatches {mismatches}/100"),
    );
}

/// Plain gradient descent on `g` with step `1/L` until the gap reaches `eps`; returns calls.
fn plain_gd_calls(g: &Component, l: f64, x0: &DVector<f64>, f_star: f64, eps: f64) -> usize {
    let mut x = x0.clone();
    let mut calls = 0;
    while g.value(&x) - f_star > eps {
        let grad = g.gradient(&x);
        calls += 1;
        x -= grad / l;
    }
    calls
}

fn catalyst_calls(kappa: f64) -> (usize, usize, f64) {
    let base = random_quadratic(&QuadraticSpec { dim: 50, mu: 1.0, l: kappa, g_l: None, seed: 11 }).unwrap();
    let mut p = CompositeProblem::new(Component::Zero { dim: 50 }, base.f.clone()).unwrap();
    p.x_star = base.x_star.clone();
    p.f_star = base.f_star;
    p.x0 = base.x0.clone();
    let x0 = p.x0.clone().unwrap();
    let l = p.lip_g1.unwrap();
    let cfg = CatalystConfig { h: l, max_iters: 0, target_gap: Some(1e-6), restart_modulus: Some(1.0) };
    let mut cat = catalyst_wrap(&p, Box::new(GradientDescent::default()), cfg).unwrap();
    let mut ledger = OracleLedger::default();
    let out = cat.run(&x0, &mut ledger, &mut |_| true).unwrap();
    let gap = p.eval_value(Part::Total, &out.y).unwrap() - p.f_star.unwrap();
    let cat_calls = ledger.total(Side::G, CallKind::FullGrad) as usize;
    let gd = plain_gd_calls(&p.g, l, &x0, p.f_star.unwrap(), 1e-6);
    (cat_calls, gd, gap)
}

fn criterion_8(b: &mut Battery) {
    let t = Instant::now();
    let (cat_hi, gd_hi, gap_hi) = catalyst_calls(1e4);
    let (cat_lo, _, gap_lo) = catalyst_calls(1e2);
    let secs = t.elapsed().as_secs_f64();
    let ratio = cat_hi as f64 / cat_lo as f64;
    let pass = gap_hi <= 1e-6 && gap_lo <= 1e-6 && 2 * cat_hi <= gd_hi && (5.0..=20.0).contains(&ratio) && secs < 60.0;
    b.report(
        "8",
        pass,
        format!(
            "catalyst+GD kappa=1e4: {cat_hi} calls vs plain GD {gd_hi} (<= 1/2); kappa ratio {ratio:.2} in [5, 20]; {secs:.1}s (< 60s)"
        ),
    );
}

fn criterion_9(b: &mut Battery) {
    let t = Instant::now();
    let problem = gen_logsumexp_quadratic(&ExperimentSpec::desk(1)).unwrap();
    let lf = problem.lip(1).unwrap();
    let loaded = LoadedProblem { hash: hash_bytes(&problem_bytes(&problem)), problem };
    let common = RunArgs {
        target_rel_gap: Some(1e-3),
        fstar_mode: Some(FstarMode::BestRun),
        fstar_iters: Some(5000),
        ..Default::default()
    };
    let am = RunArgs {
        method: Some(Method::Am),
        h: Some(lf),
        criterion: Some(CriterionArg::Contraction),
        inner: Some(InnerArg::Acdm),
        iters: Some(5000),
        ..common.clone()
    };
    let fgm = RunArgs { method: Some(Method::Fgm), iters: Some(20_000), ..common.clone() };
    let ms = RunArgs { method: Some(Method::Ms), iters: Some(5000), ..common };
    let mut files = Vec::new();
    for (name, args) in [("am+acdm", &am), ("fgm", &fgm), ("ms+acdm", &ms)] {
        let first = run_method(&loaded, args).expect("desk run");
        let second = run_method(&loaded, args).expect("desk run");
        b.reruns.push((format!("desk {name}"), first.file.to_csv_string(), second.file.to_csv_string()));
        files.push(first.file);
    }
    b.etas.extend(files[0].rows.iter().filter_map(|r| r.eta).map(|e| (1, e)));
    let series = bundle(&files).unwrap();
    let check = |s: &str| s.parse::<Ordering>().unwrap().check(&series).unwrap();
    let a = check("am+acdm:wg < ms+acdm:wg @ 1e-3");
    let bb = check("am+acdm:wf <= fgm:wf @ 1e-3");
    let secs = t.elapsed().as_secs_f64();
    let text = |r: &Result<String, String>| r.clone().unwrap_or_else(|e| e);
    b.report(
        "9",
        a.is_ok() && bb.is_ok() && secs < 300.0,
        format!("desk n=50 m=2000: (a) {} ; (b) {} ; {secs:.1}s incl. reruns (< 300s)", text(&a), text(&bb)),
    );
}

/// Coordinate-wise ternary search on a separable convex objective.
fn ternary(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Gradient descent with Armijo backtracking, run to stagnation.
fn descend(
    obj: impl Fn(&DVector<f64>) -> f64,
    grad: impl Fn(&DVector<f64>) -> DVector<f64>,
    start: DVector<f64>,
) -> DVector<f64> {
    let mut y = start;
    let mut step = 1.0;
    for _ in 0..200_000 {
        let g = grad(&y);
        let gn2 = g.norm_squared();
        if gn2 <= 1e-26 {
            break;
        }
        let f0 = obj(&y);
        step *= 2.0;
        while obj(&(&y - &g * step)) > f0 - 0.5 * step * gn2 {
            step *= 0.5;
            if step < 1e-20 {
                return y;
            }
        }
        y -= g * step;
    }
    y
}

fn criterion_10(b: &mut Battery) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for i in 0..50 {
        let d = rng.random_range(1..=10usize);
        let base =
            random_quadratic(&QuadraticSpec { dim: d, mu: 0.1, l: 4.0, g_l: Some(2.0), seed: rng.random() }).unwrap();
        let xt = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let h = rng.random_range(0.5..20.0);
        let (q, lin) = base.f.quadratic_form().unwrap();
        let c = &q * &xt + &lin;
        let (want, got) = match i % 3 {
            // p = 1 with an ℓ₁ term: the model is separable, so search each coordinate.
            0 => {
                let w = rng.random_range(0.1..2.0);
                let g = Component::L1 { dim: d, weight: w };
                let model =
                    build_taylor_model(&CompositeProblem::new(base.f.clone(), g.clone()).unwrap(), 1, &xt, h).unwrap();
                let want = DVector::from_fn(d, |j, _| {
                    let phi = |t: f64| c[j] * (t - xt[j]) + 0.5 * h * (t - xt[j]).powi(2) + w * t.abs();
                    ternary(phi, xt[j] - 100.0, xt[j] + 100.0)
                });
                (want, solve_sub_p1(&model, &g))
            }
            // p = 1 with a smooth quadratic g.
            1 => {
                let g = base.g.clone();
                let (qg, lg) = g.quadratic_form().unwrap();
                let model =
                    build_taylor_model(&CompositeProblem::new(base.f.clone(), g.clone()).unwrap(), 1, &xt, h).unwrap();
                let obj = |y: &DVector<f64>| {
                    let s = y - &xt;
                    c.dot(&s) + 0.5 * h * s.norm_squared() + 0.5 * y.dot(&(&qg * y)) + lg.dot(y)
                };
                let grad = |y: &DVector<f64>| &c + (y - &xt) * h + &qg * y + &lg;
                (descend(obj, grad, xt.clone()), solve_sub_p1(&model, &g))
            }
            // p = 2 with a smooth quadratic g and cubic regularization.
            _ => {
                let g = base.g.clone();
                let (qg, lg) = g.quadratic_form().unwrap();
                let model =
                    build_taylor_model(&CompositeProblem::new(base.f.clone(), g.clone()).unwrap(), 2, &xt, h).unwrap();
                let obj = |y: &DVector<f64>| {
                    let s = y - &xt;
                    c.dot(&s)
                        + 0.5 * s.dot(&(&q * &s))
                        + h / 6.0 * s.norm().powi(3)
                        + 0.5 * y.dot(&(&qg * y))
                        + lg.dot(y)
                };
                let grad = |y: &DVector<f64>| {
                    let s = y - &xt;
                    &c + &q * &s + &s * (h / 2.0 * s.norm()) + &qg * y + &lg
                };
                let starts = [xt.clone(), &xt + DVector::from_element(d, 1.0), &xt - DVector::from_element(d, 1.0)];
                let best = starts
                    .into_iter()
                    .map(|s0| descend(obj, grad, s0))
                    .min_by(|a, b2| obj(a).total_cmp(&obj(b2)))
                    .unwrap();
                (best, solve_sub_p2(&model, &g))
            }
        };
        match got {
            Ok(sol) => {
                let diff = (&sol.y - &want).norm();
                worst = worst.max(diff);
                failures += usize::from(diff > 1e-6);
            }
            Err(_) => failures += 1,
        }
    }
    b.report(
        "10",
        failures == 0,
        format!("subproblem vs brute force, 50 instances d<=10: max |dy| {worst:.2e} (<= 1e-6)"),
    );
}

fn criterion_11(b: &mut Battery) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 6;
    let lse =
        gen_logsumexp_quadratic(&ExperimentSpec { n: d, m: 40, density: 0.5, seed: 3, lambda_mix: LambdaMix::Equal })
            .unwrap();
    let quad = random_quadratic(&QuadraticSpec { dim: d, mu: 0.0, l: 3.0, g_l: None, seed: 2 }).unwrap();
    let components = vec![
        ("zero", Component::Zero { dim: d }),
        ("quadratic", quad.f),
        ("quartic", Component::Quartic { dim: d }),
        ("log-sum-exp", lse.f),
        ("gram", lse.g),
        ("l1", Component::L1 { dim: d, weight: 0.5 }),
        (
            "isotropic",
            Component::Isotropic {
                center: DVector::from_element(d, 0.3),
                weight: 1.7,
                linear: DVector::from_fn(d, |i, _| i as f64 - 2.0),
                offset: -0.4,
            },
        ),
    ];
    let mut worst = 0.0f64;
    let mut name_worst = "";
    for (name, c) in &components {
        for _ in 0..20 {
            let x = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
            let err = fd_check_grad(c as &dyn Oracle, &x, 1e-5);
            if err > worst {
                worst = err;
                name_worst = name;
            }
        }
    }
    b.report(
        "11",
        worst <= 1e-5,
        format!(
            "finite differences, {} oracles x 20 points: max error {worst:.2e} ({name_worst}) (<= 1e-5)",
            components.len()
        ),
    );
}

fn criterion_12(b: &mut Battery) {
    let differing: Vec<&str> = b.reruns.iter().filter(|(_, x, y)| x != y).map(|(n, _, _)| n.as_str()).collect();
    let n = b.reruns.len();
    b.report(
        "12",
        differing.is_empty() && n > 0,
        format!("byte-identical CSV on rerun: {} of {n} runs differ {differing:?}", differing.len()),
    );
}

fn main() {
    // Cargo passes libtest flags; with no harness there is nothing to filter, but honor `--list`.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let started = Instant::now();
    let mut b = Battery::default();
    criteria_1_to_5_and_7(&mut b);
    criterion_6(&mut b);
    criterion_8(&mut b);
    criterion_9(&mut b);
    criterion_10(&mut b);
    criterion_11(&mut b);
    criterion_3(&mut b);
    criterion_12(&mut b);

    b.lines.sort_by_key(|l| (l.id.trim_end_matches(char::is_alphabetic).parse::<u32>().unwrap(), l.id));
    for l in &b.lines {
        println!("{} {:>3} {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.text);
    }
    let unexpected: Vec<&Line> = b.lines.iter().filter(|l| !l.pass && !KNOWN_UNATTAINABLE.contains(&l.id)).collect();
    let known = b.lines.iter().filter(|l| !l.pass && KNOWN_UNATTAINABLE.contains(&l.id)).count();
    let passed = b.lines.iter().filter(|l| l.pass).count();
    println!(
        "acceptance: {passed} passed, {} failed ({known} known unattainable), {:.1}s",
        b.lines.len() - passed,
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        for l in unexpected {
            eprintln!("unexpected failure {}: {}", l.id, l.text);
        }
        std::process::exit(1);
    }
}
