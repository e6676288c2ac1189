//! Resolves run flags against a problem, runs one method and builds its trace file.

use ameta::baselines::{acdm_run, fgm_run, ms_run, Acdm, AcdmConfig, MsConfig, RunLimits};
use ameta::catalyst::{catalyst_wrap, CatalystConfig, INEXACT_INFLATION};
use ameta::engine::{am_run_with, AmConfig, StopReason};
use ameta::restart::{initial_radius, restart_run, stage_count, RestartSchedule};
use ameta::sliding::{sliding_run, SlidingConfig};
use ameta::subsolver::{
    Criterion, ExactQuadratic, ExactSubsolver, GradientDescent, InexactSubsolver, InnerSolver, Subsolver,
};
use ameta::{Component, CompositeProblem, OracleLedger, Part, Trace};
use nalgebra::DVector;

use crate::config::{CriterionArg, FstarMode, InnerArg, Method, RunArgs};
use crate::error::{BenchError, BenchResult, EXIT_BUDGET, EXIT_OK};
use crate::files::LoadedProblem;
use crate::trace_csv::TraceFile;

pub const DEFAULT_WEIGHT: f64 = 2.5;
pub const DEFAULT_FSTAR_ITERS: usize = 5000;
pub const DEFAULT_ITERS: usize = 100;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub file: TraceFile,
    pub stop: StopReason,
    /// `None` when no target was requested.
    pub target_met: Option<bool>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.target_met {
            Some(false) => EXIT_BUDGET,
            _ => EXIT_OK,
        }
    }
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::MaxIters => "max_iters",
        StopReason::TargetGap => "target_gap",
        StopReason::GradientBound => "gradient_bound",
        StopReason::Stationary => "stationary",
        StopReason::Observer => "observer",
    }
}

fn uses_inner(m: Method) -> bool {
    matches!(m, Method::Am | Method::AmRestart | Method::Catalyst | Method::Ms)
}

/// Rejects flags that make no sense for the chosen method.
pub fn check_compat(args: &RunArgs, method: Method) -> BenchResult<()> {
    let bad = |flag: &str| Err(BenchError::usage(format!("--{flag} does not apply to method {}", method.name())));
    let tensor = matches!(method, Method::Am | Method::AmRestart);
    if let Some(p) = args.p {
        if !(1..=2).contains(&p) {
            return Err(BenchError::usage(format!("--p must be 1 or 2, got {p}")));
        }
        if p != 1 && !tensor {
            return Err(BenchError::usage(format!(
                "method {} is first order; --p {p} is not available",
                method.name()
            )));
        }
    }
    if args.h.is_some() && matches!(method, Method::Fgm | Method::Acdm | Method::Ms) {
        return bad("h");
    }
    if args.l.is_some() && !matches!(method, Method::Fgm | Method::Ms) {
        return bad("l");
    }
    if args.inner.is_some() && !uses_inner(method) {
        return bad("inner");
    }
    if args.criterion.is_some() && matches!(method, Method::Fgm | Method::Acdm | Method::Ms) {
        return bad("criterion");
    }
    if args.criterion.is_some_and(|c| c != CriterionArg::Contraction) && method == Method::Catalyst {
        return Err(BenchError::usage("catalyst stops its inner solver by the contraction rule only"));
    }
    if args.criterion == Some(CriterionArg::Exact) && args.inner.is_some() && tensor {
        return Err(BenchError::usage("--inner needs an inexact --criterion"));
    }
    if (args.r.is_some() || args.stages.is_some()) && method != Method::AmRestart {
        return bad(if args.r.is_some() { "r" } else { "stages" });
    }
    if args.sigma_r.is_some() && !matches!(method, Method::AmRestart | Method::Catalyst) {
        return bad("sigma-r");
    }
    if args.hg_scale.is_some() && method != Method::Sliding {
        return bad("hg-scale");
    }
    if args.diagnostics == Some(true) && !tensor {
        return bad("diagnostics");
    }
    if args.seed.is_some() || args.beta.is_some() {
        let coords = method == Method::Acdm
            || (uses_inner(method) && args.inner == Some(InnerArg::Acdm))
            || (method == Method::Ms && args.inner.is_none());
        if !coords {
            return Err(BenchError::usage("--seed and --beta apply to the coordinate solver only"));
        }
    }
    Ok(())
}

/// Drops settings that do not apply to `method`, so one shared configuration can feed every
/// cell of a grid. Invalid values are left for [`check_compat`] to report.
pub fn restrict(args: &RunArgs, method: Method) -> RunArgs {
    let mut a = args.clone();
    a.method = Some(method);
    let tensor = matches!(method, Method::Am | Method::AmRestart);
    let baseline = matches!(method, Method::Fgm | Method::Acdm | Method::Ms);
    if !tensor && a.p == Some(1) {
        a.p = None;
    }
    if baseline {
        a.h = None;
        a.criterion = None;
    }
    if !matches!(method, Method::Fgm | Method::Ms) {
        a.l = None;
    }
    if method == Method::Catalyst && a.criterion != Some(CriterionArg::Contraction) {
        a.criterion = None;
    }
    if !uses_inner(method) || (tensor && a.criterion.unwrap_or(CriterionArg::Exact) == CriterionArg::Exact) {
        a.inner = None;
    }
    if method != Method::AmRestart {
        a.r = None;
        a.stages = None;
    }
    if !matches!(method, Method::AmRestart | Method::Catalyst) {
        a.sigma_r = None;
    }
    if method != Method::Sliding {
        a.hg_scale = None;
    }
    if !tensor {
        a.diagnostics = None;
    }
    if check_compat(&RunArgs { seed: Some(0), ..a.clone() }, method).is_err() {
        a.seed = None;
        a.beta = None;
    }
    a
}

fn acdm_config(args: &RunArgs) -> AcdmConfig {
    let d = AcdmConfig::default();
    AcdmConfig { beta: args.beta.unwrap_or(d.beta), seed: args.seed.unwrap_or(d.seed), ..d }
}

fn make_inner(kind: InnerArg, args: &RunArgs) -> Box<dyn InnerSolver> {
    match kind {
        InnerArg::Exact => Box::new(ExactQuadratic),
        InnerArg::Gd => Box::new(GradientDescent::default()),
        InnerArg::Acdm => Box::new(Acdm::new(acdm_config(args))),
    }
}

fn default_inner(method: Method) -> InnerArg {
    match method {
        Method::Ms => InnerArg::Acdm,
        _ => InnerArg::Gd,
    }
}

/// Report label: the method, plus the inner solver when one is involved.
pub fn default_label(args: &RunArgs, method: Method) -> String {
    let inexact = match method {
        Method::Am | Method::AmRestart => args.criterion.is_some_and(|c| c != CriterionArg::Exact),
        Method::Catalyst | Method::Ms => true,
        _ => false,
    };
    if inexact {
        let inner = args.inner.unwrap_or(default_inner(method));
        format!("{}+{}", method.name(), clap::ValueEnum::to_possible_value(&inner).unwrap().get_name())
    } else {
        method.name().to_string()
    }
}

fn need(v: Option<f64>, what: &str) -> BenchResult<f64> {
    v.ok_or_else(|| BenchError::usage(format!("the problem has no {what}; pass it explicitly")))
}

fn smooth_lip(problem: &CompositeProblem) -> BenchResult<f64> {
    let lf = need(problem.lip(1), "L_f (gradient Lipschitz constant of f)")?;
    Ok(lf + if problem.g.is_smooth() { problem.lip_g1.unwrap_or(0.0) } else { 0.0 })
}

/// Best objective of a long FGM run.
pub fn reference_objective(problem: &CompositeProblem, x0: &DVector<f64>, iters: usize) -> BenchResult<f64> {
    let l = smooth_lip(problem)?;
    let mut ledger = OracleLedger::default();
    let out = fgm_run(problem, l, x0, &RunLimits::iters(iters), &mut ledger, &mut |_| true)?;
    Ok(out.trace.best_objective())
}

struct Resolved {
    trace: Trace,
    stop: StopReason,
    settings: String,
}

fn subsolver(args: &RunArgs, p: u32) -> Box<dyn Subsolver> {
    match args.criterion.unwrap_or(CriterionArg::Exact) {
        CriterionArg::Exact => Box::new(ExactSubsolver { order: p }),
        c => Box::new(InexactSubsolver {
            order: p,
            criterion: Criterion::from(c),
            inner: make_inner(args.inner.unwrap_or(InnerArg::Gd), args),
        }),
    }
}

fn am_config(args: &RunArgs, problem: &CompositeProblem, eps: Option<f64>) -> BenchResult<AmConfig> {
    let p = args.p.unwrap_or(1);
    let h = match args.h {
        Some(h) => h,
        None if p == 1 => 2.0 * need(problem.lip(1), "L_1 of f")?,
        None => 3.0 * need(problem.lip(2), "L_2 of f")?,
    };
    let mut cfg = AmConfig::new(p, h).with_max_iters(args.iters.unwrap_or(DEFAULT_ITERS));
    if let Some(s) = args.sigma {
        cfg.sigma = s;
    }
    cfg.diagnostics = args.diagnostics.unwrap_or(false);
    cfg.target_gap = eps;
    Ok(cfg)
}

/// `f ≡ 0` form of a problem for the proximal-point wrapper.
fn g_only(problem: &CompositeProblem) -> BenchResult<CompositeProblem> {
    if problem.f.is_zero() {
        return Ok(problem.clone());
    }
    if !problem.g.is_zero() {
        return Err(BenchError::usage("catalyst needs a problem with f ≡ 0 or g ≡ 0"));
    }
    let mut swapped = CompositeProblem::new(Component::Zero { dim: problem.dim() }, problem.f.clone())?;
    swapped.uniform_convexity = problem.uniform_convexity;
    swapped.x_star = problem.x_star.clone();
    swapped.f_star = problem.f_star;
    swapped.x0 = problem.x0.clone();
    swapped.spec = problem.spec;
    Ok(swapped)
}

fn dispatch(
    method: Method,
    args: &RunArgs,
    problem: &CompositeProblem,
    x0: &DVector<f64>,
    eps: Option<f64>,
    ledger: &mut OracleLedger,
) -> BenchResult<Resolved> {
    let iters = args.iters.unwrap_or(DEFAULT_ITERS);
    let limits = RunLimits { max_iters: iters, target_gap: eps };
    Ok(match method {
        Method::Am => {
            let cfg = am_config(args, problem, eps)?;
            let mut sub = subsolver(args, cfg.p);
            let out = am_run_with(problem, &cfg, x0, sub.as_mut(), ledger, &mut |_| true)?;
            Resolved {
                trace: out.trace,
                stop: out.stop,
                settings: format!("p = {}; h = {}; sigma = {}", cfg.p, cfg.h, cfg.sigma),
            }
        }
        Method::AmRestart => {
            let cfg = am_config(args, problem, eps)?;
            let uc = problem.uniform_convexity;
            let r = args.r.or(uc.map(|u| u.r)).unwrap_or(2.0);
            let sigma_r = need(args.sigma_r.or(uc.map(|u| u.sigma)), "uniform convexity modulus (--sigma-r)")?;
            let r0 = initial_radius(problem, x0, None)?;
            let stages = match (args.stages, eps) {
                (Some(k), _) => k,
                (None, Some(eps)) => stage_count(r0, r, sigma_r, eps),
                (None, None) => return Err(BenchError::usage("am-restart needs --stages or --target-rel-gap")),
            };
            let mut sched = RestartSchedule::new(r0, r, sigma_r, cfg.p, cfg.h, stages);
            if args.criterion.is_some_and(|c| c != CriterionArg::Exact) {
                sched.inflation = INEXACT_INFLATION;
            }
            let mut sub = subsolver(args, cfg.p);
            let out = restart_run(problem, &cfg, &sched, x0, sub.as_mut(), ledger, &mut |_| true)?;
            Resolved {
                trace: out.trace,
                stop: out.stop,
                settings: format!("p = {}; h = {}; r = {r}; sigma-r = {sigma_r}; stages = {stages}", cfg.p, cfg.h),
            }
        }
        Method::Catalyst => {
            let prox = g_only(problem)?;
            let h = match args.h {
                Some(h) => h,
                None => need(prox.lip_g1, "gradient Lipschitz constant")?,
            };
            let inner = make_inner(args.inner.unwrap_or(InnerArg::Gd), args);
            let cfg = CatalystConfig { h, max_iters: iters, target_gap: eps, restart_modulus: args.sigma_r };
            let mut cat = catalyst_wrap(&prox, inner, cfg)?;
            let out = cat.run(x0, ledger, &mut |_| true)?;
            Resolved { trace: out.trace, stop: out.stop, settings: format!("h = {h}") }
        }
        Method::Sliding => {
            let hf = match args.h {
                Some(h) => h,
                None => 2.0 * need(problem.lip(1), "L_1 of f")?,
            };
            let mut cfg = SlidingConfig { max_iters: iters, target_gap: eps, ..SlidingConfig::new(hf) };
            if let Some(s) = args.hg_scale {
                cfg.hg_scale = s;
            }
            if let Some(c) = args.criterion {
                cfg.criterion = c.into();
            }
            let out = sliding_run(problem, &cfg, x0, ledger, &mut |_| true)?;
            Resolved { trace: out.trace, stop: out.stop, settings: format!("h = {hf}; hg-scale = {}", cfg.hg_scale) }
        }
        Method::Fgm => {
            let l = match args.l {
                Some(l) => l,
                None => smooth_lip(problem)?,
            };
            let out = fgm_run(problem, l, x0, &limits, ledger, &mut |_| true)?;
            Resolved { trace: out.trace, stop: out.stop, settings: format!("l = {l}") }
        }
        Method::Acdm => {
            let cfg = acdm_config(args);
            let out = acdm_run(problem, &cfg, x0, &limits, ledger, &mut |_| true)?;
            Resolved { trace: out.trace, stop: out.stop, settings: format!("beta = {}; seed = {}", cfg.beta, cfg.seed) }
        }
        Method::Ms => {
            let l = match args.l {
                Some(l) => l,
                None => 20.0 * need(problem.lip(1), "L_1 of f")?,
            };
            let cfg = MsConfig { l, sigma: args.sigma.unwrap_or(0.5) };
            let mut inner = make_inner(args.inner.unwrap_or(InnerArg::Acdm), args);
            let out = ms_run(problem, &cfg, inner.as_mut(), x0, &limits, ledger, &mut |_| true)?;
            Resolved { trace: out.trace, stop: out.stop, settings: format!("l = {l}; sigma = {}", cfg.sigma) }
        }
    })
}

/// Runs the method selected by `args` on `loaded` and returns its trace file.
pub fn run_method(loaded: &LoadedProblem, args: &RunArgs) -> BenchResult<RunOutcome> {
    let method = args.method.ok_or_else(|| BenchError::usage("--method is required"))?;
    check_compat(args, method)?;
    let weight = args.weight.unwrap_or(DEFAULT_WEIGHT);
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(BenchError::usage(format!("--weight must be positive, got {weight}")));
    }
    if let Some(t) = args.target_rel_gap {
        if !(t > 0.0) {
            return Err(BenchError::usage(format!("--target-rel-gap must be positive, got {t}")));
        }
    }
    let mut problem = loaded.problem.clone();
    let x0 = problem.x0.clone().unwrap_or_else(|| DVector::zeros(problem.dim()));
    let f0 = problem.eval_value(Part::Total, &x0)?;

    let mode = match args.fstar_mode.unwrap_or(FstarMode::Auto) {
        FstarMode::Auto if problem.f_star.is_some() => FstarMode::Known,
        FstarMode::Auto => FstarMode::BestRun,
        m => m,
    };
    let reference = match mode {
        FstarMode::Known => {
            Some(problem.f_star.ok_or_else(|| BenchError::usage("--fstar-mode known, but the problem has no F*"))?)
        }
        FstarMode::BestRun => {
            Some(reference_objective(&problem, &x0, args.fstar_iters.unwrap_or(DEFAULT_FSTAR_ITERS))?)
        }
        _ => None,
    };
    if reference.is_none() && args.target_rel_gap.is_some() {
        return Err(BenchError::usage("--target-rel-gap needs a reference optimum (--fstar-mode known or best-run)"));
    }
    if let Some(fs) = reference {
        problem.f_star = Some(fs);
    }
    let eps = args.target_rel_gap.zip(reference).map(|(t, fs)| t * (f0 - fs));

    let mut ledger = OracleLedger::new(weight);
    let resolved = dispatch(method, args, &problem, &x0, eps, &mut ledger)?;
    let f_star = match mode {
        FstarMode::BestRun => reference.map(|r| r.min(resolved.trace.best_objective())),
        _ => reference,
    };
    let target_met = eps
        .map(|_| matches!(resolved.stop, StopReason::TargetGap | StopReason::GradientBound | StopReason::Stationary));

    let mut file = TraceFile::from_trace(&resolved.trace, f_star, args.wall_clock.unwrap_or(false));
    file.set_meta("method", method.name());
    file.set_meta("label", args.label.clone().unwrap_or_else(|| default_label(args, method)));
    file.set_meta("problem_hash", &loaded.hash);
    file.set_meta("fstar_mode", clap::ValueEnum::to_possible_value(&mode).unwrap().get_name());
    file.set_meta("fstar", f_star.map_or("NA".to_string(), |v| v.to_string()));
    file.set_meta("f0", f0);
    file.set_meta("weight", weight);
    file.set_meta("settings", resolved.settings);
    file.set_meta("stop", stop_name(resolved.stop));
    if let Some(met) = target_met {
        file.set_meta("target_rel_gap", args.target_rel_gap.unwrap());
        file.set_meta("target_met", met);
    }
    Ok(RunOutcome { file, stop: resolved.stop, target_met })
}
