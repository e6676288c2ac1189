use std::ffi::OsString;
use std::path::PathBuf;

use ameta::engine::Fault;
use ameta::problem::{
    gen_logsumexp_quadratic, lasso, quartic, random_quadratic, ExperimentSpec, LambdaMix, QuadraticSpec,
};
use ameta::verify::{run_suite, VerifyOptions, SUITES};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::compare::{bundle, long_csv, table, Ordering};
use crate::config::{Method, RunArgs};
use crate::error::{BenchError, BenchResult, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE};
use crate::files::{hash_bytes, problem_bytes, read_problem, write_atomic};
use crate::runner::{default_label, restrict, run_method};
use crate::trace_csv::TraceFile;

/// Environment variable holding the worker count for grids and the verify battery.
pub const THREADS_VAR: &str = "AMBENCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "ambench", version, about = "Benchmarks for the accelerated meta-algorithm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a problem instance to a JSON file.
    Generate(GenerateArgs),
    /// Run one method and write its trace CSV.
    Run {
        /// TOML file with run settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Run every (method, seed) cell concurrently into a directory.
    Grid {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Compare traces of one problem.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Relative gaps at which costs are tabulated.
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3")]
        gaps: Vec<f64>,
        /// Also write `method,axis,x,y` rows here.
        #[arg(long)]
        long_out: Option<PathBuf>,
        /// Ordering to enforce, e.g. `am+acdm:wg < ms+acdm:wg @ 1e-3`.
        #[arg(long = "assert")]
        asserts: Vec<String>,
    },
    /// Run the property battery.
    Verify {
        /// Plant a defect in the outer loop.
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
        /// Run only these suites.
        #[arg(long)]
        suite: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FaultArg {
    MomentumWithoutFour,
    BandUpperOne,
}

impl From<FaultArg> for Fault {
    fn from(f: FaultArg) -> Self {
        match f {
            FaultArg::MomentumWithoutFour => Fault::MomentumWithoutFour,
            FaultArg::BandUpperOne => Fault::BandUpperOne,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    LogsumexpQuad,
    Quadratic,
    Lasso,
    Quartic,
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    /// Dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Rows of the data matrix (logsumexp-quad, lasso).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum)]
    pub lambda_mix: Option<MixArg>,
    /// Smallest Hessian eigenvalue (quadratic).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Largest Hessian eigenvalue (quadratic).
    #[arg(long)]
    pub l: Option<f64>,
    /// Spectrum bound of a second quadratic put in g (quadratic).
    #[arg(long)]
    pub g_l: Option<f64>,
    /// ℓ₁ weight (lasso).
    #[arg(long)]
    pub reg: Option<f64>,
    /// Start point scale, x₀ = scale·1 (quartic).
    #[arg(long)]
    pub x0_scale: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MixArg {
    UniformSimplex,
    Equal,
}

fn generate(a: &GenerateArgs) -> BenchResult<i32> {
    let given = [
        ("m", a.m.is_some()),
        ("density", a.density.is_some()),
        ("lambda-mix", a.lambda_mix.is_some()),
        ("mu", a.mu.is_some()),
        ("l", a.l.is_some()),
        ("g-l", a.g_l.is_some()),
        ("reg", a.reg.is_some()),
        ("x0-scale", a.x0_scale.is_some()),
    ];
    let allowed: &[&str] = match a.problem {
        ProblemKind::LogsumexpQuad => &["m", "density", "lambda-mix"],
        ProblemKind::Quadratic => &["mu", "l", "g-l"],
        ProblemKind::Lasso => &["m", "reg"],
        ProblemKind::Quartic => &["x0-scale"],
    };
    if let Some((flag, _)) = given.iter().find(|(f, set)| *set && !allowed.contains(f)) {
        return Err(BenchError::usage(format!("--{flag} does not apply to this problem kind")));
    }
    let problem = match a.problem {
        ProblemKind::LogsumexpQuad => {
            let desk = ExperimentSpec::desk(a.seed);
            let spec = ExperimentSpec {
                n: a.n.unwrap_or(desk.n),
                m: a.m.unwrap_or(desk.m),
                density: a.density.unwrap_or(desk.density),
                seed: a.seed,
                lambda_mix: match a.lambda_mix {
                    Some(MixArg::Equal) => LambdaMix::Equal,
                    _ => LambdaMix::UniformSimplex,
                },
            };
            gen_logsumexp_quadratic(&spec)
        }
        ProblemKind::Quadratic => random_quadratic(&QuadraticSpec {
            dim: a.n.unwrap_or(20),
            mu: a.mu.unwrap_or(0.0),
            l: a.l.unwrap_or(1.0),
            g_l: a.g_l,
            seed: a.seed,
        }),
        ProblemKind::Lasso => lasso(a.n.unwrap_or(50), a.m.unwrap_or(100), a.reg.unwrap_or(0.1), a.seed),
        ProblemKind::Quartic => {
            let n = a.n.unwrap_or(10);
            quartic(n, DVector::from_element(n, a.x0_scale.unwrap_or(1.0)))
        }
    }
    .map_err(|e| BenchError::usage(e.to_string()))?;
    let bytes = problem_bytes(&problem);
    write_atomic(&a.out, &bytes)?;
    println!("wrote {} (sha256 {})", a.out.display(), hash_bytes(&bytes));
    match problem.lip(1) {
        Some(l) => println!("L_f estimate: {l}"),
        None => println!("L_f estimate: none (f has no global gradient Lipschitz constant)"),
    }
    Ok(EXIT_OK)
}

fn merged(config: Option<&PathBuf>, flags: &RunArgs) -> BenchResult<(RunArgs, Vec<(String, String)>)> {
    let mut provenance = Vec::new();
    let file = match config {
        Some(path) => {
            let f = RunArgs::read(path)?;
            provenance.push(("config_file".to_string(), path.display().to_string()));
            provenance.push(("config".to_string(), f.inline()));
            f
        }
        None => RunArgs::default(),
    };
    provenance.push(("flags".to_string(), flags.inline()));
    Ok((flags.over(&file), provenance))
}

fn run_to_file(args: &RunArgs, provenance: &[(String, String)], out: &PathBuf) -> BenchResult<i32> {
    let path = args.problem.as_ref().ok_or_else(|| BenchError::usage("--problem is required"))?;
    let loaded = read_problem(path)?;
    let outcome = run_method(&loaded, args)?;
    let mut file = outcome.file.clone();
    for (k, v) in provenance {
        file.set_meta(k, v);
    }
    write_atomic(out, file.to_csv_string().as_bytes())?;
    Ok(outcome.exit_code())
}

fn thread_pool() -> BenchResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.parse().map_err(|_| BenchError::usage(format!("{THREADS_VAR} must be a count, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| BenchError::usage(e.to_string()))
}

fn grid(
    config: Option<&PathBuf>,
    methods: &[Method],
    seeds: &[u64],
    out_dir: &std::path::Path,
    flags: &RunArgs,
) -> BenchResult<i32> {
    let (base, provenance) = merged(config, flags)?;
    // Methods without a random component get one cell instead of one per seed.
    let mut cells = Vec::new();
    for &method in methods {
        let probe = restrict(&RunArgs { seed: Some(0), ..base.clone() }, method);
        if probe.seed.is_some() {
            for &seed in seeds {
                cells.push((RunArgs { seed: Some(seed), ..probe.clone() }, format!("-s{seed}")));
            }
        } else {
            cells.push((probe, String::new()));
        }
    }
    let results: Vec<(String, BenchResult<i32>)> = thread_pool()?.install(|| {
        cells
            .par_iter()
            .map(|(args, suffix)| {
                let method = args.method.expect("set by restrict");
                let label = args.label.clone().unwrap_or_else(|| default_label(args, method));
                let name = format!("{label}{suffix}.csv");
                let r = run_to_file(args, &provenance, &out_dir.join(&name));
                (name, r)
            })
            .collect()
    });
    let mut code = EXIT_OK;
    for (name, r) in results {
        match r {
            Ok(c) => {
                println!("{name}: exit {c}");
                code = code.max(c);
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                code = code.max(e.exit_code());
            }
        }
    }
    Ok(code)
}

fn compare(traces: &[PathBuf], gaps: &[f64], long_out: Option<&PathBuf>, asserts: &[String]) -> BenchResult<i32> {
    let files = traces.iter().map(|p| TraceFile::read(p)).collect::<BenchResult<Vec<_>>>()?;
    let orderings = asserts
        .iter()
        .map(|a| a.parse::<Ordering>().map_err(|e| BenchError::usage(format!("--assert `{a}`: {e}"))))
        .collect::<BenchResult<Vec<_>>>()?;
    let series = bundle(&files)?;
    print!("{}", table(&series, gaps));
    if let Some(path) = long_out {
        write_atomic(path, long_csv(&series).as_bytes())?;
    }
    let mut code = EXIT_OK;
    for o in &orderings {
        match o.check(&series)? {
            Ok(msg) => println!("PASS {msg}"),
            Err(msg) => {
                println!("FAIL {msg}");
                code = EXIT_INVARIANT;
            }
        }
    }
    Ok(code)
}

fn verify(fault: Option<FaultArg>, suites: &[String]) -> BenchResult<i32> {
    let opts = VerifyOptions { fault: fault.map(Fault::from) };
    let names: Vec<String> =
        if suites.is_empty() { SUITES.iter().map(|s| s.to_string()).collect() } else { suites.to_vec() };
    let reports = thread_pool()?.install(|| names.par_iter().map(|n| run_suite(n, opts)).collect::<Vec<_>>());
    let mut failed = 0;
    for r in reports {
        let r = r.map_err(|e| BenchError::usage(e.to_string()))?;
        failed += usize::from(!r.passed);
        println!("{}", serde_json::to_string(&r).expect("report serializes"));
    }
    eprintln!("{} suites, {failed} failed", names.len());
    Ok(if failed == 0 { EXIT_OK } else { EXIT_INVARIANT })
}

pub fn execute(cli: &Cli) -> BenchResult<i32> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Run { config, out, args } => {
            let (args, provenance) = merged(config.as_ref(), args)?;
            run_to_file(&args, &provenance, out)
        }
        Command::Grid { config, methods, seeds, out_dir, args } => grid(config.as_ref(), methods, seeds, out_dir, args),
        Command::Compare { traces, gaps, long_out, asserts } => compare(traces, gaps, long_out.as_ref(), asserts),
        Command::Verify { fault, suite } => verify(*fault, suite),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
