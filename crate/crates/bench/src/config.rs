//! Run flags. Every flag can also be given in a TOML file; flags on the command line win.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, BenchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Am,
    AmRestart,
    Catalyst,
    Sliding,
    Fgm,
    Acdm,
    Ms,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Am => "am",
            Method::AmRestart => "am-restart",
            Method::Catalyst => "catalyst",
            Method::Sliding => "sliding",
            Method::Fgm => "fgm",
            Method::Acdm => "acdm",
            Method::Ms => "ms",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionArg {
    Exact,
    GradRatio,
    Contraction,
    SigmaResidual,
}

impl From<CriterionArg> for ameta::subsolver::Criterion {
    fn from(c: CriterionArg) -> Self {
        use ameta::subsolver::Criterion;
        match c {
            CriterionArg::Exact => Criterion::Exact,
            CriterionArg::GradRatio => Criterion::GradRatio,
            CriterionArg::Contraction => Criterion::Contraction,
            CriterionArg::SigmaResidual => Criterion::SigmaResidual,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerArg {
    /// Direct solve; quadratic subproblems only.
    Exact,
    Gd,
    Acdm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FstarMode {
    /// `known` when the problem file carries `F*`, `best-run` otherwise.
    Auto,
    Known,
    /// Best objective over a long reference FGM run and the run itself.
    BestRun,
    /// Report raw objective values.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, clap::Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunArgs {
    /// Problem file written by `generate`.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Name used in reports; defaults to the method plus its inner solver.
    #[arg(long)]
    pub label: Option<String>,
    /// Model order (am, am-restart).
    #[arg(long)]
    pub p: Option<u32>,
    /// Regularization H (am, am-restart, catalyst, sliding outer).
    #[arg(long)]
    pub h: Option<f64>,
    /// Smoothness constant L (fgm, ms).
    #[arg(long)]
    pub l: Option<f64>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    #[arg(long, value_enum)]
    pub inner: Option<InnerArg>,
    /// Inexactness level σ (am diagnostics, ms).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Outer iteration budget.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Stop at this relative gap `(F − F*)/(F₀ − F*)`.
    #[arg(long)]
    pub target_rel_gap: Option<f64>,
    /// Seed of the coordinate sampler.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coordinate sampling exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Cost of one full gradient in coordinate-gradient units.
    #[arg(long)]
    pub weight: Option<f64>,
    #[arg(long, value_enum)]
    pub fstar_mode: Option<FstarMode>,
    /// Iterations of the reference FGM run in best-run mode.
    #[arg(long)]
    pub fstar_iters: Option<usize>,
    /// Uniform convexity exponent r for restarts.
    #[arg(long)]
    pub r: Option<f64>,
    /// Uniform convexity modulus for restarts.
    #[arg(long)]
    pub sigma_r: Option<f64>,
    /// Restart stage count; derived from the target when absent.
    #[arg(long)]
    pub stages: Option<usize>,
    /// Sliding inner regularization as a multiple of 2L_g.
    #[arg(long)]
    pub hg_scale: Option<f64>,
    /// Track the potential gap (am).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub diagnostics: Option<bool>,
    /// Record wall time; off by default so traces are reproducible byte for byte.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub wall_clock: Option<bool>,
}

impl RunArgs {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn read(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text).map_err(|msg| BenchError::Format { path: path.into(), msg })
    }

    /// Fields set here replace those of `base`.
    pub fn over(&self, base: &RunArgs) -> RunArgs {
        let mut table = to_table(base);
        table.extend(to_table(self));
        toml::Value::Table(table).try_into().expect("merged tables of one type")
    }

    /// One-line `key = value; …` rendering for trace metadata.
    pub fn inline(&self) -> String {
        to_table(self).iter().map(|(k, v)| format!("{k} = {v}")).collect::<Vec<_>>().join("; ")
    }

    pub fn is_empty(&self) -> bool {
        to_table(self).is_empty()
    }
}

fn to_table(args: &RunArgs) -> toml::Table {
    toml::Table::try_from(args).expect("flat struct serializes")
}
