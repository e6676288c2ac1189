//! Cross-method reports over trace files that share a problem.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{BenchError, BenchResult};
use crate::trace_csv::TraceFile;

/// Cost axes a trace can be read along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Iter,
    Wf,
    Wg,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Iter, Axis::Wf, Axis::Wg];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Iter => "iter",
            Axis::Wf => "wf_calls",
            Axis::Wg => "wg_calls",
        }
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "iter" => Ok(Axis::Iter),
            "wf" | "wf_calls" => Ok(Axis::Wf),
            "wg" | "wg_calls" => Ok(Axis::Wg),
            _ => Err(format!("unknown axis `{s}` (iter, wf, wg)")),
        }
    }
}

/// A trace with gaps re-based to the bundle's reference optimum.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    /// `(iter, wf, wg, rel_gap)` per row.
    pub points: Vec<(f64, f64, f64, f64)>,
}

impl Series {
    fn cost(&self, i: usize, axis: Axis) -> f64 {
        let p = self.points[i];
        match axis {
            Axis::Iter => p.0,
            Axis::Wf => p.1,
            Axis::Wg => p.2,
        }
    }

    /// Cost along `axis` at the first row whose relative gap is at most `target`.
    pub fn cost_to(&self, target: f64, axis: Axis) -> Option<f64> {
        self.points.iter().position(|p| p.3 <= target).map(|i| self.cost(i, axis))
    }
}

/// Re-bases every trace to the smallest objective seen anywhere in the bundle.
pub fn bundle(traces: &[TraceFile]) -> BenchResult<Vec<Series>> {
    let first = traces.first().ok_or_else(|| BenchError::usage("compare needs at least one trace"))?;
    let hash = first.meta("problem_hash").unwrap_or_default();
    let mut raw = Vec::with_capacity(traces.len());
    for (i, t) in traces.iter().enumerate() {
        if t.meta("problem_hash").unwrap_or_default() != hash {
            return Err(BenchError::usage(format!("trace {} was run on a different problem (hash mismatch)", i + 1)));
        }
        let fs = t.meta_f64("fstar").ok_or_else(|| {
            BenchError::usage(format!("trace {} has no reference optimum; rerun with --fstar-mode", i + 1))
        })?;
        let f0 = t.meta_f64("f0").ok_or_else(|| BenchError::usage(format!("trace {} lacks f0", i + 1)))?;
        let label = t.meta("label").or(t.meta("method")).unwrap_or("?").to_string();
        let objectives: Vec<f64> = t.rows.iter().map(|r| r.gap + fs).collect();
        raw.push((label, f0, fs, objectives));
    }
    let f_star = raw
        .iter()
        .flat_map(|(_, _, fs, obj)| std::iter::once(*fs).chain(obj.iter().copied()))
        .fold(f64::INFINITY, f64::min);
    Ok(raw
        .into_iter()
        .zip(traces)
        .map(|((label, f0, _, obj), t)| {
            let scale = f0 - f_star;
            let points = t
                .rows
                .iter()
                .zip(obj)
                .map(|(r, f)| (r.iter as f64, r.wf_calls, r.wg_calls, (f - f_star) / scale))
                .collect();
            Series { label, points }
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x}"))
}

/// Cost to each target gap per series, with ratios against the first series.
pub fn table(series: &[Series], targets: &[f64]) -> String {
    let mut out = String::from("label,target,iter,wf_calls,wg_calls,wf_ratio,wg_ratio\n");
    let base = &series[0];
    for s in series {
        for &t in targets {
            let ratio = |axis| match (s.cost_to(t, axis), base.cost_to(t, axis)) {
                (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                (Some(a), Some(b)) if a == b => Some(1.0),
                _ => None,
            };
            let _ = writeln!(
                out,
                "{},{t:e},{},{},{},{},{}",
                s.label,
                fmt_opt(s.cost_to(t, Axis::Iter)),
                fmt_opt(s.cost_to(t, Axis::Wf)),
                fmt_opt(s.cost_to(t, Axis::Wg)),
                fmt_opt(ratio(Axis::Wf)),
                fmt_opt(ratio(Axis::Wg)),
            );
        }
    }
    out
}

/// Long format for plotting: `method,axis,x,y` with `y` the relative gap.
pub fn long_csv(series: &[Series]) -> String {
    let mut out = String::from("method,axis,x,y\n");
    for s in series {
        for axis in Axis::ALL {
            for i in 0..s.points.len() {
                let _ = writeln!(out, "{},{},{},{}", s.label, axis.name(), s.cost(i, axis), s.points[i].3);
            }
        }
    }
    out
}

/// `LABEL:AXIS < LABEL:AXIS @ GAP`, with `<` or `<=`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    pub lhs: (String, Axis),
    pub strict: bool,
    pub rhs: (String, Axis),
    pub target: f64,
}

impl FromStr for Ordering {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (body, target) = s.rsplit_once('@').ok_or("missing `@GAP`")?;
        let target: f64 = target.trim().parse().map_err(|e| format!("gap: {e}"))?;
        let (lhs, rhs, strict) = if let Some((l, r)) = body.split_once("<=") {
            (l, r, false)
        } else if let Some((l, r)) = body.split_once('<') {
            (l, r, true)
        } else {
            return Err("expected `<` or `<=`".into());
        };
        let side = |part: &str| -> Result<(String, Axis), String> {
            let (label, axis) = part.trim().rsplit_once(':').ok_or(format!("`{part}` needs LABEL:AXIS"))?;
            Ok((label.to_string(), axis.parse()?))
        };
        Ok(Self { lhs: side(lhs)?, strict, rhs: side(rhs)?, target })
    }
}

impl Ordering {
    /// `Ok(message)` when the ordering holds, `Err(message)` otherwise.
    pub fn check(&self, series: &[Series]) -> BenchResult<Result<String, String>> {
        let find = |label: &str| {
            series
                .iter()
                .find(|s| s.label == label)
                .ok_or_else(|| BenchError::usage(format!("no trace labelled `{label}`")))
        };
        let a = find(&self.lhs.0)?.cost_to(self.target, self.lhs.1);
        let b = find(&self.rhs.0)?.cost_to(self.target, self.rhs.1);
        let op = if self.strict { "<" } else { "<=" };
        let desc = format!(
            "{}:{} = {} {op} {}:{} = {} at {:e}",
            self.lhs.0,
            self.lhs.1.name(),
            fmt_opt(a),
            self.rhs.0,
            self.rhs.1.name(),
            fmt_opt(b),
            self.target
        );
        let holds = match (a, b) {
            (Some(a), Some(b)) => {
                if self.strict {
                    a < b
                } else {
                    a <= b
                }
            }
            (Some(_), None) => true,
            (None, _) => false,
        };
        Ok(if holds { Ok(desc) } else { Err(desc) })
    }
}
