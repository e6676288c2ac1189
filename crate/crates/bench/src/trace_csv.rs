//! Trace CSV: `# key=value` metadata lines, a fixed header, one row per outer iteration.

use std::path::Path;

use ameta::Trace;

use crate::error::{BenchError, BenchResult};

pub const SCHEMA_VERSION: &str = "ambench-trace/1";
pub const HEADER: [&str; 10] =
    ["iter", "gap", "rel_gap", "wf_calls", "wg_calls", "inner_cum", "wall_ms", "eta", "sigma_res", "psi_gap"];
const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub iter: usize,
    /// `F − F*` when `F*` is known, otherwise the raw objective.
    pub gap: f64,
    pub rel_gap: Option<f64>,
    pub wf_calls: f64,
    pub wg_calls: f64,
    pub inner_cum: u64,
    pub wall_ms: Option<f64>,
    pub eta: Option<f64>,
    pub sigma_res: Option<f64>,
    pub psi_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceFile {
    /// Ordered metadata; the schema line is implicit.
    pub meta: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl TraceFile {
    /// Builds rows from a solver trace. `f0` is the starting objective.
    pub fn from_trace(trace: &Trace, f_star: Option<f64>, wall_clock: bool) -> Self {
        let f0 = trace.initial_objective;
        let rows = trace
            .records
            .iter()
            .map(|r| {
                let gap = f_star.map_or(r.objective, |fs| r.objective - fs);
                Row {
                    iter: r.iter,
                    gap,
                    rel_gap: f_star.map(|fs| gap / (f0 - fs)),
                    wf_calls: r.wf_calls,
                    wg_calls: r.wg_calls,
                    inner_cum: r.inner_cum,
                    wall_ms: if wall_clock { r.wall_ms } else { None },
                    eta: r.eta,
                    sigma_res: r.sigma_res,
                    psi_gap: r.psi_gap,
                }
            })
            .collect();
        Self { meta: Vec::new(), rows }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string().replace('\n', " ");
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta(key).and_then(|v| v.parse().ok())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# {SCHEMA_VERSION}\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.iter.to_string(),
                r.gap.to_string(),
                opt(r.rel_gap),
                r.wf_calls.to_string(),
                r.wg_calls.to_string(),
                r.inner_cum.to_string(),
                opt(r.wall_ms),
                opt(r.eta),
                opt(r.sigma_res),
                opt(r.psi_gap),
            ])
            .expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("ascii"));
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(l) if l.trim_start_matches('#').trim() == SCHEMA_VERSION => {}
            other => return Err(format!("expected `# {SCHEMA_VERSION}`, found {other:?}")),
        }
        let mut meta = Vec::new();
        for line in lines.take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim_start();
            let (k, v) = body.split_once('=').ok_or_else(|| format!("bad metadata line `{line}`"))?;
            meta.push((k.to_string(), v.to_string()));
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| e.to_string())?;
        if header.iter().ne(HEADER) {
            return Err(format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            let f = |i: usize| rec.get(i).ok_or_else(|| format!("short row {:?}", rec));
            let num =
                |i: usize| -> Result<f64, String> { f(i)?.parse().map_err(|e| format!("column {}: {e}", HEADER[i])) };
            let na = |i: usize| -> Result<Option<f64>, String> {
                if f(i)? == NA {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            rows.push(Row {
                iter: f(0)?.parse().map_err(|e| format!("iter: {e}"))?,
                gap: num(1)?,
                rel_gap: na(2)?,
                wf_calls: num(3)?,
                wg_calls: num(4)?,
                inner_cum: f(5)?.parse().map_err(|e| format!("inner_cum: {e}"))?,
                wall_ms: na(6)?,
                eta: na(7)?,
                sigma_res: na(8)?,
                psi_gap: na(9)?,
            });
        }
        Ok(Self { meta, rows })
    }

    pub fn read(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::parse(&text).map_err(|msg| BenchError::Format { path: path.into(), msg })
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}
