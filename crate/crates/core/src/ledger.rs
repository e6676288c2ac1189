//! Oracle-call accounting and per-iteration trace records.

use serde::{Deserialize, Serialize};

/// Nesting level that issued an oracle call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Outer,
    Inner,
}

/// Which function of `F = f + g` was queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    F,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CallKind {
    FullGrad,
    CoordGrad,
    Value,
    Hessian,
}

const LEVELS: [Level; 2] = [Level::Outer, Level::Inner];
const SIDES: [Side; 2] = [Side::F, Side::G];
const KINDS: [CallKind; 4] = [CallKind::FullGrad, CallKind::CoordGrad, CallKind::Value, CallKind::Hessian];

/// Counters keyed by `(level, side, kind)`.
///
/// Weighted totals express everything in single-coordinate units: a full gradient costs
/// `weight_full` coordinate calls, so `weighted = coord + weight_full · full`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLedger {
    counts: [[[u64; 4]; 2]; 2],
    weight_full: f64,
}

impl Default for OracleLedger {
    fn default() -> Self {
        Self::new(2.5)
    }
}

impl OracleLedger {
    pub fn new(weight_full: f64) -> Self {
        Self { counts: [[[0; 4]; 2]; 2], weight_full }
    }

    pub fn weight_full(&self) -> f64 {
        self.weight_full
    }

    fn index(level: Level, side: Side, kind: CallKind) -> (usize, usize, usize) {
        (level as usize, side as usize, kind as usize)
    }

    pub fn record(&mut self, level: Level, side: Side, kind: CallKind, n: u64) {
        let (l, s, k) = Self::index(level, side, kind);
        self.counts[l][s][k] += n;
    }

    pub fn count(&self, level: Level, side: Side, kind: CallKind) -> u64 {
        let (l, s, k) = Self::index(level, side, kind);
        self.counts[l][s][k]
    }

    /// Count summed over both levels.
    pub fn total(&self, side: Side, kind: CallKind) -> u64 {
        LEVELS.iter().map(|&l| self.count(l, side, kind)).sum()
    }

    pub fn weighted_at(&self, level: Level, side: Side) -> f64 {
        self.count(level, side, CallKind::CoordGrad) as f64
            + self.weight_full * self.count(level, side, CallKind::FullGrad) as f64
    }

    /// Weighted gradient work on `side`, in coordinate-call units.
    pub fn weighted(&self, side: Side) -> f64 {
        LEVELS.iter().map(|&l| self.weighted_at(l, side)).sum()
    }

    pub fn weighted_total(&self) -> f64 {
        SIDES.iter().map(|&s| self.weighted(s)).sum()
    }

    /// Adds every counter of `other` after relabeling; entries mapped to `None` are dropped.
    pub fn absorb(&mut self, other: &OracleLedger, relabel: impl Fn(Level, Side) -> Option<(Level, Side)>) {
        for &l in &LEVELS {
            for &s in &SIDES {
                if let Some((nl, ns)) = relabel(l, s) {
                    for &k in &KINDS {
                        self.record(nl, ns, k, other.count(l, s, k));
                    }
                }
            }
        }
    }

    /// Every nonzero counter, for reporting.
    pub fn entries(&self) -> Vec<(Level, Side, CallKind, u64)> {
        let mut out = Vec::new();
        for &l in &LEVELS {
            for &s in &SIDES {
                for &k in &KINDS {
                    let c = self.count(l, s, k);
                    if c > 0 {
                        out.push((l, s, k, c));
                    }
                }
            }
        }
        out
    }
}

/// One row of a convergence trace.
///
/// `objective` is the raw `F` value at the iterate; gaps are formed when the trace is
/// written, once the reference optimum is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub wf_calls: f64,
    pub wg_calls: f64,
    pub inner_cum: u64,
    pub wall_ms: Option<f64>,
    pub eta: Option<f64>,
    pub sigma_res: Option<f64>,
    pub psi_gap: Option<f64>,
}

impl TraceRecord {
    pub fn new(iter: usize, objective: f64, ledger: &OracleLedger, inner_cum: u64) -> Self {
        Self {
            iter,
            objective,
            wf_calls: ledger.weighted(Side::F),
            wg_calls: ledger.weighted(Side::G),
            inner_cum,
            wall_ms: None,
            eta: None,
            sigma_res: None,
            psi_gap: None,
        }
    }
}

/// A complete run: starting objective plus one record per outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub method: String,
    pub initial_objective: f64,
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(method: impl Into<String>, initial_objective: f64) -> Self {
        Self { method: method.into(), initial_objective, records: Vec::new() }
    }

    pub fn best_objective(&self) -> f64 {
        self.records.iter().map(|r| r.objective).fold(self.initial_objective, f64::min)
    }
}
