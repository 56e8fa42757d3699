//! Evaluation statistics. Undefined values are `None`, never zero.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Normalized average utility loss of a success/failure stream.
pub fn naul(outcomes: &[bool], gain: f64, cost: f64) -> Option<f64> {
    let mut acc = NaulAccumulator::new(gain, cost);
    for &o in outcomes {
        acc.push(o);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaulAccumulator {
    pub gain: f64,
    pub cost: f64,
    pub successes: u64,
    pub total: u64,
}

impl NaulAccumulator {
    pub fn new(gain: f64, cost: f64) -> Self {
        Self {
            gain,
            cost,
            successes: 0,
            total: 0,
        }
    }

    pub fn push(&mut self, success: bool) {
        self.total += 1;
        if success {
            self.successes += 1;
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.successes += other.successes;
        self.total += other.total;
    }

    pub fn value(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let g_max = self.gain - self.cost;
        let g_min = -self.cost;
        let failures = self.total - self.successes;
        let mean = (self.successes as f64 * g_max + failures as f64 * g_min) / self.total as f64;
        let sigma = (mean - g_min) / (g_max - g_min);
        Some(1.0 - sigma)
    }
}

/// Share of the non-colluders' delegations captured by colluders.
pub fn collusion_power(tries: &[u64], interactions_each: u64) -> Option<f64> {
    if tries.is_empty() || interactions_each == 0 {
        return None;
    }
    let total: u64 = tries.iter().sum();
    Some(total as f64 / (tries.len() as f64 * interactions_each as f64))
}

/// Jain's index over task counts.
pub fn fairness_index(counts: &[u64]) -> Option<f64> {
    let mut acc = FairnessAccumulator::new(counts.len());
    for (i, &c) in counts.iter().enumerate() {
        acc.add(i, c);
    }
    acc.value()
}

/// Incremental Jain's index kept in exact integer sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessAccumulator {
    pub counts: Vec<u64>,
    sum: u128,
    sum_sq: u128,
}

impl FairnessAccumulator {
    pub fn new(n: usize) -> Self {
        Self {
            counts: vec![0; n],
            sum: 0,
            sum_sq: 0,
        }
    }

    pub fn add(&mut self, index: usize, k: u64) {
        let old = self.counts[index] as u128;
        let new = old + k as u128;
        self.counts[index] = new as u64;
        self.sum += k as u128;
        self.sum_sq += new * new - old * old;
    }

    pub fn value(&self) -> Option<f64> {
        if self.counts.is_empty() || self.sum == 0 {
            return None;
        }
        Some((self.sum as f64 * self.sum as f64) / (self.counts.len() as f64 * self.sum_sq as f64))
    }
}

pub fn time_avg_welfare(stream: &[f64]) -> Option<f64> {
    let mut acc = WelfareAccumulator::default();
    for &u in stream {
        acc.push(u);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WelfareAccumulator {
    pub sum: f64,
    pub steps: u64,
}

impl WelfareAccumulator {
    pub fn push(&mut self, u: f64) {
        self.sum += u;
        self.steps += 1;
    }

    pub fn value(&self) -> Option<f64> {
        if self.steps == 0 {
            None
        } else {
            Some(self.sum / self.steps as f64)
        }
    }
}

/// Latency of a trustee as a function of its load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Latency {
    /// `slope * x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `sum coeffs[k] * x^k`
    Polynomial(Vec<f64>),
}

impl Latency {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Latency::Affine { slope, intercept } => slope * x + intercept,
            Latency::Polynomial(c) => c.iter().rev().fold(0.0, |acc, k| acc * x + k),
        }
    }

    /// Checks monotonicity on a sample grid over `[0, upto]`.
    pub fn is_non_decreasing(&self, upto: f64) -> bool {
        let n = 64;
        let mut prev = self.eval(0.0);
        (1..=n).all(|i| {
            let y = self.eval(upto.max(1.0) * i as f64 / n as f64);
            let ok = y >= prev - 1e-12;
            prev = y;
            ok
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    /// Trustees the delegation passes through.
    pub trustees: Vec<usize>,
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelegationFlow {
    pub connections: Vec<Connection>,
    pub latency: Vec<Latency>,
    pub reputation: Vec<f64>,
}

impl DelegationFlow {
    pub fn loads(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.latency.len()];
        for c in &self.connections {
            for &e in &c.trustees {
                x[e] += c.flow;
            }
        }
        x
    }
}

/// Reputation-weighted congestion cost of a delegation flow.
pub fn mtg_cost(flow: &DelegationFlow) -> Result<f64> {
    if let Some(c) = flow.connections.iter().find(|c| c.flow < 0.0) {
        return Err(CoreError::OutOfRange { name: "flow", value: c.flow });
    }
    let loads = flow.loads();
    let mut v = 0.0;
    for (e, &x) in loads.iter().enumerate() {
        if !flow.latency[e].is_non_decreasing(x) {
            return Err(CoreError::DecreasingLatency(e));
        }
        if x == 0.0 {
            continue;
        }
        let tau = flow.reputation[e];
        if tau <= 0.0 {
            return Err(CoreError::OutOfRange { name: "reputation", value: tau });
        }
        v += x * flow.latency[e].eval(x) / tau;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCdf {
    /// `(x, fraction completed within x steps)` for x = 1..=horizon.
    pub points: Vec<(u64, f64)>,
    /// Fraction never completed within the horizon.
    pub dropped: f64,
}

impl CompletionCdf {
    pub fn at(&self, x: u64) -> Option<f64> {
        self.points.iter().find(|p| p.0 == x).map(|p| p.1)
    }
}

/// Completion-time distribution; `None` or times beyond `horizon` are dropped mass.
pub fn completion_cdf(times: &[Option<u64>], horizon: u64) -> CompletionCdf {
    if times.is_empty() {
        return CompletionCdf {
            points: Vec::new(),
            dropped: 0.0,
        };
    }
    let n = times.len() as f64;
    let mut hist = vec![0u64; horizon as usize + 1];
    let mut dropped = 0u64;
    for t in times {
        match t {
            Some(x) if *x <= horizon => hist[*x as usize] += 1,
            _ => dropped += 1,
        }
    }
    let mut cum = hist[0];
    let mut points = Vec::with_capacity(horizon as usize);
    for x in 1..=horizon {
        cum += hist[x as usize];
        points.push((x, cum as f64 / n));
    }
    CompletionCdf {
        points,
        dropped: dropped as f64 / n,
    }
}

/// Summary statistics of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub naul: Vec<(String, Option<f64>)>,
    pub collusion_power: Vec<(String, Option<f64>)>,
    pub fairness: Option<f64>,
    pub time_avg_welfare: Option<f64>,
    pub completion: Option<CompletionCdf>,
    pub worker_shares: Vec<u64>,
}
