//! Centralized broker allocation driven by per-worker target queue lengths.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub worker_id: AgentId,
    pub reputation: f64,
    /// Highest reputation observed so far.
    pub reputation_peak: f64,
    pub capacity: u32,
    pub backlog: u64,
}

impl WorkerState {
    pub fn new(worker_id: AgentId, capacity: u32) -> Self {
        Self {
            worker_id,
            reputation: 0.5,
            reputation_peak: 0.5,
            capacity,
            backlog: 0,
        }
    }

    /// Sets the current reputation and folds it into the running peak.
    pub fn observe_reputation(&mut self, tau: f64) {
        self.reputation = tau;
        self.reputation_peak = self.reputation_peak.max(tau);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwordConfig {
    pub v: f64,
    pub n_weight: f64,
    pub max_gain: f64,
    pub task_cost: f64,
    pub rep_floor: f64,
    pub explore_prob: f64,
}

impl Default for SwordConfig {
    fn default() -> Self {
        Self {
            v: 2.0,
            n_weight: 1.0,
            max_gain: 1.0,
            task_cost: 0.2,
            rep_floor: 0.6,
            explore_prob: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    /// Tasks per worker, aligned with the input slice.
    pub counts: Vec<u32>,
    pub leftover: u64,
    pub explored: bool,
}

impl AllocationPlan {
    pub fn allocated(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn target_queue(w: &WorkerState, cfg: &SwordConfig) -> f64 {
    cfg.n_weight * w.capacity as f64 + cfg.v * cfg.max_gain * w.reputation_peak
}

pub fn desirability(w: &WorkerState, cfg: &SwordConfig) -> f64 {
    target_queue(w, cfg) - w.backlog as f64 - cfg.v * ((1.0 - w.reputation) * cfg.max_gain + cfg.task_cost)
}

/// Largest backlog the worker may ever hold.
pub fn queue_bound(w: &WorkerState, cfg: &SwordConfig) -> f64 {
    target_queue(w, cfg) + w.capacity as f64
}

pub fn check_queue_bound(w: &WorkerState, cfg: &SwordConfig) -> Result<()> {
    let bound = queue_bound(w, cfg);
    if w.backlog as f64 > bound + 1e-9 {
        return Err(CoreError::Invariant(format!(
            "worker {} backlog {} exceeds bound {bound:.3}",
            w.worker_id, w.backlog
        )));
    }
    Ok(())
}

fn rank(a: (&WorkerState, f64), b: (&WorkerState, f64)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(b.0.reputation.total_cmp(&a.0.reputation))
        .then(a.0.backlog.cmp(&b.0.backlog))
        .then(a.0.worker_id.cmp(&b.0.worker_id))
}

/// Exploitation-path allocation: greedy down the desirability ranking.
pub fn allocate_greedy(workers: &[WorkerState], incoming: u64, cfg: &SwordConfig) -> AllocationPlan {
    let mut counts = vec![0u32; workers.len()];
    let mut eligible: Vec<(usize, f64)> = workers
        .iter()
        .enumerate()
        .filter(|(_, w)| w.reputation >= cfg.rep_floor)
        .map(|(i, w)| (i, desirability(w, cfg)))
        .filter(|(_, d)| *d > 0.0)
        .collect();
    eligible.sort_by(|a, b| rank((&workers[a.0], a.1), (&workers[b.0], b.1)));
    let mut remaining = incoming;
    for (i, _) in eligible {
        if remaining == 0 {
            break;
        }
        let give = remaining.min(workers[i].capacity as u64);
        counts[i] = give as u32;
        remaining -= give;
    }
    AllocationPlan {
        counts,
        leftover: remaining,
        explored: false,
    }
}

/// Exploration-path allocation: each request goes to a uniformly random worker
/// with spare capacity. Workers already above their target queue are skipped
/// so the backlog bound survives steps in which they do not serve.
pub fn allocate_random<R: Rng + ?Sized>(
    workers: &[WorkerState],
    incoming: u64,
    cfg: &SwordConfig,
    rng: &mut R,
) -> AllocationPlan {
    let mut counts = vec![0u32; workers.len()];
    let mut open: Vec<usize> = (0..workers.len())
        .filter(|&i| workers[i].capacity > 0 && workers[i].backlog as f64 <= target_queue(&workers[i], cfg))
        .collect();
    let mut remaining = incoming;
    while remaining > 0 && !open.is_empty() {
        let k = rng.random_range(0..open.len());
        let i = open[k];
        counts[i] += 1;
        remaining -= 1;
        if counts[i] >= workers[i].capacity {
            open.swap_remove(k);
        }
    }
    AllocationPlan {
        counts,
        leftover: remaining,
        explored: true,
    }
}

/// One broker decision: exploration with probability `explore_prob`, otherwise greedy.
pub fn allocate<R: Rng + ?Sized>(
    workers: &[WorkerState],
    incoming: u64,
    cfg: &SwordConfig,
    rng: &mut R,
) -> AllocationPlan {
    if cfg.explore_prob > 0.0 && rng.random::<f64>() < cfg.explore_prob {
        allocate_random(workers, incoming, cfg, rng)
    } else {
        allocate_greedy(workers, incoming, cfg)
    }
}

pub fn step_queue(backlog: u64, served: u64, allocated: u64) -> Result<u64> {
    if served > backlog {
        return Err(CoreError::OverServed { served, backlog });
    }
    Ok(backlog - served + allocated)
}

/// Net utility of one step: gain per good completion minus cost per allocation.
pub fn step_welfare(successes: u64, allocations: u64, cfg: &SwordConfig) -> f64 {
    cfg.max_gain * successes as f64 - cfg.task_cost * allocations as f64
}

/// One row of the per-step allocation trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationTraceRow {
    pub t: u64,
    pub worker_id: AgentId,
    #[serde(rename = "D")]
    pub d: f64,
    pub theta: f64,
    #[serde(rename = "Q_before")]
    pub q_before: u64,
    #[serde(rename = "A")]
    pub a: u32,
    pub served: u64,
    #[serde(rename = "Q_after")]
    pub q_after: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(id: AgentId, tau: f64, cap: u32, q: u64) -> WorkerState {
        WorkerState {
            worker_id: id,
            reputation: tau,
            reputation_peak: tau,
            capacity: cap,
            backlog: q,
        }
    }

    #[test]
    fn defaults_match_table() {
        let c = SwordConfig::default();
        assert_eq!((c.max_gain, c.task_cost, c.n_weight, c.v, c.rep_floor, c.explore_prob), (1.0, 0.2, 1.0, 2.0, 0.6, 0.1));
    }

    #[test]
    fn target_queue_examples() {
        let c = SwordConfig::default();
        assert_eq!(target_queue(&w(0, 1.0, 5, 0), &c), 7.0);
        let z = SwordConfig { v: 0.0, ..c };
        assert_eq!(target_queue(&w(0, 1.0, 5, 0), &z), 5.0);
        assert_eq!(target_queue(&w(0, 0.0, 5, 0), &c), 5.0);
    }

    #[test]
    fn desirability_examples() {
        let c = SwordConfig::default();
        let mut x = w(0, 0.6, 5, 0);
        x.reputation_peak = 1.0;
        assert!((desirability(&x, &c) - 5.8).abs() < 1e-12);
        let y = w(0, 0.9, 5, 20);
        assert!(y.backlog as f64 > target_queue(&y, &c));
        assert!(desirability(&y, &c) < 0.0);
        let z = SwordConfig { task_cost: 0.0, ..c };
        let u = w(0, 1.0, 5, 0);
        assert_eq!(desirability(&u, &z), target_queue(&u, &z));
    }

    #[test]
    fn allocate_examples() {
        let c = SwordConfig { explore_prob: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ws = [w(0, 0.9, 5, 0)];
        let p = allocate(&ws, 0, &c, &mut rng);
        assert_eq!((p.counts.clone(), p.leftover), (vec![0], 0));
        let p = allocate(&ws, 3, &c, &mut rng);
        assert_eq!(p.counts, vec![3]);
        let ws = [w(0, 0.9, 5, 20), w(1, 0.9, 5, 0)];
        let p = allocate(&ws, 8, &c, &mut rng);
        assert_eq!(p.counts, vec![0, 5]);
        assert_eq!(p.leftover, 3);
        let ws = [w(0, 0.5, 5, 0)];
        assert_eq!(allocate(&ws, 4, &c, &mut rng).leftover, 4);
    }

    #[test]
    fn ties_break_on_reputation_then_backlog_then_id() {
        let c = SwordConfig { explore_prob: 0.0, v: 0.0, ..Default::default() };
        // V = 0 makes D = capacity - backlog for everyone.
        let ws = [w(3, 0.7, 5, 0), w(1, 0.8, 5, 0), w(2, 0.7, 5, 0)];
        let p = allocate_greedy(&ws, 7, &c);
        assert_eq!(p.counts, vec![0, 5, 2]);
        let ws = [w(0, 0.7, 6, 1), w(1, 0.7, 5, 0)];
        assert_eq!(allocate_greedy(&ws, 5, &c).counts, vec![0, 5]);
    }

    #[test]
    fn exploration_respects_caps() {
        let c = SwordConfig { explore_prob: 1.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ws: Vec<_> = (0..4).map(|i| w(i, 0.1, 2, 0)).collect();
        let p = allocate(&ws, 20, &c, &mut rng);
        assert!(p.explored);
        assert_eq!(p.counts, vec![2; 4]);
        assert_eq!(p.leftover, 12);
    }

    #[test]
    fn queue_examples() {
        assert_eq!(step_queue(3, 3, 2).unwrap(), 2);
        assert_eq!(step_queue(0, 0, 0).unwrap(), 0);
        assert_eq!(step_queue(10, 5, 5).unwrap(), 10);
        assert!(step_queue(2, 3, 0).is_err());
    }

    #[test]
    fn welfare_examples() {
        let c = SwordConfig::default();
        assert_eq!(step_welfare(0, 0, &c), 0.0);
        assert!((step_welfare(5, 5, &c) - 4.0).abs() < 1e-12);
        assert!((step_welfare(0, 5, &c) + 1.0).abs() < 1e-12);
    }
}
