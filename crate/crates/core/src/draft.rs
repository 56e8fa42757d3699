//! Trustee-side admission control over per-context request queues.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::reputation::RatingEvent;
use crate::{AgentId, Step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    pub context_id: usize,
    pub max_gain: f64,
    pub effort: u32,
    pub deadline: u64,
}

/// The five task types: effort tracks gain, tighter deadlines for bigger tasks.
pub fn default_contexts() -> Vec<ContextSpec> {
    [(5.0, 5, 1), (4.0, 4, 2), (3.0, 3, 2), (2.0, 2, 3), (1.0, 1, 3)]
        .iter()
        .enumerate()
        .map(|(i, &(g, e, t))| ContextSpec {
            context_id: i,
            max_gain: g,
            effort: e,
            deadline: t,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueuedTask {
    pub request_id: u64,
    pub truster_id: AgentId,
    pub context: usize,
    pub issued_at: Step,
    pub accepted_at: Step,
    pub deadline: Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub task: QueuedTask,
    pub completed_at: Step,
    pub quality_ok: bool,
}

impl Completion {
    pub fn on_time(&self) -> bool {
        self.completed_at <= self.task.deadline
    }

    pub fn to_event(&self, trustee_id: AgentId) -> RatingEvent {
        RatingEvent {
            event_id: self.task.request_id,
            truster_id: self.task.truster_id,
            trustee_id,
            context_id: self.task.context as u16,
            issued_at: self.task.issued_at,
            started_at: self.task.accepted_at,
            completed_at: Some(self.completed_at),
            deadline: self.task.deadline,
            quality_ok: self.quality_ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrusteeState {
    pub trustee_id: AgentId,
    /// Effort units available per step.
    pub effort_budget: u32,
    pub backlog: Vec<u64>,
    pub reputation: Vec<f64>,
    pub fifo: VecDeque<QueuedTask>,
}

impl TrusteeState {
    pub fn new(trustee_id: AgentId, effort_budget: u32, contexts: usize) -> Self {
        Self {
            trustee_id,
            effort_budget,
            backlog: vec![0; contexts],
            reputation: vec![0.5; contexts],
            fifo: VecDeque::new(),
        }
    }

    pub fn enqueue(&mut self, task: QueuedTask) {
        self.backlog[task.context] += 1;
        self.fifo.push_back(task);
    }

    pub fn total_backlog(&self) -> u64 {
        self.backlog.iter().sum()
    }

    /// Removes queued tasks whose deadline has passed.
    pub fn sweep(&mut self, now: Step) -> Vec<QueuedTask> {
        let mut dropped = Vec::new();
        self.fifo.retain(|t| {
            if t.deadline < now {
                dropped.push(*t);
                false
            } else {
                true
            }
        });
        for t in &dropped {
            self.backlog[t.context] -= 1;
        }
        dropped
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptPlan {
    pub accepted: Vec<u64>,
    pub rejected: Vec<u64>,
    /// Availability score per context.
    pub scores: Vec<f64>,
    pub budget_left: u32,
}

pub fn availability_score(backlog: u64, tau: f64, max_gain: f64, v: f64) -> f64 {
    v * tau * max_gain - backlog as f64
}

/// Decides how many of the incoming requests per context to take this step.
pub fn accept_plan(state: &TrusteeState, incoming: &[u64], specs: &[ContextSpec], v: f64) -> AcceptPlan {
    let n = specs.len();
    let scores: Vec<f64> = (0..n)
        .map(|c| availability_score(state.backlog[c], state.reputation[c], specs[c].max_gain, v))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let per_effort = |c: usize| scores[c] / specs[c].effort as f64;
    order.sort_by(|&a, &b| {
        per_effort(b)
            .total_cmp(&per_effort(a))
            .then(specs[b].max_gain.total_cmp(&specs[a].max_gain))
            .then(a.cmp(&b))
    });
    let mut budget = state.effort_budget;
    let mut accepted = vec![0u64; n];
    for c in order {
        if per_effort(c) <= 0.0 || incoming[c] == 0 {
            continue;
        }
        let fit = (budget / specs[c].effort) as u64;
        let take = incoming[c].min(fit);
        accepted[c] = take;
        budget -= take as u32 * specs[c].effort;
    }
    let rejected = (0..n).map(|c| incoming[c] - accepted[c]).collect();
    AcceptPlan {
        accepted,
        rejected,
        scores,
        budget_left: budget,
    }
}

/// Serves queued tasks in acceptance order while their effort fits the budget.
///
/// Only tasks accepted before `now` are eligible. Service stops at the first
/// task that does not fit.
pub fn serve_fifo<R: Rng + ?Sized>(
    state: &mut TrusteeState,
    budget: u32,
    specs: &[ContextSpec],
    success_prob: f64,
    now: Step,
    rng: &mut R,
) -> Vec<Completion> {
    let mut left = budget;
    let mut done = Vec::new();
    while let Some(head) = state.fifo.front() {
        let e = specs[head.context].effort;
        if head.accepted_at >= now || e > left {
            break;
        }
        let task = state.fifo.pop_front().expect("front exists");
        left -= e;
        state.backlog[task.context] -= 1;
        done.push(Completion {
            task,
            completed_at: now,
            quality_ok: rng.random::<f64>() < success_prob,
        });
    }
    done
}

/// One row of the per-step acceptance trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptTraceRow {
    pub t: u64,
    pub trustee_id: AgentId,
    pub context_id: usize,
    pub a: f64,
    pub a_over_e: f64,
    pub lambda: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub budget_left: u32,
}
