//! Multi-context delegation test-bed. Trusters route requests greedily by
//! reputation; trustees either take everything or run admission control.

use equitrust_core::draft::{accept_plan, default_contexts, serve_fifo, AcceptTraceRow, ContextSpec, QueuedTask, TrusteeState};
use equitrust_core::metrics::{completion_cdf, fairness_index, WelfareAccumulator};
use equitrust_core::reputation::{Aggregation, BetaEvidence, RatingEvent, ReputationLedger};
use equitrust_core::AgentId;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{hon_x_groups, WorkerGroup};
use crate::rng::{domain, stream, SimRng};
use crate::{csv_text, mean_wait, Policy, RunOutput, Series, SimError, SimResult, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DraftConfig {
    pub trustees: usize,
    pub trusters: usize,
    pub hon_x: u32,
    pub steps: u64,
    pub v: f64,
    pub explore: f64,
    /// Reputation a trustee needs to be exploited.
    pub rep_threshold: f64,
    /// Cost of an accepted task as a fraction of its gain.
    pub cost_fraction: f64,
    pub contexts: Vec<ContextSpec>,
    pub policies: Vec<Policy>,
    pub clean_sweep: bool,
    pub acceptance_trace: bool,
}

impl Default for DraftConfig {
    fn default() -> Self {
        Self {
            trustees: 100,
            trusters: 250,
            hon_x: 50,
            steps: 1000,
            v: 100.0,
            explore: 0.15,
            rep_threshold: 2.0 / 3.0,
            cost_fraction: 0.2,
            contexts: default_contexts(),
            policies: vec![Policy::Draft, Policy::Trd],
            clean_sweep: false,
            acceptance_trace: false,
        }
    }
}

impl DraftConfig {
    pub fn validate(&self) -> SimResult<()> {
        if self.trustees == 0 || self.contexts.is_empty() {
            return Err(SimError::Config("need trustees and at least one context".into()));
        }
        if self.v <= 0.0 {
            return Err(SimError::Config(format!("V must be positive, got {}", self.v)));
        }
        if self.hon_x > 100 || !(0.0..=1.0).contains(&self.explore) {
            return Err(SimError::Config("hon_x above 100 or exploration outside [0, 1]".into()));
        }
        for (i, c) in self.contexts.iter().enumerate() {
            if c.context_id != i || c.effort == 0 {
                return Err(SimError::Config(format!("context {i} needs id {i} and positive effort")));
            }
        }
        if self.policies.is_empty() || self.policies.iter().any(|p| !matches!(p, Policy::Draft | Policy::Trd)) {
            return Err(SimError::Config("policies must be drawn from draft and trd".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Pending {
    request_id: u64,
    issued: u64,
    /// Trustees that turned this request down.
    refused: Vec<usize>,
}

struct Society {
    policy: Policy,
    trustees: Vec<TrusteeState>,
    rngs: Vec<SimRng>,
    /// Request not yet accepted anywhere, indexed `[truster][context]`.
    pending: Vec<Vec<Option<Pending>>>,
    /// Indexed `[truster][context][trustee]`.
    local: Vec<Vec<Vec<BetaEvidence>>>,
    truster_rngs: Vec<SimRng>,
    ledger: ReputationLedger,
    next_id: u64,
    welfare: WelfareAccumulator,
    completed: Vec<u64>,
    /// Effort units of completed work per trustee.
    work: Vec<u64>,
    on_time: u64,
    late: u64,
    swept: u64,
    waits: Vec<Option<u64>>,
    backlog_sum: f64,
    backlog_samples: u64,
    trace: Vec<AcceptTraceRow>,
    hon_history: Vec<Vec<f64>>,
}

impl Society {
    fn new(policy: Policy, groups: &[WorkerGroup], cfg: &DraftConfig, seed: u64, salt: u64) -> Self {
        let k = cfg.contexts.len();
        Self {
            policy,
            trustees: groups
                .iter()
                .enumerate()
                .map(|(i, g)| TrusteeState::new(i as AgentId, g.effort_capacity(), k))
                .collect(),
            rngs: (0..groups.len()).map(|i| stream(seed, domain::PROVIDER, i as u64)).collect(),
            pending: vec![vec![None; k]; cfg.trusters],
            local: vec![vec![vec![BetaEvidence::default(); groups.len()]; k]; cfg.trusters],
            truster_rngs: (0..cfg.trusters).map(|i| stream(seed, domain::CONSUMER, salt | i as u64)).collect(),
            ledger: ReputationLedger::new(Aggregation::MeanOfLocals),
            next_id: 0,
            welfare: WelfareAccumulator::default(),
            completed: vec![0; groups.len()],
            work: vec![0; groups.len()],
            on_time: 0,
            late: 0,
            swept: 0,
            waits: Vec::new(),
            backlog_sum: 0.0,
            backlog_samples: 0,
            trace: Vec::new(),
            hon_history: Vec::new(),
        }
    }

    fn choose(&mut self, i: usize, c: usize, ranking: &[usize], reps: &[f64], cfg: &DraftConfig) -> usize {
        let n = self.trustees.len();
        let p = self.pending[i][c].as_ref().expect("routing a pending request");
        let rng = &mut self.truster_rngs[i];
        let explore = rng.random::<f64>() < cfg.explore;
        if !explore {
            let hit = ranking.iter().copied().find(|&j| {
                reps[j] > cfg.rep_threshold && self.local[i][c][j].total() > 0 && !p.refused.contains(&j)
            });
            if let Some(j) = hit {
                return j;
            }
        }
        if p.refused.len() >= n {
            return rng.random_range(0..n);
        }
        loop {
            let j = rng.random_range(0..n);
            if !p.refused.contains(&j) {
                return j;
            }
        }
    }

    fn step(&mut self, now: u64, cfg: &DraftConfig, groups: &[WorkerGroup]) -> SimResult<()> {
        let n = self.trustees.len();
        let k = cfg.contexts.len();
        let mut cost = 0.0;
        let mut gain = 0.0;

        // Shared reputation per context, best first.
        let reps: Vec<Vec<f64>> = (0..k)
            .map(|c| (0..n).map(|j| self.ledger.reputation_of(j as AgentId, c as u16)).collect())
            .collect();
        let rankings: Vec<Vec<usize>> = reps
            .iter()
            .map(|r| {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| r[b].total_cmp(&r[a]).then(a.cmp(&b)));
                order
            })
            .collect();

        // Route new and retried requests.
        let mut inbox: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); k]; n];
        for i in 0..self.pending.len() {
            for c in 0..k {
                if self.pending[i][c].is_none() {
                    self.pending[i][c] = Some(Pending {
                        request_id: self.next_id,
                        issued: now,
                        ..Default::default()
                    });
                    self.next_id += 1;
                }
                let j = self.choose(i, c, &rankings[c], &reps[c], cfg);
                inbox[j][c].push(i);
            }
        }

        // Accept or reject.
        for j in 0..n {
            let st = &mut self.trustees[j];
            for c in 0..k {
                st.reputation[c] = reps[c][j];
            }
            let incoming: Vec<u64> = inbox[j].iter().map(|v| v.len() as u64).collect();
            let plan = match self.policy {
                Policy::Draft => accept_plan(st, &incoming, &cfg.contexts, cfg.v),
                _ => {
                    let mut p = accept_plan(st, &vec![0; k], &cfg.contexts, cfg.v);
                    p.accepted = incoming.clone();
                    p.rejected = vec![0; k];
                    p
                }
            };
            if self.policy == Policy::Draft {
                let effort: u64 = (0..k).map(|c| plan.accepted[c] * cfg.contexts[c].effort as u64).sum();
                if effort > st.effort_budget as u64 || (0..k).any(|c| plan.accepted[c] > incoming[c]) {
                    return Err(SimError::Invariant(format!("trustee {j} over-accepted at step {now}")));
                }
            }
            if cfg.acceptance_trace {
                for c in 0..k {
                    self.trace.push(AcceptTraceRow {
                        t: now,
                        trustee_id: j as AgentId,
                        context_id: c,
                        a: plan.scores[c],
                        a_over_e: plan.scores[c] / cfg.contexts[c].effort as f64,
                        lambda: incoming[c],
                        accepted: plan.accepted[c],
                        rejected: plan.rejected[c],
                        budget_left: plan.budget_left,
                    });
                }
            }
            for c in 0..k {
                let mut senders = std::mem::take(&mut inbox[j][c]);
                senders.shuffle(&mut self.rngs[j]);
                for (idx, i) in senders.into_iter().enumerate() {
                    if (idx as u64) < plan.accepted[c] {
                        let p = self.pending[i][c].take().expect("sender has a pending request");
                        self.trustees[j].enqueue(QueuedTask {
                            request_id: p.request_id,
                            truster_id: i as AgentId,
                            context: c,
                            issued_at: p.issued,
                            accepted_at: now,
                            deadline: now + cfg.contexts[c].deadline,
                        });
                        cost += cfg.cost_fraction * cfg.contexts[c].max_gain;
                    } else if let Some(p) = self.pending[i][c].as_mut() {
                        p.refused.push(j);
                    }
                }
            }
        }

        // Serve and rate.
        for j in 0..n {
            let budget = self.trustees[j].effort_budget;
            let prob = groups[j].success_prob();
            let done = serve_fifo(&mut self.trustees[j], budget, &cfg.contexts, prob, now, &mut self.rngs[j]);
            for d in done {
                let positive = self.ledger.record_outcome(&d.to_event(j as AgentId))?;
                let c = d.task.context;
                let i = d.task.truster_id as usize;
                self.local[i][c][j].add(positive);
                self.completed[j] += 1;
                self.work[j] += cfg.contexts[c].effort as u64;
                if d.on_time() {
                    self.on_time += 1;
                } else {
                    self.late += 1;
                }
                if positive {
                    gain += cfg.contexts[c].max_gain;
                }
                self.waits.push(Some(d.completed_at - d.task.accepted_at));
            }
        }

        if cfg.clean_sweep {
            for j in 0..n {
                for task in self.trustees[j].sweep(now + 1) {
                    let ev = RatingEvent {
                        event_id: task.request_id,
                        truster_id: task.truster_id,
                        trustee_id: j as AgentId,
                        context_id: task.context as u16,
                        issued_at: task.issued_at,
                        started_at: task.accepted_at,
                        completed_at: None,
                        deadline: task.deadline,
                        quality_ok: false,
                    };
                    self.ledger.record_outcome(&ev)?;
                    let i = task.truster_id as usize;
                    self.local[i][task.context][j].add(false);
                    self.swept += 1;
                    self.waits.push(None);
                }
            }
        }

        self.welfare.push(gain - cost);
        let total: u64 = self.trustees.iter().map(|t| t.total_backlog()).sum();
        self.backlog_sum += total as f64 / n as f64;
        self.backlog_samples += 1;
        let hon: Vec<f64> = (0..n)
            .filter(|&j| groups[j] == WorkerGroup::Hon)
            .map(|j| (0..k).map(|c| reps[c][j]).sum::<f64>() / k as f64)
            .collect();
        self.hon_history.push(hon);
        Ok(())
    }
}

pub struct DraftWorld {
    cfg: DraftConfig,
    t: u64,
    groups: Vec<WorkerGroup>,
    societies: Vec<Society>,
}

impl DraftWorld {
    pub fn new(cfg: DraftConfig, seed: u64) -> SimResult<Self> {
        cfg.validate()?;
        let mut groups = hon_x_groups(cfg.trustees, cfg.hon_x);
        groups.shuffle(&mut stream(seed, domain::SETUP, 2));
        // Both societies see the same truster streams so they differ only by policy.
        let societies = cfg.policies.iter().map(|&p| Society::new(p, &groups, &cfg, seed, 0)).collect();
        Ok(Self {
            cfg,
            t: 0,
            groups,
            societies,
        })
    }
}

impl World for DraftWorld {
    fn advance_step(&mut self) -> SimResult<()> {
        for s in &mut self.societies {
            s.step(self.t, &self.cfg, &self.groups)?;
        }
        self.t += 1;
        Ok(())
    }

    fn clock(&self) -> u64 {
        self.t
    }

    fn finish(self) -> RunOutput {
        let mut out = RunOutput::default();
        let hon: Vec<usize> = (0..self.groups.len()).filter(|&j| self.groups[j] == WorkerGroup::Hon).collect();
        let horizon = self.cfg.contexts.iter().map(|c| c.deadline).max().unwrap_or(1) * 4;
        for s in &self.societies {
            let p = s.policy.id();
            out.push(format!("welfare:{p}"), s.welfare.value());
            let work: Vec<u64> = hon.iter().map(|&j| s.work[j]).collect();
            out.push(format!("fairness_hon:{p}"), fairness_index(&work));
            let counts: Vec<u64> = hon.iter().map(|&j| s.completed[j]).collect();
            out.push(format!("fairness_hon_tasks:{p}"), fairness_index(&counts));
            let done = s.on_time + s.late;
            out.push(format!("on_time_fraction:{p}"), (done > 0).then(|| s.on_time as f64 / done as f64));
            out.push(format!("late_completions:{p}"), Some(s.late as f64));
            out.push(format!("swept:{p}"), Some(s.swept as f64));
            let overdue = s.trustees.iter().flat_map(|tr| tr.fifo.iter()).filter(|t| t.deadline < self.t).count();
            out.push(format!("overdue_pending:{p}"), Some(overdue as f64));
            out.push(
                format!("backlog:{p}"),
                (s.backlog_samples > 0).then(|| s.backlog_sum / s.backlog_samples as f64),
            );
            out.push(format!("wait_mean:{p}"), mean_wait(&s.waits));
            let cdf = completion_cdf(&s.waits, horizon);
            out.series.push(Series {
                name: format!("served_within:{p}"),
                points: cdf.points.iter().map(|&(x, f)| (x as f64, f)).collect(),
            });
            if let Some(first) = hon.first() {
                let idx = hon.iter().position(|j| j == first).unwrap_or(0);
                out.series.push(Series {
                    name: format!("reputation:{p}:{first}"),
                    points: s.hon_history.iter().enumerate().map(|(t, r)| (t as f64, r[idx])).collect(),
                });
            }
            if self.cfg.acceptance_trace && s.policy == Policy::Draft {
                out.traces.push(("acceptance".into(), csv_text(&s.trace)));
            }
        }
        out
    }
}
