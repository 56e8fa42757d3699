//! Crowdsourcing test-bed. Requesters publish HIT groups and workers serve
//! them under one allocation policy per system; systems either run side by
//! side on copies of the population or compete for the same agents.

use std::collections::VecDeque;

use equitrust_core::baselines::{
    explore_low_observation, greedy_hit_allocate, h2010e_allocate, m2009e_allocate, HitPlan, KnowledgeRecord,
    LongShortTrust,
};
use equitrust_core::metrics::{completion_cdf, fairness_index, WelfareAccumulator};
use equitrust_core::reputation::{Aggregation, BetaEvidence, RatingEvent, ReputationLedger};
use equitrust_core::sword::{allocate, check_queue_bound, desirability, target_queue, AllocationTraceRow, SwordConfig, WorkerState};
use equitrust_core::AgentId;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{hon_x_groups, WorkerGroup};
use crate::competition::{competition_update, CompetitionLearner};
use crate::rng::{domain, stream, SimRng};
use crate::{csv_text, mean_wait, Policy, RunOutput, Series, SimError, SimResult, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrowdConfig {
    pub workers: usize,
    pub requesters: usize,
    /// Population scheme `HonX`.
    pub hon_x: u32,
    pub group_size: u32,
    pub deadline: u64,
    pub steps: u64,
    pub witnesses: usize,
    pub warmup: u64,
    /// Share of groups the greedy requesters spend on little-known workers.
    pub explore: f64,
    pub sword: SwordConfig,
    pub policies: Vec<Policy>,
    /// Let every agent pick one system per step instead of running the
    /// systems on separate copies of the population.
    pub competition: bool,
    pub allocation_trace: bool,
}

impl Default for CrowdConfig {
    fn default() -> Self {
        Self {
            workers: 200,
            requesters: 10,
            hon_x: 50,
            group_size: 40,
            deadline: 14,
            steps: 1000,
            witnesses: 50,
            warmup: 200,
            explore: 0.1,
            sword: SwordConfig::default(),
            policies: vec![Policy::Sword, Policy::Brs2002e, Policy::M2009e, Policy::H2010e, Policy::Amt],
            competition: false,
            allocation_trace: false,
        }
    }
}

pub fn is_crowd_policy(p: Policy) -> bool {
    matches!(p, Policy::Sword | Policy::Brs2002e | Policy::M2009e | Policy::H2010e | Policy::Amt)
}

impl CrowdConfig {
    pub fn validate(&self) -> SimResult<()> {
        if self.workers == 0 || self.requesters == 0 || self.group_size == 0 {
            return Err(SimError::Config("crowd needs workers, requesters and a positive group size".into()));
        }
        if self.hon_x > 100 {
            return Err(SimError::Config(format!("hon_x {} above 100", self.hon_x)));
        }
        if self.policies.is_empty() {
            return Err(SimError::Config("no policies given".into()));
        }
        if let Some(p) = self.policies.iter().find(|p| !is_crowd_policy(**p)) {
            return Err(SimError::Config(format!("policy {p} does not allocate HITs")));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if self.policies[..i].contains(p) {
                return Err(SimError::Config(format!("policy {p} listed twice")));
            }
        }
        if !(0.0..=1.0).contains(&self.explore) || !(0.0..=1.0).contains(&self.sword.explore_prob) {
            return Err(SimError::Config("exploration rates must lie in [0, 1]".into()));
        }
        if self.sword.v < 0.0 {
            return Err(SimError::Config("V must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    id: u64,
    requester: usize,
    proposed: u64,
    deadline: u64,
}

#[derive(Debug, Clone)]
struct Worker {
    group: WorkerGroup,
    capacity: u32,
    rng: SimRng,
}

#[derive(Debug, Clone, Copy)]
struct Group {
    proposed: u64,
    size: u32,
    served: u32,
    good: u32,
    swept: u32,
}

/// What one system step meant for each agent.
#[derive(Debug, Default)]
struct StepReport {
    worker_good: Vec<u32>,
    /// `(requester, group judged worthwhile)` for groups closed this step.
    closed: Vec<(usize, bool)>,
}

/// One crowdsourcing system running a single allocation policy.
struct CrowdSystem {
    policy: Policy,
    workers: Vec<Worker>,
    queues: Vec<VecDeque<Hit>>,
    /// Central pool: SWORD leftovers or AMT open HITs.
    pool: VecDeque<Hit>,
    peaks: Vec<f64>,
    ledger: ReputationLedger,
    lst: Vec<Vec<LongShortTrust>>,
    open: Vec<Option<Group>>,
    rng: SimRng,
    next_hit: u64,
    welfare: WelfareAccumulator,
    times: Vec<Option<u64>>,
    served: Vec<u64>,
    good: u64,
    swept: u64,
    bound_checks: u64,
    trace: Vec<AllocationTraceRow>,
}

impl CrowdSystem {
    fn new(policy: Policy, workers: Vec<Worker>, requesters: usize, prior: &[Option<f64>], rng: SimRng) -> Self {
        let n = workers.len();
        let aggregation = if policy == Policy::Sword { Aggregation::Pooled } else { Aggregation::MeanOfLocals };
        let lst = if policy == Policy::H2010e {
            let row: Vec<LongShortTrust> =
                (0..n).map(|w| LongShortTrust::new(w as AgentId, prior[w].unwrap_or(0.5))).collect();
            vec![row; requesters]
        } else {
            Vec::new()
        };
        Self {
            policy,
            workers,
            queues: vec![VecDeque::new(); n],
            pool: VecDeque::new(),
            peaks: vec![0.5; n],
            ledger: ReputationLedger::new(aggregation),
            lst,
            open: vec![None; requesters],
            rng,
            next_hit: 0,
            welfare: WelfareAccumulator::default(),
            times: Vec::new(),
            served: vec![0; n],
            good: 0,
            swept: 0,
            bound_checks: 0,
            trace: Vec::new(),
        }
    }

    fn local(&self, r: usize, w: usize) -> BetaEvidence {
        self.ledger.local(w as AgentId, 0, r as AgentId)
    }

    fn shared(&self, w: usize) -> f64 {
        self.ledger.reputation_of(w as AgentId, 0)
    }

    fn plan_group(&mut self, r: usize, size: u32, cfg: &CrowdConfig, prior: &[Option<f64>]) -> HitPlan {
        let n = self.workers.len();
        let th = cfg.sword.rep_floor;
        let observations: Vec<(AgentId, u64)> = (0..n).map(|w| (w as AgentId, self.local(r, w).total())).collect();
        let mut plan = match self.policy {
            Policy::Brs2002e => {
                if self.rng.random::<f64>() < cfg.explore {
                    explore_low_observation(&observations, size, &mut self.rng)
                } else {
                    let ws: Vec<(AgentId, f64)> = (0..n).map(|w| (w as AgentId, self.shared(w))).collect();
                    greedy_hit_allocate(&ws, size, th)
                }
            }
            Policy::M2009e => {
                let records: Vec<KnowledgeRecord> = (0..n)
                    .map(|w| KnowledgeRecord::new(w as AgentId, observations[w].1, prior[w].is_some()))
                    .collect();
                let ws: Vec<(AgentId, f64)> = (0..n)
                    .map(|w| {
                        let d = records[w].degree;
                        let heard = prior[w].unwrap_or(0.5);
                        (w as AgentId, d * self.shared(w) + (1.0 - d) * heard)
                    })
                    .collect();
                let mut p = m2009e_allocate(&records, &ws, th, size, &mut self.rng);
                if p.unassigned > 0 {
                    let extra = greedy_hit_allocate(&ws, p.unassigned, 0.0);
                    p.assignments.extend(extra.assignments);
                    p.unassigned = extra.unassigned;
                }
                p
            }
            Policy::H2010e => h2010e_allocate(&self.lst[r], size, th, &mut self.rng),
            _ => unreachable!("only requester-side policies plan groups"),
        };
        if plan.needs_exploration {
            plan = explore_low_observation(&observations, size, &mut self.rng);
        }
        plan
    }

    fn step(
        &mut self,
        now: u64,
        cfg: &CrowdConfig,
        prior: &[Option<f64>],
        active: &[bool],
        proposing: &[bool],
    ) -> SimResult<StepReport> {
        let n = self.workers.len();
        let mut allocated = 0u64;
        let mut good_now = 0u64;
        let mut report = StepReport {
            worker_good: vec![0; n],
            closed: Vec::new(),
        };

        // Proposals.
        for r in 0..self.open.len() {
            if !proposing[r] || self.open[r].is_some() {
                continue;
            }
            let size = cfg.group_size;
            self.open[r] = Some(Group {
                proposed: now,
                size,
                served: 0,
                good: 0,
                swept: 0,
            });
            let hits: Vec<Hit> = (0..size)
                .map(|k| Hit {
                    id: self.next_hit + k as u64,
                    requester: r,
                    proposed: now,
                    deadline: now + cfg.deadline,
                })
                .collect();
            self.next_hit += size as u64;
            match self.policy {
                Policy::Sword | Policy::Amt => self.pool.extend(hits),
                _ => {
                    let plan = self.plan_group(r, size, cfg, prior);
                    let mut it = hits.into_iter();
                    for (w, k) in plan.assignments {
                        for h in it.by_ref().take(k as usize) {
                            self.queues[w as usize].push_back(h);
                            allocated += 1;
                        }
                    }
                    // Anything the plan could not place goes to a random worker.
                    for h in it {
                        let w = self.rng.random_range(0..n);
                        self.queues[w].push_back(h);
                        allocated += 1;
                    }
                }
            }
        }

        // Central allocation. Free AMT workers claim open HITs first come
        // first served.
        match self.policy {
            Policy::Sword => allocated += self.sword_allocate(now, cfg)?,
            Policy::Amt => {
                let mut order: Vec<usize> = (0..n).filter(|&w| active[w]).collect();
                order.shuffle(&mut self.rng);
                for w in order {
                    let room = (self.workers[w].capacity as usize).saturating_sub(self.queues[w].len());
                    for _ in 0..room {
                        match self.pool.pop_front() {
                            Some(h) => {
                                self.queues[w].push_back(h);
                                allocated += 1;
                            }
                            None => break,
                        }
                    }
                }
            }
            _ => {}
        }

        // Service and ratings.
        let mut served_now = vec![0u64; n];
        for w in 0..n {
            if !active[w] {
                continue;
            }
            let cap = self.workers[w].capacity as usize;
            let p = self.workers[w].group.success_prob();
            for _ in 0..cap {
                let Some(h) = self.queues[w].pop_front() else { break };
                let ok = self.workers[w].rng.random::<f64>() < p;
                let positive = self.rate(w, h, Some(now), ok)?;
                served_now[w] += 1;
                self.served[w] += 1;
                if positive {
                    good_now += 1;
                    report.worker_good[w] += 1;
                }
                if let Some(g) = self.open[h.requester].as_mut() {
                    g.served += 1;
                    g.good += positive as u32;
                }
            }
        }

        // Clean sweep.
        for w in 0..n {
            let mut dropped = Vec::new();
            self.queues[w].retain(|h| {
                let keep = h.deadline >= now + 1;
                if !keep {
                    dropped.push(*h);
                }
                keep
            });
            for h in dropped {
                self.rate(w, h, None, false)?;
                self.swept += 1;
                if let Some(g) = self.open[h.requester].as_mut() {
                    g.swept += 1;
                }
            }
        }
        let mut expired = Vec::new();
        self.pool.retain(|h| {
            let keep = h.deadline >= now + 1;
            if !keep {
                expired.push(h.requester);
            }
            keep
        });
        for r in expired {
            self.swept += 1;
            if let Some(g) = self.open[r].as_mut() {
                g.swept += 1;
            }
        }

        // Close finished groups.
        for r in 0..self.open.len() {
            let Some(g) = self.open[r] else { continue };
            if g.served + g.swept < g.size {
                continue;
            }
            let completed = g.swept == 0;
            self.times.push(completed.then_some(now - g.proposed + 1));
            report.closed.push((r, completed && 2 * g.good >= g.size));
            self.open[r] = None;
        }

        self.good += good_now;
        self.welfare
            .push(cfg.sword.max_gain * good_now as f64 - cfg.sword.task_cost * allocated as f64);
        if cfg.allocation_trace && self.policy == Policy::Sword {
            for (row, s) in self.trace.iter_mut().rev().take(n).zip(served_now.iter().rev()) {
                row.served = *s;
                row.q_after = row.q_before + row.a as u64 - *s;
            }
        }
        Ok(report)
    }

    fn sword_allocate(&mut self, now: u64, cfg: &CrowdConfig) -> SimResult<u64> {
        let n = self.workers.len();
        let mut states = Vec::with_capacity(n);
        for w in 0..n {
            let mut s = WorkerState::new(w as AgentId, self.workers[w].capacity);
            s.reputation_peak = self.peaks[w];
            s.observe_reputation(self.ledger.reputation_of(w as AgentId, 0));
            self.peaks[w] = s.reputation_peak;
            s.backlog = self.queues[w].len() as u64;
            states.push(s);
        }
        let plan = allocate(&states, self.pool.len() as u64, &cfg.sword, &mut self.rng);
        if plan.allocated() + plan.leftover != self.pool.len() as u64 {
            return Err(SimError::Invariant("allocation does not conserve requests".into()));
        }
        let mut order: Vec<usize> = (0..n).filter(|&w| plan.counts[w] > 0).collect();
        order.sort_by(|&a, &b| desirability(&states[b], &cfg.sword).total_cmp(&desirability(&states[a], &cfg.sword)));
        for &w in &order {
            for _ in 0..plan.counts[w] {
                let h = self.pool.pop_front().expect("plan within pool");
                self.queues[w].push_back(h);
            }
        }
        for w in 0..n {
            if cfg.allocation_trace {
                self.trace.push(AllocationTraceRow {
                    t: now,
                    worker_id: w as AgentId,
                    d: desirability(&states[w], &cfg.sword),
                    theta: target_queue(&states[w], &cfg.sword),
                    q_before: states[w].backlog,
                    a: plan.counts[w],
                    served: 0,
                    q_after: 0,
                });
            }
            states[w].backlog += plan.counts[w] as u64;
            check_queue_bound(&states[w], &cfg.sword)?;
            self.bound_checks += 1;
        }
        Ok(plan.allocated())
    }

    fn rate(&mut self, w: usize, h: Hit, completed: Option<u64>, ok: bool) -> SimResult<bool> {
        let ev = RatingEvent {
            event_id: h.id,
            truster_id: h.requester as AgentId,
            trustee_id: w as AgentId,
            context_id: 0,
            issued_at: h.proposed,
            started_at: h.proposed,
            completed_at: completed,
            deadline: h.deadline,
            quality_ok: ok,
        };
        let positive = self.ledger.record_outcome(&ev)?;
        if positive && completed.is_none_or(|c| c > h.deadline) {
            return Err(SimError::Invariant(format!("expired HIT {} rated positive", h.id)));
        }
        if let Some(row) = self.lst.get_mut(h.requester) {
            row[w].observe(positive);
        }
        Ok(positive)
    }
}

pub struct CrowdWorld {
    cfg: CrowdConfig,
    t: u64,
    groups: Vec<WorkerGroup>,
    prior: Vec<Option<f64>>,
    systems: Vec<CrowdSystem>,
    worker_learners: Vec<(CompetitionLearner, SimRng)>,
    requester_learners: Vec<(CompetitionLearner, SimRng)>,
    /// System holding each requester's open group, in competition mode.
    home: Vec<Option<usize>>,
    preference: Vec<Vec<(f64, f64)>>,
}

impl CrowdWorld {
    pub fn new(cfg: CrowdConfig, seed: u64) -> SimResult<Self> {
        cfg.validate()?;
        let mut groups = hon_x_groups(cfg.workers, cfg.hon_x);
        groups.shuffle(&mut stream(seed, domain::SETUP, 1));
        let prior = warm_up(&groups, &cfg, seed);
        let systems = cfg
            .policies
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                // Side-by-side systems share worker streams; competing ones do not.
                let salt = if cfg.competition { (k as u64 + 1) << 32 } else { 0 };
                let workers = groups
                    .iter()
                    .enumerate()
                    .map(|(w, g)| Worker {
                        group: *g,
                        capacity: g.hit_capacity(),
                        rng: stream(seed, domain::WORKER, salt | w as u64),
                    })
                    .collect();
                CrowdSystem::new(p, workers, cfg.requesters, &prior, stream(seed, domain::BROKER, k as u64))
            })
            .collect();
        let k = cfg.policies.len();
        let (worker_learners, requester_learners) = if cfg.competition {
            (
                (0..cfg.workers)
                    .map(|w| (CompetitionLearner::new(k), stream(seed, domain::WORKER, 1 << 40 | w as u64)))
                    .collect(),
                (0..cfg.requesters)
                    .map(|r| (CompetitionLearner::new(k), stream(seed, domain::REQUESTER, r as u64)))
                    .collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            home: vec![None; cfg.requesters],
            preference: vec![Vec::new(); k],
            cfg,
            t: 0,
            groups,
            prior,
            systems,
            worker_learners,
            requester_learners,
        })
    }

    fn step_side_by_side(&mut self) -> SimResult<()> {
        let active = vec![true; self.cfg.workers];
        let proposing = vec![true; self.cfg.requesters];
        for s in &mut self.systems {
            s.step(self.t, &self.cfg, &self.prior, &active, &proposing)?;
        }
        Ok(())
    }

    fn step_competing(&mut self) -> SimResult<()> {
        let k = self.systems.len();
        let worker_choice: Vec<usize> = self.worker_learners.iter_mut().map(|(l, rng)| l.choose(rng)).collect();
        let requester_choice: Vec<usize> = self.requester_learners.iter_mut().map(|(l, rng)| l.choose(rng)).collect();
        for i in 0..k {
            let active: Vec<bool> = worker_choice.iter().map(|&c| c == i).collect();
            let proposing: Vec<bool> = (0..self.cfg.requesters)
                .map(|r| requester_choice[r] == i && self.home[r].is_none())
                .collect();
            for (r, p) in proposing.iter().enumerate() {
                if *p {
                    self.home[r] = Some(i);
                }
            }
            let report = self.systems[i].step(self.t, &self.cfg, &self.prior, &active, &proposing)?;
            for (w, a) in active.iter().enumerate() {
                if *a {
                    competition_update(&mut self.worker_learners[w].0, i, report.worker_good[w] > 0);
                }
            }
            for (r, ok) in report.closed {
                competition_update(&mut self.requester_learners[r].0, i, ok);
                self.home[r] = None;
            }
        }
        for i in 0..k {
            let m = self.requester_learners.iter().map(|(l, _)| l.pi[i]).sum::<f64>() / self.cfg.requesters as f64;
            self.preference[i].push((self.t as f64, m));
        }
        Ok(())
    }
}

/// Witnesses sample random workers during the warm-up; returns the mean
/// testimony per worker, `None` when no witness met it.
fn warm_up(groups: &[WorkerGroup], cfg: &CrowdConfig, seed: u64) -> Vec<Option<f64>> {
    let n = groups.len();
    let mut evidence = vec![vec![BetaEvidence::default(); n]; cfg.witnesses];
    for (i, ev) in evidence.iter_mut().enumerate() {
        let mut rng = stream(seed, domain::WITNESS, i as u64);
        for _ in 0..cfg.warmup {
            let w = rng.random_range(0..n);
            ev[w].add(rng.random::<f64>() < groups[w].success_prob());
        }
    }
    (0..n)
        .map(|w| {
            let scores: Vec<f64> = evidence.iter().filter(|e| e[w].total() > 0).map(|e| e[w].score()).collect();
            (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
        })
        .collect()
}

impl World for CrowdWorld {
    fn advance_step(&mut self) -> SimResult<()> {
        if self.cfg.competition {
            self.step_competing()?;
        } else {
            self.step_side_by_side()?;
        }
        self.t += 1;
        Ok(())
    }

    fn clock(&self) -> u64 {
        self.t
    }

    fn finish(self) -> RunOutput {
        let mut out = RunOutput::default();
        let hon: Vec<usize> = (0..self.groups.len()).filter(|&w| self.groups[w] == WorkerGroup::Hon).collect();
        let horizon = self.cfg.deadline + 1;
        for (i, s) in self.systems.iter().enumerate() {
            let p = s.policy.id();
            out.push(format!("welfare:{p}"), s.welfare.value());
            let cdf = completion_cdf(&s.times, horizon);
            out.push(format!("completed_within_1:{p}"), cdf.at(1));
            out.push(format!("completed_within_2:{p}"), cdf.at(2));
            out.push(format!("groups_dropped:{p}"), (!s.times.is_empty()).then_some(cdf.dropped));
            let done = s.times.iter().filter(|t| t.is_some()).count() as f64;
            out.push(format!("groups_per_step:{p}"), (self.t > 0).then(|| done / self.t as f64));
            out.push(format!("wait_mean:{p}"), mean_wait(&s.times));
            let counts: Vec<u64> = hon.iter().map(|&w| s.served[w]).collect();
            out.push(format!("fairness_hon:{p}"), fairness_index(&counts));
            let served: u64 = s.served.iter().sum();
            out.push(format!("quality:{p}"), (served > 0).then(|| s.good as f64 / served as f64));
            if s.policy == Policy::Sword {
                out.push("queue_bound_checks", Some(s.bound_checks as f64));
            }
            out.series.push(Series {
                name: format!("completion_cdf:{p}"),
                points: cdf.points.iter().map(|&(x, f)| (x as f64, f)).collect(),
            });
            if self.cfg.competition {
                let last = self.preference[i].last().map(|x| x.1);
                out.push(format!("preference:{p}"), last);
                let wp = self.worker_learners.iter().map(|(l, _)| l.pi[i]).sum::<f64>()
                    / self.worker_learners.len().max(1) as f64;
                out.push(format!("worker_preference:{p}"), Some(wp));
                out.series.push(Series {
                    name: format!("preference:{p}"),
                    points: self.preference[i].clone(),
                });
            }
            if self.cfg.allocation_trace && s.policy == Policy::Sword {
                out.traces.push(("allocation".into(), csv_text(&s.trace)));
            }
        }
        out
    }
}
