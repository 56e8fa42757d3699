//! Greedy delegation under capacity limits: capable trustees get swamped,
//! miss deadlines and lose reputation, then recover once abandoned.

use std::collections::VecDeque;

use equitrust_core::reputation::{Aggregation, BetaEvidence, RatingEvent, ReputationLedger};
use equitrust_core::AgentId;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{domain, stream, SimRng};
use crate::{csv_text, RunOutput, Series, SimError, SimResult, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdpConfig {
    pub trustees: usize,
    pub trusters: usize,
    /// Share of trustees that are honest; the rest are malicious.
    pub honest_fraction: f64,
    pub honest_success: f64,
    pub malicious_success: f64,
    pub capacity: u32,
    pub deadline: u64,
    pub explore: f64,
    pub clean_sweep: bool,
    pub steps: u64,
    /// Rank known trustees by shared reputation rather than own evidence.
    pub use_reputation: bool,
}

impl Default for RdpConfig {
    fn default() -> Self {
        Self {
            trustees: 50,
            trusters: 250,
            honest_fraction: 0.5,
            honest_success: 0.9,
            malicious_success: 0.1,
            capacity: 10,
            deadline: 3,
            explore: 0.15,
            clean_sweep: true,
            steps: 500,
            use_reputation: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Request {
    id: u64,
    truster: usize,
    issued: u64,
    deadline: u64,
}

struct Trustee {
    honest: bool,
    success: f64,
    queue: VecDeque<Request>,
    rng: SimRng,
}

struct Truster {
    local: Vec<BetaEvidence>,
    rng: SimRng,
}

#[derive(Serialize)]
struct RepRow {
    t: u64,
    trustee_id: AgentId,
    honest: bool,
    reputation: f64,
}

pub struct RdpWorld {
    cfg: RdpConfig,
    t: u64,
    next_id: u64,
    trustees: Vec<Trustee>,
    trusters: Vec<Truster>,
    ledger: ReputationLedger,
    history: Vec<Vec<f64>>,
    on_time: u64,
    late: u64,
    swept: u64,
}

impl RdpWorld {
    pub fn new(cfg: RdpConfig, seed: u64) -> SimResult<Self> {
        if cfg.trustees == 0 || !(0.0..=1.0).contains(&cfg.honest_fraction) {
            return Err(SimError::Config("need trustees and an honest fraction in [0, 1]".into()));
        }
        let n_hon = (cfg.trustees as f64 * cfg.honest_fraction).round() as usize;
        let trustees = (0..cfg.trustees)
            .map(|i| Trustee {
                honest: i < n_hon,
                success: if i < n_hon { cfg.honest_success } else { cfg.malicious_success },
                queue: VecDeque::new(),
                rng: stream(seed, domain::PROVIDER, i as u64),
            })
            .collect();
        let trusters = (0..cfg.trusters)
            .map(|i| Truster {
                local: vec![BetaEvidence::default(); cfg.trustees],
                rng: stream(seed, domain::CONSUMER, i as u64),
            })
            .collect();
        let history = vec![Vec::with_capacity(cfg.steps as usize); cfg.trustees];
        Ok(Self {
            cfg,
            t: 0,
            next_id: 0,
            trustees,
            trusters,
            ledger: ReputationLedger::new(Aggregation::MeanOfLocals),
            history,
            on_time: 0,
            late: 0,
            swept: 0,
        })
    }

    fn choose(&mut self, i: usize, reps: &[f64]) -> usize {
        let n = self.trustees.len();
        let shared = self.cfg.use_reputation;
        let tr = &mut self.trusters[i];
        if tr.rng.random::<f64>() < self.cfg.explore {
            return tr.rng.random_range(0..n);
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, ev) in tr.local.iter().enumerate() {
            if ev.total() == 0 {
                continue;
            }
            let s = if shared { reps[j] } else { ev.score() };
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        match best {
            Some((j, _)) => j,
            None => tr.rng.random_range(0..n),
        }
    }

    fn rate(&mut self, trustee: usize, req: Request, completed: Option<u64>, quality_ok: bool) -> SimResult<()> {
        let ev = RatingEvent {
            event_id: req.id,
            truster_id: req.truster as AgentId,
            trustee_id: trustee as AgentId,
            context_id: 0,
            issued_at: req.issued,
            started_at: req.issued,
            completed_at: completed,
            deadline: req.deadline,
            quality_ok,
        };
        let positive = self.ledger.record_outcome(&ev)?;
        if completed.is_some_and(|c| c > req.deadline) && positive {
            return Err(SimError::Invariant(format!("late request {} rated positive", req.id)));
        }
        self.trusters[req.truster].local[trustee].add(positive);
        Ok(())
    }

    /// Reputation of every trustee, honest ones flagged.
    pub fn reputations(&self) -> Vec<(bool, f64)> {
        (0..self.trustees.len())
            .map(|j| (self.trustees[j].honest, self.ledger.reputation_of(j as AgentId, 0)))
            .collect()
    }
}

/// Sign changes of a series around its own mean.
pub fn zero_crossings(xs: &[f64]) -> usize {
    if xs.is_empty() {
        return 0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let mut last = 0i8;
    let mut n = 0;
    for x in xs {
        let s = if *x > mean {
            1
        } else if *x < mean {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                n += 1;
            }
            last = s;
        }
    }
    n
}

impl World for RdpWorld {
    fn advance_step(&mut self) -> SimResult<()> {
        let now = self.t;
        let reps: Vec<f64> = (0..self.trustees.len())
            .map(|j| self.ledger.reputation_of(j as AgentId, 0))
            .collect();
        // Propose and allocate.
        for i in 0..self.trusters.len() {
            let j = self.choose(i, &reps);
            let req = Request {
                id: self.next_id,
                truster: i,
                issued: now,
                deadline: now + self.cfg.deadline,
            };
            self.next_id += 1;
            self.trustees[j].queue.push_back(req);
        }
        // Serve requests that arrived before this step, then rate.
        for j in 0..self.trustees.len() {
            let mut done = Vec::new();
            let tr = &mut self.trustees[j];
            while done.len() < self.cfg.capacity as usize {
                match tr.queue.front() {
                    Some(r) if r.issued < now => {
                        let r = tr.queue.pop_front().expect("front exists");
                        let ok = tr.rng.random::<f64>() < tr.success;
                        done.push((r, ok));
                    }
                    _ => break,
                }
            }
            for (r, ok) in done {
                if now <= r.deadline {
                    self.on_time += 1;
                } else {
                    self.late += 1;
                }
                self.rate(j, r, Some(now), ok)?;
            }
        }
        if self.cfg.clean_sweep {
            for j in 0..self.trustees.len() {
                let mut dropped = Vec::new();
                self.trustees[j].queue.retain(|r| {
                    if r.deadline < now + 1 {
                        dropped.push(*r);
                        false
                    } else {
                        true
                    }
                });
                for r in dropped {
                    self.swept += 1;
                    self.rate(j, r, None, false)?;
                }
            }
        }
        for j in 0..self.trustees.len() {
            let rep = self.ledger.reputation_of(j as AgentId, 0);
            self.history[j].push(rep);
        }
        self.t += 1;
        Ok(())
    }

    fn clock(&self) -> u64 {
        self.t
    }

    fn finish(self) -> RunOutput {
        let mut out = RunOutput::default();
        let hon: Vec<usize> = (0..self.trustees.len()).filter(|&j| self.trustees[j].honest).collect();
        let mal: Vec<usize> = (0..self.trustees.len()).filter(|&j| !self.trustees[j].honest).collect();
        let avg = |ids: &[usize]| -> Option<f64> {
            let vals: Vec<f64> = ids.iter().flat_map(|&j| self.history[j].iter().copied()).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        out.push("reputation_mean:hon", avg(&hon));
        out.push("reputation_mean:mal", avg(&mal));
        let crossings: Vec<usize> = hon.iter().map(|&j| zero_crossings(&self.history[j])).collect();
        out.push("zero_crossings_min:hon", crossings.iter().min().map(|&c| c as f64));
        out.push(
            "zero_crossings_mean:hon",
            (!crossings.is_empty()).then(|| crossings.iter().sum::<usize>() as f64 / crossings.len() as f64),
        );
        let served = self.on_time + self.late + self.swept;
        out.push("on_time_fraction", (served > 0).then(|| self.on_time as f64 / served as f64));
        out.push("swept_fraction", (served > 0).then(|| self.swept as f64 / served as f64));
        for &j in hon.iter().take(5) {
            out.series.push(Series {
                name: format!("reputation:{j}"),
                points: self.history[j].iter().enumerate().map(|(t, r)| (t as f64, *r)).collect(),
            });
        }
        let steps = self.history.first().map_or(0, |h| h.len());
        out.series.push(Series {
            name: "reputation_mean:hon".into(),
            points: (0..steps)
                .map(|t| {
                    let m = hon.iter().map(|&j| self.history[j][t]).sum::<f64>() / hon.len().max(1) as f64;
                    (t as f64, m)
                })
                .collect(),
        });
        let rows: Vec<RepRow> = (0..steps)
            .flat_map(|t| {
                self.trustees.iter().enumerate().map(move |(j, tr)| (t, j, tr.honest))
            })
            .map(|(t, j, honest)| RepRow {
                t: t as u64,
                trustee_id: j as AgentId,
                honest,
                reputation: self.history[j][t],
            })
            .collect();
        out.traces.push(("reputation".into(), csv_text(&rows)));
        out
    }
}
