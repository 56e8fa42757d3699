//! Beta reputation evidence, timeliness discounting and the rating ledger.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::{AgentId, ContextId, Step};

/// One truster -> trustee interaction outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub event_id: u64,
    pub truster_id: AgentId,
    pub trustee_id: AgentId,
    pub context_id: ContextId,
    pub issued_at: Step,
    pub started_at: Step,
    /// `None` when the task was never completed (swept or abandoned).
    pub completed_at: Option<Step>,
    pub deadline: Step,
    pub quality_ok: bool,
}

impl RatingEvent {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.issued_at <= self.started_at
            && self.completed_at.is_none_or(|c| self.started_at <= c);
        if !ordered {
            return Err(CoreError::TimestampOrder {
                issued: self.issued_at,
                started: self.started_at,
                completed: self.completed_at,
            });
        }
        if self.deadline < self.started_at {
            return Err(CoreError::DeadlineBeforeStart {
                deadline: self.deadline,
                started: self.started_at,
            });
        }
        Ok(())
    }
}

/// Positive and negative outcome counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BetaEvidence {
    pub positives: u64,
    pub negatives: u64,
}

impl BetaEvidence {
    pub fn new(positives: u64, negatives: u64) -> Self {
        Self { positives, negatives }
    }

    pub fn total(&self) -> u64 {
        self.positives + self.negatives
    }

    pub fn add(&mut self, positive: bool) {
        if positive {
            self.positives += 1;
        } else {
            self.negatives += 1;
        }
    }

    pub fn score(&self) -> f64 {
        brs_score(*self)
    }
}

impl std::ops::Add for BetaEvidence {
    type Output = BetaEvidence;
    fn add(self, rhs: Self) -> Self {
        BetaEvidence::new(self.positives + rhs.positives, self.negatives + rhs.negatives)
    }
}

/// Mean of Beta(positives + 1, negatives + 1).
pub fn brs_score(ev: BetaEvidence) -> f64 {
    (ev.positives as f64 + 1.0) / (ev.positives as f64 + ev.negatives as f64 + 2.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimelinessPolicy {
    #[default]
    Hard,
    Linear,
}

/// Weight in [0,1] that a completion at `end` earns given the window `start..dl`.
pub fn timeliness_discount(start: Step, end: Step, dl: Step, policy: TimelinessPolicy) -> Result<f64> {
    if dl <= start {
        return Err(CoreError::DegenerateWindow { start, deadline: dl });
    }
    let end = end.max(start);
    Ok(match policy {
        TimelinessPolicy::Hard => {
            if end <= dl {
                1.0
            } else {
                0.0
            }
        }
        TimelinessPolicy::Linear => {
            let frac = (end - start) as f64 / (dl - start) as f64;
            (1.0 - frac).clamp(0.0, 1.0)
        }
    })
}

/// Whether an event counts as a positive outcome under `policy`.
///
/// A zero-length window (deadline equal to start) is judged by the hard rule,
/// since no fractional lateness can be measured.
pub fn is_positive(event: &RatingEvent, policy: TimelinessPolicy) -> bool {
    let Some(end) = event.completed_at else {
        return false;
    };
    if !event.quality_ok {
        return false;
    }
    if event.deadline <= event.started_at {
        return end <= event.deadline;
    }
    timeliness_discount(event.started_at, end, event.deadline, policy).unwrap_or(0.0) > 0.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Pooled,
    #[default]
    MeanOfLocals,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct LocalRecord {
    evidence: BetaEvidence,
    window: VecDeque<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Entry {
    locals: BTreeMap<AgentId, LocalRecord>,
    pooled: BetaEvidence,
    /// Running sum of local scores over trusters with evidence.
    score_sum: f64,
    rated: usize,
}

/// Per (trustee, context) store of per-truster evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ReputationLedger {
    entries: BTreeMap<(AgentId, ContextId), Entry>,
    seen: HashSet<u64>,
    pub aggregation: Aggregation,
    pub policy: TimelinessPolicy,
    /// Keep only the most recent `window` outcomes per truster when set.
    pub window: Option<usize>,
}

impl Default for ReputationLedger {
    fn default() -> Self {
        Self::new(Aggregation::default())
    }
}

impl ReputationLedger {
    pub fn new(aggregation: Aggregation) -> Self {
        Self {
            entries: BTreeMap::new(),
            seen: HashSet::new(),
            aggregation,
            policy: TimelinessPolicy::Hard,
            window: None,
        }
    }

    pub fn with_policy(mut self, policy: TimelinessPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_window(mut self, window: Option<usize>) -> Self {
        self.window = window.filter(|w| *w > 0);
        self
    }

    /// Records one event, returning whether it counted as a positive.
    pub fn record_outcome(&mut self, event: &RatingEvent) -> Result<bool> {
        event.validate()?;
        if !self.seen.insert(event.event_id) {
            return Err(CoreError::DuplicateEvent(event.event_id));
        }
        let positive = is_positive(event, self.policy);
        self.push(event.trustee_id, event.context_id, event.truster_id, positive);
        Ok(positive)
    }

    /// Records an already judged outcome without event bookkeeping.
    pub fn record_raw(&mut self, trustee: AgentId, context: ContextId, truster: AgentId, positive: bool) {
        self.push(trustee, context, truster, positive);
    }

    fn push(&mut self, trustee: AgentId, context: ContextId, truster: AgentId, positive: bool) {
        let entry = self.entries.entry((trustee, context)).or_default();
        let local = entry.locals.entry(truster).or_default();
        let before = (local.evidence.total() > 0).then(|| local.evidence.score());
        local.evidence.add(positive);
        entry.pooled.add(positive);
        if let Some(w) = self.window {
            local.window.push_back(positive);
            if local.window.len() > w {
                let old = local.window.pop_front().unwrap_or(false);
                let (ev, pooled) = (&mut local.evidence, &mut entry.pooled);
                if old {
                    ev.positives -= 1;
                    pooled.positives -= 1;
                } else {
                    ev.negatives -= 1;
                    pooled.negatives -= 1;
                }
            }
        }
        match before {
            Some(old) => entry.score_sum += local.evidence.score() - old,
            None => {
                entry.score_sum += local.evidence.score();
                entry.rated += 1;
            }
        }
    }

    pub fn local(&self, trustee: AgentId, context: ContextId, truster: AgentId) -> BetaEvidence {
        self.entries
            .get(&(trustee, context))
            .and_then(|e| e.locals.get(&truster))
            .map(|l| l.evidence)
            .unwrap_or_default()
    }

    pub fn pooled(&self, trustee: AgentId, context: ContextId) -> BetaEvidence {
        self.entries
            .get(&(trustee, context))
            .map(|e| e.pooled)
            .unwrap_or_default()
    }

    pub fn reputation_of(&self, trustee: AgentId, context: ContextId) -> f64 {
        let Some(entry) = self.entries.get(&(trustee, context)) else {
            return 0.5;
        };
        match self.aggregation {
            Aggregation::Pooled => brs_score(entry.pooled),
            Aggregation::MeanOfLocals if entry.rated == 0 => 0.5,
            Aggregation::MeanOfLocals => entry.score_sum / entry.rated as f64,
        }
    }

    /// Number of trusters holding evidence about the pair.
    pub fn rater_count(&self, trustee: AgentId, context: ContextId) -> usize {
        self.entries
            .get(&(trustee, context))
            .map(|e| e.locals.values().filter(|l| l.evidence.total() > 0).count())
            .unwrap_or(0)
    }

    pub fn event_count(&self) -> usize {
        self.seen.len()
    }

    /// Iterates `(trustee, context, truster, evidence)` in key order.
    pub fn iter(&self) -> impl Iterator<Item = (AgentId, ContextId, AgentId, BetaEvidence)> + '_ {
        self.entries.iter().flat_map(|(&(trustee, ctx), e)| {
            e.locals.iter().map(move |(&truster, l)| (trustee, ctx, truster, l.evidence))
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trustee_id", "context_id", "truster_id", "positives", "negatives", "score"])?;
        for (trustee, ctx, truster, ev) in self.iter() {
            w.write_record(&[
                trustee.to_string(),
                ctx.to_string(),
                truster.to_string(),
                ev.positives.to_string(),
                ev.negatives.to_string(),
                format!("{:.6}", ev.score()),
            ])?;
        }
        w.flush().map_err(|e| CoreError::Csv(e.to_string()))?;
        Ok(())
    }
}
