//! Trust-aware collaborative spectrum sensing.
//!
//! Verdicts: `+1` band busy, `-1` band idle, `0` abstain.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    pub su_id: AgentId,
    pub verdict: i8,
    pub confidence: f64,
}

impl SensingReport {
    /// Builds a report, abstaining when confidence is below `floor`.
    pub fn new(su_id: AgentId, verdict: i8, confidence: f64, floor: f64) -> Self {
        let verdict = if confidence < floor { 0 } else { verdict.signum() };
        Self {
            su_id,
            verdict,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrnConfig {
    pub trust_floor: f64,
    /// Fixed weight of the base station's own verdict; `None` uses its confidence.
    pub subs_weight: Option<f64>,
    pub confidence_floor: f64,
    pub w1: f64,
    pub w2: f64,
    pub bands: usize,
    pub su_count: usize,
    pub iterations: usize,
    pub window: usize,
    pub rho1: f64,
    pub rho2: f64,
}

impl Default for CrnConfig {
    fn default() -> Self {
        Self {
            trust_floor: 0.65,
            subs_weight: None,
            confidence_floor: 0.25,
            w1: 1.0,
            w2: 5.0,
            bands: 8,
            su_count: 100,
            iterations: 10_000,
            window: 20,
            rho1: 1.0,
            rho2: 0.9,
        }
    }
}

/// Rating history of one SU in one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuTrustRecord {
    pub window: VecDeque<(f64, f64)>,
    pub capacity: usize,
    pub forgetting: f64,
}

impl SuTrustRecord {
    pub fn new(capacity: usize, forgetting: f64) -> Self {
        Self {
            window: VecDeque::with_capacity(capacity),
            capacity,
            forgetting,
        }
    }

    pub fn push(&mut self, alpha: f64, beta: f64) {
        self.window.push_back((alpha, beta));
        while self.window.len() > self.capacity {
            self.window.pop_front();
        }
    }
}

/// Forgetting-weighted share of positive mass; the oldest entry is discounted most.
pub fn context_trust(record: &SuTrustRecord) -> f64 {
    let n = record.window.len();
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &(a, b)) in record.window.iter().enumerate() {
        let w = record.forgetting.powi((n - 1 - j) as i32);
        num += w * a;
        den += w * (a + b);
    }
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Weighted verdict and the resulting decision.
///
/// `trusts[i]` belongs to `sus[i]`. Reports from SUs below the trust floor
/// are ignored.
pub fn aggregate_and_decide(subs: &SensingReport, sus: &[SensingReport], trusts: &[f64], cfg: &CrnConfig) -> (f64, i8) {
    let theta = cfg.subs_weight.unwrap_or(subs.confidence).clamp(0.0, 1.0);
    let (mut num, mut den) = (0.0, 0.0);
    for (r, &t) in sus.iter().zip(trusts) {
        if t >= cfg.trust_floor {
            num += t * r.verdict as f64;
            den += t;
        }
    }
    let base = theta * subs.verdict as f64;
    let r = if den > 0.0 { base + (1.0 - theta) * num / den } else { base };
    let d = if r > 0.0 {
        1
    } else if r < 0.0 {
        -1
    } else {
        0
    };
    (r, d)
}

/// Rates every SU after a decision. `records[i]` belongs to `reports[i]`.
pub fn apply_feedback(records: &mut [SuTrustRecord], reports: &[SensingReport], decision: i8, pu_complaint: bool, cfg: &CrnConfig) {
    let n = cfg.window as f64;
    for (rec, rep) in records.iter_mut().zip(reports) {
        if pu_complaint {
            if rep.verdict == -1 {
                rec.push(0.0, n);
                rec.forgetting = cfg.rho1;
                continue;
            }
            if rep.verdict == 0 {
                rec.push(1.0, 1.0);
            }
        } else if decision == 0 {
            continue;
        } else if rep.verdict == 0 {
            rec.push(1.0, 1.0);
        } else if decision == 1 {
            if rep.verdict == decision {
                rec.push(1.0, 0.0);
            } else {
                rec.push(0.0, 1.0);
            }
        }
        if context_trust(rec) >= cfg.trust_floor {
            rec.forgetting = cfg.rho2;
        }
    }
}

pub fn total_utility_loss(eps1: f64, eps2: f64, cfg: &CrnConfig) -> f64 {
    cfg.w1 * eps1 + cfg.w2 * eps2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Attack {
    Fabrication,
    OnOff { sigma: f64 },
    Dos,
    ResourceHungry,
}

impl Attack {
    pub fn name(&self) -> &'static str {
        match self {
            Attack::Fabrication => "fabrication",
            Attack::OnOff { .. } => "on_off",
            Attack::Dos => "dos",
            Attack::ResourceHungry => "resource_hungry",
        }
    }
}

/// Report an attacker sends given what an honest sensor would have said.
pub fn attack_report<R: Rng + ?Sized>(
    su_id: AgentId,
    busy: bool,
    honest: SensingReport,
    attack: Attack,
    rng: &mut R,
) -> SensingReport {
    let verdict = match attack {
        Attack::Fabrication => -honest.verdict,
        Attack::OnOff { sigma } => {
            if sigma > 0.0 && rng.random::<f64>() < sigma {
                -honest.verdict
            } else {
                honest.verdict
            }
        }
        Attack::Dos => {
            if busy {
                honest.verdict
            } else {
                1
            }
        }
        Attack::ResourceHungry => -1,
    };
    SensingReport {
        su_id,
        verdict,
        confidence: honest.confidence,
    }
}
