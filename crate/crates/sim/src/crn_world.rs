//! Collaborative spectrum sensing with misbehaving secondary users.
//!
//! Both trust modes see the same band occupancy and the same reports, so
//! the only difference between them is how reports are weighed.

use equitrust_core::crn::{
    aggregate_and_decide, apply_feedback, attack_report, context_trust, total_utility_loss, Attack, CrnConfig,
    SensingReport, SuTrustRecord,
};
use equitrust_core::AgentId;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{domain, stream, SimRng};
use crate::{csv_text, RunOutput, Series, SimError, SimResult, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrnScenarioConfig {
    pub crn: CrnConfig,
    pub attack: Attack,
    /// Share of secondary users that attack.
    pub malicious_fraction: f64,
    /// Probability a band is occupied in a round.
    pub usage_rate: f64,
    pub confidence_mean: f64,
    pub confidence_sd: f64,
    /// Trust modes run side by side.
    pub trust_modes: Vec<bool>,
    /// Weight of an SU's mean trust over all bands mixed into its per-band trust.
    pub cross_context_blend: f64,
    pub sensing_trace: bool,
}

impl Default for CrnScenarioConfig {
    fn default() -> Self {
        Self {
            crn: CrnConfig { iterations: 2000, ..CrnConfig::default() },
            attack: Attack::Fabrication,
            malicious_fraction: 0.5,
            usage_rate: 0.45,
            confidence_mean: 0.5,
            confidence_sd: 0.15,
            trust_modes: vec![true, false],
            cross_context_blend: 0.0,
            sensing_trace: false,
        }
    }
}

impl CrnScenarioConfig {
    pub fn validate(&self) -> SimResult<()> {
        let unit = 0.0..=1.0;
        if self.crn.su_count == 0 || self.crn.bands == 0 || self.crn.window == 0 {
            return Err(SimError::Config("need SUs, bands and a nonempty trust window".into()));
        }
        for (name, v) in [
            ("malicious_fraction", self.malicious_fraction),
            ("usage_rate", self.usage_rate),
            ("cross_context_blend", self.cross_context_blend),
            ("trust_floor", self.crn.trust_floor),
            ("rho1", self.crn.rho1),
            ("rho2", self.crn.rho2),
        ] {
            if !unit.contains(&v) {
                return Err(SimError::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.crn.rho1 < self.crn.rho2 {
            return Err(SimError::Config("rho1 must be at least rho2".into()));
        }
        if !(self.confidence_sd > 0.0) || !self.confidence_mean.is_finite() {
            return Err(SimError::Config("confidence draw needs a finite mean and positive sd".into()));
        }
        if let Attack::OnOff { sigma } = self.attack {
            if !unit.contains(&sigma) {
                return Err(SimError::Config(format!("on-off sigma must be in [0, 1], got {sigma}")));
            }
        }
        if self.trust_modes.is_empty() {
            return Err(SimError::Config("need at least one trust mode".into()));
        }
        Ok(())
    }
}

fn mode_name(trust: bool) -> &'static str {
    if trust {
        "trust"
    } else {
        "no_trust"
    }
}

#[derive(Serialize)]
struct SensingRow {
    iteration: u64,
    band: usize,
    attack: &'static str,
    sigma: f64,
    usage_rate: f64,
    eps1_cum: f64,
    eps2_cum: f64,
    tul: f64,
    trust_enabled: bool,
}

#[derive(Default)]
struct Tally {
    idle: u64,
    busy: u64,
    false_alarms: u64,
    misses: u64,
}

impl Tally {
    fn eps1(&self) -> f64 {
        if self.idle == 0 {
            0.0
        } else {
            self.false_alarms as f64 / self.idle as f64
        }
    }

    fn eps2(&self) -> f64 {
        if self.busy == 0 {
            0.0
        } else {
            self.misses as f64 / self.busy as f64
        }
    }
}

struct Mode {
    trust: bool,
    /// `records[band][su]`.
    records: Vec<Vec<SuTrustRecord>>,
    tally: Tally,
    eps1: Vec<(f64, f64)>,
    eps2: Vec<(f64, f64)>,
}

pub struct CrnWorld {
    cfg: CrnScenarioConfig,
    t: u64,
    malicious: Vec<bool>,
    sensors: Vec<SimRng>,
    bands: Vec<SimRng>,
    subs: SimRng,
    conf: Normal<f64>,
    modes: Vec<Mode>,
    trace: Vec<SensingRow>,
}

const SUBS_ID: AgentId = AgentId::MAX;

impl CrnWorld {
    pub fn new(cfg: CrnScenarioConfig, seed: u64) -> SimResult<Self> {
        cfg.validate()?;
        let n = cfg.crn.su_count;
        let bad = (n as f64 * cfg.malicious_fraction).round() as usize;
        let mut malicious: Vec<bool> = (0..n).map(|i| i < bad).collect();
        malicious.shuffle(&mut stream(seed, domain::SETUP, 3));
        let conf = Normal::new(cfg.confidence_mean, cfg.confidence_sd)
            .map_err(|e| SimError::Config(format!("confidence draw: {e}")))?;
        let modes = cfg
            .trust_modes
            .iter()
            .map(|&trust| Mode {
                trust,
                records: vec![vec![SuTrustRecord::new(cfg.crn.window, cfg.crn.rho1); n]; cfg.crn.bands],
                tally: Tally::default(),
                eps1: Vec::new(),
                eps2: Vec::new(),
            })
            .collect();
        Ok(Self {
            sensors: (0..n).map(|i| stream(seed, domain::SENSOR, i as u64)).collect(),
            bands: (0..cfg.crn.bands).map(|b| stream(seed, domain::BAND, b as u64)).collect(),
            subs: stream(seed, domain::WORLD, 0),
            cfg,
            t: 0,
            malicious,
            conf,
            modes,
            trace: Vec::new(),
        })
    }

    /// Per-band trust every SU holds in one mode, with the optional cross-band blend.
    fn trusts(&self, mode: &Mode, band: usize) -> Vec<f64> {
        let n = self.cfg.crn.su_count;
        if !mode.trust {
            return vec![1.0; n];
        }
        let b = self.cfg.cross_context_blend;
        (0..n)
            .map(|i| {
                let own = context_trust(&mode.records[band][i]);
                if b == 0.0 {
                    return own;
                }
                let all = mode.records.iter().map(|r| context_trust(&r[i])).sum::<f64>() / mode.records.len() as f64;
                (1.0 - b) * own + b * all
            })
            .collect()
    }

    /// Final mean trust of honest and malicious SUs in the first trust-enabled mode.
    pub fn mean_trust(&self) -> Option<(f64, f64)> {
        let mode = self.modes.iter().find(|m| m.trust)?;
        let (mut h, mut hn, mut m, mut mn) = (0.0, 0, 0.0, 0);
        for recs in &mode.records {
            for (i, r) in recs.iter().enumerate() {
                if self.malicious[i] {
                    m += context_trust(r);
                    mn += 1;
                } else {
                    h += context_trust(r);
                    hn += 1;
                }
            }
        }
        Some((h / hn.max(1) as f64, m / mn.max(1) as f64))
    }
}

fn draw_confidence(dist: &Normal<f64>, rng: &mut SimRng) -> f64 {
    for _ in 0..64 {
        let x = dist.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
    dist.sample(rng).clamp(0.0, 1.0)
}

impl World for CrnWorld {
    fn advance_step(&mut self) -> SimResult<()> {
        let cfg = self.cfg.crn;
        let floor = cfg.confidence_floor;
        let majority = CrnConfig { subs_weight: Some(0.0), trust_floor: 0.0, ..cfg };
        for band in 0..cfg.bands {
            let busy = self.bands[band].random::<f64>() < self.cfg.usage_rate;
            let truth: i8 = if busy { 1 } else { -1 };
            let c0 = draw_confidence(&self.conf, &mut self.subs);
            let subs = SensingReport::new(SUBS_ID, truth, c0, floor);
            let reports: Vec<SensingReport> = (0..cfg.su_count)
                .map(|i| {
                    let rng = &mut self.sensors[i];
                    let c = draw_confidence(&self.conf, rng);
                    let honest = SensingReport::new(i as AgentId, truth, c, floor);
                    if self.malicious[i] {
                        attack_report(i as AgentId, busy, honest, self.cfg.attack, rng)
                    } else {
                        honest
                    }
                })
                .collect();
            for m in 0..self.modes.len() {
                let trusts = self.trusts(&self.modes[m], band);
                let mode = &mut self.modes[m];
                let (_, d) = if mode.trust {
                    aggregate_and_decide(&subs, &reports, &trusts, &cfg)
                } else {
                    aggregate_and_decide(&subs, &reports, &trusts, &majority)
                };
                let complaint = busy && d == -1;
                if busy {
                    mode.tally.busy += 1;
                    mode.tally.misses += complaint as u64;
                } else {
                    mode.tally.idle += 1;
                    mode.tally.false_alarms += (d != -1) as u64;
                }
                if mode.trust {
                    apply_feedback(&mut mode.records[band], &reports, d, complaint, &cfg);
                }
                if self.cfg.sensing_trace {
                    let (e1, e2) = (mode.tally.eps1(), mode.tally.eps2());
                    self.trace.push(SensingRow {
                        iteration: self.t,
                        band,
                        attack: self.cfg.attack.name(),
                        sigma: self.cfg.malicious_fraction,
                        usage_rate: self.cfg.usage_rate,
                        eps1_cum: e1,
                        eps2_cum: e2,
                        tul: total_utility_loss(e1, e2, &cfg),
                        trust_enabled: mode.trust,
                    });
                }
            }
        }
        let x = self.t as f64;
        for mode in &mut self.modes {
            for recs in &mode.records {
                if let Some(r) = recs.iter().find(|r| r.window.len() > r.capacity) {
                    return Err(SimError::Invariant(format!("trust window longer than {}", r.capacity)));
                }
            }
            mode.eps1.push((x, mode.tally.eps1()));
            mode.eps2.push((x, mode.tally.eps2()));
        }
        self.t += 1;
        Ok(())
    }

    fn clock(&self) -> u64 {
        self.t
    }

    fn finish(self) -> RunOutput {
        let mut out = RunOutput::default();
        if let Some((h, m)) = self.mean_trust() {
            out.push("trust_mean:honest", Some(h));
            out.push("trust_mean:malicious", Some(m));
        }
        let cfg = self.cfg.crn;
        for mode in self.modes {
            let name = mode_name(mode.trust);
            let (e1, e2) = (mode.tally.eps1(), mode.tally.eps2());
            out.push(format!("eps1:{name}"), Some(e1));
            out.push(format!("eps2:{name}"), Some(e2));
            out.push(format!("tul:{name}"), Some(total_utility_loss(e1, e2, &cfg)));
            out.series.push(Series { name: format!("eps1:{name}"), points: mode.eps1 });
            out.series.push(Series { name: format!("eps2:{name}"), points: mode.eps2 });
        }
        if self.cfg.sensing_trace {
            out.traces.push(("sensing".into(), csv_text(&self.trace)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run_world;

    fn small() -> CrnScenarioConfig {
        let mut c = CrnScenarioConfig::default();
        c.crn.su_count = 20;
        c.crn.bands = 2;
        c
    }

    #[test]
    fn deterministic() {
        let a = run_world(CrnWorld::new(small(), 4).unwrap(), 100).unwrap();
        let b = run_world(CrnWorld::new(small(), 4).unwrap(), 100).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn honest_crowd_makes_no_misdetections() {
        let mut c = small();
        c.malicious_fraction = 0.0;
        let out = run_world(CrnWorld::new(c, 1).unwrap(), 200).unwrap();
        assert_eq!(out.metric("eps2:trust"), Some(0.0));
        assert_eq!(out.metric("eps2:no_trust"), Some(0.0));
    }

    #[test]
    fn all_liars_fool_the_majority() {
        let mut c = small();
        c.malicious_fraction = 1.0;
        let out = run_world(CrnWorld::new(c, 2).unwrap(), 200).unwrap();
        assert!(out.metric("eps2:no_trust").unwrap() > 0.9);
        assert!(out.metric("eps1:no_trust").unwrap() > 0.9);
    }

    #[test]
    fn trace_rows() {
        let mut c = small();
        c.sensing_trace = true;
        let out = run_world(CrnWorld::new(c, 0).unwrap(), 5).unwrap();
        let csv = &out.traces[0].1;
        assert!(csv.starts_with("iteration,band,attack,sigma,usage_rate,eps1_cum,eps2_cum,tul,trust_enabled"));
        assert_eq!(csv.lines().count(), 1 + 5 * 2 * 2);
    }

    #[test]
    fn rejects_bad_fraction() {
        let mut c = small();
        c.malicious_fraction = 1.5;
        assert!(CrnWorld::new(c, 0).is_err());
    }
}
