//! Testimony test-bed: consumers pick providers by fused reputation while
//! witnesses of varying honesty answer queries.

use equitrust_core::act::{interaction_reward, ActConfig, ActLearner, Testimony};
use equitrust_core::baselines::{gamma_m2002, nocred_fuse, QGamma};
use equitrust_core::metrics::{collusion_power, NaulAccumulator};
use equitrust_core::reputation::BetaEvidence;
use equitrust_core::AgentId;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{
    distort_testimony, drift_provider, provider_mix, ProviderType, TrusteeBehavior, WitnessBehavior, WitnessMix,
};
use crate::rng::{domain, stream, SimRng};
use crate::{Policy, RunOutput, Series, SimError, SimResult, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ch3Config {
    pub providers: usize,
    pub witnesses: usize,
    /// Interactions per consumer.
    pub problems: u64,
    pub group_size: usize,
    /// Providers offered to a consumer per problem; 0 offers all of them.
    pub candidates: usize,
    /// Steps in which only witnesses interact.
    pub warmup: u64,
    /// Chance that a witness interacts with some provider in a step.
    pub witness_activity: f64,
    pub witness_mix: String,
    pub collusive: bool,
    pub groups: Vec<Policy>,
    pub act: ActConfig,
}

impl Default for Ch3Config {
    fn default() -> Self {
        Self {
            providers: 100,
            witnesses: 100,
            problems: 200,
            group_size: 10,
            candidates: 0,
            warmup: 200,
            witness_activity: 0.01,
            witness_mix: "Hon".into(),
            collusive: false,
            groups: vec![
                Policy::Static0,
                Policy::Static05,
                Policy::Static1,
                Policy::M2002,
                Policy::Fb2007,
                Policy::ActPrime,
                Policy::Act,
                Policy::NoCred,
            ],
            act: ActConfig::default(),
        }
    }
}

impl Ch3Config {
    pub fn validate(&self) -> SimResult<WitnessMix> {
        let mix = WitnessMix::parse(&self.witness_mix)
            .ok_or_else(|| SimError::Config(format!("unknown witness mix `{}`", self.witness_mix)))?;
        if self.providers == 0 {
            return Err(SimError::Config("need at least one provider".into()));
        }
        if !(0.0..=1.0).contains(&self.witness_activity) {
            return Err(SimError::Config("witness_activity must lie in [0, 1]".into()));
        }
        if let Some(p) = self.groups.iter().find(|p| !is_ch3_policy(**p)) {
            return Err(SimError::Config(format!("policy `{p}` has no consumer group here")));
        }
        Ok(mix)
    }

    pub fn total_steps(&self) -> u64 {
        self.warmup + self.problems
    }
}

pub fn is_ch3_policy(p: Policy) -> bool {
    matches!(
        p,
        Policy::Static0
            | Policy::Static05
            | Policy::Static1
            | Policy::M2002
            | Policy::Fb2007
            | Policy::ActPrime
            | Policy::Act
            | Policy::NoCred
    )
}

struct Provider {
    kind: ProviderType,
    behavior: TrusteeBehavior,
    rng: SimRng,
}

impl Provider {
    fn interact(&mut self) -> bool {
        let ok = self.behavior.attempt(&mut self.rng);
        drift_provider(&mut self.behavior, &mut self.rng);
        ok
    }
}

struct Witness {
    behavior: WitnessBehavior,
    evidence: Vec<BetaEvidence>,
    rng: SimRng,
}

enum Learner {
    Fixed(f64),
    M2002,
    Fb2007(QGamma),
    Act(Box<ActLearner>),
    NoCred,
}

struct Consumer {
    group: usize,
    evidence: Vec<BetaEvidence>,
    learner: Learner,
    rng: SimRng,
    outcomes: NaulAccumulator,
    ring_tries: u64,
}

pub struct Ch3World {
    cfg: Ch3Config,
    t: u64,
    providers: Vec<Provider>,
    witnesses: Vec<Witness>,
    consumers: Vec<Consumer>,
    curves: Vec<Vec<(f64, f64)>>,
}

impl Ch3World {
    pub fn new(cfg: Ch3Config, seed: u64) -> SimResult<Self> {
        let mix = cfg.validate()?;
        let providers = provider_mix(cfg.providers)
            .into_iter()
            .enumerate()
            .map(|(i, kind)| Provider {
                kind,
                behavior: TrusteeBehavior {
                    success_prob: kind.initial_success(),
                    capacity: u32::MAX,
                    drifts: kind != ProviderType::Honest,
                },
                rng: stream(seed, domain::PROVIDER, i as u64),
            })
            .collect();
        let mut behaviors = mix.build(cfg.witnesses, cfg.collusive);
        behaviors.shuffle(&mut stream(seed, domain::SETUP, 0));
        let witnesses = behaviors
            .into_iter()
            .enumerate()
            .map(|(i, behavior)| Witness {
                behavior,
                evidence: vec![BetaEvidence::default(); cfg.providers],
                rng: stream(seed, domain::WITNESS, i as u64),
            })
            .collect();
        let mut consumers = Vec::new();
        for (g, policy) in cfg.groups.iter().enumerate() {
            for _ in 0..cfg.group_size {
                let learner = match policy {
                    Policy::M2002 => Learner::M2002,
                    Policy::Fb2007 => Learner::Fb2007(QGamma::default()),
                    Policy::ActPrime => Learner::Act(Box::new(ActLearner::new(cfg.act, false))),
                    Policy::Act => Learner::Act(Box::new(ActLearner::new(cfg.act, true))),
                    Policy::NoCred => Learner::NoCred,
                    p => Learner::Fixed(p.static_gamma().unwrap_or(0.5)),
                };
                let id = consumers.len() as u64;
                consumers.push(Consumer {
                    group: g,
                    evidence: vec![BetaEvidence::default(); cfg.providers],
                    learner,
                    rng: stream(seed, domain::CONSUMER, id),
                    outcomes: NaulAccumulator::new(cfg.act.gain, cfg.act.cost),
                    ring_tries: 0,
                });
            }
        }
        let curves = vec![Vec::new(); cfg.groups.len()];
        Ok(Self {
            cfg,
            t: 0,
            providers,
            witnesses,
            consumers,
            curves,
        })
    }

    fn in_ring(&self, j: usize) -> bool {
        self.cfg.collusive && self.providers[j].kind == ProviderType::TypeIII
    }

    fn testimony(&mut self, w: usize, j: usize) -> Option<f64> {
        let ring = self.in_ring(j);
        let wit = &mut self.witnesses[w];
        let ev = wit.evidence[j];
        if ev.total() == 0 {
            return None;
        }
        Some(distort_testimony(ev.score(), &wit.behavior, ring, &mut wit.rng))
    }

    fn all_testimonies(&mut self, j: usize) -> Vec<f64> {
        (0..self.witnesses.len()).filter_map(|w| self.testimony(w, j)).collect()
    }

    fn witness_phase(&mut self) {
        let n = self.providers.len();
        for w in 0..self.witnesses.len() {
            if self.witnesses[w].rng.random::<f64>() >= self.cfg.witness_activity {
                continue;
            }
            let j = self.witnesses[w].rng.random_range(0..n);
            let ok = self.providers[j].interact();
            self.witnesses[w].evidence[j].add(ok);
        }
    }

    fn consumer_turn(&mut self, c: usize) {
        let n = self.providers.len();
        let k = if self.cfg.candidates == 0 { n } else { self.cfg.candidates.min(n) };
        let cands: Vec<usize> = sample(&mut self.consumers[c].rng, n, k).into_vec();
        let cons = &mut self.consumers[c];
        let fb_index = match &cons.learner {
            Learner::Fb2007(q) => Some(q.choose(&mut cons.rng)),
            _ => None,
        };
        let mut best: Option<(usize, f64)> = None;
        let mut evals = Vec::with_capacity(k);
        for &j in &cands {
            let direct = self.consumers[c].evidence[j].score();
            let n_direct = self.consumers[c].evidence[j].total();
            let rep = match &self.consumers[c].learner {
                Learner::Act(_) => {
                    let cons = &mut self.consumers[c];
                    let sel = match &cons.learner {
                        Learner::Act(l) => l.plan_queries(j as AgentId, &mut cons.rng),
                        _ => unreachable!(),
                    };
                    let asked: Vec<usize> = if sel.broadcast {
                        (0..self.witnesses.len()).collect()
                    } else {
                        sel.known.iter().map(|&w| w as usize).collect()
                    };
                    let mut replies = Vec::with_capacity(asked.len());
                    for w in asked {
                        if let Some(v) = self.testimony(w, j) {
                            replies.push(Testimony {
                                witness_id: w as AgentId,
                                trustee_id: j as AgentId,
                                value: v,
                                at: self.t,
                            });
                        }
                    }
                    let Learner::Act(l) = &mut self.consumers[c].learner else {
                        unreachable!()
                    };
                    let e = l.evaluate(j as AgentId, direct, &sel, &replies);
                    let r = e.reputation;
                    evals.push(Some(e));
                    r
                }
                Learner::NoCred => {
                    let ts = self.all_testimonies(j);
                    evals.push(None);
                    nocred_fuse(&ts, direct)
                }
                other => {
                    let gamma = match other {
                        Learner::Fixed(g) => *g,
                        Learner::M2002 => gamma_m2002(n_direct, 0.1, 0.95).unwrap_or(1.0),
                        Learner::Fb2007(q) => q.gamma(fb_index.unwrap_or(0)),
                        _ => 1.0,
                    };
                    let ts = self.all_testimonies(j);
                    evals.push(None);
                    if ts.is_empty() {
                        direct
                    } else {
                        let mean = ts.iter().sum::<f64>() / ts.len() as f64;
                        gamma * direct + (1.0 - gamma) * mean
                    }
                }
            };
            if best.is_none_or(|(_, b)| rep > b) {
                best = Some((evals.len() - 1, rep));
            }
        }
        let Some((pick, _)) = best else { return };
        let j = cands[pick];
        let ok = self.providers[j].interact();
        let ring = self.in_ring(j);
        let act_cfg = self.cfg.act;
        let cons = &mut self.consumers[c];
        cons.evidence[j].add(ok);
        cons.outcomes.push(ok);
        if ring {
            cons.ring_tries += 1;
        }
        match &mut cons.learner {
            Learner::Act(l) => {
                if let Some(e) = evals[pick].take() {
                    l.learn(&e, ok);
                }
                l.tick();
            }
            Learner::Fb2007(q) => q.update(fb_index.unwrap_or(0), interaction_reward(ok, &act_cfg)),
            _ => {}
        }
    }

    fn group_naul(&self, g: usize) -> NaulAccumulator {
        let mut acc = NaulAccumulator::new(self.cfg.act.gain, self.cfg.act.cost);
        for c in self.consumers.iter().filter(|c| c.group == g) {
            acc.merge(&c.outcomes);
        }
        acc
    }
}

impl World for Ch3World {
    fn advance_step(&mut self) -> SimResult<()> {
        if self.t >= self.cfg.warmup {
            for c in 0..self.consumers.len() {
                self.consumer_turn(c);
            }
            for g in 0..self.cfg.groups.len() {
                if let Some(v) = self.group_naul(g).value() {
                    self.curves[g].push(((self.t - self.cfg.warmup + 1) as f64, v));
                }
            }
        }
        self.witness_phase();
        self.t += 1;
        Ok(())
    }

    fn clock(&self) -> u64 {
        self.t
    }

    fn finish(self) -> RunOutput {
        let mut out = RunOutput::default();
        for (g, policy) in self.cfg.groups.iter().enumerate() {
            out.push(format!("naul:{policy}"), self.group_naul(g).value());
        }
        for (g, policy) in self.cfg.groups.iter().enumerate() {
            let tries: Vec<u64> = self.consumers.iter().filter(|c| c.group == g).map(|c| c.ring_tries).collect();
            let served = self.consumers.iter().find(|c| c.group == g).map_or(0, |c| c.outcomes.total);
            let cp = if self.cfg.collusive { collusion_power(&tries, served) } else { None };
            out.push(format!("collusion_power:{policy}"), cp);
        }
        for (g, policy) in self.cfg.groups.iter().enumerate() {
            out.series.push(Series {
                name: format!("naul:{policy}"),
                points: self.curves[g].clone(),
            });
        }
        if let Some(Learner::Act(l)) = self
            .consumers
            .iter()
            .find(|c| matches!(&c.learner, Learner::Act(l) if l.learn_credibility))
            .map(|c| &c.learner)
        {
            let mut buf = Vec::new();
            if l.write_csv(&mut buf).is_ok() {
                out.traces.push(("act_model".into(), String::from_utf8_lossy(&buf).into_owned()));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run_world;

    fn small(mix: &str, collusive: bool) -> Ch3Config {
        Ch3Config {
            providers: 20,
            witnesses: 10,
            problems: 30,
            group_size: 2,
            warmup: 20,
            witness_mix: mix.into(),
            collusive,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = small("BS40", false);
        let a = run_world(Ch3World::new(cfg.clone(), 5).unwrap(), cfg.total_steps()).unwrap();
        let b = run_world(Ch3World::new(cfg.clone(), 5).unwrap(), cfg.total_steps()).unwrap();
        assert_eq!(a, b);
        let c = run_world(Ch3World::new(cfg.clone(), 6).unwrap(), cfg.total_steps()).unwrap();
        assert_ne!(a.metrics, c.metrics);
    }

    #[test]
    fn every_consumer_solves_every_problem() {
        let cfg = small("Hon", true);
        let w = run_world(Ch3World::new(cfg.clone(), 1).unwrap(), cfg.total_steps()).unwrap();
        for p in &cfg.groups {
            let v = w.metric(&format!("naul:{p}")).unwrap();
            assert!((0.0..=1.0).contains(&v));
            let cp = w.metric(&format!("collusion_power:{p}")).unwrap();
            assert!((0.0..=1.0).contains(&cp));
        }
        assert_eq!(w.series("naul:act").unwrap().points.len(), 30);
    }

    #[test]
    fn warmup_only_world_has_no_outcomes() {
        let cfg = Ch3Config { problems: 0, ..small("Hon", false) };
        let w = run_world(Ch3World::new(cfg.clone(), 1).unwrap(), cfg.total_steps()).unwrap();
        assert_eq!(w.metric("naul:act"), None);
    }

    #[test]
    fn rejects_bad_mix_and_foreign_policy() {
        assert!(Ch3World::new(small("BX10", false), 0).is_err());
        let cfg = Ch3Config { groups: vec![Policy::Sword], ..small("Hon", false) };
        assert!(Ch3World::new(cfg, 0).is_err());
    }
}
