//! Actor-critic testimony filtering: witness credibility, source weighting and fusion.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::{AgentId, Step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActConfig {
    /// Trust threshold for interaction decisions.
    pub threshold: f64,
    pub learn_rate: f64,
    /// Weight of the misleading-testimony penalty.
    pub collusion_bias: f64,
    pub baseline_mix: f64,
    pub top_m: usize,
    pub gain: f64,
    pub cost: f64,
    pub reward: f64,
    pub penalty: f64,
    pub explore_floor: f64,
    pub explore_decay: f64,
}

impl Default for ActConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            learn_rate: 0.4,
            collusion_bias: 0.05,
            baseline_mix: 0.6,
            top_m: 10,
            gain: 5.0,
            cost: 1.0,
            reward: 1.0,
            penalty: -10.0,
            explore_floor: 0.1,
            explore_decay: 0.995,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Testimony {
    pub witness_id: AgentId,
    pub trustee_id: AgentId,
    pub value: f64,
    pub at: Step,
}

/// Learning state for one witness about one trustee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessProfile {
    pub witness_id: AgentId,
    pub learn_param: f64,
    pub credibility: f64,
    pub uses: u64,
    pub misleading_sum: f64,
}

impl WitnessProfile {
    pub fn new(witness_id: AgentId) -> Self {
        Self {
            witness_id,
            learn_param: 0.0,
            credibility: 0.0,
            uses: 0,
            misleading_sum: 0.0,
        }
    }

    /// Share of uses where the witness vouched for a trustee that then failed.
    pub fn misleading_rate(&self) -> f64 {
        if self.uses == 0 {
            0.0
        } else {
            self.misleading_sum / self.uses as f64
        }
    }
}

/// Critic state choosing between direct and indirect evidence for one trustee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceWeights {
    pub p_direct: f64,
    pub p_indirect: f64,
    pub pi_direct: f64,
    pub pi_indirect: f64,
    pub baseline_direct: f64,
    pub baseline_indirect: f64,
    pub baseline_interaction: f64,
}

impl Default for SourceWeights {
    fn default() -> Self {
        Self {
            p_direct: 0.0,
            p_indirect: 0.0,
            pi_direct: 0.5,
            pi_indirect: 0.5,
            baseline_direct: 0.0,
            baseline_indirect: 0.0,
            baseline_interaction: 0.0,
        }
    }
}

impl SourceWeights {
    pub fn gamma(&self) -> f64 {
        self.pi_direct
    }
}

pub fn interaction_reward(success: bool, cfg: &ActConfig) -> f64 {
    if success {
        cfg.gain - cfg.cost
    } else {
        -cfg.cost
    }
}

/// Numerically stable softmax.
pub fn softmax(params: &[f64]) -> Vec<f64> {
    if params.is_empty() {
        return Vec::new();
    }
    let max = params.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = params.iter().map(|p| (p - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Updates the witnesses whose testimonies were used for one concluded interaction.
///
/// `testimonies[k]` is the value witness `profiles[k]` gave. The interaction
/// baseline in `weights` is advanced after the witness updates.
pub fn update_witness_credibilities(
    profiles: &mut [WitnessProfile],
    reward: f64,
    outcome: bool,
    testimonies: &[f64],
    weights: &mut SourceWeights,
    cfg: &ActConfig,
) {
    if profiles.is_empty() {
        return;
    }
    debug_assert_eq!(profiles.len(), testimonies.len());
    let fresh = 1.0 / profiles.len() as f64;
    let baseline = weights.baseline_interaction;
    let failed = if outcome { 0.0 } else { 1.0 };
    for (prof, &value) in profiles.iter_mut().zip(testimonies) {
        let prev_pi = if prof.uses == 0 { fresh } else { prof.credibility };
        let vouched = if value >= cfg.threshold { 1.0 } else { 0.0 };
        prof.uses += 1;
        prof.misleading_sum += vouched * failed;
        let theta = prof.misleading_rate();
        prof.learn_param += cfg.learn_rate * (reward - baseline - cfg.collusion_bias * theta) * (1.0 - prev_pi);
    }
    let params: Vec<f64> = profiles.iter().map(|p| p.learn_param).collect();
    for (prof, pi) in profiles.iter_mut().zip(softmax(&params)) {
        prof.credibility = pi;
    }
    weights.baseline_interaction = cfg.baseline_mix * baseline + (1.0 - cfg.baseline_mix) * reward;
}

/// Credibility-weighted mean of testimonies.
///
/// Each item is `(credibility, value)`; `None` marks a witness not yet in the
/// selected set, which is weighted at the lowest credibility among known ones.
/// Returns `None` when there is nothing to aggregate.
pub fn indirect_trust(items: &[(Option<f64>, f64)]) -> Option<f64> {
    if items.is_empty() {
        return None;
    }
    let floor = items
        .iter()
        .filter_map(|(c, _)| *c)
        .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.min(c))))
        .unwrap_or(1.0);
    let (mut num, mut den) = (0.0, 0.0);
    for &(c, v) in items {
        let w = c.unwrap_or(floor);
        num += w * v;
        den += w;
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        Some(items.iter().map(|(_, v)| v).sum::<f64>() / items.len() as f64)
    }
}

pub fn update_source_preference(
    weights: &mut SourceWeights,
    direct_decision: bool,
    indirect_decision: bool,
    outcome: bool,
    cfg: &ActConfig,
) {
    let reward = |agrees: bool| if agrees { cfg.reward } else { cfg.penalty };
    let r_d = reward(direct_decision == outcome);
    let r_ind = reward(indirect_decision == outcome);
    weights.p_direct += cfg.learn_rate * (r_d - weights.baseline_direct) * (1.0 - weights.pi_direct);
    weights.p_indirect += cfg.learn_rate * (r_ind - weights.baseline_indirect) * (1.0 - weights.pi_indirect);
    weights.baseline_direct = cfg.baseline_mix * weights.baseline_direct + (1.0 - cfg.baseline_mix) * r_d;
    weights.baseline_indirect = cfg.baseline_mix * weights.baseline_indirect + (1.0 - cfg.baseline_mix) * r_ind;
    let pi = softmax(&[weights.p_direct, weights.p_indirect]);
    weights.pi_direct = pi[0];
    weights.pi_indirect = 1.0 - pi[0];
}

pub fn fuse_reputation(direct: f64, indirect: f64, gamma: f64) -> f64 {
    gamma * direct + (1.0 - gamma) * indirect
}

pub fn decay_explore(pr: f64, cfg: &ActConfig) -> f64 {
    (pr * cfg.explore_decay).max(cfg.explore_floor)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessSelection {
    /// Known witnesses chosen by credibility, best first.
    pub known: Vec<AgentId>,
    /// Whether to also broadcast to witnesses outside the known set.
    pub broadcast: bool,
}

/// Top-M known witnesses, plus an exploration coin.
///
/// Ranking uses the learning parameter, which stays comparable across the
/// different sets a credibility was normalized over; ties fall to credibility,
/// then to the lower id.
pub fn select_witnesses<R: Rng + ?Sized>(
    known: &[WitnessProfile],
    explore_prob: f64,
    cfg: &ActConfig,
    rng: &mut R,
) -> WitnessSelection {
    let mut ranked: Vec<&WitnessProfile> = known.iter().collect();
    ranked.sort_by(|a, b| {
        b.learn_param
            .total_cmp(&a.learn_param)
            .then(b.credibility.total_cmp(&a.credibility))
            .then(a.witness_id.cmp(&b.witness_id))
    });
    let known_ids: Vec<AgentId> = ranked.iter().take(cfg.top_m).map(|p| p.witness_id).collect();
    let broadcast = known_ids.is_empty() || rng.random::<f64>() < explore_prob;
    WitnessSelection {
        known: known_ids,
        broadcast,
    }
}

/// Per-trustee state held by one truster.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrusteeModel {
    pub weights: SourceWeights,
    pub witnesses: BTreeMap<AgentId, WitnessProfile>,
    pub last_direct: f64,
}

/// Result of evaluating one trustee, kept until the outcome is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub trustee_id: AgentId,
    pub direct: f64,
    pub indirect: Option<f64>,
    pub gamma: f64,
    pub reputation: f64,
    /// Selected known witnesses and the values they gave.
    pub used: Vec<(AgentId, f64)>,
}

/// One truster's ACT learner over all trustees it evaluates.
#[derive(Debug, Clone, PartialEq)]
pub struct ActLearner {
    pub cfg: ActConfig,
    pub explore_prob: f64,
    /// Learn per-witness credibility; when off, testimonies are averaged
    /// without weights and only the source preference is learned.
    pub learn_credibility: bool,
    models: BTreeMap<AgentId, TrusteeModel>,
}

impl ActLearner {
    pub fn new(cfg: ActConfig, learn_credibility: bool) -> Self {
        Self {
            cfg,
            explore_prob: 1.0,
            learn_credibility,
            models: BTreeMap::new(),
        }
    }

    pub fn model(&self, trustee: AgentId) -> Option<&TrusteeModel> {
        self.models.get(&trustee)
    }

    pub fn gamma(&self, trustee: AgentId) -> f64 {
        self.models.get(&trustee).map_or(0.5, |m| m.weights.gamma())
    }

    /// Ids the learner wants testimonies from about `trustee`, with the broadcast flag.
    pub fn plan_queries<R: Rng + ?Sized>(&self, trustee: AgentId, rng: &mut R) -> WitnessSelection {
        let known: Vec<WitnessProfile> = self
            .models
            .get(&trustee)
            .map(|m| m.witnesses.values().cloned().collect())
            .unwrap_or_default();
        select_witnesses(&known, self.explore_prob, &self.cfg, rng)
    }

    /// Combines direct evidence with the testimonies gathered for `trustee`.
    ///
    /// `selection` must be the plan returned by [`Self::plan_queries`];
    /// `testimonies` holds every reply received.
    pub fn evaluate(
        &mut self,
        trustee: AgentId,
        direct: f64,
        selection: &WitnessSelection,
        testimonies: &[Testimony],
    ) -> Evaluation {
        let learn = self.learn_credibility;
        let model = self.models.entry(trustee).or_default();
        model.last_direct = direct;
        let mut items = Vec::with_capacity(testimonies.len());
        let mut used = Vec::new();
        for t in testimonies {
            let selected = selection.known.contains(&t.witness_id);
            if !selected && !selection.broadcast {
                continue;
            }
            let cred = if !learn {
                Some(1.0)
            } else {
                match model.witnesses.get(&t.witness_id) {
                    Some(w) if selected && w.uses > 0 => Some(w.credibility),
                    _ => None,
                }
            };
            if selected {
                used.push((t.witness_id, t.value));
            }
            items.push((cred, t.value));
        }
        let indirect = indirect_trust(&items);
        let gamma = if indirect.is_some() { model.weights.gamma() } else { 1.0 };
        let reputation = fuse_reputation(direct, indirect.unwrap_or(direct), gamma);
        if selection.broadcast {
            let fresh = 1.0 / self.cfg.top_m.max(1) as f64;
            for t in testimonies {
                model
                    .witnesses
                    .entry(t.witness_id)
                    .or_insert_with(|| WitnessProfile {
                        credibility: fresh,
                        ..WitnessProfile::new(t.witness_id)
                    });
            }
        }
        Evaluation {
            trustee_id: trustee,
            direct,
            indirect,
            gamma,
            reputation,
            used,
        }
    }

    /// Learns from the outcome of an interaction that followed `eval`.
    pub fn learn(&mut self, eval: &Evaluation, outcome: bool) {
        let cfg = self.cfg;
        let model = self.models.entry(eval.trustee_id).or_default();
        let reward = interaction_reward(outcome, &cfg);
        if self.learn_credibility && !eval.used.is_empty() {
            let mut profiles: Vec<WitnessProfile> = eval
                .used
                .iter()
                .map(|(id, _)| model.witnesses.get(id).cloned().unwrap_or_else(|| WitnessProfile::new(*id)))
                .collect();
            let values: Vec<f64> = eval.used.iter().map(|(_, v)| *v).collect();
            update_witness_credibilities(&mut profiles, reward, outcome, &values, &mut model.weights, &cfg);
            for p in profiles {
                model.witnesses.insert(p.witness_id, p);
            }
        } else {
            let w = &mut model.weights;
            w.baseline_interaction = cfg.baseline_mix * w.baseline_interaction + (1.0 - cfg.baseline_mix) * reward;
        }
        if let Some(ind) = eval.indirect {
            update_source_preference(
                &mut model.weights,
                eval.direct >= cfg.threshold,
                ind >= cfg.threshold,
                outcome,
                &cfg,
            );
        }
    }

    /// Advances the exploration schedule by one step.
    pub fn tick(&mut self) {
        self.explore_prob = decay_explore(self.explore_prob, &self.cfg);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trustee_id", "gamma", "direct_score", "witness_id", "p", "pi", "uses"])?;
        for (trustee, m) in &self.models {
            let g = format!("{:.6}", m.weights.gamma());
            let d = format!("{:.6}", m.last_direct);
            if m.witnesses.is_empty() {
                w.write_record([trustee.to_string(), g.clone(), d.clone(), String::new(), String::new(), String::new(), String::new()])?;
            }
            for wp in m.witnesses.values() {
                w.write_record([
                    trustee.to_string(),
                    g.clone(),
                    d.clone(),
                    wp.witness_id.to_string(),
                    format!("{:.6}", wp.learn_param),
                    format!("{:.6}", wp.credibility),
                    wp.uses.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| CoreError::Csv(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ActConfig {
        ActConfig::default()
    }

    #[test]
    fn defaults_match_table() {
        let c = cfg();
        assert_eq!(
            (c.threshold, c.baseline_mix, c.collusion_bias, c.learn_rate, c.top_m),
            (0.5, 0.6, 0.05, 0.4, 10)
        );
        assert_eq!((c.gain, c.cost, c.reward, c.penalty, c.explore_floor), (5.0, 1.0, 1.0, -10.0, 0.1));
    }

    #[test]
    fn reward_examples() {
        let mut c = cfg();
        assert_eq!(interaction_reward(true, &c), 4.0);
        assert_eq!(interaction_reward(false, &c), -1.0);
        c.gain = c.cost;
        assert_eq!(interaction_reward(true, &c), 0.0);
    }

    #[test]
    fn equal_params_give_uniform_credibility() {
        let mut ps: Vec<_> = (0..10).map(WitnessProfile::new).collect();
        let mut w = SourceWeights::default();
        update_witness_credibilities(&mut ps, 4.0, true, &[0.6; 10], &mut w, &cfg());
        for p in &ps {
            assert!((p.credibility - 0.1).abs() < 1e-12);
        }
        assert!((w.baseline_interaction - 0.4 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn misleading_rate_examples() {
        let mut ps = vec![WitnessProfile::new(1), WitnessProfile::new(2)];
        let mut w = SourceWeights::default();
        update_witness_credibilities(&mut ps, -1.0, false, &[0.9, 0.3], &mut w, &cfg());
        assert_eq!(ps[0].misleading_rate(), 1.0);
        assert_eq!(ps[1].misleading_rate(), 0.0);
        let sum: f64 = ps.iter().map(|p| p.credibility).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(ps[0].credibility < ps[1].credibility);
    }

    #[test]
    fn empty_witness_set_is_noop() {
        let mut w = SourceWeights::default();
        update_witness_credibilities(&mut [], 4.0, true, &[], &mut w, &cfg());
        assert_eq!(w, SourceWeights::default());
    }

    #[test]
    fn indirect_examples() {
        assert_eq!(indirect_trust(&[(Some(1.0), 0.7)]), Some(0.7));
        assert_eq!(indirect_trust(&[(Some(0.5), 0.2), (Some(0.5), 0.8)]), Some(0.5));
        let v = indirect_trust(&[(Some(0.5), 1.0), (Some(0.25), 0.0), (Some(0.25), 0.0)]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(indirect_trust(&[]), None);
        // An unknown witness takes the lowest known weight.
        let v = indirect_trust(&[(Some(0.75), 1.0), (Some(0.25), 0.0), (None, 0.0)]).unwrap();
        assert!((v - 0.75 / 1.25).abs() < 1e-12);
        assert_eq!(indirect_trust(&[(None, 0.2), (None, 0.6)]), Some(0.4));
    }

    #[test]
    fn source_preference_examples() {
        let c = cfg();
        let w = SourceWeights::default();
        assert_eq!(w.pi_direct, 0.5);
        let mut a = w;
        update_source_preference(&mut a, true, false, true, &c);
        assert!(a.pi_direct > 0.5);
        assert!((a.pi_direct + a.pi_indirect - 1.0).abs() < 1e-12);
        let mut b = SourceWeights {
            p_direct: 0.3,
            ..Default::default()
        };
        let pi = softmax(&[0.3, 0.0]);
        b.pi_direct = pi[0];
        b.pi_indirect = pi[1];
        update_source_preference(&mut b, true, true, true, &c);
        assert!(b.pi_direct > b.pi_indirect);
    }

    #[test]
    fn fusion_examples() {
        assert_eq!(fuse_reputation(0.3, 0.9, 1.0), 0.3);
        assert_eq!(fuse_reputation(0.3, 0.9, 0.0), 0.9);
        assert_eq!(fuse_reputation(0.2, 0.8, 0.5), 0.5);
    }

    #[test]
    fn selection_examples() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sel = select_witnesses(&[], 1.0, &c, &mut rng);
        assert!(sel.known.is_empty() && sel.broadcast);
        let known: Vec<_> = (0..20)
            .map(|i| WitnessProfile {
                credibility: i as f64 / 100.0,
                ..WitnessProfile::new(i)
            })
            .collect();
        let sel = select_witnesses(&known, 0.0, &c, &mut rng);
        assert_eq!(sel.known, (10..20).rev().collect::<Vec<_>>());
        assert!(!sel.broadcast);
        let mut demoted = known.clone();
        demoted[19].learn_param = -1.0;
        let sel = select_witnesses(&demoted, 0.0, &c, &mut rng);
        assert_eq!(sel.known[0], 18);
        assert!(!sel.known.contains(&19));
        let few: Vec<_> = (0..3).map(WitnessProfile::new).collect();
        assert_eq!(select_witnesses(&few, 0.0, &c, &mut rng).known, vec![0, 1, 2]);
        let d = ActConfig {
            explore_decay: 0.5,
            ..c
        };
        assert_eq!(decay_explore(0.12, &d), 0.1);
    }

    #[test]
    fn ballot_stuffer_loses_credibility() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ps = vec![WitnessProfile::new(0), WitnessProfile::new(1)];
        let mut w = SourceWeights::default();
        for _ in 0..100 {
            let ok = rng.random::<f64>() < 0.1;
            let r = interaction_reward(ok, &c);
            update_witness_credibilities(&mut ps, r, ok, &[0.95, 0.1], &mut w, &c);
        }
        assert!(ps[0].credibility < ps[1].credibility);
    }

    #[test]
    fn baseline_converges_geometrically() {
        let c = cfg();
        let mut w = SourceWeights::default();
        let mut ps = vec![WitnessProfile::new(0)];
        let r = 4.0;
        for k in 1..=12 {
            update_witness_credibilities(&mut ps, r, true, &[0.9], &mut w, &c);
            let expected = r * (1.0 - c.baseline_mix.powi(k));
            assert!((w.baseline_interaction - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn learner_without_testimonies_keeps_weights() {
        let mut l = ActLearner::new(cfg(), true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sel = l.plan_queries(4, &mut rng);
        let ev = l.evaluate(4, 0.3, &sel, &[]);
        assert_eq!(ev.gamma, 1.0);
        assert_eq!(ev.reputation, 0.3);
        l.learn(&ev, false);
        assert_eq!(l.model(4).unwrap().weights.pi_direct, 0.5);
    }

    #[test]
    fn learner_discovers_and_ranks_witnesses() {
        let mut l = ActLearner::new(cfg(), true);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for step in 0..60 {
            let sel = l.plan_queries(1, &mut rng);
            let ts: Vec<Testimony> = [(0, 0.95), (1, 0.1)]
                .iter()
                .map(|&(w, v)| Testimony { witness_id: w, trustee_id: 1, value: v, at: step })
                .collect();
            let ev = l.evaluate(1, 0.4, &sel, &ts);
            l.learn(&ev, false);
            l.tick();
        }
        let m = l.model(1).unwrap();
        assert!(m.witnesses[&0].credibility < m.witnesses[&1].credibility);
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("trustee_id,gamma,direct_score,witness_id,p,pi,uses\n"));
    }
}
