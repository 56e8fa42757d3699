//! Comparison policies: static and learned fusion weights, greedy and
//! exploring HIT allocators, first-come-first-served and credulous averaging.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::act::fuse_reputation;
use crate::error::{CoreError, Result};
use crate::AgentId;

/// Direct interactions at which knowledge of a worker is considered complete.
pub const KNOWLEDGE_SATURATION: f64 = 20.0;

/// Observations needed before direct evidence is trusted alone.
pub fn m2002_min_observations(epsilon: f64, confidence: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CoreError::OutOfRange { name: "epsilon", value: epsilon });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CoreError::OutOfRange { name: "confidence", value: confidence });
    }
    Ok(-((1.0 - confidence) / 2.0).ln() / (2.0 * epsilon * epsilon))
}

pub fn gamma_m2002(direct_observations: u64, epsilon: f64, confidence: f64) -> Result<f64> {
    let n_min = m2002_min_observations(epsilon, confidence)?;
    Ok((direct_observations as f64 / n_min).min(1.0))
}

/// Epsilon-greedy value learner over a fixed set of fusion weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGamma {
    pub choices: Vec<f64>,
    pub q: Vec<f64>,
    pub learning_rate: f64,
    pub epsilon: f64,
}

impl Default for QGamma {
    fn default() -> Self {
        Self::new(vec![0.0, 0.5, 1.0])
    }
}

impl QGamma {
    pub fn new(choices: Vec<f64>) -> Self {
        let q = vec![0.0; choices.len()];
        Self {
            choices,
            q,
            learning_rate: 0.1,
            epsilon: 0.1,
        }
    }

    /// Picks an index: random with probability epsilon, else a random argmax.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.epsilon {
            return rng.random_range(0..self.choices.len());
        }
        let best = self.q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..self.q.len()).filter(|&i| self.q[i] == best).collect();
        ties[rng.random_range(0..ties.len())]
    }

    pub fn gamma(&self, index: usize) -> f64 {
        self.choices[index]
    }

    pub fn update(&mut self, index: usize, reward: f64) {
        self.q[index] += self.learning_rate * (reward - self.q[index]);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GammaPolicy {
    Static(f64),
    M2002 { epsilon: f64, confidence: f64 },
    Fb2007(QGamma),
}

impl GammaPolicy {
    pub fn m2002_default() -> Self {
        GammaPolicy::M2002 {
            epsilon: 0.1,
            confidence: 0.95,
        }
    }
}

pub fn nocred_fuse(testimonies: &[f64], direct: f64) -> f64 {
    if testimonies.is_empty() {
        return direct;
    }
    let mean = testimonies.iter().sum::<f64>() / testimonies.len() as f64;
    fuse_reputation(direct, mean, 0.5)
}

/// HIT counts per worker id; ids absent from the plan get nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HitPlan {
    pub assignments: Vec<(AgentId, u32)>,
    pub unassigned: u32,
    /// Set when no worker qualified and the caller should explore instead.
    pub needs_exploration: bool,
}

impl HitPlan {
    pub fn assigned(&self) -> u32 {
        self.assignments.iter().map(|a| a.1).sum()
    }
}

/// Splits `total` across `weights` proportionally with largest-remainder rounding.
pub fn proportional_split(weights: &[f64], total: u32) -> Vec<u32> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * total as f64).collect();
    let mut out: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let mut short = total - out.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if short == 0 {
            break;
        }
        out[i] += 1;
        short -= 1;
    }
    out
}

/// Greedy allocation of a HIT group to the most reputable workers.
///
/// `workers` holds `(id, reputation)`. With enough qualifying workers each of
/// the top `hits` gets one HIT; otherwise HITs are split across qualifying
/// workers in proportion to reputation.
pub fn greedy_hit_allocate(workers: &[(AgentId, f64)], hits: u32, threshold: f64) -> HitPlan {
    let mut good: Vec<(AgentId, f64)> = workers.iter().copied().filter(|w| w.1 >= threshold).collect();
    if hits == 0 {
        return HitPlan::default();
    }
    if good.is_empty() {
        return HitPlan {
            assignments: Vec::new(),
            unassigned: hits,
            needs_exploration: true,
        };
    }
    good.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    if good.len() >= hits as usize {
        return HitPlan {
            assignments: good.iter().take(hits as usize).map(|w| (w.0, 1)).collect(),
            unassigned: 0,
            needs_exploration: false,
        };
    }
    let weights: Vec<f64> = good.iter().map(|w| w.1).collect();
    let split = proportional_split(&weights, hits);
    HitPlan {
        assignments: good.iter().zip(split).filter(|(_, n)| *n > 0).map(|(w, n)| (w.0, n)).collect(),
        unassigned: 0,
        needs_exploration: false,
    }
}

/// Spreads `hits` one at a time over the workers with the fewest observations.
pub fn explore_low_observation<R: Rng + ?Sized>(observations: &[(AgentId, u64)], hits: u32, rng: &mut R) -> HitPlan {
    if observations.is_empty() || hits == 0 {
        return HitPlan {
            unassigned: hits,
            ..Default::default()
        };
    }
    let mut order: Vec<(AgentId, u64, u32)> = observations.iter().map(|&(id, n)| (id, n, rng.random())).collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.2.cmp(&b.2)));
    let mut counts: Vec<(AgentId, u32)> = Vec::new();
    for i in 0..hits as usize {
        let id = order[i % order.len()].0;
        match counts.iter_mut().find(|c| c.0 == id) {
            Some(c) => c.1 += 1,
            None => counts.push((id, 1)),
        }
    }
    HitPlan {
        assignments: counts,
        unassigned: 0,
        needs_exploration: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KnowledgeGroup {
    /// Fully known.
    Tk,
    /// Partially known.
    Pk,
    /// Heard of but never used.
    Au,
    /// Never heard of.
    Tu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeRecord {
    pub worker_id: AgentId,
    pub degree: f64,
    pub group: KnowledgeGroup,
}

impl KnowledgeRecord {
    pub fn new(worker_id: AgentId, direct_interactions: u64, heard_of: bool) -> Self {
        let degree = knowledge_degree(direct_interactions);
        let group = if degree >= 1.0 {
            KnowledgeGroup::Tk
        } else if degree > 0.0 {
            KnowledgeGroup::Pk
        } else if heard_of {
            KnowledgeGroup::Au
        } else {
            KnowledgeGroup::Tu
        };
        Self { worker_id, degree, group }
    }
}

pub fn knowledge_degree(direct_interactions: u64) -> f64 {
    (direct_interactions as f64 / KNOWLEDGE_SATURATION).min(1.0)
}

/// Exploits fully known trustworthy workers when there are enough of them;
/// otherwise spends the group on less known workers ranked by `trust`.
///
/// `workers` holds `(id, trust)` aligned with `records`.
pub fn m2009e_allocate<R: Rng + ?Sized>(
    records: &[KnowledgeRecord],
    workers: &[(AgentId, f64)],
    qt: f64,
    hits: u32,
    rng: &mut R,
) -> HitPlan {
    let known: Vec<(AgentId, f64)> = records
        .iter()
        .zip(workers)
        .filter(|(r, w)| r.group == KnowledgeGroup::Tk && w.1 >= qt)
        .map(|(_, w)| *w)
        .collect();
    if known.len() >= hits as usize {
        return greedy_hit_allocate(&known, hits, qt);
    }
    // Known good workers keep their share; the rest goes to exploration.
    let mut plan = HitPlan::default();
    let mut left = hits;
    for w in &known {
        plan.assignments.push((w.0, 1));
        left -= 1;
    }
    let mut unknown: Vec<(AgentId, f64, u32)> = records
        .iter()
        .zip(workers)
        .filter(|(r, _)| r.group != KnowledgeGroup::Tk)
        .map(|(_, w)| (w.0, w.1, rng.random()))
        .collect();
    unknown.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.2.cmp(&b.2)));
    if unknown.is_empty() {
        plan.unassigned = left;
        return plan;
    }
    let mut i = 0usize;
    while left > 0 {
        let id = unknown[i % unknown.len()].0;
        match plan.assignments.iter_mut().find(|a| a.0 == id) {
            Some(a) => a.1 += 1,
            None => plan.assignments.push((id, 1)),
        }
        left -= 1;
        i += 1;
    }
    plan
}

pub const H2010E_LT_RATE: f64 = 0.01;
pub const H2010E_ST_RATE: f64 = 0.3;

/// Long and short horizon trust estimates for one worker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongShortTrust {
    pub worker_id: AgentId,
    pub long_term: f64,
    pub short_term: f64,
}

impl LongShortTrust {
    pub fn new(worker_id: AgentId, prior: f64) -> Self {
        Self {
            worker_id,
            long_term: prior,
            short_term: prior,
        }
    }

    pub fn observe(&mut self, success: bool) {
        let x = if success { 1.0 } else { 0.0 };
        self.long_term += H2010E_LT_RATE * (x - self.long_term);
        self.short_term += H2010E_ST_RATE * (x - self.short_term);
    }
}

pub fn change_estimate(lst: &[LongShortTrust]) -> f64 {
    if lst.is_empty() {
        return 0.0;
    }
    lst.iter().map(|l| (l.long_term - l.short_term).abs()).sum::<f64>() / lst.len() as f64
}

pub fn explore_extent(change: f64) -> f64 {
    (change * 5.0).min(1.0)
}

/// Selection probabilities mixing long-term trust with a uniform share.
pub fn selection_probs(lst: &[LongShortTrust]) -> Vec<f64> {
    if lst.is_empty() {
        return Vec::new();
    }
    let e = explore_extent(change_estimate(lst));
    let n = lst.len() as f64;
    let raw: Vec<f64> = lst.iter().map(|l| (1.0 - e) * l.long_term + e / n).collect();
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return vec![1.0 / n; lst.len()];
    }
    raw.into_iter().map(|r| r / sum).collect()
}

/// Greedy by long-term trust when nothing is changing, otherwise sampled by
/// selection probability.
pub fn h2010e_allocate<R: Rng + ?Sized>(lst: &[LongShortTrust], hits: u32, threshold: f64, rng: &mut R) -> HitPlan {
    if change_estimate(lst) == 0.0 {
        let ws: Vec<(AgentId, f64)> = lst.iter().map(|l| (l.worker_id, l.long_term)).collect();
        return greedy_hit_allocate(&ws, hits, threshold);
    }
    let probs = selection_probs(lst);
    let mut counts = vec![0u32; lst.len()];
    for _ in 0..hits {
        let mut x: f64 = rng.random();
        let mut pick = lst.len() - 1;
        for (i, p) in probs.iter().enumerate() {
            if x < *p {
                pick = i;
                break;
            }
            x -= p;
        }
        counts[pick] += 1;
    }
    HitPlan {
        assignments: lst
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c > 0)
            .map(|(l, c)| (l.worker_id, c))
            .collect(),
        unassigned: 0,
        needs_exploration: false,
    }
}

/// Workers claim open HITs in arrival order, each up to its capacity.
///
/// `pulls` holds `(worker, capacity)` in arrival order.
pub fn amt_fcfs_match(open_hits: u32, pulls: &[(AgentId, u32)]) -> HitPlan {
    let mut left = open_hits;
    let mut assignments = Vec::new();
    for &(id, cap) in pulls {
        if left == 0 {
            break;
        }
        let take = cap.min(left);
        if take > 0 {
            assignments.push((id, take));
            left -= take;
        }
    }
    HitPlan {
        assignments,
        unassigned: left,
        needs_exploration: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn m2002_examples() {
        assert_eq!(gamma_m2002(0, 0.1, 0.95).unwrap(), 0.0);
        let n = m2002_min_observations(0.1, 0.95).unwrap();
        assert!((n - 50.0 * 40f64.ln()).abs() < 1e-9);
        assert!((n - 184.44).abs() < 0.01);
        assert_eq!(gamma_m2002(185, 0.1, 0.95).unwrap(), 1.0);
        assert!(gamma_m2002(3, 0.0, 0.95).is_err());
    }

    #[test]
    fn q_gamma_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = QGamma::default();
        let mut seen = [0; 3];
        for _ in 0..3000 {
            seen[q.choose(&mut rng)] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800));
        let mut q = QGamma { epsilon: 0.0, ..QGamma::default() };
        for _ in 0..50 {
            q.update(2, 4.0);
            q.update(0, -1.0);
        }
        assert_eq!(q.gamma(q.choose(&mut rng)), 1.0);
        let single = QGamma::new(vec![0.5]);
        assert_eq!(single.gamma(single.choose(&mut rng)), 0.5);
    }

    #[test]
    fn nocred_examples() {
        assert_eq!(nocred_fuse(&[], 0.7), 0.7);
        assert_eq!(nocred_fuse(&[0.0, 1.0], 0.5), 0.5);
        assert!((nocred_fuse(&[0.1], 0.9) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn greedy_examples() {
        let ws: Vec<_> = (0..40).map(|i| (i, 0.9)).collect();
        let p = greedy_hit_allocate(&ws, 40, 0.6);
        assert_eq!(p.assignments.len(), 40);
        assert!(p.assignments.iter().all(|a| a.1 == 1));
        let p = greedy_hit_allocate(&[(0, 0.9), (1, 0.6), (2, 0.3)], 5, 0.6);
        assert_eq!(p.assignments, vec![(0, 3), (1, 2)]);
        let p = greedy_hit_allocate(&[(0, 0.9)], 5, 1.0);
        assert!(p.needs_exploration);
        assert_eq!(p.unassigned, 5);
    }

    #[test]
    fn largest_remainder_conserves() {
        assert_eq!(proportional_split(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(proportional_split(&[0.7, 0.2], 3), vec![2, 1]);
    }

    #[test]
    fn m2009e_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let recs: Vec<_> = (0..50).map(|i| KnowledgeRecord::new(i, 30, true)).collect();
        let ws: Vec<_> = (0..50).map(|i| (i, 0.6 + i as f64 / 200.0)).collect();
        assert_eq!(m2009e_allocate(&recs, &ws, 0.6, 40, &mut rng), greedy_hit_allocate(&ws, 40, 0.6));
        let recs: Vec<_> = (0..5).map(|i| KnowledgeRecord::new(i, 0, false)).collect();
        let ws: Vec<_> = (0..5).map(|i| (i, 0.5)).collect();
        let p = m2009e_allocate(&recs, &ws, 0.6, 10, &mut rng);
        assert_eq!(p.assigned(), 10);
        assert!(p.assignments.iter().all(|a| a.1 == 2));
        assert_eq!(KnowledgeRecord::new(0, 19, true).group, KnowledgeGroup::Pk);
        assert_eq!(KnowledgeRecord::new(0, 20, true).group, KnowledgeGroup::Tk);
        assert_eq!(KnowledgeRecord::new(0, 0, true).group, KnowledgeGroup::Au);
        assert_eq!(KnowledgeRecord::new(0, 0, false).group, KnowledgeGroup::Tu);
    }

    #[test]
    fn h2010e_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lst = vec![LongShortTrust::new(0, 0.9), LongShortTrust::new(1, 0.7)];
        assert_eq!(change_estimate(&lst), 0.0);
        let p = h2010e_allocate(&lst, 2, 0.6, &mut rng);
        assert_eq!(p.assignments, vec![(0, 1), (1, 1)]);

        // Sampled shares follow the mixed weights.
        let lst = vec![
            LongShortTrust { worker_id: 0, long_term: 0.75, short_term: 0.75 - 0.04 },
            LongShortTrust { worker_id: 1, long_term: 0.25, short_term: 0.25 + 0.04 },
        ];
        let e = explore_extent(change_estimate(&lst));
        let probs = selection_probs(&lst);
        let expected0 = ((1.0 - e) * 0.75 + e / 2.0) / ((1.0 - e) + e);
        assert!((probs[0] - expected0).abs() < 1e-12);
        let p = h2010e_allocate(&lst, 20000, 0.6, &mut rng);
        let n0 = p.assignments.iter().find(|a| a.0 == 0).unwrap().1 as f64;
        assert!((n0 / 20000.0 - expected0).abs() < 0.05 * expected0);

        let lst = vec![
            LongShortTrust { worker_id: 0, long_term: 0.5, short_term: 0.0 },
            LongShortTrust { worker_id: 1, long_term: 0.5, short_term: 1.0 },
        ];
        let probs = selection_probs(&lst);
        assert!((probs[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn h2010e_rp_three_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Negligible change keeps the weights at long-term trust.
        let lst = vec![
            LongShortTrust { worker_id: 0, long_term: 0.75, short_term: 0.75 },
            LongShortTrust { worker_id: 1, long_term: 0.25, short_term: 0.2500001 },
        ];
        let probs = selection_probs(&lst);
        assert!((probs[0] - 0.75).abs() < 1e-5);
        let p = h2010e_allocate(&lst, 40000, 0.6, &mut rng);
        let n0 = p.assignments.iter().find(|a| a.0 == 0).unwrap().1 as f64;
        let n1 = p.assignments.iter().find(|a| a.0 == 1).unwrap().1 as f64;
        assert!((n0 / n1 - 3.0).abs() < 0.15);
    }

    #[test]
    fn amt_examples() {
        assert_eq!(amt_fcfs_match(1, &[(7, 5), (3, 5)]).assignments, vec![(7, 1)]);
        assert_eq!(amt_fcfs_match(0, &[(7, 5)]).assignments, vec![]);
        let p = amt_fcfs_match(20, &[(1, 5)]);
        assert_eq!(p.assignments, vec![(1, 5)]);
        assert_eq!(p.unassigned, 15);
    }
}
