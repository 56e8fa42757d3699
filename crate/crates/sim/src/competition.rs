//! Agents learning which of several systems to patronize.

use equitrust_core::act::softmax;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionLearner {
    pub p: Vec<f64>,
    pub baseline: Vec<f64>,
    pub pi: Vec<f64>,
    pub reward: f64,
    pub penalty: f64,
    pub learn_rate: f64,
    pub baseline_mix: f64,
}

impl CompetitionLearner {
    pub fn new(systems: usize) -> Self {
        Self {
            p: vec![0.0; systems],
            baseline: vec![0.0; systems],
            pi: vec![1.0 / systems as f64; systems],
            reward: 1.0,
            penalty: -1.0,
            learn_rate: 0.4,
            baseline_mix: 0.6,
        }
    }

    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut x: f64 = rng.random();
        for (i, p) in self.pi.iter().enumerate() {
            if x < *p {
                return i;
            }
            x -= p;
        }
        self.pi.len() - 1
    }
}

pub fn competition_update(learner: &mut CompetitionLearner, system: usize, success: bool) {
    let r = if success { learner.reward } else { learner.penalty };
    let l = learner;
    l.p[system] += l.learn_rate * (r - l.baseline[system]) * (1.0 - l.pi[system]);
    l.baseline[system] = l.baseline_mix * l.baseline[system] + (1.0 - l.baseline_mix) * r;
    l.pi = softmax(&l.p);
}
