//! Agent behavior models: trustee reliability with drift, testimony distortion.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DriftProfile {
    Up,
    Down,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrusteeBehavior {
    pub success_prob: f64,
    /// Tasks (or effort units) per step.
    pub capacity: u32,
    pub drifts: bool,
}

impl TrusteeBehavior {
    pub fn fixed(success_prob: f64, capacity: u32) -> Self {
        Self {
            success_prob,
            capacity,
            drifts: false,
        }
    }

    pub fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        rng.random::<f64>() < self.success_prob
    }
}

/// One random-walk step of a drifting trustee's success probability.
pub fn drift_provider<R: Rng + ?Sized>(b: &mut TrusteeBehavior, rng: &mut R) -> DriftProfile {
    if !b.drifts {
        return DriftProfile::Flat;
    }
    let profile = match rng.random_range(0..3) {
        0 => DriftProfile::Up,
        1 => DriftProfile::Down,
        _ => DriftProfile::Flat,
    };
    let step: f64 = rng.random_range(0.0..=0.01);
    b.success_prob = match profile {
        DriftProfile::Up => b.success_prob + step,
        DriftProfile::Down => b.success_prob - step,
        DriftProfile::Flat => b.success_prob,
    }
    .clamp(0.0, 1.0);
    profile
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    Honest,
    Badmouth,
    BallotStuff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    /// Offsets in [0.1, 0.4].
    Moderate,
    /// Offsets in [0.8, 1.0].
    High,
}

impl Severity {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Severity::Moderate => rng.random_range(0.1..=0.4),
            Severity::High => rng.random_range(0.8..=1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessBehavior {
    pub kind: WitnessKind,
    pub severity: Severity,
    /// Lies only about members of the collusion ring.
    pub collusive: bool,
}

impl WitnessBehavior {
    pub fn honest() -> Self {
        Self {
            kind: WitnessKind::Honest,
            severity: Severity::Moderate,
            collusive: false,
        }
    }
}

/// Testimony a witness gives about a trustee whose true score is `value`.
pub fn distort_testimony<R: Rng + ?Sized>(value: f64, b: &WitnessBehavior, target_in_ring: bool, rng: &mut R) -> f64 {
    if b.collusive {
        if !target_in_ring || b.kind == WitnessKind::Honest {
            return value;
        }
        return (value + b.severity.sample(rng)).clamp(0.0, 1.0);
    }
    match b.kind {
        WitnessKind::Honest => value,
        WitnessKind::BallotStuff => (value + b.severity.sample(rng)).clamp(0.0, 1.0),
        WitnessKind::Badmouth => (value - b.severity.sample(rng)).clamp(0.0, 1.0),
    }
}

/// Witness population composition such as `Hon`, `BM40` or `BS80`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessMix {
    pub kind: WitnessKind,
    pub percent: u32,
}

impl WitnessMix {
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("hon") {
            return Some(Self {
                kind: WitnessKind::Honest,
                percent: 0,
            });
        }
        let (kind, rest) = if let Some(r) = s.strip_prefix("BM").or_else(|| s.strip_prefix("bm")) {
            (WitnessKind::Badmouth, r)
        } else if let Some(r) = s.strip_prefix("BS").or_else(|| s.strip_prefix("bs")) {
            (WitnessKind::BallotStuff, r)
        } else {
            return None;
        };
        let percent: u32 = rest.parse().ok()?;
        (percent <= 100).then_some(Self { kind, percent })
    }

    pub fn label(&self) -> String {
        match self.kind {
            WitnessKind::Honest => "Hon".into(),
            WitnessKind::Badmouth => format!("BM{}", self.percent),
            WitnessKind::BallotStuff => format!("BS{}", self.percent),
        }
    }

    /// Behaviors for `n` witnesses; liars split evenly between moderate and high offsets.
    pub fn build(&self, n: usize, collusive: bool) -> Vec<WitnessBehavior> {
        let liars = if self.kind == WitnessKind::Honest {
            0
        } else {
            (n * self.percent as usize + 50) / 100
        };
        (0..n)
            .map(|i| {
                if i < liars {
                    WitnessBehavior {
                        kind: self.kind,
                        severity: if i % 2 == 0 { Severity::Moderate } else { Severity::High },
                        collusive,
                    }
                } else {
                    WitnessBehavior::honest()
                }
            })
            .collect()
    }
}

/// Worker groups of the crowdsourcing and delegation test-beds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WorkerGroup {
    Hon,
    Mh,
    Mm,
    Mal,
}

impl WorkerGroup {
    pub fn success_prob(&self) -> f64 {
        match self {
            WorkerGroup::Hon => 0.9,
            WorkerGroup::Mh => 0.7,
            WorkerGroup::Mm => 0.3,
            WorkerGroup::Mal => 0.1,
        }
    }

    /// HITs per step in the crowdsourcing test-bed.
    pub fn hit_capacity(&self) -> u32 {
        match self {
            WorkerGroup::Hon => 5,
            WorkerGroup::Mh | WorkerGroup::Mm => 10,
            WorkerGroup::Mal => 20,
        }
    }

    /// Effort units per step in the multi-context test-bed.
    pub fn effort_capacity(&self) -> u32 {
        match self {
            WorkerGroup::Hon => 25,
            WorkerGroup::Mh => 30,
            WorkerGroup::Mm => 35,
            WorkerGroup::Mal => 40,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WorkerGroup::Hon => "Hon",
            WorkerGroup::Mh => "MH",
            WorkerGroup::Mm => "MM",
            WorkerGroup::Mal => "Mal",
        }
    }
}

/// `HonX` composition: X/2 % Hon, X/2 % MH, the rest split between MM and Mal.
pub fn hon_x_groups(n: usize, x: u32) -> Vec<WorkerGroup> {
    let x = x.min(100) as usize;
    let hon = n * x / 200;
    let mh = n * x / 100 - hon;
    let mm = (n - hon - mh) / 2;
    let mut out = Vec::with_capacity(n);
    out.extend(std::iter::repeat_n(WorkerGroup::Hon, hon));
    out.extend(std::iter::repeat_n(WorkerGroup::Mh, mh));
    out.extend(std::iter::repeat_n(WorkerGroup::Mm, mm));
    out.extend(std::iter::repeat_n(WorkerGroup::Mal, n - hon - mh - mm));
    out
}

/// Service provider types of the testimony test-bed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProviderType {
    Honest,
    TypeI,
    TypeII,
    TypeIII,
}

impl ProviderType {
    pub fn initial_success(&self) -> f64 {
        match self {
            ProviderType::Honest => 0.9,
            ProviderType::TypeI => 0.6,
            ProviderType::TypeII => 0.4,
            ProviderType::TypeIII => 0.2,
        }
    }
}

/// 10% honest, 10% type I, 40% type II, 40% type III.
pub fn provider_mix(n: usize) -> Vec<ProviderType> {
    let honest = n / 10;
    let t1 = n / 10;
    let t2 = n * 4 / 10;
    let t3 = n - honest - t1 - t2;
    let mut out = Vec::with_capacity(n);
    out.extend(std::iter::repeat_n(ProviderType::Honest, honest));
    out.extend(std::iter::repeat_n(ProviderType::TypeI, t1));
    out.extend(std::iter::repeat_n(ProviderType::TypeII, t2));
    out.extend(std::iter::repeat_n(ProviderType::TypeIII, t3));
    out
}
