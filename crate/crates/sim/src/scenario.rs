//! Named scenario presets and a single entry point for running them.

use serde::{Deserialize, Serialize};

use crate::ch3::{is_ch3_policy, Ch3Config, Ch3World};
use crate::crn_world::{CrnScenarioConfig, CrnWorld};
use crate::crowd::{is_crowd_policy, CrowdConfig, CrowdWorld};
use crate::draft_world::{DraftConfig, DraftWorld};
use crate::rdp::{RdpConfig, RdpWorld};
use crate::{run_world, Policy, RunOutput, SimError, SimResult};

/// One scenario with all its parameters; the `scenario` key picks the kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum ScenarioConfig {
    Ch3(Ch3Config),
    Ch4Rdp(RdpConfig),
    Ch6(CrowdConfig),
    Ch7Draft(DraftConfig),
    Crn(CrnScenarioConfig),
}

const PRESETS: [&str; 7] = [
    "ch3-noncollusive",
    "ch3-collusive",
    "ch4-rdp",
    "ch6-comparison",
    "ch6-competition",
    "ch7-draft",
    "crn",
];

pub fn preset_names() -> &'static [&'static str] {
    &PRESETS
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    Some(match name {
        "ch3-noncollusive" => ScenarioConfig::Ch3(Ch3Config::default()),
        "ch3-collusive" => ScenarioConfig::Ch3(Ch3Config {
            witness_mix: "BS80".into(),
            collusive: true,
            ..Ch3Config::default()
        }),
        "ch4-rdp" => ScenarioConfig::Ch4Rdp(RdpConfig::default()),
        "ch6-comparison" => ScenarioConfig::Ch6(CrowdConfig::default()),
        "ch6-competition" => ScenarioConfig::Ch6(CrowdConfig { competition: true, ..CrowdConfig::default() }),
        "ch7-draft" => ScenarioConfig::Ch7Draft(DraftConfig::default()),
        "crn" => ScenarioConfig::Crn(CrnScenarioConfig::default()),
        _ => return None,
    })
}

impl ScenarioConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioConfig::Ch3(_) => "ch3",
            ScenarioConfig::Ch4Rdp(_) => "ch4-rdp",
            ScenarioConfig::Ch6(_) => "ch6",
            ScenarioConfig::Ch7Draft(_) => "ch7-draft",
            ScenarioConfig::Crn(_) => "crn",
        }
    }

    pub fn steps(&self) -> u64 {
        match self {
            ScenarioConfig::Ch3(c) => c.total_steps(),
            ScenarioConfig::Ch4Rdp(c) => c.steps,
            ScenarioConfig::Ch6(c) => c.steps,
            ScenarioConfig::Ch7Draft(c) => c.steps,
            ScenarioConfig::Crn(c) => c.crn.iterations as u64,
        }
    }

    pub fn policies(&self) -> Vec<Policy> {
        match self {
            ScenarioConfig::Ch3(c) => c.groups.clone(),
            ScenarioConfig::Ch4Rdp(_) => vec![Policy::Brs2012],
            ScenarioConfig::Ch6(c) => c.policies.clone(),
            ScenarioConfig::Ch7Draft(c) => c.policies.clone(),
            ScenarioConfig::Crn(_) => Vec::new(),
        }
    }

    /// Keeps only `policy`, failing when the scenario has no use for it.
    pub fn restrict_policy(&mut self, policy: Policy) -> SimResult<()> {
        let ok = match self {
            ScenarioConfig::Ch3(c) => {
                c.groups = vec![policy];
                is_ch3_policy(policy)
            }
            ScenarioConfig::Ch4Rdp(_) => policy == Policy::Brs2012,
            ScenarioConfig::Ch6(c) => {
                c.policies = vec![policy];
                is_crowd_policy(policy)
            }
            ScenarioConfig::Ch7Draft(c) => {
                c.policies = vec![policy];
                matches!(policy, Policy::Draft | Policy::Trd)
            }
            ScenarioConfig::Crn(_) => false,
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::Config(format!("policy {policy} does not apply to a {} scenario", self.kind())))
        }
    }

    pub fn validate(&self) -> SimResult<()> {
        match self {
            ScenarioConfig::Ch3(c) => c.validate().map(|_| ()),
            ScenarioConfig::Ch4Rdp(c) => {
                if c.trustees == 0 || !(0.0..=1.0).contains(&c.honest_fraction) {
                    Err(SimError::Config("need trustees and an honest fraction in [0, 1]".into()))
                } else {
                    Ok(())
                }
            }
            ScenarioConfig::Ch6(c) => c.validate(),
            ScenarioConfig::Ch7Draft(c) => c.validate(),
            ScenarioConfig::Crn(c) => c.validate(),
        }
    }

    /// Runs the scenario for its configured horizon under one seed.
    pub fn run(&self, seed: u64) -> SimResult<RunOutput> {
        let steps = self.steps();
        match self {
            ScenarioConfig::Ch3(c) => run_world(Ch3World::new(c.clone(), seed)?, steps),
            ScenarioConfig::Ch4Rdp(c) => run_world(RdpWorld::new(c.clone(), seed)?, steps),
            ScenarioConfig::Ch6(c) => run_world(CrowdWorld::new(c.clone(), seed)?, steps),
            ScenarioConfig::Ch7Draft(c) => run_world(DraftWorld::new(c.clone(), seed)?, steps),
            ScenarioConfig::Crn(c) => run_world(CrnWorld::new(c.clone(), seed)?, steps),
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig, seed: u64) -> SimResult<RunOutput> {
    cfg.validate()?;
    cfg.run(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_exists_and_validates() {
        for name in preset_names() {
            let p = preset(name).unwrap_or_else(|| panic!("{name}"));
            p.validate().unwrap();
            assert!(p.steps() > 0);
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn presets_round_trip_through_toml() {
        for name in preset_names() {
            let p = preset(name).unwrap();
            let text = toml::to_string(&p).unwrap();
            let back: ScenarioConfig = toml::from_str(&text).unwrap();
            assert_eq!(back, p, "{name}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = toml::from_str::<ScenarioConfig>("scenario = \"ch4-rdp\"\nbogus = 1\n");
        assert!(err.is_err());
        let ok: ScenarioConfig = toml::from_str("scenario = \"ch4-rdp\"\nsteps = 5\n").unwrap();
        assert_eq!(ok.steps(), 5);
    }

    #[test]
    fn restrict_checks_applicability() {
        let mut c = preset("ch6-comparison").unwrap();
        assert!(c.restrict_policy(Policy::Sword).is_ok());
        assert_eq!(c.policies(), vec![Policy::Sword]);
        assert!(c.restrict_policy(Policy::Draft).is_err());
        let mut c = preset("crn").unwrap();
        assert!(c.restrict_policy(Policy::Act).is_err());
    }

    #[test]
    fn tiny_runs() {
        let c: ScenarioConfig = toml::from_str("scenario = \"ch4-rdp\"\nsteps = 10\ntrustees = 4\ntrusters = 8\n").unwrap();
        let out = run_scenario(&c, 1).unwrap();
        assert!(out.metric("reputation_mean:hon").is_some());
    }
}
