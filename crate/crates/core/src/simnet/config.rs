use serde::{Deserialize, Serialize};

use crate::chain::{ConsensusParams, DifficultyMode, PocCheck, StakeTable, MAX_FUTURE_DRIFT_S};
use crate::crypto::{keygen, KeyPair};
use crate::eccpow::DifficultyTable;
use crate::error::{Error, Result};
use crate::vct::PassProbability;

/// Largest network for which the real decoder runs.
pub const MAX_CONCRETE_NODES: usize = 10;
/// Hardest level concrete mode accepts; above it a single block costs
/// hundreds of real decodes per node.
pub const MAX_CONCRETE_LEVEL: u32 = 4;

fn default_target_interval() -> u64 {
    600
}

/// Simulation input. Unknown fields are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub node_count: usize,
    /// Solve attempts per second per node while elected.
    pub attempt_rate: f64,
    pub pass_probability: PassProbability,
    pub difficulty: DifficultySetting,
    #[serde(default = "default_target_interval")]
    pub target_interval_s: u64,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub partitions: Vec<Partition>,
    #[serde(default)]
    pub adversary: AdversarySpec,
    #[serde(default)]
    pub mining: MiningFidelity,
    #[serde(default)]
    pub seed: u64,
    /// Simulated seconds.
    pub duration_s: f64,
    /// Per-node stake; enables stake-weighted election when present.
    #[serde(default)]
    pub stakes: Option<Vec<u64>>,
    /// Network-wide attempt-rate multipliers taking effect at `at_s`.
    #[serde(default)]
    pub hash_power_steps: Vec<PowerStep>,
    /// Defaults to the shipped table.
    #[serde(default)]
    pub difficulty_table: Option<DifficultyTable>,
    #[serde(default)]
    pub genesis_timestamp: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DifficultySetting {
    Fixed { level: u32 },
    Auto { initial_level: u32, window: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatencyModel {
    Constant {
        ms: f64,
    },
    Uniform {
        min_ms: f64,
        max_ms: f64,
    },
    /// `ms[from][to]`.
    Matrix {
        ms: Vec<Vec<f64>>,
    },
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel::Constant { ms: 100.0 }
    }
}

/// Between `start_s` and `end_s`, messages crossing between `group` and the
/// remaining nodes are held and delivered after the partition heals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start_s: f64,
    pub end_s: f64,
    pub group: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    /// Share of nodes controlled by the adversary; these are the first
    /// `round(fraction * node_count)` node indices.
    pub fraction: f64,
    pub strategy: Strategy,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        AdversarySpec {
            fraction: 0.0,
            strategy: Strategy::Honest,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    Honest,
    /// Mine a private fork of the target transaction's block and publish it
    /// once the honest chain has buried that block under `confirmations`
    /// and the fork is heavier.
    PrivateChain {
        confirmations: u32,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningFidelity {
    /// Every attempt runs the real signature and decoder.
    Concrete,
    /// Every attempt is a Bernoulli draw with the level's solve probability.
    #[default]
    Abstract,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerStep {
    pub at_s: f64,
    pub factor: f64,
}

impl ScenarioConfig {
    /// Copy with every default made explicit.
    pub fn resolved(&self) -> ScenarioConfig {
        let mut c = self.clone();
        if c.difficulty_table.is_none() {
            c.difficulty_table = Some(DifficultyTable::shipped());
        }
        c
    }

    pub fn table(&self) -> DifficultyTable {
        self.difficulty_table.clone().unwrap_or_else(DifficultyTable::shipped)
    }

    pub fn adversary_count(&self) -> usize {
        ((self.adversary.fraction * self.node_count as f64).round() as usize).min(self.node_count)
    }

    pub fn genesis_level(&self) -> u32 {
        match self.difficulty {
            DifficultySetting::Fixed { level } => level,
            DifficultySetting::Auto { initial_level, .. } => initial_level,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".to_string());
            Error::config(field, msg)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, "must be a finite number greater than 0"))
            }
        };
        if self.node_count == 0 {
            return Err(Error::config("node_count", "must be at least 1"));
        }
        positive("attempt_rate", self.attempt_rate)?;
        positive("duration_s", self.duration_s)?;
        if self.target_interval_s == 0 {
            return Err(Error::config("target_interval_s", "must be at least 1"));
        }
        let table = self.table();
        table
            .validate()
            .map_err(|e| Error::config("difficulty_table", e.to_string()))?;
        match self.difficulty {
            DifficultySetting::Fixed { level } => {
                if level > table.max_level() {
                    return Err(Error::config(
                        "difficulty.fixed.level",
                        format!("no level {level} in table"),
                    ));
                }
            }
            DifficultySetting::Auto { initial_level, window } => {
                if initial_level > table.max_level() {
                    return Err(Error::config(
                        "difficulty.auto.initial_level",
                        format!("no level {initial_level} in table"),
                    ));
                }
                if window == 0 {
                    return Err(Error::config("difficulty.auto.window", "must be at least 1"));
                }
            }
        }
        match &self.latency {
            LatencyModel::Constant { ms } => {
                if !(ms.is_finite() && *ms >= 0.0) {
                    return Err(Error::config("latency.constant.ms", "must be a finite number >= 0"));
                }
            }
            LatencyModel::Uniform { min_ms, max_ms } => {
                if !(min_ms.is_finite() && max_ms.is_finite() && *min_ms >= 0.0 && min_ms <= max_ms) {
                    return Err(Error::config("latency.uniform", "need 0 <= min_ms <= max_ms"));
                }
            }
            LatencyModel::Matrix { ms } => {
                let square = ms.len() == self.node_count && ms.iter().all(|row| row.len() == self.node_count);
                if !square {
                    return Err(Error::config("latency.matrix.ms", "must be node_count x node_count"));
                }
                if ms.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::config("latency.matrix.ms", "entries must be finite and >= 0"));
                }
            }
        }
        for (i, p) in self.partitions.iter().enumerate() {
            let field = format!("partitions[{i}]");
            if !(p.start_s.is_finite() && p.end_s.is_finite() && 0.0 <= p.start_s && p.start_s < p.end_s) {
                return Err(Error::config(field, "need 0 <= start_s < end_s"));
            }
            if p.group.iter().any(|&n| n >= self.node_count) {
                return Err(Error::config(field, "group names a node outside node_count"));
            }
        }
        let f = self.adversary.fraction;
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::config("adversary.fraction", "must lie in [0, 1]"));
        }
        if let Strategy::PrivateChain { confirmations } = self.adversary.strategy {
            if confirmations == 0 {
                return Err(Error::config(
                    "adversary.strategy.private_chain.confirmations",
                    "must be at least 1",
                ));
            }
        }
        if let Some(stakes) = &self.stakes {
            if stakes.len() != self.node_count {
                return Err(Error::config("stakes", "need one entry per node"));
            }
            if stakes.iter().try_fold(0u64, |acc, &s| acc.checked_add(s)).unwrap_or(0) == 0 {
                return Err(Error::config("stakes", "total stake must be positive and fit in u64"));
            }
        }
        for (i, s) in self.hash_power_steps.iter().enumerate() {
            let field = format!("hash_power_steps[{i}]");
            if !(s.at_s.is_finite() && s.at_s >= 0.0) {
                return Err(Error::config(field, "at_s must be finite and >= 0"));
            }
            positive(&field, s.factor)?;
        }
        if self.mining == MiningFidelity::Concrete {
            if self.node_count > MAX_CONCRETE_NODES {
                return Err(Error::config(
                    "mining",
                    format!("concrete mining supports at most {MAX_CONCRETE_NODES} nodes"),
                ));
            }
            let hardest = match self.difficulty {
                DifficultySetting::Fixed { level } => level,
                DifficultySetting::Auto { .. } => table.max_level(),
            };
            if hardest > MAX_CONCRETE_LEVEL {
                return Err(Error::config(
                    "mining",
                    format!("concrete mining supports levels up to {MAX_CONCRETE_LEVEL}"),
                ));
            }
        }
        Ok(())
    }

    /// Node keys, derived from the scenario seed alone.
    pub fn node_keys(&self) -> Vec<KeyPair> {
        (0..self.node_count)
            .map(|i| {
                let mut seed = [0u8; 32];
                seed[..8].copy_from_slice(&self.seed.to_be_bytes());
                seed[8..16].copy_from_slice(&(i as u64).to_be_bytes());
                seed[16..].copy_from_slice(b"greenbtc-simnode");
                keygen(&seed).expect("32-byte seed")
            })
            .collect()
    }

    /// Consensus rules shared by every node of the scenario.
    pub fn consensus_params(&self, keys: &[KeyPair]) -> ConsensusParams {
        let difficulty = match self.difficulty {
            DifficultySetting::Fixed { level } => DifficultyMode::Fixed { level },
            DifficultySetting::Auto { window, .. } => DifficultyMode::Auto {
                target_interval_s: self.target_interval_s,
                window,
            },
        };
        let stakes = self.stakes.as_ref().map(|stakes| {
            StakeTable::new(
                keys.iter()
                    .zip(stakes)
                    .map(|(k, &s)| (k.public_key.key_hash(), s))
                    .collect(),
            )
        });
        ConsensusParams {
            pass_probability: self.pass_probability,
            table: self.table(),
            difficulty,
            poc_check: match self.mining {
                MiningFidelity::Concrete => PocCheck::Full,
                MiningFidelity::Abstract => PocCheck::Skip,
            },
            max_future_drift_s: MAX_FUTURE_DRIFT_S,
            stakes,
        }
    }

    /// Attempt-rate multiplier in force at time `t`.
    pub fn power_factor(&self, t: f64) -> f64 {
        self.hash_power_steps
            .iter()
            .filter(|s| s.at_s <= t)
            .max_by(|a, b| a.at_s.total_cmp(&b.at_s))
            .map_or(1.0, |s| s.factor)
    }
}
