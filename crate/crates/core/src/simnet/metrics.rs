use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::crypto::Digest256;

/// Per-node energy counters. One unit per toss, attempt, decoder round and
/// block verification.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyCounters {
    pub vct_tosses: u64,
    pub solve_attempts: u64,
    pub decode_iterations: u64,
    pub verify_count: u64,
}

impl AddAssign for EnergyCounters {
    fn add_assign(&mut self, o: Self) {
        self.vct_tosses += o.vct_tosses;
        self.solve_attempts += o.solve_attempts;
        self.decode_iterations += o.decode_iterations;
        self.verify_count += o.verify_count;
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    nodes: Vec<EnergyCounters>,
}

impl EnergyLedger {
    pub fn new(node_count: usize) -> Self {
        EnergyLedger {
            nodes: vec![EnergyCounters::default(); node_count],
        }
    }

    pub fn node(&self, i: usize) -> &EnergyCounters {
        &self.nodes[i]
    }

    pub(crate) fn node_mut(&mut self, i: usize) -> &mut EnergyCounters {
        &mut self.nodes[i]
    }

    pub fn nodes(&self) -> &[EnergyCounters] {
        &self.nodes
    }

    pub fn total(&self) -> EnergyCounters {
        let mut t = EnergyCounters::default();
        for c in &self.nodes {
            t += *c;
        }
        t
    }
}

/// One block of the final main chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub hash: Digest256,
    pub miner: usize,
    pub adversarial: bool,
    /// Simulated time the block was found.
    pub found_at_s: f64,
    /// `found_at_s` minus the parent's.
    pub interval_s: f64,
    pub timestamp: u64,
    pub level: u32,
    /// Nodes that tossed for this block's parent, and how many passed.
    pub committee_tossed: u32,
    pub committee_size: u32,
    pub committee_adversarial: u32,
}

/// Outcome of a private-chain double-spend in a full run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub confirmations: u32,
    pub released: bool,
    pub released_at_s: Option<f64>,
    /// Height of the adversary's private tip at release or at the end.
    pub private_height: u64,
    /// Height of the honest tip at release or at the end.
    pub honest_height: u64,
    /// The final main chain does not contain the target transaction.
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventRecord {
    Toss {
        t: f64,
        node: usize,
        parent: Digest256,
        pass: bool,
    },
    Attempt {
        t: f64,
        node: usize,
        parent: Digest256,
        success: bool,
    },
    Found {
        t: f64,
        node: usize,
        block: Digest256,
        height: u64,
    },
    Receive {
        t: f64,
        node: usize,
        block: Digest256,
        accepted: bool,
    },
    Release {
        t: f64,
        blocks: usize,
    },
}

/// Measured outputs of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub duration_s: f64,
    pub node_count: usize,
    /// Final main chain, genesis excluded.
    pub blocks: Vec<BlockRecord>,
    pub blocks_mined: u64,
    /// Published blocks left off the final main chain.
    pub orphaned: u64,
    /// Heights holding more than one published block.
    pub forks: u64,
    pub rejected_deliveries: u64,
    pub mean_interval_s: Option<f64>,
    /// No node was elected for its current parent when the run ended.
    pub stalled: bool,
    pub energy: EnergyLedger,
    pub total_energy: EnergyCounters,
    /// Solve attempts per hour of simulated time.
    pub hourly_attempts: Vec<u64>,
    pub attack: Option<AttackOutcome>,
    /// Empty unless event recording was requested.
    pub events: Vec<EventRecord>,
}

impl Metrics {
    pub fn intervals(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.interval_s).collect()
    }

    /// Mean interval of main-chain blocks found at or after `from_s`.
    pub fn mean_interval_since(&self, from_s: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .blocks
            .iter()
            .filter(|b| b.found_at_s >= from_s)
            .map(|b| b.interval_s)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}
