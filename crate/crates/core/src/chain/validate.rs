use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{emission, merkle_root, Block, ChainStore, MAX_BLOCK_SIZE};
use crate::crypto::Digest256;
use crate::eccpow::{difficulty_control, verify_poc, DifficultyTable};
use crate::error::Result;
use crate::vct::{vct_verify, weighted_pass_probability, PassProbability};

/// Accepted clock skew for block timestamps.
pub const MAX_FUTURE_DRIFT_S: u64 = 7200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DifficultyMode {
    Fixed { level: u32 },
    Auto { target_interval_s: u64, window: usize },
}

/// How blocks' proof-of-computation fields are checked. `Skip` is for
/// abstract simulation, where attempts are Bernoulli draws and blocks carry
/// no decoded codeword.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PocCheck {
    Full,
    Skip,
}

/// Genesis-time stake snapshot keyed by coinbase public-key hash.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StakeTable {
    stakes: BTreeMap<Digest256, u64>,
}

impl StakeTable {
    pub fn new(stakes: BTreeMap<Digest256, u64>) -> Self {
        StakeTable { stakes }
    }

    pub fn total(&self) -> u64 {
        self.stakes.values().sum()
    }

    pub fn stake_of(&self, key_hash: &Digest256) -> u64 {
        self.stakes.get(key_hash).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.stakes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stakes.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ConsensusParams {
    pub pass_probability: PassProbability,
    pub table: DifficultyTable,
    pub difficulty: DifficultyMode,
    pub poc_check: PocCheck,
    pub max_future_drift_s: u64,
    pub stakes: Option<StakeTable>,
}

impl ConsensusParams {
    pub fn new(pass_probability: PassProbability, table: DifficultyTable, difficulty: DifficultyMode) -> Self {
        ConsensusParams {
            pass_probability,
            table,
            difficulty,
            poc_check: PocCheck::Full,
            max_future_drift_s: MAX_FUTURE_DRIFT_S,
            stakes: None,
        }
    }

    /// The election probability for a coinbase key: the base value, or its
    /// stake-weighted form when a stake table is configured.
    pub fn pass_probability_for(&self, key_hash: &Digest256) -> Result<PassProbability> {
        match &self.stakes {
            None => Ok(self.pass_probability),
            Some(stakes) => weighted_pass_probability(
                self.pass_probability,
                stakes.stake_of(key_hash),
                stakes.total(),
                stakes.len() as u64,
            ),
        }
    }

    /// Level required of a child of `parent`.
    pub fn expected_level(&self, store: &ChainStore, parent: &Digest256) -> u32 {
        match self.difficulty {
            DifficultyMode::Fixed { level } => level,
            DifficultyMode::Auto {
                target_interval_s,
                window,
            } => {
                let history = store.recent_history(parent, window + 1);
                let current = history.last().map(|&(_, l)| l).unwrap_or(0);
                difficulty_control(&history, current, target_interval_s, window, &self.table)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    UnknownParent,
    TimestampNotIncreasing,
    TimestampTooFarAhead,
    WrongLevel,
    MissingCoinbase,
    CoinbaseKeyMismatch,
    VctFail,
    PocFail,
    MerkleMismatch,
    Oversize,
    BadReward,
}

impl RejectReason {
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::UnknownParent => "UNKNOWN_PARENT",
            RejectReason::TimestampNotIncreasing => "TIMESTAMP_NOT_INCREASING",
            RejectReason::TimestampTooFarAhead => "TIMESTAMP_TOO_FAR_AHEAD",
            RejectReason::WrongLevel => "WRONG_LEVEL",
            RejectReason::MissingCoinbase => "MISSING_COINBASE",
            RejectReason::CoinbaseKeyMismatch => "COINBASE_KEY_MISMATCH",
            RejectReason::VctFail => "VCT_FAIL",
            RejectReason::PocFail => "POC_FAIL",
            RejectReason::MerkleMismatch => "MERKLE_MISMATCH",
            RejectReason::Oversize => "OVERSIZE",
            RejectReason::BadReward => "BAD_REWARD",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    /// Every failed rule, in rule order. Never empty.
    Reject(Vec<RejectReason>),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }

    pub fn reasons(&self) -> &[RejectReason] {
        match self {
            Verdict::Accept => &[],
            Verdict::Reject(r) => r,
        }
    }

    fn from_reasons(reasons: Vec<RejectReason>) -> Self {
        if reasons.is_empty() {
            Verdict::Accept
        } else {
            Verdict::Reject(reasons)
        }
    }
}

/// Full block validation against `store` at local time `local_clock`.
pub fn validate_block(block: &Block, store: &ChainStore, params: &ConsensusParams, local_clock: u64) -> Verdict {
    let mut reasons = validate_block_rules(block, store, params).reasons().to_vec();
    if block.hash() != store.genesis_hash() && !check_clock(block, params, local_clock) {
        reasons.push(RejectReason::TimestampTooFarAhead);
        reasons.sort();
    }
    Verdict::from_reasons(reasons)
}

/// `timestamp <= local_clock + drift`.
pub fn check_clock(block: &Block, params: &ConsensusParams, local_clock: u64) -> bool {
    block.header.timestamp <= local_clock.saturating_add(params.max_future_drift_s)
}

/// Every rule that depends only on the block, its ancestors and the
/// consensus parameters, i.e. all but the local-clock bound. The verdict is
/// therefore identical at every node and may be shared.
pub fn validate_block_rules(block: &Block, store: &ChainStore, params: &ConsensusParams) -> Verdict {
    let hash = block.hash();
    if hash == store.genesis_hash() {
        return Verdict::Accept;
    }
    let header = &block.header;
    let Some(parent) = store.get(&header.prev_hash) else {
        return Verdict::Reject(vec![RejectReason::UnknownParent]);
    };
    let mut reasons = Vec::new();
    let parent_header = &parent.block.header;
    if header.timestamp <= parent_header.timestamp {
        reasons.push(RejectReason::TimestampNotIncreasing);
    }
    if header.level != params.expected_level(store, &header.prev_hash) {
        reasons.push(RejectReason::WrongLevel);
    }
    let coinbase_key = match block.coinbase_public_key() {
        None => {
            reasons.push(RejectReason::MissingCoinbase);
            None
        }
        Some(pk) if pk.key_hash() != header.coinbase_pubkey_hash => {
            reasons.push(RejectReason::CoinbaseKeyMismatch);
            None
        }
        Some(pk) => Some(pk),
    };
    match &coinbase_key {
        Some(pk) => {
            let pp = params.pass_probability_for(&header.coinbase_pubkey_hash);
            let elected = pp.is_ok_and(|pp| vct_verify(pk, &parent_header.to_bytes(), &header.vrf_output(), pp));
            if !elected {
                reasons.push(RejectReason::VctFail);
            }
            if params.poc_check == PocCheck::Full {
                let solved = params
                    .table
                    .params(header.level)
                    .is_ok_and(|cp| verify_poc(header, pk, &header.poc_proof(), &cp));
                if !solved {
                    reasons.push(RejectReason::PocFail);
                }
            }
        }
        None => {
            reasons.push(RejectReason::VctFail);
            if params.poc_check == PocCheck::Full {
                reasons.push(RejectReason::PocFail);
            }
        }
    }
    if merkle_root(&block.transactions) != header.merkle_root {
        reasons.push(RejectReason::MerkleMismatch);
    }
    if block.size() > MAX_BLOCK_SIZE {
        reasons.push(RejectReason::Oversize);
    }
    if let Some(cb) = block.coinbase() {
        if cb.value() != emission(parent.height + 1) {
            reasons.push(RejectReason::BadReward);
        }
    }
    Verdict::from_reasons(reasons)
}
