//! Blocks, canonical serialization, validation and heaviest-chain selection.

mod block;
mod codec;
mod emission;
mod export;
mod header;
mod miner;
mod store;
mod validate;

pub use block::{merkle_root, Block, Transaction, MAX_BLOCK_SIZE};
pub use emission::{emission, COIN, HALVING_INTERVAL, INITIAL_REWARD};
pub use export::{read_chain, write_chain};
pub use header::BlockHeader;
pub use miner::{candidate_block, mine};
pub use store::{ChainStore, InsertOutcome, StoredBlock};
pub use validate::{
    check_clock, validate_block, validate_block_rules, ConsensusParams, DifficultyMode, PocCheck, RejectReason,
    StakeTable, Verdict, MAX_FUTURE_DRIFT_S,
};

use crate::eccpow::DifficultyTable;
use crate::error::Result;

/// Accumulated-work contribution of a block at `level`.
pub fn work(level: u32, table: &DifficultyTable) -> Result<u64> {
    table.work(level)
}

/// Serializes `h`; with `include_poc = false` this is the signing preimage.
pub fn serialize_header(h: &BlockHeader, include_poc: bool) -> Vec<u8> {
    h.serialize(include_poc)
}

/// Deterministic genesis block: no election or puzzle proof, a single
/// empty-payload coinbase.
pub fn genesis_block(timestamp: u64, level: u32) -> Block {
    let transactions = vec![Transaction::new(emission(0), Vec::new())];
    Block {
        header: BlockHeader {
            version: 1,
            merkle_root: merkle_root(&transactions),
            timestamp,
            level,
            ..BlockHeader::default()
        },
        transactions,
    }
}
