use std::collections::HashMap;
use std::sync::Arc;

use super::Block;
use crate::crypto::Digest256;
use crate::eccpow::DifficultyTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct StoredBlock {
    pub block: Arc<Block>,
    pub hash: Digest256,
    pub height: u64,
    /// Sum of `work(level)` from genesis through this block.
    pub accumulated_work: u128,
    /// Local arrival order, starting at 0 for genesis.
    pub arrival: u64,
}

/// Block tree with incremental heaviest-chain tip tracking.
#[derive(Clone, Debug)]
pub struct ChainStore {
    blocks: HashMap<Digest256, StoredBlock>,
    children: HashMap<Digest256, Vec<Digest256>>,
    genesis: Digest256,
    tip: Digest256,
    next_arrival: u64,
    table: DifficultyTable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Duplicate,
    Extended { tip_changed: bool },
}

impl ChainStore {
    pub fn new(genesis: Arc<Block>, table: DifficultyTable) -> Result<Self> {
        let hash = genesis.hash();
        let work = table.work(genesis.header.level)? as u128;
        let mut blocks = HashMap::new();
        blocks.insert(
            hash,
            StoredBlock {
                block: genesis,
                hash,
                height: 0,
                accumulated_work: work,
                arrival: 0,
            },
        );
        Ok(ChainStore {
            blocks,
            children: HashMap::new(),
            genesis: hash,
            tip: hash,
            next_arrival: 1,
            table,
        })
    }

    pub fn genesis_hash(&self) -> Digest256 {
        self.genesis
    }

    pub fn table(&self) -> &DifficultyTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn contains(&self, hash: &Digest256) -> bool {
        self.blocks.contains_key(hash)
    }

    pub fn get(&self, hash: &Digest256) -> Option<&StoredBlock> {
        self.blocks.get(hash)
    }

    pub fn children(&self, hash: &Digest256) -> &[Digest256] {
        self.children.get(hash).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tip(&self) -> Digest256 {
        self.tip
    }

    pub fn tip_block(&self) -> &StoredBlock {
        &self.blocks[&self.tip]
    }

    /// Adds a block whose parent is already stored. Validation is the
    /// caller's job.
    pub fn insert(&mut self, block: Arc<Block>) -> Result<InsertOutcome> {
        let hash = block.hash();
        if self.blocks.contains_key(&hash) {
            return Ok(InsertOutcome::Duplicate);
        }
        let parent_hash = block.header.prev_hash;
        let parent = self
            .blocks
            .get(&parent_hash)
            .ok_or_else(|| Error::Decode(format!("parent {parent_hash} not in store")))?;
        let work = self.table.work(block.header.level)? as u128;
        let stored = StoredBlock {
            block,
            hash,
            height: parent.height + 1,
            accumulated_work: parent.accumulated_work + work,
            arrival: self.next_arrival,
        };
        self.next_arrival += 1;
        let tip_changed = stored.accumulated_work > self.blocks[&self.tip].accumulated_work;
        if tip_changed {
            self.tip = hash;
        }
        self.blocks.insert(hash, stored);
        self.children.entry(parent_hash).or_default().push(hash);
        Ok(InsertOutcome::Extended { tip_changed })
    }

    pub fn leaves(&self) -> impl Iterator<Item = &StoredBlock> {
        self.blocks.values().filter(|b| !self.children.contains_key(&b.hash))
    }

    /// Heaviest leaf by exhaustive scan; ties go to the earliest arrival,
    /// then to the lexicographically smallest hash.
    pub fn fork_choice(&self) -> Digest256 {
        self.leaves()
            .min_by(|a, b| {
                b.accumulated_work
                    .cmp(&a.accumulated_work)
                    .then(a.arrival.cmp(&b.arrival))
                    .then(a.hash.cmp(&b.hash))
            })
            .map(|b| b.hash)
            .unwrap_or(self.genesis)
    }

    /// Up to `count` most recent `(timestamp, level)` entries ending at
    /// `hash`, oldest first.
    pub fn recent_history(&self, hash: &Digest256, count: usize) -> Vec<(u64, u32)> {
        let mut out = Vec::with_capacity(count);
        let mut cursor = self.blocks.get(hash);
        while let Some(b) = cursor {
            if out.len() == count {
                break;
            }
            out.push((b.block.header.timestamp, b.block.header.level));
            if b.height == 0 {
                break;
            }
            cursor = self.blocks.get(&b.block.header.prev_hash);
        }
        out.reverse();
        out
    }

    /// Hashes from genesis to `hash`, inclusive.
    pub fn path_to(&self, hash: &Digest256) -> Vec<Digest256> {
        let mut out = Vec::new();
        let mut cursor = self.blocks.get(hash);
        while let Some(b) = cursor {
            out.push(b.hash);
            if b.height == 0 {
                break;
            }
            cursor = self.blocks.get(&b.block.header.prev_hash);
        }
        out.reverse();
        out
    }

    /// Blocks in arrival order.
    pub fn blocks_by_arrival(&self) -> Vec<&StoredBlock> {
        let mut v: Vec<&StoredBlock> = self.blocks.values().collect();
        v.sort_by_key(|b| b.arrival);
        v
    }
}
