use super::{emission, merkle_root, Block, BlockHeader, ChainStore, ConsensusParams, Transaction};
use crate::crypto::{Digest256, KeyPair};
use crate::eccpow::{solve_with_stats, SolveOutcome};
use crate::error::{Error, Result};
use crate::vct::{vct_toss, Toss};

/// Unsealed child of `parent` for `key`, carrying the key's coin toss for
/// that parent. `toss.pass` tells whether the key may mine it at all.
pub fn candidate_block(
    store: &ChainStore,
    params: &ConsensusParams,
    key: &KeyPair,
    parent: &Digest256,
    timestamp: u64,
    extra: Vec<Transaction>,
) -> Result<(Block, Toss)> {
    let parent_block = store
        .get(parent)
        .ok_or_else(|| Error::Decode(format!("unknown parent {parent}")))?;
    let key_hash = key.public_key.key_hash();
    let pp = params.pass_probability_for(&key_hash)?;
    let parent_bytes = parent_block.block.header.to_bytes();
    let toss = vct_toss(&key.secret_key, &parent_bytes, pp);
    let mut transactions = vec![Transaction::coinbase(
        &key.public_key,
        emission(parent_block.height + 1),
    )];
    transactions.extend(extra);
    let header = BlockHeader {
        version: 1,
        prev_hash: *parent,
        merkle_root: merkle_root(&transactions),
        timestamp,
        level: params.expected_level(store, parent),
        nonce: 0,
        coinbase_pubkey_hash: key_hash,
        vct_value: toss.out.value,
        vct_proof: toss.out.proof.clone(),
        ..BlockHeader::default()
    };
    Ok((Block { header, transactions }, toss))
}

/// Scans nonces on `candidate` and seals it with the first solution.
pub fn mine(
    candidate: &Block,
    params: &ConsensusParams,
    key: &KeyPair,
    nonce_start: u64,
    nonce_limit: u64,
) -> Result<(Option<Block>, SolveOutcome)> {
    let code = params.table.params(candidate.header.level)?;
    let outcome = solve_with_stats(&candidate.header, &key.secret_key, &code, nonce_start, nonce_limit)?;
    let sealed = outcome.proof.clone().map(|proof| {
        let mut b = candidate.clone();
        b.header.attach_poc(proof);
        b
    });
    Ok((sealed, outcome))
}
