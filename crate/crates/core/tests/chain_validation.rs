use std::sync::Arc;

use greenbtc_core::chain::{
    candidate_block, emission, genesis_block, merkle_root, mine, read_chain, validate_block, write_chain,
    DifficultyMode, RejectReason, Verdict, MAX_BLOCK_SIZE,
};
use greenbtc_core::crypto::keygen;
use greenbtc_core::{Block, ChainStore, ConsensusParams, DifficultyTable, KeyPair, PassProbability, Transaction};

const T0: u64 = 1_700_000_000;
const FAR_FUTURE: u64 = u64::MAX / 2;

fn params() -> ConsensusParams {
    ConsensusParams::new(
        PassProbability::new(1, 2).unwrap(),
        DifficultyTable::shipped(),
        DifficultyMode::Fixed { level: 0 },
    )
}

fn key(i: u8) -> KeyPair {
    keygen(&[i; 32]).unwrap()
}

fn setup() -> (ChainStore, ConsensusParams) {
    let store = ChainStore::new(Arc::new(genesis_block(T0, 0)), DifficultyTable::shipped()).unwrap();
    (store, params())
}

/// First key (by seed byte) whose toss on `parent` has outcome `pass`.
fn key_with_toss(store: &ChainStore, params: &ConsensusParams, pass: bool) -> KeyPair {
    (0..=255u8)
        .map(key)
        .find(|k| {
            candidate_block(store, params, k, &store.tip(), T0 + 60, vec![])
                .unwrap()
                .1
                .pass
                == pass
        })
        .expect("some key tosses each way")
}

fn sealed(store: &ChainStore, params: &ConsensusParams, k: &KeyPair, extra: Vec<Transaction>) -> Block {
    let (candidate, _) = candidate_block(store, params, k, &store.tip(), T0 + 60, extra).unwrap();
    mine(&candidate, params, k, 0, 10_000)
        .unwrap()
        .0
        .expect("easy level solves")
}

fn reasons(v: Verdict) -> Vec<&'static str> {
    v.reasons().iter().map(|r| r.code()).collect()
}

#[test]
fn genesis_and_honest_block_accept() {
    let (mut store, params) = setup();
    let genesis = store.tip_block().block.clone();
    assert_eq!(validate_block(&genesis, &store, &params, 0), Verdict::Accept);
    let k = key_with_toss(&store, &params, true);
    let b = sealed(&store, &params, &k, vec![Transaction::new(5, b"pay".to_vec())]);
    assert_eq!(validate_block(&b, &store, &params, T0), Verdict::Accept);
    store.insert(Arc::new(b)).unwrap();
    assert_eq!(store.tip_block().height, 1);
}

#[test]
fn failed_toss_is_vct_fail_only() {
    let (store, params) = setup();
    let k = key_with_toss(&store, &params, false);
    let b = sealed(&store, &params, &k, vec![]);
    assert_eq!(reasons(validate_block(&b, &store, &params, T0)), vec!["VCT_FAIL"]);
}

#[test]
fn each_codeword_bit_flip_is_poc_fail() {
    let (store, params) = setup();
    let k = key_with_toss(&store, &params, true);
    let b = sealed(&store, &params, &k, vec![]);
    for i in 0..b.header.poc_codeword.len() {
        let mut bad = b.clone();
        bad.header.poc_codeword.flip(i);
        assert_eq!(
            reasons(validate_block(&bad, &store, &params, T0)),
            vec!["POC_FAIL"],
            "bit {i}"
        );
    }
}

#[test]
fn every_rule_has_its_reason() {
    let (store, params) = setup();
    let k = key_with_toss(&store, &params, true);
    let good = sealed(&store, &params, &k, vec![]);
    let check = |b: &Block, clock: u64, want: &[&str]| {
        let got = reasons(validate_block(b, &store, &params, clock));
        for w in want {
            assert!(got.contains(w), "want {w}, got {got:?}");
        }
    };

    let mut b = good.clone();
    b.header.prev_hash = greenbtc_core::crypto::hash(b"nowhere");
    check(&b, FAR_FUTURE, &["UNKNOWN_PARENT"]);

    let mut b = good.clone();
    b.header.timestamp = T0;
    check(&b, FAR_FUTURE, &["TIMESTAMP_NOT_INCREASING"]);

    check(&good, T0 + 60 - 7201, &["TIMESTAMP_TOO_FAR_AHEAD"]);
    assert!(validate_block(&good, &store, &params, T0 + 60 - 7200).is_accept());

    let mut b = good.clone();
    b.header.level = 1;
    check(&b, FAR_FUTURE, &["WRONG_LEVEL"]);

    let mut b = good.clone();
    b.transactions.push(Transaction::new(1, b"late".to_vec()));
    check(&b, FAR_FUTURE, &["MERKLE_MISMATCH"]);

    let mut b = good.clone();
    b.transactions.clear();
    b.header.merkle_root = merkle_root(&b.transactions);
    check(&b, FAR_FUTURE, &["MISSING_COINBASE"]);

    let mut b = good.clone();
    b.transactions[0] = Transaction::coinbase(&key(250).public_key, emission(1));
    b.header.merkle_root = merkle_root(&b.transactions);
    check(&b, FAR_FUTURE, &["COINBASE_KEY_MISMATCH"]);

    let mut b = good.clone();
    b.transactions[0] = Transaction::coinbase(&k.public_key, emission(1) + 1);
    b.header.merkle_root = merkle_root(&b.transactions);
    check(&b, FAR_FUTURE, &["BAD_REWARD"]);
}

#[test]
fn oversize_block_is_rejected() {
    let (store, params) = setup();
    let k = key_with_toss(&store, &params, true);
    let big = sealed(
        &store,
        &params,
        &k,
        vec![Transaction::new(0, vec![0u8; MAX_BLOCK_SIZE])],
    );
    assert!(big.size() > MAX_BLOCK_SIZE);
    assert_eq!(reasons(validate_block(&big, &store, &params, T0)), vec!["OVERSIZE"]);
    let fits = sealed(
        &store,
        &params,
        &k,
        vec![Transaction::new(0, vec![0u8; MAX_BLOCK_SIZE - 2000])],
    );
    assert!(validate_block(&fits, &store, &params, T0).is_accept());
}

#[test]
fn verdict_ignores_unrelated_blocks() {
    let (mut store, params) = setup();
    let a = sealed(&store, &params, &key_with_toss(&store, &params, true), vec![]);
    let sibling_key = (0..=255u8)
        .map(key)
        .filter(|k| k.public_key != a.coinbase_public_key().unwrap())
        .find(|k| {
            candidate_block(&store, &params, k, &store.tip(), T0 + 60, vec![])
                .unwrap()
                .1
                .pass
        })
        .unwrap();
    let b = sealed(&store, &params, &sibling_key, vec![Transaction::new(2, b"x".to_vec())]);
    let before = validate_block(&b, &store, &params, T0);
    store.insert(Arc::new(a)).unwrap();
    assert_eq!(validate_block(&b, &store, &params, T0), before);
    assert!(before.is_accept());
}

#[test]
fn reason_codes_are_stable() {
    assert_eq!(RejectReason::VctFail.to_string(), "VCT_FAIL");
    assert_eq!(RejectReason::PocFail.code(), "POC_FAIL");
}

#[test]
fn exported_chain_reimports() {
    let (mut store, params) = setup();
    let mut chain = vec![store.tip_block().block.as_ref().clone()];
    for _ in 0..3 {
        let k = (0..=255u8)
            .map(key)
            .find(|k| {
                candidate_block(&store, &params, k, &store.tip(), T0 + 600 * chain.len() as u64, vec![])
                    .unwrap()
                    .1
                    .pass
            })
            .unwrap();
        let ts = T0 + 600 * chain.len() as u64;
        let (c, _) = candidate_block(&store, &params, &k, &store.tip(), ts, vec![]).unwrap();
        let b = mine(&c, &params, &k, 0, 10_000).unwrap().0.unwrap();
        assert!(validate_block(&b, &store, &params, ts).is_accept());
        store.insert(Arc::new(b.clone())).unwrap();
        chain.push(b);
    }
    let mut text = Vec::new();
    write_chain(&mut text, &chain).unwrap();
    assert_eq!(String::from_utf8(text.clone()).unwrap().lines().count(), 4);
    assert_eq!(read_chain(&text[..]).unwrap(), chain);
}
