use greenbtc_core::crypto::Digest256;
use greenbtc_core::eccpow::{decode, gen_matrix, BitWord};
use greenbtc_core::pds::double_spend_success_prob;
use greenbtc_core::simnet::{run, AdversarySpec, DifficultySetting, LatencyModel, MiningFidelity, ScenarioConfig};
use greenbtc_core::{DifficultyTable, PassProbability};
use proptest::prelude::*;

fn level_params() -> impl Strategy<Value = greenbtc_core::CodeParams> {
    (0usize..10).prop_map(|l| DifficultyTable::shipped_params()[l])
}

proptest! {
    #[test]
    fn matrices_are_regular_and_consistent(seed in any::<[u8; 32]>(), params in level_params()) {
        let h = gen_matrix(&Digest256(seed), &params).unwrap();
        let n = params.n as usize;
        prop_assert_eq!(h.m() * params.wr as usize, n * params.wc as usize);
        for r in 0..h.m() {
            prop_assert_eq!(h.row(r).len(), params.wr as usize);
            for &c in h.row(r) {
                prop_assert!(h.col(c as usize).contains(&(r as u32)));
                prop_assert!(h.get(r, c as usize));
            }
        }
        for c in 0..n {
            prop_assert_eq!(h.col(c).len(), params.wc as usize);
        }
        prop_assert_eq!(gen_matrix(&Digest256(seed), &params).unwrap(), h);
    }

    #[test]
    fn decoder_output_is_a_fixed_point(
        seed in any::<[u8; 32]>(),
        params in level_params(),
        bits in proptest::collection::vec(0u8..=1, 48),
        max_iter in 0u32..25,
    ) {
        let h = gen_matrix(&Digest256(seed), &params).unwrap();
        let word = BitWord::from_bits(bits[..h.n()].to_vec());
        let d = decode(&h, &word, max_iter).unwrap();
        prop_assert!(d.iterations <= max_iter);
        prop_assert_eq!(d.converged, h.is_codeword(&d.word));
        if d.converged {
            let again = decode(&h, &d.word, max_iter).unwrap();
            prop_assert!(again.converged);
            prop_assert_eq!(again.iterations, 0);
            prop_assert_eq!(&again.word, &d.word);
        }
        if d.iterations == 0 {
            prop_assert_eq!(d.word, word);
        }
    }

    #[test]
    fn success_probability_is_monotone(q in 0.0f64..0.5, dq in 0.0f64..0.1, z in 0u32..60) {
        let p = double_spend_success_prob(q, z);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(double_spend_success_prob(q, z + 1) <= p * (1.0 + 1e-12));
        let q2 = (q + dq).min(0.4999);
        prop_assert!(double_spend_success_prob(q2, z) >= p * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulations_conserve_blocks_and_energy(
        nodes in 2usize..12,
        pp in prop::sample::select(vec!["0.1", "0.3", "1/2", "1"]),
        level in 0u32..6,
        seed in any::<u64>(),
        hours in 1.0f64..6.0,
        max_ms in 1.0f64..5000.0,
    ) {
        let pp = PassProbability::parse(pp).unwrap();
        let p = DifficultyTable::shipped().solve_prob(level).unwrap();
        let c = ScenarioConfig {
            node_count: nodes,
            attempt_rate: 1.0 / (600.0 * (nodes as f64 * pp.as_f64()).max(1.0) * p),
            pass_probability: pp,
            difficulty: DifficultySetting::Fixed { level },
            target_interval_s: 600,
            latency: LatencyModel::Uniform { min_ms: 0.0, max_ms },
            partitions: vec![],
            adversary: AdversarySpec::default(),
            mining: MiningFidelity::Abstract,
            seed,
            duration_s: hours * 3600.0,
            stakes: None,
            hash_power_steps: vec![],
            difficulty_table: None,
            genesis_timestamp: 1_700_000_000,
        };
        let m = run(&c).unwrap();
        prop_assert_eq!(m.blocks_mined, m.blocks.len() as u64 + m.orphaned);
        prop_assert_eq!(m.energy.total(), m.total_energy);
        prop_assert_eq!(m.hourly_attempts.iter().sum::<u64>(), m.total_energy.solve_attempts);
        let mut prev_ts = 0;
        for (i, b) in m.blocks.iter().enumerate() {
            prop_assert_eq!(b.height, i as u64 + 1);
            prop_assert!(b.timestamp > prev_ts);
            prop_assert!(b.miner < nodes);
            prop_assert!(b.committee_size >= 1 && b.committee_size as usize <= nodes);
            prop_assert!(b.found_at_s <= c.duration_s);
            prev_ts = b.timestamp;
        }
        prop_assert_eq!(run(&c).unwrap(), m);
    }
}
