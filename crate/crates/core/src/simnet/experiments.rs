//! Repeated-run measurements built on the simulator: energy efficiency,
//! committee composition and double-spend races.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial as BinomialDist, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::config::ScenarioConfig;
use super::engine::run;
use super::metrics::Metrics;
use crate::chain::BlockHeader;
use crate::crypto::hash_parts;
use crate::error::{Error, Result};
use crate::vct::{threshold_for, toss_with_threshold, PassProbability};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EceMeasurement {
    pub pass_probability: PassProbability,
    pub ece: f64,
    /// Batch-means interval over equal slices of simulated time.
    pub ci95: [f64; 2],
    pub gated_attempts: u64,
    pub baseline_attempts: u64,
    pub gated_blocks: u64,
    pub baseline_blocks: u64,
    pub gated_vct_tosses: u64,
    pub baseline_vct_tosses: u64,
}

const ECE_BATCHES: usize = 8;

/// Energy-consumption efficiency of `pp` against the same scenario at
/// `pp = 1`.
///
/// Both runs span the same simulated time, so the twin's solve spend is
/// measured at the cadence of the gated run's blocks. Dividing each run by
/// its own block count instead would cancel the saving: at any fixed level
/// a block costs `1/p` attempts whoever makes them.
pub fn measure_ece(scenario: &ScenarioConfig, pp: PassProbability) -> Result<EceMeasurement> {
    measure_ece_series(scenario, &[pp]).map(|mut v| v.remove(0))
}

/// [`measure_ece`] for several probabilities against one shared twin run.
pub fn measure_ece_series(scenario: &ScenarioConfig, pps: &[PassProbability]) -> Result<Vec<EceMeasurement>> {
    let with_pp = |pp| ScenarioConfig {
        pass_probability: pp,
        ..scenario.clone()
    };
    let (twin, gated) = rayon::join(
        || run(&with_pp(PassProbability::ONE)),
        || pps.par_iter().map(|&pp| run(&with_pp(pp))).collect::<Vec<_>>(),
    );
    let twin = twin?;
    pps.iter()
        .zip(gated)
        .map(|(&pp, gated)| ece_from_runs(pp, &gated?, &twin))
        .collect()
}

/// ECE of a gated run against its `pp = 1` twin over the same duration.
pub fn ece_from_runs(pp: PassProbability, gated: &Metrics, twin: &Metrics) -> Result<EceMeasurement> {
    if gated.blocks.is_empty() || twin.blocks.is_empty() {
        return Err(Error::Measurement(format!(
            "ECE needs blocks in both runs (gated {}, twin {})",
            gated.blocks.len(),
            twin.blocks.len()
        )));
    }
    if gated.duration_s != twin.duration_s {
        return Err(Error::Measurement("ECE runs must span the same duration".into()));
    }
    let (a, b) = (gated.total_energy.solve_attempts, twin.total_energy.solve_attempts);
    let ece = 1.0 - a as f64 / b as f64;
    let hours = gated.hourly_attempts.len();
    let batches = ECE_BATCHES.min(hours);
    let per = hours / batches;
    let ratios: Vec<f64> = (0..batches)
        .filter_map(|k| {
            let range = k * per..if k + 1 == batches { hours } else { (k + 1) * per };
            let ga: u64 = gated.hourly_attempts[range.clone()].iter().sum();
            let ta: u64 = twin.hourly_attempts[range].iter().sum();
            (ta > 0).then(|| 1.0 - ga as f64 / ta as f64)
        })
        .collect();
    let ci95 = if ratios.len() < 2 {
        [ece, ece]
    } else {
        let m = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / m;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let half = Z95 * (var / m).sqrt();
        [ece - half, ece + half]
    };
    Ok(EceMeasurement {
        pass_probability: pp,
        ece,
        ci95,
        gated_attempts: a,
        baseline_attempts: b,
        gated_blocks: gated.blocks.len() as u64,
        baseline_blocks: twin.blocks.len() as u64,
        gated_vct_tosses: gated.total_energy.vct_tosses,
        baseline_vct_tosses: twin.total_energy.vct_tosses,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitteeProportion {
    pub rounds: usize,
    pub node_count: usize,
    pub adversary_nodes: usize,
    /// Adversary share of expected passes: its share of nodes, or of
    /// summed election probabilities under stake weighting.
    pub base_share: f64,
    /// Per round, adversary passes over all passes; `None` when nobody passed.
    pub shares: Vec<Option<f64>>,
    pub committee_sizes: Vec<u32>,
    /// Mean over rounds with a committee.
    pub mean_share: Option<f64>,
    pub ci95: Option<[f64; 2]>,
    pub adversary_passes: u64,
    pub total_passes: u64,
    pub empty_rounds: usize,
    /// Two-sided exact binomial test of pooled adversary passes against
    /// `base_share`.
    pub binomial_p_value: f64,
}

/// Committee composition over `rounds` independent parents, with real VRF
/// tosses by the scenario's node keys. The first
/// `round(adversary_fraction * node_count)` nodes are adversarial.
pub fn committee_proportion(
    scenario: &ScenarioConfig,
    adversary_fraction: f64,
    rounds: usize,
) -> Result<CommitteeProportion> {
    if !(0.0..=1.0).contains(&adversary_fraction) {
        return Err(Error::config("adversary_fraction", "must lie in [0, 1]"));
    }
    let keys = scenario.node_keys();
    let params = scenario.consensus_params(&keys);
    let n = keys.len();
    let adversaries = ((adversary_fraction * n as f64).round() as usize).min(n);
    let pps = keys
        .iter()
        .map(|k| params.pass_probability_for(&k.public_key.key_hash()))
        .collect::<Result<Vec<_>>>()?;
    let thresholds: Vec<_> = pps.iter().map(|&pp| threshold_for(pp)).collect();
    let expected_total: f64 = pps.iter().map(|p| p.as_f64()).sum();
    let expected_adv: f64 = pps[..adversaries].iter().map(|p| p.as_f64()).sum();
    let base_share = if expected_total > 0.0 {
        expected_adv / expected_total
    } else {
        adversaries as f64 / n as f64
    };
    let round_seed = hash_parts(&[b"committee-round", &scenario.seed.to_be_bytes()]);
    let counts: Vec<(u32, u32)> = (0..rounds as u64)
        .into_par_iter()
        .map(|r| {
            let parent = BlockHeader {
                version: 1,
                prev_hash: round_seed,
                nonce: r,
                ..BlockHeader::default()
            }
            .to_bytes();
            let mut adv = 0u32;
            let mut total = 0u32;
            for (i, (k, t)) in keys.iter().zip(&thresholds).enumerate() {
                if toss_with_threshold(&k.secret_key, &parent, t).pass {
                    total += 1;
                    if i < adversaries {
                        adv += 1;
                    }
                }
            }
            (adv, total)
        })
        .collect();
    let shares: Vec<Option<f64>> = counts
        .iter()
        .map(|&(a, t)| (t > 0).then(|| a as f64 / t as f64))
        .collect();
    let filled: Vec<f64> = shares.iter().flatten().copied().collect();
    let (mean_share, ci95) = if filled.is_empty() {
        (None, None)
    } else {
        let m = filled.len() as f64;
        let mean = filled.iter().sum::<f64>() / m;
        let half = if filled.len() > 1 {
            let var = filled.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1.0);
            Z95 * (var / m).sqrt()
        } else {
            0.0
        };
        (Some(mean), Some([mean - half, mean + half]))
    };
    let adversary_passes: u64 = counts.iter().map(|&(a, _)| a as u64).sum();
    let total_passes: u64 = counts.iter().map(|&(_, t)| t as u64).sum();
    Ok(CommitteeProportion {
        rounds,
        node_count: n,
        adversary_nodes: adversaries,
        base_share,
        committee_sizes: counts.iter().map(|&(_, t)| t).collect(),
        empty_rounds: shares.iter().filter(|s| s.is_none()).count(),
        shares,
        mean_share,
        ci95,
        adversary_passes,
        total_passes,
        binomial_p_value: binomial_two_sided(adversary_passes, total_passes, base_share),
    })
}

/// `2 min(P(X <= k), P(X >= k))` for `X ~ Bin(n, p)`, capped at 1.
pub fn binomial_two_sided(k: u64, n: u64, p: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let dist = Binomial::new(p.clamp(0.0, 1.0), n).expect("p clamped to [0, 1]");
    let lower = dist.cdf(k);
    let upper = if k == 0 { 1.0 } else { 1.0 - dist.cdf(k - 1) };
    (2.0 * lower.min(upper)).min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackStats {
    pub adversary_fraction: f64,
    pub adversary_nodes: usize,
    pub confirmations: u32,
    pub trials: u64,
    pub horizon_blocks: u64,
    /// Trials in which the private chain reached the honest chain's length
    /// after the target had `confirmations` blocks.
    pub caught_up: u64,
    /// Trials in which it became strictly longer.
    pub overtook: u64,
    /// Trials that ended with no elected miner on either side.
    pub stalled: u64,
    pub success_rate: f64,
    /// Wilson score interval for `success_rate`.
    pub ci95: [f64; 2],
    pub overtake_rate: f64,
    pub overtake_ci95: [f64; 2],
}

/// Default bound on honest blocks past the confirmation point.
pub const DEFAULT_ATTACK_HORIZON: u64 = 1000;

/// Double-spend race. The target transaction sits in the first honest
/// block; the adversary mines a private fork from its parent. Each side
/// elects a fresh committee for every new parent (sampled, each node
/// passing with the scenario's probability) and finds blocks at a rate
/// proportional to that committee. Success is the private chain catching
/// up with the honest chain once the target has `z` confirmations; a trial
/// gives up `horizon_blocks` honest blocks past that point.
pub fn attack_experiment(
    scenario: &ScenarioConfig,
    adversary_fraction: f64,
    z: u32,
    trials: u64,
    horizon_blocks: u64,
) -> Result<AttackStats> {
    if !(0.0..=1.0).contains(&adversary_fraction) {
        return Err(Error::config("adversary_fraction", "must lie in [0, 1]"));
    }
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let n = scenario.node_count as u64;
    let adversaries = ((adversary_fraction * n as f64).round() as u64).min(n);
    let race = Race {
        honest_nodes: n - adversaries,
        adversary_nodes: adversaries,
        pp: scenario.pass_probability.as_f64(),
        z: z as u64,
        horizon: horizon_blocks,
        give_up_deficit: give_up_deficit(adversaries as f64 / n as f64),
    };
    let seed = scenario.seed;
    let outcomes: Vec<RaceOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            race.run(&mut rng)
        })
        .collect();
    let caught_up = outcomes.iter().filter(|o| o.caught_up).count() as u64;
    let overtook = outcomes.iter().filter(|o| o.overtook).count() as u64;
    let stalled = outcomes.iter().filter(|o| o.stalled).count() as u64;
    Ok(AttackStats {
        adversary_fraction,
        adversary_nodes: adversaries as usize,
        confirmations: z,
        trials,
        horizon_blocks,
        caught_up,
        overtook,
        stalled,
        success_rate: caught_up as f64 / trials as f64,
        ci95: wilson(caught_up, trials),
        overtake_rate: overtook as f64 / trials as f64,
        overtake_ci95: wilson(overtook, trials),
    })
}

/// Deficit past which a minority's catch-up chance is below 1e-15.
fn give_up_deficit(q: f64) -> u64 {
    if q <= 0.0 || q >= 0.5 {
        return u64::MAX;
    }
    ((1e-15f64).ln() / (q / (1.0 - q)).ln()).ceil() as u64
}

pub fn wilson(successes: u64, trials: u64) -> [f64; 2] {
    if trials == 0 {
        return [0.0, 1.0];
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    [(centre - half).max(0.0), (centre + half).min(1.0)]
}

struct Race {
    honest_nodes: u64,
    adversary_nodes: u64,
    pp: f64,
    z: u64,
    horizon: u64,
    give_up_deficit: u64,
}

#[derive(Clone, Copy, Debug, Default)]
struct RaceOutcome {
    caught_up: bool,
    overtook: bool,
    stalled: bool,
}

impl Race {
    fn committee(&self, rng: &mut ChaCha8Rng, nodes: u64) -> u64 {
        if nodes == 0 || self.pp >= 1.0 {
            return if self.pp > 0.0 { nodes } else { 0 };
        }
        BinomialDist::new(nodes, self.pp).expect("pp in [0, 1]").sample(rng)
    }

    /// Only the order of block discoveries matters, so the race runs on the
    /// jump chain: the next block is the adversary's with probability equal
    /// to its share of the combined committee rate.
    fn run(&self, rng: &mut ChaCha8Rng) -> RaceOutcome {
        let mut out = RaceOutcome::default();
        let mut honest_committee = self.committee(rng, self.honest_nodes);
        let mut adversary_committee = self.committee(rng, self.adversary_nodes);
        let (mut h, mut a) = (0u64, 0u64);
        loop {
            if h >= self.z {
                if a >= h {
                    out.caught_up = true;
                }
                if a > h {
                    out.overtook = true;
                    break;
                }
                if h >= self.z + self.horizon || h - a >= self.give_up_deficit {
                    break;
                }
            }
            let total = honest_committee + adversary_committee;
            if total == 0 {
                out.stalled = true;
                break;
            }
            if rng.gen_range(0..total) < adversary_committee {
                a += 1;
                adversary_committee = self.committee(rng, self.adversary_nodes);
            } else {
                h += 1;
                honest_committee = self.committee(rng, self.honest_nodes);
            }
        }
        out
    }
}
