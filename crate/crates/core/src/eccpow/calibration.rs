use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decode, expand_hash, gen_matrix, CodeParams};
use crate::crypto::Digest256;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveProbEstimate {
    pub level: u32,
    pub solve_prob: f64,
    pub std_err: f64,
    pub samples: u64,
    pub successes: u64,
}

impl SolveProbEstimate {
    /// Normal-approximation interval `p +- z * se`, clipped to [0, 1].
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (
            (self.solve_prob - z * self.std_err).max(0.0),
            (self.solve_prob + z * self.std_err).min(1.0),
        )
    }
}

/// Monte Carlo solve probability: each sample draws a fresh matrix seed and
/// puzzle output and records whether the decoder converges.
pub fn estimate_solve_prob(params: &CodeParams, samples: u64) -> Result<SolveProbEstimate> {
    estimate_solve_prob_with(params, samples, 0)
}

pub fn estimate_solve_prob_with(params: &CodeParams, samples: u64, seed: u64) -> Result<SolveProbEstimate> {
    params.validate()?;
    let samples = samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((params.level as u64) << 32));
    let mut successes = 0u64;
    for _ in 0..samples {
        let mut matrix_seed = [0u8; 32];
        let mut out = [0u8; 32];
        rng.fill_bytes(&mut matrix_seed);
        rng.fill_bytes(&mut out);
        let h = gen_matrix(&Digest256(matrix_seed), params)?;
        let r = expand_hash(&Digest256(out), params.n as usize);
        if decode(&h, &r, params.max_iter)?.converged {
            successes += 1;
        }
    }
    let p = successes as f64 / samples as f64;
    Ok(SolveProbEstimate {
        level: params.level,
        solve_prob: p,
        std_err: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        successes,
    })
}
