//! Profitable double-spending guard.
//!
//! Success probability follows the catch-up race in which the attacker's
//! progress while the merchant waits for `z` confirmations is Poisson with
//! mean `z q / p`, after which the attacker must close the remaining gap in
//! a biased random walk (gambler's ruin, `(q/p)^deficit`). Attack cost is
//! hash-power rental over the expected attack duration, capped by a horizon.

use serde::{Deserialize, Serialize};

/// Default cap on attack duration, in block intervals.
pub const DEFAULT_HORIZON_BLOCKS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdsParams {
    /// Value of the transaction being reversed, in coins.
    pub tx_value: f64,
    /// Attacker's share of total hash power.
    pub attacker_share: f64,
    /// Cost of renting the attacker's hash power for one block interval.
    pub rental_cost_per_block: f64,
    pub block_reward: f64,
    pub max_z: u32,
    #[serde(default = "default_horizon")]
    pub horizon_blocks: u32,
}

fn default_horizon() -> u32 {
    DEFAULT_HORIZON_BLOCKS
}

impl PdsParams {
    pub fn validate(&self) -> Result<(), String> {
        let finite_non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be a finite non-negative number"))
            }
        };
        finite_non_negative("tx_value", self.tx_value)?;
        finite_non_negative("rental_cost_per_block", self.rental_cost_per_block)?;
        finite_non_negative("block_reward", self.block_reward)?;
        if !(0.0..=1.0).contains(&self.attacker_share) {
            return Err("attacker_share must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// `ln(lambda^k e^-lambda / k!)`.
fn ln_poisson(lambda: f64, k: u32) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    -lambda + k as f64 * lambda.ln() - ln_fact
}

/// Probability that an attacker with hash share `q` ever catches up with
/// an honest chain that is `z` blocks deep.
///
/// Evaluated as `P(K > z) + sum_{k <= z} P(K = k) (q/p)^(z-k)`, which equals
/// `1 - sum_{k <= z} P(K = k) (1 - (q/p)^(z-k))` without its cancellation.
pub fn double_spend_success_prob(q: f64, z: u32) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 0.5 {
        return 1.0;
    }
    let p = 1.0 - q;
    let ratio = q / p;
    let lambda = z as f64 * ratio;
    let mut total = 0.0;
    for k in 0..=z {
        total += (ln_poisson(lambda, k) + (z - k) as f64 * ratio.ln()).exp();
    }
    // Upper tail: terms fall off super-geometrically once k exceeds lambda.
    let mut k = z + 1;
    loop {
        let term = ln_poisson(lambda, k).exp();
        total += term;
        if term < 1e-300 || term < total * 1e-17 || k > z + 10_000 {
            break;
        }
        k += 1;
    }
    total.clamp(0.0, 1.0)
}

/// Expected attack duration in block intervals: `z` intervals while the
/// merchant waits, then the catch-up walk, whose steps last `p` intervals
/// on average, stopped at success or when the horizon is used up.
pub fn expected_attack_duration(q: f64, z: u32, horizon_blocks: u32) -> f64 {
    let wait = z.min(horizon_blocks) as f64;
    if q <= 0.0 || z >= horizon_blocks {
        return wait;
    }
    let p = 1.0 - q;
    let steps_budget = ((horizon_blocks - z) as f64 / p).floor() as usize;
    // steps[d] = expected walk steps from deficit d with the current budget.
    let max_deficit = z as usize + steps_budget + 1;
    let mut steps = vec![0.0f64; max_deficit + 2];
    for _ in 0..steps_budget {
        let mut next = vec![0.0f64; max_deficit + 2];
        for d in 1..=max_deficit {
            next[d] = 1.0 + q * steps[d - 1] + p * steps[d + 1];
        }
        steps = next;
    }
    let lambda = z as f64 * q / p;
    let walk: f64 = (0..z)
        .map(|k| ln_poisson(lambda, k).exp() * steps[(z - k) as usize])
        .sum();
    wait + p * walk
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitPoint {
    pub z: u32,
    pub success_prob: f64,
    /// `tx_value + z * block_reward`.
    pub revenue_if_success: f64,
    pub expected_duration_blocks: f64,
    pub expected_cost: f64,
    pub profit: f64,
}

/// Expected profit `P(q, z) (tx_value + z reward) - E[duration] rental`.
pub fn attack_profit(params: &PdsParams, z: u32) -> ProfitPoint {
    let q = params.attacker_share;
    let success_prob = double_spend_success_prob(q, z);
    let revenue_if_success = params.tx_value + z as f64 * params.block_reward;
    let expected_duration_blocks = expected_attack_duration(q, z, params.horizon_blocks);
    let expected_cost = expected_duration_blocks * params.rental_cost_per_block;
    ProfitPoint {
        z,
        success_prob,
        revenue_if_success,
        expected_duration_blocks,
        expected_cost,
        profit: success_prob * revenue_if_success - expected_cost,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confirmations {
    Safe(u32),
    Unsafe,
}

/// Smallest `z <= max_z` at which the attack stops paying. A majority
/// attacker is always unsafe: it wins with certainty, so waiting longer
/// only delays the loss.
pub fn required_confirmations(params: &PdsParams) -> Confirmations {
    if params.attacker_share >= 0.5 {
        return Confirmations::Unsafe;
    }
    (0..=params.max_z)
        .find(|&z| attack_profit(params, z).profit <= 0.0)
        .map_or(Confirmations::Unsafe, Confirmations::Safe)
}

/// The `pds` verdict document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdsVerdict {
    pub params: PdsParams,
    pub z: u32,
    pub success_prob: f64,
    pub profit_curve: Vec<ProfitPoint>,
    /// `None` when no `z <= max_z` is safe.
    pub required_z: Option<u32>,
    pub verdict: String,
}

pub fn pds_verdict(params: &PdsParams, z: u32) -> PdsVerdict {
    let profit_curve: Vec<ProfitPoint> = (0..=params.max_z).map(|z| attack_profit(params, z)).collect();
    let required = required_confirmations(params);
    let required_z = match required {
        Confirmations::Safe(z) => Some(z),
        Confirmations::Unsafe => None,
    };
    PdsVerdict {
        params: *params,
        z,
        success_prob: double_spend_success_prob(params.attacker_share, z),
        profit_curve,
        required_z,
        verdict: if required_z.is_some() { "safe" } else { "unsafe" }.to_string(),
    }
}
