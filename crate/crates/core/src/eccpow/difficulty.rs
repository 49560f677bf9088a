use serde::{Deserialize, Serialize};

use super::CodeParams;
use crate::error::{Error, Result};

/// One row of the difficulty table: code shape plus its calibrated
/// per-attempt solve probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub params: CodeParams,
    pub solve_prob: f64,
}

/// Difficulty levels ordered by strictly decreasing solve probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DifficultyTable {
    levels: Vec<LevelSpec>,
}

/// Shape of the shipped table: `(n, wc, wr)` per level.
const SHIPPED_SHAPES: [(u32, u32, u32); 10] = [
    (16, 2, 4),
    (24, 2, 4),
    (32, 2, 4),
    (40, 2, 4),
    (18, 3, 6),
    (24, 3, 6),
    (30, 3, 6),
    (36, 3, 6),
    (42, 3, 6),
    (48, 3, 6),
];

/// Output of `greenbtc calibrate --samples 400000 --seed 1`.
const SHIPPED_SOLVE_PROBS: [f64; 10] = [
    0.24792, 0.1754325, 0.1146675, 0.07295, 0.0498325, 0.033285, 0.0189425, 0.00966, 0.004475, 0.001965,
];

pub const SHIPPED_MAX_ITER: u32 = 20;

impl DifficultyTable {
    pub fn new(levels: Vec<LevelSpec>) -> Result<Self> {
        let table = DifficultyTable { levels };
        table.validate()?;
        Ok(table)
    }

    /// Code shapes of the shipped table, without probabilities.
    pub fn shipped_params() -> Vec<CodeParams> {
        SHIPPED_SHAPES
            .iter()
            .enumerate()
            .map(|(level, &(n, wc, wr))| CodeParams {
                n,
                wc,
                wr,
                level: level as u32,
                max_iter: SHIPPED_MAX_ITER,
            })
            .collect()
    }

    pub fn shipped() -> Self {
        let levels = Self::shipped_params()
            .into_iter()
            .zip(SHIPPED_SOLVE_PROBS)
            .map(|(params, solve_prob)| LevelSpec { params, solve_prob })
            .collect();
        DifficultyTable { levels }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::config("difficulty_table", "at least one level required"));
        }
        for (i, spec) in self.levels.iter().enumerate() {
            spec.params.validate()?;
            if spec.params.level != i as u32 {
                return Err(Error::config(
                    format!("difficulty_table[{i}].params.level"),
                    format!("expected {i}, found {}", spec.params.level),
                ));
            }
            if !(spec.solve_prob > 0.0 && spec.solve_prob <= 1.0) {
                return Err(Error::config(
                    format!("difficulty_table[{i}].solve_prob"),
                    "must lie in (0, 1]",
                ));
            }
            if i > 0 && spec.solve_prob >= self.levels[i - 1].solve_prob {
                return Err(Error::config(
                    format!("difficulty_table[{i}].solve_prob"),
                    "must be strictly below the previous level",
                ));
            }
        }
        for pair in self.levels.windows(2) {
            if (1.0 / pair[1].solve_prob).round() <= (1.0 / pair[0].solve_prob).round() {
                return Err(Error::config(
                    format!("difficulty_table[{}].solve_prob", pair[1].params.level),
                    "work must strictly increase with level",
                ));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> &[LevelSpec] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn get(&self, level: u32) -> Result<&LevelSpec> {
        self.levels.get(level as usize).ok_or(Error::UnknownLevel(level))
    }

    pub fn params(&self, level: u32) -> Result<CodeParams> {
        Ok(self.get(level)?.params)
    }

    pub fn solve_prob(&self, level: u32) -> Result<f64> {
        Ok(self.get(level)?.solve_prob)
    }

    /// Expected attempts per block, `round(1 / p)`.
    pub fn work(&self, level: u32) -> Result<u64> {
        Ok((1.0 / self.solve_prob(level)?).round() as u64)
    }

    fn expected_attempts(&self, level: u32) -> f64 {
        let clamped = level.min(self.max_level());
        1.0 / self.levels[clamped as usize].solve_prob
    }
}

/// Next block's level from the recent `(timestamp, level)` history, oldest
/// first, ending at the parent.
///
/// The last `window` intervals give the mean interval `a` and, through the
/// levels they were mined at, an estimate of the network attempt rate. The
/// target is the pair of adjacent levels bracketing the solve probability
/// that would yield `target_interval_s` at that rate: the harder one while
/// `a <= target`, the easier one while `a > target`. Alternating between the
/// pair holds the long-run mean interval at the target even though levels
/// are discrete. The level moves at most one step per block.
pub fn difficulty_control(
    recent: &[(u64, u32)],
    current_level: u32,
    target_interval_s: u64,
    window: usize,
    table: &DifficultyTable,
) -> u32 {
    if recent.len() < 2 || window == 0 || target_interval_s == 0 {
        return current_level;
    }
    let k = window.min(recent.len() - 1);
    let span = &recent[recent.len() - 1 - k..];
    let elapsed = span[k].0.saturating_sub(span[0].0).max(1) as f64;
    let attempts: f64 = span[1..].iter().map(|&(_, l)| table.expected_attempts(l)).sum();
    let rate = attempts / elapsed;
    let wanted_prob = 1.0 / (rate * target_interval_s as f64);
    let levels = table.levels();
    let too_slow = elapsed > (k as u64 * target_interval_s) as f64;
    // The tolerance keeps an exactly on-target history on its own level.
    let target = match levels.iter().position(|s| s.solve_prob <= wanted_prob * (1.0 + 1e-9)) {
        Some(0) => 0,
        None => table.max_level(),
        Some(harder) if too_slow => harder as u32 - 1,
        Some(harder) => harder as u32,
    };
    match target.cmp(&current_level) {
        std::cmp::Ordering::Greater => current_level + 1,
        std::cmp::Ordering::Less => current_level - 1,
        std::cmp::Ordering::Equal => current_level,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(level: u32, interval: u64, blocks: usize) -> Vec<(u64, u32)> {
        (0..=blocks).map(|i| (1000 + i as u64 * interval, level)).collect()
    }

    #[test]
    fn shipped_table_is_valid_and_work_increases() {
        let t = DifficultyTable::shipped();
        t.validate().unwrap();
        let works: Vec<u64> = (0..t.len() as u32).map(|l| t.work(l).unwrap()).collect();
        assert!(works.windows(2).all(|w| w[0] < w[1]), "{works:?}");
        assert_eq!(t.params(0).unwrap(), CodeParams::new(16, 2, 4, 0, 20).unwrap());
        assert!(matches!(t.work(10), Err(Error::UnknownLevel(10))));
    }

    #[test]
    fn work_is_reciprocal_of_probability() {
        let p = CodeParams::new(16, 2, 4, 0, 20).unwrap();
        let q = CodeParams { level: 1, ..p };
        let t = DifficultyTable::new(vec![
            LevelSpec {
                params: p,
                solve_prob: 1.0,
            },
            LevelSpec {
                params: q,
                solve_prob: 0.01,
            },
        ])
        .unwrap();
        assert_eq!(t.work(0).unwrap(), 1);
        assert_eq!(t.work(1).unwrap(), 100);
    }

    #[test]
    fn table_validation_rejects_non_decreasing_probabilities() {
        let mut levels = DifficultyTable::shipped().levels().to_vec();
        levels[3].solve_prob = levels[2].solve_prob;
        assert!(DifficultyTable::new(levels).is_err());
        assert!(DifficultyTable::new(vec![]).is_err());
    }

    #[test]
    fn on_target_history_keeps_level() {
        let t = DifficultyTable::shipped();
        assert_eq!(difficulty_control(&history(5, 600, 24), 5, 600, 24, &t), 5);
    }

    #[test]
    fn quarter_interval_raises_one_level() {
        let t = DifficultyTable::shipped();
        assert_eq!(difficulty_control(&history(5, 150, 24), 5, 600, 24, &t), 6);
        assert_eq!(difficulty_control(&history(9, 150, 24), 9, 600, 24, &t), 9);
    }

    #[test]
    fn long_intervals_lower_one_level() {
        let t = DifficultyTable::shipped();
        assert_eq!(difficulty_control(&history(5, 2400, 24), 5, 600, 24, &t), 4);
        assert_eq!(difficulty_control(&history(0, 2400, 24), 0, 600, 24, &t), 0);
    }

    #[test]
    fn short_history_keeps_level() {
        let t = DifficultyTable::shipped();
        assert_eq!(difficulty_control(&[], 3, 600, 24, &t), 3);
        assert_eq!(difficulty_control(&[(5, 3)], 3, 600, 24, &t), 3);
    }

    #[test]
    fn only_the_last_window_counts() {
        let t = DifficultyTable::shipped();
        let mut h = history(5, 10, 50);
        let last = h.last().unwrap().0;
        h.extend((1..=6).map(|i| (last + i * 600, 5)));
        assert_eq!(difficulty_control(&h, 5, 600, 6, &t), 5);
    }

    /// Closed loop: exponential block times at a fixed attempt rate, then a
    /// fourfold rate step. The level must climb until the mean interval is
    /// back inside (target/2, 2 * target).
    #[test]
    fn closed_loop_recovers_after_hash_power_step() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Exp};
        let t = DifficultyTable::shipped();
        let target = 600u64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let base_rate = 1.0 / (target as f64 * t.solve_prob(4).unwrap());
        let mut now = 0f64;
        let mut level = 4u32;
        let mut hist = vec![(0u64, level)];
        let mut post_step = Vec::new();
        for b in 0..600 {
            let rate = if b >= 300 { 4.0 * base_rate } else { base_rate };
            let dt = Exp::new(rate * t.solve_prob(level).unwrap()).unwrap().sample(&mut rng);
            now += dt;
            hist.push((now as u64, level));
            if b >= 400 {
                post_step.push(dt);
            }
            level = difficulty_control(&hist, level, target, 24, &t);
        }
        assert!(level > 4);
        let mean = post_step.iter().sum::<f64>() / post_step.len() as f64;
        assert!(mean > target as f64 / 2.0 && mean < 2.0 * target as f64, "mean {mean}");
    }
}
