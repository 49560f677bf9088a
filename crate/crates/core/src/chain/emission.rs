/// Base units per coin.
pub const COIN: u64 = 100_000_000;
pub const INITIAL_REWARD: u64 = 50 * COIN;
pub const HALVING_INTERVAL: u64 = 210_000;

/// Block reward at `height`: 50 coins halved (floor) every 210,000 blocks.
pub fn emission(height: u64) -> u64 {
    let halvings = height / HALVING_INTERVAL;
    if halvings >= 64 {
        0
    } else {
        INITIAL_REWARD >> halvings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_points() {
        assert_eq!(emission(0), 50 * COIN);
        assert_eq!(emission(209_999), 50 * COIN);
        assert_eq!(emission(210_000), 25 * COIN);
        assert_eq!(emission(420_000), 1_250_000_000);
        assert_eq!(emission(64 * 210_000), 0);
        assert_eq!(emission(u64::MAX), 0);
    }

    #[test]
    fn total_supply_stays_below_21_million() {
        // Sum over eras of 210000 * floor(50e8 / 2^i), evaluated independently.
        let oracle: u64 = 2_099_999_997_690_000;
        let total: u64 = (0..64u64)
            .map(|era| HALVING_INTERVAL * emission(era * HALVING_INTERVAL))
            .sum();
        assert_eq!(total, oracle);
        assert!(total < 21_000_000 * COIN);
    }
}
