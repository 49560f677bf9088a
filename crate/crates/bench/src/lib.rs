//! Criterion benchmarks for the puzzle, coin toss and simulator. Run with
//! `cargo bench -p greenbtc-bench`.
