//! Error-correcting-code proof of computation.
//!
//! A puzzle instance is a regular LDPC parity-check matrix derived from the
//! parent block hash. A miner signs the candidate header with its coinbase
//! key, hashes the signature, expands the digest to an `n`-bit word and runs
//! a hard-decision bit-flipping decoder on it. The attempt succeeds when the
//! decoder converges to a codeword.

mod bits;
mod calibration;
mod decoder;
mod difficulty;
mod matrix;
mod puzzle;

pub use bits::BitWord;
pub use calibration::{estimate_solve_prob, estimate_solve_prob_with, SolveProbEstimate};
pub use decoder::{decode, DecoderResult};
pub use difficulty::{difficulty_control, DifficultyTable, LevelSpec};
pub use matrix::{gen_matrix, CodeParams, ParityCheckMatrix};
pub use puzzle::{expand_hash, solve, solve_with_stats, verify_poc, PocProof, Puzzle, SolveOutcome};
