//! Green Bitcoin consensus: verifiable coin-toss self-election, an LDPC
//! proof-of-computation puzzle bound to the miner's coinbase key, energy
//! weighted fork choice, a discrete-event network simulator and an analytic
//! double-spend guard.

pub mod chain;
pub mod crypto;
pub mod eccpow;
pub mod error;
pub mod pds;
pub mod simnet;
pub mod vct;

pub use chain::{Block, BlockHeader, ChainStore, ConsensusParams, Transaction};
pub use crypto::{Digest256, KeyPair, PublicKey, SecretKey, Signature};
pub use eccpow::{BitWord, CodeParams, DifficultyTable, ParityCheckMatrix, PocProof};
pub use error::{Error, Result};
pub use simnet::{Metrics, ScenarioConfig};
pub use vct::{PassProbability, Threshold, VrfOutput};
