//! Deterministic discrete-event simulation of a Green Bitcoin network.

mod config;
mod engine;
mod experiments;
mod metrics;

pub use config::{
    AdversarySpec, DifficultySetting, LatencyModel, MiningFidelity, Partition, PowerStep, ScenarioConfig, Strategy,
    MAX_CONCRETE_LEVEL, MAX_CONCRETE_NODES,
};
pub use engine::{run, run_chain, run_with, RunOptions};
pub use experiments::{
    attack_experiment, binomial_two_sided, committee_proportion, ece_from_runs, measure_ece, measure_ece_series,
    wilson, AttackStats, CommitteeProportion, EceMeasurement, DEFAULT_ATTACK_HORIZON,
};
pub use metrics::{AttackOutcome, BlockRecord, EnergyCounters, EnergyLedger, EventRecord, Metrics};
