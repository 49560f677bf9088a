//! Discrete-event execution of one scenario.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::config::{LatencyModel, MiningFidelity, ScenarioConfig, Strategy};
use super::metrics::{AttackOutcome, BlockRecord, EnergyLedger, EventRecord, Metrics};
use crate::chain::{
    candidate_block, check_clock, genesis_block, validate_block_rules, Block, ChainStore, ConsensusParams, Transaction,
};
use crate::crypto::{Digest256, KeyPair};
use crate::eccpow::Puzzle;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the full event log in `Metrics::events`.
    pub record_events: bool,
}

/// Runs `config` to completion.
pub fn run(config: &ScenarioConfig) -> Result<Metrics> {
    run_with(config, RunOptions::default())
}

pub fn run_with(config: &ScenarioConfig, options: RunOptions) -> Result<Metrics> {
    run_chain(config, options).map(|(metrics, _)| metrics)
}

/// Like [`run_with`], also returning the final main chain from genesis.
pub fn run_chain(config: &ScenarioConfig, options: RunOptions) -> Result<(Metrics, Vec<Arc<Block>>)> {
    config.validate()?;
    let mut sim = Simulation::new(config, options)?;
    sim.execute()?;
    let chain = sim
        .observer
        .path_to(&sim.observer.tip())
        .iter()
        .map(|h| sim.blocks[sim.index[h]].block.clone())
        .collect();
    Ok((sim.finish(), chain))
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Attempt { node: usize, epoch: u64 },
    Deliver { node: usize, block: usize },
    RateChange,
}

struct Scheduled {
    time: f64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct BlockInfo {
    block: Arc<Block>,
    hash: Digest256,
    miner: Option<usize>,
    found_at: f64,
}

struct Job {
    parent: Digest256,
    template: Block,
    puzzle: Option<Puzzle>,
    attempts: u64,
}

struct Node {
    keys: KeyPair,
    adversary: bool,
    store: ChainStore,
    /// Blocks waiting for a missing parent, keyed by that parent.
    orphans: HashMap<Digest256, Vec<usize>>,
    /// Coin-toss results by parent; a toss is unique so it is never repeated.
    tosses: HashMap<Digest256, bool>,
    parent: Option<Digest256>,
    job: Option<Job>,
    /// Bumped whenever the job changes; stale attempt events are dropped.
    epoch: u64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    tossed: u32,
    passed: u32,
    adversarial: u32,
}

struct Coalition {
    members: Vec<usize>,
    confirmations: u32,
    private_tip: Digest256,
    private_blocks: Vec<usize>,
    released_at: Option<f64>,
    honest_height_at_release: u64,
}

struct Simulation<'a> {
    config: &'a ScenarioConfig,
    params: ConsensusParams,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    now: f64,
    nodes: Vec<Node>,
    blocks: Vec<BlockInfo>,
    index: HashMap<Digest256, usize>,
    /// Context-free validation verdicts, shared by all nodes.
    verdicts: HashMap<Digest256, bool>,
    /// Every published block, in publication order.
    observer: ChainStore,
    tallies: HashMap<Digest256, Tally>,
    ledger: EnergyLedger,
    hourly: Vec<u64>,
    rejected: u64,
    coalition: Option<Coalition>,
    record: bool,
    events: Vec<EventRecord>,
}

impl<'a> Simulation<'a> {
    fn new(config: &'a ScenarioConfig, options: RunOptions) -> Result<Self> {
        let keys = config.node_keys();
        let params = config.consensus_params(&keys);
        let genesis = Arc::new(genesis_block(config.genesis_timestamp, config.genesis_level()));
        let genesis_hash = genesis.hash();
        let store = ChainStore::new(genesis.clone(), params.table.clone())?;
        let adversaries = config.adversary_count();
        let nodes = keys
            .into_iter()
            .enumerate()
            .map(|(i, keys)| Node {
                keys,
                adversary: i < adversaries,
                store: store.clone(),
                orphans: HashMap::new(),
                tosses: HashMap::new(),
                parent: None,
                job: None,
                epoch: 0,
            })
            .collect();
        let coalition = match config.adversary.strategy {
            Strategy::PrivateChain { confirmations } if adversaries > 0 => Some(Coalition {
                members: (0..adversaries).collect(),
                confirmations,
                private_tip: genesis_hash,
                private_blocks: Vec::new(),
                released_at: None,
                honest_height_at_release: 0,
            }),
            _ => None,
        };
        let hours = (config.duration_s / 3600.0).ceil().max(1.0) as usize;
        let mut sim = Simulation {
            config,
            params,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0.0,
            nodes,
            blocks: vec![BlockInfo {
                block: genesis,
                hash: genesis_hash,
                miner: None,
                found_at: 0.0,
            }],
            index: HashMap::from([(genesis_hash, 0)]),
            verdicts: HashMap::new(),
            observer: store,
            tallies: HashMap::new(),
            ledger: EnergyLedger::new(config.node_count),
            hourly: vec![0; hours],
            rejected: 0,
            coalition,
            record: options.record_events,
            events: Vec::new(),
        };
        for step in &config.hash_power_steps {
            sim.push(step.at_s, Event::RateChange);
        }
        for i in 0..config.node_count {
            sim.retarget(i)?;
        }
        Ok(sim)
    }

    fn push(&mut self, time: f64, event: Event) {
        self.seq += 1;
        self.queue.push(Scheduled {
            time,
            seq: self.seq,
            event,
        });
    }

    fn log(&mut self, record: impl FnOnce() -> EventRecord) {
        if self.record {
            self.events.push(record());
        }
    }

    fn execute(&mut self) -> Result<()> {
        while let Some(next) = self.queue.pop() {
            if next.time > self.config.duration_s {
                break;
            }
            self.now = next.time;
            match next.event {
                Event::Attempt { node, epoch } => self.attempt(node, epoch)?,
                Event::Deliver { node, block } => {
                    self.receive(node, block)?;
                    self.retarget(node)?;
                }
                Event::RateChange => {
                    for i in 0..self.nodes.len() {
                        if self.nodes[i].job.is_some() {
                            self.nodes[i].epoch += 1;
                            self.schedule_attempt(i);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn private_mining(&self, node: usize) -> bool {
        self.nodes[node].adversary && self.coalition.as_ref().is_some_and(|c| c.released_at.is_none())
    }

    fn mining_parent(&self, node: usize) -> Digest256 {
        match &self.coalition {
            Some(c) if self.private_mining(node) => c.private_tip,
            _ => self.nodes[node].store.tip(),
        }
    }

    fn clock(&self) -> u64 {
        self.config.genesis_timestamp + self.now.floor() as u64
    }

    /// Points `node` at its current mining parent, tossing for it if the
    /// parent is new to the node.
    fn retarget(&mut self, node: usize) -> Result<()> {
        let parent = self.mining_parent(node);
        if self.nodes[node].parent == Some(parent) {
            return Ok(());
        }
        let n = &mut self.nodes[node];
        n.parent = Some(parent);
        n.epoch += 1;
        n.job = None;
        if n.tosses.get(&parent) == Some(&false) {
            return Ok(());
        }
        let extra = match &self.coalition {
            Some(_) if parent == self.observer.genesis_hash() => {
                let payload: &[u8] = if n.adversary {
                    b"conflicting spend"
                } else {
                    b"target payment"
                };
                vec![Transaction::new(1, payload.to_vec())]
            }
            _ => Vec::new(),
        };
        let clock = self.clock();
        let n = &self.nodes[node];
        let (template, toss) = candidate_block(&n.store, &self.params, &n.keys, &parent, clock, extra)?;
        let adversary = n.adversary;
        if let std::collections::hash_map::Entry::Vacant(e) = self.nodes[node].tosses.entry(parent) {
            e.insert(toss.pass);
            self.ledger.node_mut(node).vct_tosses += 1;
            let tally = self.tallies.entry(parent).or_default();
            tally.tossed += 1;
            if toss.pass {
                tally.passed += 1;
                if adversary {
                    tally.adversarial += 1;
                }
            }
            let t = self.now;
            self.log(|| EventRecord::Toss {
                t,
                node,
                parent,
                pass: toss.pass,
            });
        }
        if !toss.pass {
            return Ok(());
        }
        let puzzle = match self.config.mining {
            MiningFidelity::Concrete => Some(Puzzle::new(&parent, &self.params.table.params(template.header.level)?)?),
            MiningFidelity::Abstract => None,
        };
        self.nodes[node].job = Some(Job {
            parent,
            template,
            puzzle,
            attempts: 0,
        });
        self.schedule_attempt(node);
        Ok(())
    }

    fn schedule_attempt(&mut self, node: usize) {
        let rate = self.config.attempt_rate * self.config.power_factor(self.now);
        let dt = Exp::new(rate).expect("positive rate").sample(&mut self.rng);
        let epoch = self.nodes[node].epoch;
        self.push(self.now + dt, Event::Attempt { node, epoch });
    }

    fn attempt(&mut self, node: usize, epoch: u64) -> Result<()> {
        if self.nodes[node].epoch != epoch {
            return Ok(());
        }
        let clock = self.clock();
        let n = &mut self.nodes[node];
        let Some(job) = n.job.as_mut() else {
            return Ok(());
        };
        let parent_ts = n
            .store
            .get(&job.parent)
            .map(|b| b.block.header.timestamp)
            .ok_or_else(|| Error::Measurement("mining on an unknown parent".into()))?;
        let nonce = job.attempts;
        job.attempts += 1;
        job.template.header.timestamp = clock.max(parent_ts + 1);
        let parent = job.parent;
        let mut iterations = 0u64;
        let sealed = match &job.puzzle {
            None => {
                let p = self.params.table.solve_prob(job.template.header.level)?;
                self.rng.gen_bool(p).then(|| {
                    let mut b = job.template.clone();
                    b.header.nonce = nonce;
                    b
                })
            }
            Some(puzzle) => {
                let (proof, it) = puzzle.attempt(&job.template.header, &n.keys.secret_key, nonce)?;
                iterations = it as u64;
                proof.map(|proof| {
                    let mut b = job.template.clone();
                    b.header.attach_poc(proof);
                    b
                })
            }
        };
        let energy = self.ledger.node_mut(node);
        energy.solve_attempts += 1;
        energy.decode_iterations += iterations;
        let hour = ((self.now / 3600.0) as usize).min(self.hourly.len() - 1);
        self.hourly[hour] += 1;
        let t = self.now;
        let success = sealed.is_some();
        self.log(|| EventRecord::Attempt {
            t,
            node,
            parent,
            success,
        });
        match sealed {
            Some(block) => self.found(node, block),
            None => {
                self.schedule_attempt(node);
                Ok(())
            }
        }
    }

    fn register(&mut self, block: Block, miner: usize) -> usize {
        let hash = block.hash();
        let id = self.blocks.len();
        self.blocks.push(BlockInfo {
            block: Arc::new(block),
            hash,
            miner: Some(miner),
            found_at: self.now,
        });
        self.index.insert(hash, id);
        id
    }

    fn found(&mut self, node: usize, block: Block) -> Result<()> {
        let private = self.private_mining(node);
        let id = self.register(block, node);
        let info = &self.blocks[id];
        let (hash, arc) = (info.hash, info.block.clone());
        self.nodes[node].store.insert(arc.clone())?;
        let height = self.nodes[node].store.get(&hash).map_or(0, |b| b.height);
        let t = self.now;
        self.log(|| EventRecord::Found {
            t,
            node,
            block: hash,
            height,
        });
        if private {
            let members = self.coalition.as_ref().map(|c| c.members.clone()).unwrap_or_default();
            for &m in members.iter().filter(|&&m| m != node) {
                self.receive(m, id)?;
            }
            let store = &self.nodes[node].store;
            let work = |h: &Digest256| store.get(h).map_or(0, |b| b.accumulated_work);
            let c = self.coalition.as_mut().expect("private mining implies a coalition");
            c.private_blocks.push(id);
            if work(&hash) > work(&c.private_tip) {
                c.private_tip = hash;
            }
            for m in members {
                self.retarget(m)?;
            }
        } else {
            self.observer.insert(arc)?;
            self.broadcast(node, id, |_| true);
            self.retarget(node)?;
        }
        self.check_release()
    }

    fn delay_s(&mut self, from: usize, to: usize) -> f64 {
        let ms = match &self.config.latency {
            LatencyModel::Constant { ms } => *ms,
            LatencyModel::Uniform { min_ms, max_ms } => {
                if min_ms == max_ms {
                    *min_ms
                } else {
                    self.rng.gen_range(*min_ms..*max_ms)
                }
            }
            LatencyModel::Matrix { ms } => ms[from][to],
        };
        ms / 1000.0
    }

    fn broadcast(&mut self, from: usize, id: usize, to: impl Fn(&Node) -> bool) {
        for j in 0..self.nodes.len() {
            if j == from || !to(&self.nodes[j]) {
                continue;
            }
            let delay = self.delay_s(from, j);
            let mut send_at = self.now;
            for p in &self.config.partitions {
                let split = p.group.contains(&from) != p.group.contains(&j);
                if split && p.start_s <= send_at && send_at < p.end_s {
                    send_at = p.end_s;
                }
            }
            self.push(send_at + delay, Event::Deliver { node: j, block: id });
        }
    }

    fn receive(&mut self, node: usize, id: usize) -> Result<()> {
        let (hash, block) = (self.blocks[id].hash, self.blocks[id].block.clone());
        let n = &mut self.nodes[node];
        if n.store.contains(&hash) {
            return Ok(());
        }
        if !n.store.contains(&block.header.prev_hash) {
            n.orphans.entry(block.header.prev_hash).or_default().push(id);
            return Ok(());
        }
        let valid = match self.verdicts.get(&hash) {
            Some(&v) => v,
            None => {
                let v = validate_block_rules(&block, &self.nodes[node].store, &self.params).is_accept();
                self.verdicts.insert(hash, v);
                v
            }
        };
        self.ledger.node_mut(node).verify_count += 1;
        let accepted = valid && check_clock(&block, &self.params, self.clock());
        let t = self.now;
        self.log(|| EventRecord::Receive {
            t,
            node,
            block: hash,
            accepted,
        });
        if !accepted {
            self.rejected += 1;
            return Ok(());
        }
        self.nodes[node].store.insert(block)?;
        if let Some(waiting) = self.nodes[node].orphans.remove(&hash) {
            for child in waiting {
                self.receive(node, child)?;
            }
        }
        Ok(())
    }

    /// Publishes the private chain once the target is buried deep enough
    /// and the private chain is heavier than the honest tip.
    fn check_release(&mut self) -> Result<()> {
        let Some(c) = &self.coalition else {
            return Ok(());
        };
        if c.released_at.is_some() {
            return Ok(());
        }
        let honest = self.observer.tip_block();
        let lead = &self.nodes[c.members[0]].store;
        let private_work = lead.get(&c.private_tip).map_or(0, |b| b.accumulated_work);
        if honest.height < c.confirmations as u64 || private_work <= honest.accumulated_work {
            return Ok(());
        }
        let honest_height = honest.height;
        let (from, ids) = (c.members[0], c.private_blocks.clone());
        for &id in &ids {
            self.observer.insert(self.blocks[id].block.clone())?;
            self.broadcast(from, id, |n| !n.adversary);
        }
        let t = self.now;
        let c = self.coalition.as_mut().expect("checked above");
        c.released_at = Some(t);
        c.honest_height_at_release = honest_height;
        let members = c.members.clone();
        self.log(|| EventRecord::Release { t, blocks: ids.len() });
        for m in members {
            self.retarget(m)?;
        }
        Ok(())
    }

    fn finish(self) -> Metrics {
        let main = self.observer.path_to(&self.observer.tip());
        let mut records = Vec::with_capacity(main.len().saturating_sub(1));
        for pair in main.windows(2) {
            let parent = &self.blocks[self.index[&pair[0]]];
            let info = &self.blocks[self.index[&pair[1]]];
            let stored = self.observer.get(&info.hash).expect("main chain block is stored");
            let tally = self.tallies.get(&parent.hash).copied().unwrap_or_default();
            let miner = info.miner.expect("only genesis lacks a miner");
            records.push(BlockRecord {
                height: stored.height,
                hash: info.hash,
                miner,
                adversarial: self.nodes[miner].adversary,
                found_at_s: info.found_at,
                interval_s: info.found_at - parent.found_at,
                timestamp: info.block.header.timestamp,
                level: info.block.header.level,
                committee_tossed: tally.tossed,
                committee_size: tally.passed,
                committee_adversarial: tally.adversarial,
            });
        }
        let published = self.observer.blocks_by_arrival();
        let mut per_height: BTreeMap<u64, u64> = BTreeMap::new();
        for b in &published {
            *per_height.entry(b.height).or_default() += 1;
        }
        let forks = per_height.values().filter(|&&c| c > 1).count() as u64;
        let orphaned = (published.len() - main.len()) as u64;
        let mean_interval_s =
            (!records.is_empty()).then(|| records.iter().map(|r| r.interval_s).sum::<f64>() / records.len() as f64);
        let attack = self.coalition.as_ref().map(|c| {
            let private_height = self.nodes[c.members[0]]
                .store
                .get(&c.private_tip)
                .map_or(0, |b| b.height);
            let success = records
                .first()
                .is_some_and(|r| r.adversarial && c.released_at.is_some());
            AttackOutcome {
                confirmations: c.confirmations,
                released: c.released_at.is_some(),
                released_at_s: c.released_at,
                private_height,
                honest_height: if c.released_at.is_some() {
                    c.honest_height_at_release
                } else {
                    self.observer.tip_block().height
                },
                success,
            }
        });
        Metrics {
            seed: self.config.seed,
            duration_s: self.config.duration_s,
            node_count: self.config.node_count,
            blocks_mined: (self.blocks.len() - 1) as u64,
            orphaned,
            forks,
            rejected_deliveries: self.rejected,
            mean_interval_s,
            stalled: self.nodes.iter().all(|n| n.job.is_none()),
            total_energy: self.ledger.total(),
            energy: self.ledger,
            hourly_attempts: self.hourly,
            attack,
            blocks: records,
            events: self.events,
        }
    }
}
