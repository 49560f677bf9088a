use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use greenbtc_core::chain::write_chain;
use greenbtc_core::eccpow::{estimate_solve_prob_with, DifficultyTable, LevelSpec};
use greenbtc_core::pds::{double_spend_success_prob, pds_verdict, PdsParams};
use greenbtc_core::simnet::{
    attack_experiment, committee_proportion, measure_ece_series, run_chain, MiningFidelity, RunOptions, ScenarioConfig,
};
use greenbtc_core::{Metrics, PassProbability};
use rayon::prelude::*;
use serde_json::json;

use crate::output::{csv_bytes, OutputDir};
use crate::{Cli, Command, GlobalArgs, Mode};

pub const SEED_ENV: &str = "GREENBTC_SEED";

pub fn dispatch(cli: Cli) -> Result<()> {
    let g = cli.global;
    if let Some(jobs) = g.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Run => cmd_run(&g),
        Command::Calibrate { samples } => cmd_calibrate(&g, samples),
        Command::Ece { pp } => cmd_ece(&g, &pp),
        Command::Attack {
            fractions,
            z,
            trials,
            horizon,
        } => cmd_attack(&g, &fractions, z, trials, horizon),
        Command::Committee { fraction, rounds } => cmd_committee(&g, fraction, rounds),
        Command::Pds {
            share,
            value,
            cost,
            reward,
            max_z,
            horizon,
            z,
        } => cmd_pds(
            &g,
            PdsParams {
                tx_value: value,
                attacker_share: share,
                rental_cost_per_block: cost,
                block_reward: reward,
                max_z,
                horizon_blocks: horizon,
            },
            z,
        ),
        Command::ExportChain => cmd_export_chain(&g),
    }
}

/// `GREENBTC_SEED`, else `--seed`, else `None`.
fn seed_override(g: &GlobalArgs) -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| anyhow!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(g.seed),
    }
}

fn out_dir(g: &GlobalArgs) -> Result<&Path> {
    g.out.as_deref().ok_or_else(|| anyhow!("--out is required"))
}

fn load_config(g: &GlobalArgs) -> Result<ScenarioConfig> {
    let path = g.config.as_deref().ok_or_else(|| anyhow!("--config is required"))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut config = ScenarioConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(seed) = seed_override(g)? {
        config.seed = seed;
    }
    if let Some(mode) = g.mode {
        config.mining = match mode {
            Mode::Concrete => MiningFidelity::Concrete,
            Mode::Abstract => MiningFidelity::Abstract,
        };
        config.validate().context("after applying --mode")?;
    }
    Ok(config)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

const METRICS_HEADER: [&str; 14] = [
    "record_type",
    "height",
    "hash",
    "miner",
    "adversarial",
    "found_at_s",
    "interval_s",
    "timestamp",
    "level",
    "committee_tossed",
    "committee_size",
    "committee_adversarial",
    "key",
    "value",
];

fn summary_pairs(m: &Metrics) -> Vec<(&'static str, String)> {
    let e = &m.total_energy;
    let mut v = vec![
        ("seed", m.seed.to_string()),
        ("duration_s", m.duration_s.to_string()),
        ("node_count", m.node_count.to_string()),
        ("main_chain_blocks", m.blocks.len().to_string()),
        ("blocks_mined", m.blocks_mined.to_string()),
        ("orphaned", m.orphaned.to_string()),
        ("forks", m.forks.to_string()),
        ("rejected_deliveries", m.rejected_deliveries.to_string()),
        ("mean_interval_s", opt(m.mean_interval_s)),
        ("stalled", m.stalled.to_string()),
        ("vct_tosses", e.vct_tosses.to_string()),
        ("solve_attempts", e.solve_attempts.to_string()),
        ("decode_iterations", e.decode_iterations.to_string()),
        ("verify_count", e.verify_count.to_string()),
    ];
    if let Some(a) = &m.attack {
        v.extend([
            ("attack_confirmations", a.confirmations.to_string()),
            ("attack_released", a.released.to_string()),
            ("attack_released_at_s", opt(a.released_at_s)),
            ("attack_private_height", a.private_height.to_string()),
            ("attack_honest_height", a.honest_height.to_string()),
            ("attack_success", a.success.to_string()),
        ]);
    }
    v
}

fn metrics_csv(m: &Metrics) -> Result<Vec<u8>> {
    let blocks = m.blocks.iter().map(|b| {
        vec![
            "block".to_string(),
            b.height.to_string(),
            b.hash.to_hex(),
            b.miner.to_string(),
            b.adversarial.to_string(),
            b.found_at_s.to_string(),
            b.interval_s.to_string(),
            b.timestamp.to_string(),
            b.level.to_string(),
            b.committee_tossed.to_string(),
            b.committee_size.to_string(),
            b.committee_adversarial.to_string(),
            String::new(),
            String::new(),
        ]
    });
    let summary = summary_pairs(m).into_iter().map(|(k, v)| {
        let mut row = vec![String::new(); METRICS_HEADER.len()];
        row[0] = "summary".into();
        row[12] = k.into();
        row[13] = v;
        row
    });
    csv_bytes(&METRICS_HEADER, blocks.chain(summary))
}

fn node_energy_csv(m: &Metrics) -> Result<Vec<u8>> {
    let rows = m.energy.nodes().iter().enumerate().map(|(i, c)| {
        [
            i as u64,
            c.vct_tosses,
            c.solve_attempts,
            c.decode_iterations,
            c.verify_count,
        ]
        .map(|v| v.to_string())
    });
    csv_bytes(
        &[
            "node",
            "vct_tosses",
            "solve_attempts",
            "decode_iterations",
            "verify_count",
        ],
        rows,
    )
}

fn summary_json(command: &str, m: &Metrics) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    obj.insert("command".into(), json!(command));
    for (k, v) in summary_pairs(m) {
        // The pairs are numbers, booleans or empty; keep them typed in JSON.
        let value = match v.as_str() {
            "" => serde_json::Value::Null,
            text => serde_json::from_str(text).unwrap_or_else(|_| json!(text)),
        };
        obj.insert(k.into(), value);
    }
    serde_json::Value::Object(obj)
}

fn finish(out: OutputDir, summary: serde_json::Value) -> Result<()> {
    let path = out.commit(summary)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_run(g: &GlobalArgs) -> Result<()> {
    let config = load_config(g)?;
    let target = out_dir(g)?;
    let options = RunOptions {
        record_events: g.verbose,
    };
    let (metrics, _) = run_chain(&config, options)?;
    let mut out = OutputDir::create(target)?;
    out.write("metrics.csv", &metrics_csv(&metrics)?)?;
    out.write("node_energy.csv", &node_energy_csv(&metrics)?)?;
    out.write_json("effective_config.json", &config.resolved())?;
    if g.verbose {
        let mut log = String::new();
        for e in &metrics.events {
            log.push_str(&serde_json::to_string(e)?);
            log.push('\n');
        }
        out.write("events.jsonl", log.as_bytes())?;
    }
    println!(
        "{} blocks, mean interval {} s, {} solve attempts",
        metrics.blocks.len(),
        opt(metrics.mean_interval_s.map(|v| format!("{v:.1}"))),
        metrics.total_energy.solve_attempts
    );
    finish(out, summary_json("run", &metrics))
}

pub fn cmd_export_chain(g: &GlobalArgs) -> Result<()> {
    let config = load_config(g)?;
    let target = out_dir(g)?;
    let (metrics, chain) = run_chain(&config, RunOptions::default())?;
    let mut text = Vec::new();
    write_chain(&mut text, chain.iter().map(|b| b.as_ref()))?;
    let mut out = OutputDir::create(target)?;
    out.write("chain.hex", &text)?;
    println!("{} blocks including genesis", chain.len());
    finish(out, summary_json("export-chain", &metrics))
}

pub fn cmd_calibrate(g: &GlobalArgs, samples: u64) -> Result<()> {
    if samples == 0 {
        bail!("--samples must be at least 1");
    }
    let target = out_dir(g)?;
    let seed = seed_override(g)?.unwrap_or(1);
    let shapes = DifficultyTable::shipped_params();
    let estimates = shapes
        .par_iter()
        .map(|p| estimate_solve_prob_with(p, samples, seed))
        .collect::<greenbtc_core::Result<Vec<_>>>()?;
    let rows = estimates.iter().zip(&shapes).map(|(e, p)| {
        vec![
            e.level.to_string(),
            p.n.to_string(),
            p.wc.to_string(),
            p.wr.to_string(),
            e.solve_prob.to_string(),
            e.std_err.to_string(),
            e.samples.to_string(),
            e.successes.to_string(),
        ]
    });
    let csv = csv_bytes(
        &[
            "level",
            "n",
            "wc",
            "wr",
            "solve_prob",
            "std_err",
            "samples",
            "successes",
        ],
        rows,
    )?;
    let decreasing = estimates.windows(2).all(|w| w[1].solve_prob < w[0].solve_prob);
    let mut out = OutputDir::create(target)?;
    out.write("calibration.csv", &csv)?;
    if decreasing {
        let table = DifficultyTable::new(
            shapes
                .iter()
                .zip(&estimates)
                .map(|(&params, e)| LevelSpec {
                    params,
                    solve_prob: e.solve_prob,
                })
                .collect(),
        )?;
        out.write_json("table.json", &table)?;
    }
    for e in &estimates {
        println!("level {}: p = {:.6} +- {:.6}", e.level, e.solve_prob, e.std_err);
    }
    if !decreasing {
        eprintln!("warning: estimates are not strictly decreasing; no table.json written");
    }
    finish(
        out,
        json!({ "command": "calibrate", "seed": seed, "samples": samples, "strictly_decreasing": decreasing }),
    )
}

pub fn cmd_ece(g: &GlobalArgs, pp: &[String]) -> Result<()> {
    let config = load_config(g)?;
    let target = out_dir(g)?;
    let pps = pp
        .iter()
        .map(|s| PassProbability::parse(s.trim()).with_context(|| format!("--pp value {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    let results = measure_ece_series(&config, &pps)?;
    let rows = results.iter().map(|r| {
        vec![
            r.pass_probability.to_string(),
            r.ece.to_string(),
            r.ci95[0].to_string(),
            r.ci95[1].to_string(),
            r.gated_attempts.to_string(),
            r.baseline_attempts.to_string(),
            r.gated_blocks.to_string(),
            r.baseline_blocks.to_string(),
        ]
    });
    let csv = csv_bytes(
        &[
            "pp",
            "ece",
            "ci_low",
            "ci_high",
            "gated_attempts",
            "baseline_attempts",
            "gated_blocks",
            "baseline_blocks",
        ],
        rows,
    )?;
    let mut out = OutputDir::create(target)?;
    out.write("ece.csv", &csv)?;
    out.write_json("ece.json", &results)?;
    for r in &results {
        println!(
            "pp {}: ECE {:.4} [{:.4}, {:.4}]",
            r.pass_probability, r.ece, r.ci95[0], r.ci95[1]
        );
    }
    finish(out, json!({ "command": "ece", "seed": config.seed }))
}

pub fn cmd_attack(g: &GlobalArgs, fractions: &[f64], z: u32, trials: u64, horizon: u64) -> Result<()> {
    let config = load_config(g)?;
    let target = out_dir(g)?;
    let stats = fractions
        .iter()
        .map(|&f| attack_experiment(&config, f, z, trials, horizon))
        .collect::<greenbtc_core::Result<Vec<_>>>()?;
    let rows = stats.iter().map(|s| {
        let q = s.adversary_nodes as f64 / config.node_count as f64;
        vec![
            s.adversary_fraction.to_string(),
            s.adversary_nodes.to_string(),
            s.confirmations.to_string(),
            s.trials.to_string(),
            s.success_rate.to_string(),
            s.ci95[0].to_string(),
            s.ci95[1].to_string(),
            s.overtake_rate.to_string(),
            s.stalled.to_string(),
            double_spend_success_prob(q, z).to_string(),
        ]
    });
    let csv = csv_bytes(
        &[
            "fraction",
            "adversary_nodes",
            "z",
            "trials",
            "success_rate",
            "ci_low",
            "ci_high",
            "overtake_rate",
            "stalled_trials",
            "analytic_success_prob",
        ],
        rows,
    )?;
    let mut out = OutputDir::create(target)?;
    out.write("attack.csv", &csv)?;
    out.write_json("attack.json", &stats)?;
    for s in &stats {
        println!(
            "fraction {}: success {:.5} [{:.5}, {:.5}] over {} trials",
            s.adversary_fraction, s.success_rate, s.ci95[0], s.ci95[1], s.trials
        );
    }
    finish(out, json!({ "command": "attack", "seed": config.seed, "z": z }))
}

pub fn cmd_committee(g: &GlobalArgs, fraction: f64, rounds: usize) -> Result<()> {
    let config = load_config(g)?;
    let target = out_dir(g)?;
    let r = committee_proportion(&config, fraction, rounds)?;
    let rows = r
        .shares
        .iter()
        .zip(&r.committee_sizes)
        .enumerate()
        .map(|(i, (s, c))| vec![i.to_string(), c.to_string(), opt(*s)]);
    let csv = csv_bytes(&["round", "committee_size", "adversary_share"], rows)?;
    let mut out = OutputDir::create(target)?;
    out.write("committee.csv", &csv)?;
    println!(
        "mean share {} (base {}), binomial p = {:.4}",
        opt(r.mean_share.map(|v| format!("{v:.4}"))),
        r.base_share,
        r.binomial_p_value
    );
    finish(
        out,
        json!({
            "command": "committee",
            "seed": config.seed,
            "rounds": r.rounds,
            "adversary_nodes": r.adversary_nodes,
            "base_share": r.base_share,
            "mean_share": r.mean_share,
            "ci95": r.ci95,
            "adversary_passes": r.adversary_passes,
            "total_passes": r.total_passes,
            "empty_rounds": r.empty_rounds,
            "binomial_p_value": r.binomial_p_value,
        }),
    )
}

pub fn cmd_pds(g: &GlobalArgs, params: PdsParams, z: u32) -> Result<()> {
    params.validate().map_err(|e| anyhow!(e))?;
    let target: PathBuf = out_dir(g)?.to_path_buf();
    let verdict = pds_verdict(&params, z);
    let rows = verdict.profit_curve.iter().map(|p| {
        [
            p.z.to_string(),
            p.success_prob.to_string(),
            p.expected_duration_blocks.to_string(),
            p.expected_cost.to_string(),
            p.profit.to_string(),
        ]
    });
    let csv = csv_bytes(
        &[
            "z",
            "success_prob",
            "expected_duration_blocks",
            "expected_cost",
            "profit",
        ],
        rows,
    )?;
    let mut out = OutputDir::create(&target)?;
    out.write_json("pds.json", &verdict)?;
    out.write("profit_curve.csv", &csv)?;
    println!(
        "{}: required z = {}, P(z = {z}) = {:.6e}",
        verdict.verdict,
        opt(verdict.required_z),
        verdict.success_prob
    );
    finish(
        out,
        json!({ "command": "pds", "verdict": verdict.verdict, "required_z": verdict.required_z }),
    )
}
