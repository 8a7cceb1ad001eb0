//! `twostage` — command-line front end for the two-stage auction toolkit.

mod config;
mod oracle_check;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use twostage::derive_seed;
use twostage::harness::{
    context_from_logged, experiment_csv, generate_log, ic_csv, load_auction_log, run_experiment,
    save_auction_log, score_traces, split_3_1_1, train_learned_strategy, EnvSource, LoggedAuction,
};
use twostage::ic::{default_factors, ic_failure_rate, AdSampling};
use twostage::scorer::save_model;
use twostage::strategy::{builtin_strategy, Strategy, LEARNED_STRATEGIES};

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "twostage",
    version,
    about = "Two-stage ad auction simulation: synthetic environments, pre-auction \
             strategies, GSP evaluation, and incentive-compatibility testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed; overrides `master_seed` from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key-value config file (see README for the key list).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Environment preset: `public1-like` or `public5-like`.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic auction log (JSONL, one auction per line).
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of auctions.
        #[arg(long)]
        auctions: Option<usize>,
    },
    /// Train a scorer (`pas-learned`, `reg`, or `regctr`) from an auction
    /// log and write a model file.
    Train {
        #[command(flatten)]
        common: Common,
        /// Auction log to train on (split 3:1:1 into train/val/test).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Which learned strategy to fit.
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Run the experiment pipeline and write the aggregated CSV report.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Run bid-perturbation incentive tests and write per-strategy rates.
    IcTest {
        #[command(flatten)]
        common: Common,
        /// Ads sampled per auction (default: all).
        #[arg(long)]
        ads_per_auction: Option<usize>,
    },
    /// Run the desk-scale oracle verification suite.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Emit plot-ready per-auction score traces for each strategy.
    Report {
        #[command(flatten)]
        common: Common,
        /// Auction log to read.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Which auction of the test split to trace.
        #[arg(long)]
        auction_index: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_file_config(common: &Common) -> Result<FileConfig> {
    match &common.config {
        Some(path) => FileConfig::load(path),
        None => Ok(FileConfig::default()),
    }
}

fn out_path(common: &Common, default_name: &str) -> PathBuf {
    common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(default_name))
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, auctions } => {
            let file = load_file_config(&common)?;
            let env = config::build_env(&file, common.preset.as_deref(), common.seed)?;
            let n_auctions = match auctions {
                Some(n) => n,
                None => file.parse("n_auctions")?.unwrap_or(100),
            };
            let log = generate_log(&env, n_auctions, env.seed)?;
            let path = out_path(&common, "auctions.jsonl");
            save_auction_log(&path, &log)?;
            println!(
                "wrote {} ({} auctions, N={} M={} K={})",
                path.display(),
                log.len(),
                env.n_ads,
                env.subset_size,
                env.n_slots
            );
            Ok(())
        }
        Command::Train {
            common,
            log,
            strategy,
        } => {
            let file = load_file_config(&common)?;
            let log_path = log
                .or_else(|| file.get("log").map(PathBuf::from))
                .context("train needs --log <auction log> (or `log` in the config)")?;
            let strategy = strategy
                .or_else(|| file.get("strategy").map(str::to_string))
                .unwrap_or_else(|| "pas-learned".to_string());
            if !LEARNED_STRATEGIES.contains(&strategy.as_str()) {
                bail!("{strategy:?} is not trainable (choose from {LEARNED_STRATEGIES:?})");
            }
            let mut cfg = config::build_train(&file, twostage::train::TrainConfig::default())?;
            if let Some(seed) = file.parse("master_seed")? {
                cfg.seed = seed;
            }
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            let strict = file.parse("strict")?.unwrap_or(true);
            let loaded = load_auction_log(&log_path, strict)?;
            for issue in &loaded.issues {
                eprintln!("skipping: {issue}");
            }
            let (train, val, _) = split_3_1_1(&loaded.auctions);
            let learned = train_learned_strategy(&strategy, &train, &val, &cfg)?;
            let path = out_path(&common, &format!("{strategy}.model"));
            save_model(&path, &learned.params, &learned.scoring)?;
            println!(
                "wrote {} ({} weights, trained on {} auctions)",
                path.display(),
                learned.params.weights.len(),
                train.len()
            );
            Ok(())
        }
        Command::Evaluate { common } => {
            let file = load_file_config(&common)?;
            let cfg = config::build_experiment(&file, common.preset.as_deref(), common.seed)?;
            let result = run_experiment(&cfg)?;
            for failure in &result.failures {
                eprintln!("flagged: {failure}");
            }
            print_table(&result);
            let csv = experiment_csv(&result);
            write_output(&out_path(&common, "report.csv"), &csv)
        }
        Command::IcTest {
            common,
            ads_per_auction,
        } => {
            let file = load_file_config(&common)?;
            let cfg = config::build_experiment(&file, common.preset.as_deref(), common.seed)?;
            let ads = match ads_per_auction {
                Some(n) => Some(n),
                None => file.parse("ads_per_auction")?,
            };
            let factors = match file.parse_list::<f64>("factors")? {
                Some(f) => f,
                None => default_factors(),
            };
            let reports = run_ic(&cfg, ads, &factors)?;
            for r in &reports {
                println!(
                    "{:<14} {} tests, {} failures, rate {:.6}",
                    r.strategy, r.n_tests, r.n_failures, r.failure_rate
                );
            }
            write_output(&out_path(&common, "ic_report.csv"), &ic_csv(&reports))
        }
        Command::OracleCheck { common } => {
            let file = load_file_config(&common)?;
            let seed = match common.seed {
                Some(s) => s,
                None => file.parse("master_seed")?.unwrap_or(0),
            };
            let checks = oracle_check::run_suite(seed)?;
            let mut all_ok = true;
            let mut lines = String::new();
            for c in &checks {
                let status = if c.passed { "ok" } else { "FAIL" };
                let line = format!("[{status}] {}: {}", c.name, c.detail);
                println!("{line}");
                lines.push_str(&line);
                lines.push('\n');
                all_ok &= c.passed;
            }
            if let Some(out) = &common.out {
                write_output(out, &lines)?;
            }
            if !all_ok {
                bail!("oracle checks failed");
            }
            println!("all {} checks passed", checks.len());
            Ok(())
        }
        Command::Report {
            common,
            log,
            auction_index,
        } => {
            let file = load_file_config(&common)?;
            let log_path = log
                .or_else(|| file.get("log").map(PathBuf::from))
                .context("report needs --log <auction log> (or `log` in the config)")?;
            let cfg = config::build_experiment(&file, common.preset.as_deref(), common.seed)?;
            let index = match auction_index {
                Some(i) => i,
                None => file.parse("auction_index")?.unwrap_or(0),
            };
            let loaded = load_auction_log(&log_path, true)?;
            let (train, val, test) = split_3_1_1(&loaded.auctions);
            let auction = test.get(index).with_context(|| {
                format!(
                    "auction_index {index} out of range (test split has {})",
                    test.len()
                )
            })?;
            let strategies = resolve_strategies(&cfg, &train, &val)?;
            let csv = score_traces(
                auction,
                &strategies,
                derive_seed(cfg.master_seed, 31_000 + index as u64),
            )?;
            write_output(&out_path(&common, "traces.csv"), &csv)
        }
    }
}

/// Resolves the configured strategy names, training the learned ones from
/// the provided splits.
fn resolve_strategies(
    cfg: &twostage::harness::ExperimentConfig,
    train: &[&LoggedAuction],
    val: &[&LoggedAuction],
) -> Result<Vec<(String, Box<dyn Strategy>)>> {
    let mut out: Vec<(String, Box<dyn Strategy>)> = Vec::new();
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derive_seed(cfg.master_seed, 2);
    for name in &cfg.strategies {
        let strat: Box<dyn Strategy> = if LEARNED_STRATEGIES.contains(&name.as_str()) {
            Box::new(train_learned_strategy(name, train, val, &train_cfg)?)
        } else {
            builtin_strategy(name, cfg.mc_samples)?
        };
        out.push((name.clone(), strat));
    }
    Ok(out)
}

/// Runs IC perturbation tests for every configured strategy on the test
/// split of the configured data source.
fn run_ic(
    cfg: &twostage::harness::ExperimentConfig,
    ads_per_auction: Option<usize>,
    factors: &[f64],
) -> Result<Vec<twostage::ic::IcReport>> {
    let owned;
    let loaded;
    let (train, val, test): (Vec<&LoggedAuction>, Vec<&LoggedAuction>, Vec<&LoggedAuction>) =
        match &cfg.env {
            EnvSource::Synthetic(env) => {
                let rep_seed = derive_seed(cfg.master_seed, 0);
                let total = cfg.n_train + cfg.n_val + cfg.n_test;
                owned = generate_log(env, total, derive_seed(rep_seed, 1))?;
                (
                    owned[..cfg.n_train].iter().collect(),
                    owned[cfg.n_train..cfg.n_train + cfg.n_val].iter().collect(),
                    owned[cfg.n_train + cfg.n_val..].iter().collect(),
                )
            }
            EnvSource::LogFile(path) => {
                loaded = load_auction_log(path, true)?;
                split_3_1_1(&loaded.auctions)
            }
        };
    let contexts: Vec<_> = test
        .iter()
        .enumerate()
        .map(|(i, a)| context_from_logged(a, derive_seed(cfg.master_seed, 21_000 + i as u64)))
        .collect();
    let sampling = match ads_per_auction {
        Some(n) => AdSampling::PerAuction(n),
        None => AdSampling::All,
    };
    let strategies = resolve_strategies(cfg, &train, &val)?;
    strategies
        .iter()
        .map(|(_, strat)| {
            ic_failure_rate(
                strat.as_ref(),
                &contexts,
                sampling,
                factors,
                cfg.master_seed,
            )
            .map_err(anyhow::Error::from)
        })
        .collect()
}

fn print_table(result: &twostage::harness::ExperimentResult) {
    println!(
        "{:<18} {:>3} {:>8} {:>10} {:>10} {:>12}",
        "strategy", "k", "metric", "mean", "std", "vs gdy"
    );
    for row in &result.rows {
        println!(
            "{:<18} {:>3} {:>8} {:>10.4} {:>10.4} {:>+11.2}%",
            row.strategy, row.k, row.metric, row.mean, row.std, row.improvement_pct
        );
    }
}
