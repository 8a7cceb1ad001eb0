//! Flat key-value config files.
//!
//! One `key = value` pair per line; `#` starts a comment. Unknown keys are
//! rejected so typos fail loudly. Every key mirrors a field of the
//! experiment, environment, or training configuration; see `--help` or the
//! README for the full list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use twostage::env::EnvConfig;
use twostage::harness::{EnvSource, ExperimentConfig};
use twostage::train::TrainConfig;

pub const KNOWN_KEYS: &[&str] = &[
    // environment
    "preset",
    "n_ads",
    "subset_size",
    "n_slots",
    "support_size",
    "bid_low",
    "bid_high",
    "gap_factor",
    "downsampling_rate",
    "base_prob_low",
    "base_prob_high",
    "upside_prob_low",
    "upside_prob_high",
    "noise_dims",
    "user_dims",
    // experiment
    "strategies",
    "n_train",
    "n_val",
    "n_test",
    "n_repetitions",
    "metrics_k",
    "master_seed",
    "mc_samples",
    "log",
    // training
    "learning_rate",
    "n_epochs",
    "batch_size",
    "hidden_dim",
    "patience",
    "early_stop_k",
    "weight_init_scale",
    // subcommand extras
    "n_auctions",
    "strategy",
    "ads_per_auction",
    "factors",
    "auction_index",
    "strict",
];

/// Parsed key-value pairs plus typed accessors.
#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), i + 1);
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!(
                    "{}:{}: unknown key {key:?} (known keys: {})",
                    path.display(),
                    i + 1,
                    KNOWN_KEYS.join(", ")
                );
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key} = {raw:?}: {e}")),
        }
    }

    pub fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<T>()
                        .map_err(|e| anyhow::anyhow!("config key {key}, item {part:?}: {e}"))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

fn preset_experiment(name: &str) -> Result<ExperimentConfig> {
    match name {
        "public1-like" => Ok(ExperimentConfig::preset_public1_like()),
        "public5-like" => Ok(ExperimentConfig::preset_public5_like()),
        other => bail!("unknown preset {other:?} (known: public1-like, public5-like)"),
    }
}

/// Builds the experiment configuration: preset defaults, then config-file
/// overrides, then the command-line seed.
pub fn build_experiment(
    file: &FileConfig,
    preset: Option<&str>,
    seed: Option<u64>,
) -> Result<ExperimentConfig> {
    let preset_name = preset.or_else(|| file.get("preset")).unwrap_or("public1-like");
    let mut cfg = preset_experiment(preset_name)?;

    let mut env = match &cfg.env {
        EnvSource::Synthetic(env) => env.clone(),
        EnvSource::LogFile(_) => EnvConfig::public1_like(),
    };
    apply_env_overrides(&mut env, file)?;
    cfg.env = match file.get("log") {
        Some(path) => EnvSource::LogFile(PathBuf::from(path)),
        None => EnvSource::Synthetic(env),
    };

    if let Some(v) = file.parse_list::<String>("strategies")? {
        cfg.strategies = v;
    }
    if let Some(v) = file.parse("n_train")? {
        cfg.n_train = v;
    }
    if let Some(v) = file.parse("n_val")? {
        cfg.n_val = v;
    }
    if let Some(v) = file.parse("n_test")? {
        cfg.n_test = v;
    }
    if let Some(v) = file.parse("n_repetitions")? {
        cfg.n_repetitions = v;
    }
    if let Some(v) = file.parse_list("metrics_k")? {
        cfg.metrics_k = v;
    }
    if let Some(v) = file.parse("master_seed")? {
        cfg.master_seed = v;
    }
    if let Some(v) = file.parse("mc_samples")? {
        cfg.mc_samples = v;
    }
    cfg.train = build_train(file, cfg.train.clone())?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn apply_env_overrides(env: &mut EnvConfig, file: &FileConfig) -> Result<()> {
    if let Some(v) = file.parse("n_ads")? {
        env.n_ads = v;
    }
    if let Some(v) = file.parse("subset_size")? {
        env.subset_size = v;
    }
    if let Some(v) = file.parse("n_slots")? {
        env.n_slots = v;
    }
    if let Some(v) = file.parse("support_size")? {
        env.support_size = v;
    }
    if let Some(v) = file.parse("bid_low")? {
        env.bid_range.0 = v;
    }
    if let Some(v) = file.parse("bid_high")? {
        env.bid_range.1 = v;
    }
    if let Some(v) = file.parse("gap_factor")? {
        env.gap_factor = v;
    }
    if let Some(v) = file.parse("downsampling_rate")? {
        env.downsampling_rate = v;
    }
    if let Some(v) = file.parse("base_prob_low")? {
        env.base_prob_range.0 = v;
    }
    if let Some(v) = file.parse("base_prob_high")? {
        env.base_prob_range.1 = v;
    }
    if let Some(v) = file.parse("upside_prob_low")? {
        env.upside_prob_range.0 = v;
    }
    if let Some(v) = file.parse("upside_prob_high")? {
        env.upside_prob_range.1 = v;
    }
    if let Some(v) = file.parse("noise_dims")? {
        env.noise_dims = v;
    }
    if let Some(v) = file.parse("user_dims")? {
        env.user_dims = v;
    }
    Ok(())
}

/// Builds the environment configuration alone (for `generate`).
pub fn build_env(file: &FileConfig, preset: Option<&str>, seed: Option<u64>) -> Result<EnvConfig> {
    let preset_name = preset.or_else(|| file.get("preset")).unwrap_or("public1-like");
    let mut env = match preset_name {
        "public1-like" => EnvConfig::public1_like(),
        "public5-like" => EnvConfig::public5_like(),
        other => bail!("unknown preset {other:?} (known: public1-like, public5-like)"),
    };
    apply_env_overrides(&mut env, file)?;
    if let Some(v) = file.parse("master_seed")? {
        env.seed = v;
    }
    if let Some(s) = seed {
        env.seed = s;
    }
    Ok(env)
}

pub fn build_train(file: &FileConfig, mut cfg: TrainConfig) -> Result<TrainConfig> {
    if let Some(v) = file.parse("learning_rate")? {
        cfg.learning_rate = v;
    }
    if let Some(v) = file.parse("n_epochs")? {
        cfg.n_epochs = v;
    }
    if let Some(v) = file.parse("batch_size")? {
        cfg.batch_size = v;
    }
    if let Some(v) = file.parse("hidden_dim")? {
        cfg.hidden_dim = v;
    }
    if let Some(v) = file.parse("patience")? {
        cfg.patience = v;
    }
    if let Some(v) = file.parse("early_stop_k")? {
        cfg.early_stop_k = v;
    }
    if let Some(v) = file.parse("weight_init_scale")? {
        cfg.weight_init_scale = v;
    }
    Ok(cfg)
}
