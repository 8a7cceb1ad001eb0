//! Experiment orchestration: auction-log I/O, dataset splits, strategy
//! training and evaluation, metric aggregation, and CSV reports.
//!
//! Every pipeline output is a pure function of `(config, master_seed)`.
//! Repetition `r` draws its streams from `derive_seed(master_seed, r)`, so
//! repetitions are independent and individually reproducible.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{compute_metrics, AdRecord, AuctionInstance};
use crate::env::{generate_auction, sample_realization, CtrDistribution, EnvConfig};
use crate::error::Error;
use crate::scorer::{ScoreRule, ScorerParams, ScoringSpec};
use crate::strategy::{builtin_strategy, AuctionContext, LearnedStrategy, Strategy};
use crate::train::{
    train_pas, train_regression, EvalAuction, RegressionTarget, TrainConfig, TrainingSample,
};
use crate::{derive_seed, Result};

/// Schema tag written on every auction-log line.
pub const LOG_SCHEMA: &str = "auction-log/v1";

/// One auction as logged: the instance, its CTR distribution table, and
/// (for training/evaluation records) one realized refined-CTR vector.
#[derive(Debug, Clone)]
pub struct LoggedAuction {
    pub auction_id: usize,
    pub instance: AuctionInstance,
    pub dists: Vec<CtrDistribution>,
    pub realized_ctrs: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct LogAd {
    ad_id: usize,
    bid: f64,
    partial_features: Vec<f64>,
    coarse_ctr: f64,
    ctr_support: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refined_ctr: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogRecord {
    schema: String,
    auction_id: usize,
    k: usize,
    m: usize,
    user_features: Vec<f64>,
    ads: Vec<LogAd>,
}

impl LoggedAuction {
    fn to_record(&self) -> LogRecord {
        LogRecord {
            schema: LOG_SCHEMA.to_string(),
            auction_id: self.auction_id,
            k: self.instance.n_slots,
            m: self.instance.subset_size,
            user_features: self.instance.user_features.clone(),
            ads: self
                .instance
                .ads
                .iter()
                .map(|ad| LogAd {
                    ad_id: ad.ad_id,
                    bid: ad.bid,
                    partial_features: ad.partial_features.clone(),
                    coarse_ctr: ad.coarse_ctr,
                    ctr_support: self.dists[ad.ctr_dist_id].support().to_vec(),
                    refined_ctr: self.realized_ctrs.as_ref().map(|r| r[ad.ad_id]),
                })
                .collect(),
        }
    }

    fn from_record(rec: LogRecord, line: usize) -> Result<Self> {
        let fail = |msg: String| Error::LogParse { line, msg };
        if rec.schema != LOG_SCHEMA {
            return Err(fail(format!("unknown schema {:?}", rec.schema)));
        }
        let n = rec.ads.len();
        if rec.k == 0 || rec.k > rec.m || rec.m > n {
            return Err(fail(format!(
                "invalid sizes K={} M={} N={n}",
                rec.k, rec.m
            )));
        }
        let mut ads = Vec::with_capacity(n);
        let mut dists = Vec::with_capacity(n);
        let mut realized = Vec::with_capacity(n);
        let mut all_refined = true;
        for (i, ad) in rec.ads.into_iter().enumerate() {
            if !ad.bid.is_finite() || ad.partial_features.iter().any(|v| !v.is_finite()) {
                return Err(fail(format!("non-finite number on ad {}", ad.ad_id)));
            }
            let dist = CtrDistribution::new(ad.ctr_support)
                .map_err(|e| fail(format!("ad {}: {e}", ad.ad_id)))?;
            if (dist.mean() - ad.coarse_ctr).abs() > 1e-9 {
                return Err(fail(format!(
                    "ad {}: coarse_ctr {} does not match support mean {}",
                    ad.ad_id,
                    ad.coarse_ctr,
                    dist.mean()
                )));
            }
            match ad.refined_ctr {
                Some(r) if (0.0..=1.0).contains(&r) => realized.push(r),
                Some(r) => return Err(fail(format!("refined ctr {r} outside [0, 1]"))),
                None => all_refined = false,
            }
            dists.push(dist);
            ads.push(AdRecord {
                ad_id: ad.ad_id,
                bid: ad.bid,
                partial_features: ad.partial_features,
                ctr_dist_id: i,
                coarse_ctr: ad.coarse_ctr,
            });
        }
        let instance = AuctionInstance {
            ads,
            user_features: rec.user_features,
            n_slots: rec.k,
            subset_size: rec.m,
        };
        instance
            .validate()
            .map_err(|e| fail(e.to_string()))?;
        Ok(LoggedAuction {
            auction_id: rec.auction_id,
            instance,
            dists,
            realized_ctrs: if all_refined { Some(realized) } else { None },
        })
    }
}

/// Writes one auction per line in the versioned JSONL schema.
pub fn save_auction_log<P: AsRef<Path>>(path: P, auctions: &[LoggedAuction]) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for auction in auctions {
        serde_json::to_writer(&mut out, &auction.to_record())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Result of loading an auction log in lenient mode.
pub struct LoadedLog {
    pub auctions: Vec<LoggedAuction>,
    /// One message per skipped malformed line.
    pub issues: Vec<String>,
}

/// Reads a JSONL auction log. In strict mode the first malformed line
/// aborts the load; otherwise malformed lines are skipped and reported
/// with their line numbers.
pub fn load_auction_log<P: AsRef<Path>>(path: P, strict: bool) -> Result<LoadedLog> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut auctions = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<LogRecord>(&line)
            .map_err(|e| Error::LogParse {
                line: line_no,
                msg: e.to_string(),
            })
            .and_then(|rec| LoggedAuction::from_record(rec, line_no));
        match parsed {
            Ok(a) => auctions.push(a),
            Err(e) if strict => return Err(e),
            Err(e) => issues.push(e.to_string()),
        }
    }
    Ok(LoadedLog { auctions, issues })
}

/// Per-ad model input: partial features with the user features appended.
pub fn assemble_features(instance: &AuctionInstance) -> Vec<Vec<f64>> {
    instance
        .ads
        .iter()
        .map(|ad| {
            let mut row = ad.partial_features.clone();
            row.extend_from_slice(&instance.user_features);
            row
        })
        .collect()
}

/// Builds the strategy-facing view of a logged auction.
pub fn context_from_logged(auction: &LoggedAuction, auction_seed: u64) -> AuctionContext {
    AuctionContext {
        bids: auction.instance.bids(),
        features: assemble_features(&auction.instance),
        dists: auction.dists.clone(),
        n_slots: auction.instance.n_slots,
        subset_size: auction.instance.subset_size,
        auction_seed,
    }
}

/// Draws `n_auctions` synthetic auctions with realized refined CTRs.
pub fn generate_log(cfg: &EnvConfig, n_auctions: usize, seed: u64) -> Result<Vec<LoggedAuction>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n_auctions)
        .map(|auction_id| {
            let (instance, dists) = generate_auction(cfg, &mut rng)?;
            let realized = sample_realization(&dists, &mut rng);
            Ok(LoggedAuction {
                auction_id,
                instance,
                dists,
                realized_ctrs: Some(realized),
            })
        })
        .collect()
}

/// Splits auctions 3:1:1 into (train, validation, test) by auction index.
pub fn split_3_1_1(auctions: &[LoggedAuction]) -> (Vec<&LoggedAuction>, Vec<&LoggedAuction>, Vec<&LoggedAuction>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (i, a) in auctions.iter().enumerate() {
        match i % 5 {
            3 => val.push(a),
            4 => test.push(a),
            _ => train.push(a),
        }
    }
    (train, val, test)
}

fn require_realized<'a>(auction: &'a LoggedAuction, what: &str) -> Result<&'a [f64]> {
    auction
        .realized_ctrs
        .as_deref()
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{what} requires realized refined CTRs on auction {}",
                auction.auction_id
            ))
        })
}

/// Converts logged auctions into listwise training samples
/// (labels `bid * realized ctr`).
pub fn training_samples(auctions: &[&LoggedAuction]) -> Result<Vec<TrainingSample>> {
    auctions
        .iter()
        .map(|a| {
            let realized = require_realized(a, "training")?;
            let features = assemble_features(&a.instance);
            let labels = a
                .instance
                .ads
                .iter()
                .map(|ad| ad.bid * realized[ad.ad_id])
                .collect();
            Ok(TrainingSample { features, labels })
        })
        .collect()
}

/// Converts logged auctions into validation auctions for early stopping.
pub fn eval_auctions(auctions: &[&LoggedAuction]) -> Result<Vec<EvalAuction>> {
    auctions
        .iter()
        .map(|a| {
            let realized = require_realized(a, "validation")?;
            Ok(EvalAuction {
                features: assemble_features(&a.instance),
                bids: a.instance.bids(),
                realized_ctrs: realized.to_vec(),
                subset_size: a.instance.subset_size,
            })
        })
        .collect()
}

/// Trains one of the learned strategies from logged data.
pub fn train_learned_strategy(
    name: &str,
    train: &[&LoggedAuction],
    val: &[&LoggedAuction],
    cfg: &TrainConfig,
) -> Result<LearnedStrategy> {
    let samples = training_samples(train)?;
    let val_auctions = eval_auctions(val)?;
    let (params, scoring): (ScorerParams, ScoringSpec) = match name {
        "pas-learned" => (
            train_pas(&samples, &val_auctions, cfg)?,
            ScoringSpec {
                rule: ScoreRule::Direct,
                mask_bid: false,
            },
        ),
        "reg" => (
            train_regression(&samples, RegressionTarget::BidTimesCtr, &val_auctions, cfg)?,
            ScoringSpec {
                rule: ScoreRule::Direct,
                mask_bid: false,
            },
        ),
        "regctr" => (
            train_regression(&samples, RegressionTarget::CtrOnly, &val_auctions, cfg)?,
            ScoringSpec {
                rule: ScoreRule::BidTimesCtr,
                mask_bid: true,
            },
        ),
        other => {
            return Err(Error::InvalidArgument(format!(
                "{other:?} is not a learned strategy"
            )))
        }
    };
    Ok(LearnedStrategy {
        label: name.to_string(),
        params,
        scoring,
    })
}

/// Where experiment data comes from.
#[derive(Debug, Clone)]
pub enum EnvSource {
    /// Fresh synthetic draws per repetition.
    Synthetic(EnvConfig),
    /// A fixed auction log, split 3:1:1; repetitions only reseed training.
    LogFile(std::path::PathBuf),
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvSource,
    /// Registry names, e.g. `gdy`, `pas-learned`, `reg`.
    pub strategies: Vec<String>,
    pub n_train: usize,
    pub n_val: usize,
    /// Test auctions per repetition.
    pub n_test: usize,
    /// Independent repetitions (each gets a derived seed).
    pub n_repetitions: usize,
    /// `K` values for SWr/Recall/REVr.
    pub metrics_k: Vec<usize>,
    pub master_seed: u64,
    pub train: TrainConfig,
    /// Sample count for Monte Carlo strategies.
    pub mc_samples: usize,
}

impl ExperimentConfig {
    pub fn preset_public1_like() -> Self {
        Self {
            env: EnvSource::Synthetic(EnvConfig::public1_like()),
            strategies: vec![
                "gdy".into(),
                "pas-learned".into(),
                "reg".into(),
                "regctr".into(),
            ],
            n_train: 2000,
            n_val: 300,
            n_test: 500,
            n_repetitions: 5,
            metrics_k: vec![5],
            master_seed: 0,
            train: TrainConfig::default(),
            mc_samples: 512,
        }
    }

    pub fn preset_public5_like() -> Self {
        Self {
            env: EnvSource::Synthetic(EnvConfig::public5_like()),
            ..Self::preset_public1_like()
        }
    }
}

/// One aggregated metric value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub strategy: String,
    pub k: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Percentage improvement of `mean` over the greedy baseline's mean.
    pub improvement_pct: f64,
}

/// Experiment output: aggregated rows plus any per-auction strategy
/// failures that were excluded from the averages.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<MetricRow>,
    pub failures: Vec<String>,
    /// Per repetition, per strategy, per k: mean (swr, recall, revr)
    /// over test auctions.
    pub per_repetition: Vec<Vec<Vec<(f64, f64, f64)>>>,
}

const METRIC_NAMES: [&str; 3] = ["swr", "recall", "revr"];

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the full experiment: per repetition, draw (or split) the data,
/// train the learned strategies, evaluate everything on the test split,
/// then aggregate means, standard deviations, and improvement over the
/// greedy baseline across repetitions.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    if config.n_repetitions == 0 || config.strategies.is_empty() {
        return Err(Error::InvalidArgument(
            "need n_repetitions >= 1 and at least one strategy".into(),
        ));
    }
    for k in &config.metrics_k {
        if *k == 0 {
            return Err(Error::InvalidArgument("metrics_k entries must be >= 1".into()));
        }
    }
    let log_data = match &config.env {
        EnvSource::LogFile(path) => Some(load_auction_log(path, true)?.auctions),
        EnvSource::Synthetic(_) => None,
    };

    let mut failures = Vec::new();
    // per strategy, per k, per metric: one value per repetition
    let n_strats = config.strategies.len();
    let n_ks = config.metrics_k.len();
    let mut accum: Vec<Vec<Vec<Vec<f64>>>> =
        vec![vec![vec![Vec::new(); 3]; n_ks]; n_strats];
    let mut gdy_accum: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); 3]; n_ks];
    let mut per_repetition = Vec::with_capacity(config.n_repetitions);

    for rep in 0..config.n_repetitions {
        let rep_seed = derive_seed(config.master_seed, rep as u64);
        let owned;
        let (train_set, val_set, test_set): (
            Vec<&LoggedAuction>,
            Vec<&LoggedAuction>,
            Vec<&LoggedAuction>,
        ) = match (&config.env, &log_data) {
            (EnvSource::Synthetic(env_cfg), _) => {
                let n_total = config.n_train + config.n_val + config.n_test;
                owned = generate_log(env_cfg, n_total, derive_seed(rep_seed, 1))?;
                let train = owned[..config.n_train].iter().collect();
                let val = owned[config.n_train..config.n_train + config.n_val]
                    .iter()
                    .collect();
                let test = owned[config.n_train + config.n_val..].iter().collect();
                (train, val, test)
            }
            (EnvSource::LogFile(_), Some(data)) => split_3_1_1(data),
            (EnvSource::LogFile(_), None) => unreachable!("loaded above"),
        };

        // resolve strategies, training the learned ones
        let mut rep_train_cfg = config.train.clone();
        rep_train_cfg.seed = derive_seed(rep_seed, 2);
        let mut resolved: Vec<(String, Box<dyn Strategy>)> = Vec::new();
        for name in &config.strategies {
            let strat: Box<dyn Strategy> = if crate::strategy::LEARNED_STRATEGIES
                .contains(&name.as_str())
            {
                Box::new(train_learned_strategy(
                    name,
                    &train_set,
                    &val_set,
                    &rep_train_cfg,
                )?)
            } else {
                builtin_strategy(name, config.mc_samples)?
            };
            resolved.push((name.clone(), strat));
        }
        let gdy_listed = config.strategies.iter().any(|s| s == "gdy");
        let baseline: Option<Box<dyn Strategy>> = if gdy_listed {
            None
        } else {
            Some(builtin_strategy("gdy", config.mc_samples)?)
        };

        // evaluate on the test split, parallel over auctions with
        // deterministic ordering by auction index
        let contexts: Vec<AuctionContext> = test_set
            .iter()
            .enumerate()
            .map(|(i, a)| context_from_logged(a, derive_seed(rep_seed, 1000 + i as u64)))
            .collect();
        let realized: Vec<&[f64]> = test_set
            .iter()
            .map(|a| require_realized(a, "evaluation"))
            .collect::<Result<_>>()?;

        let mut rep_rows: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(n_strats);
        let eval_one = |strat: &dyn Strategy,
                            failures: &mut Vec<String>|
         -> Result<Vec<(f64, f64, f64)>> {
            let per_auction: Vec<Result<Vec<(f64, f64, f64)>>> = contexts
                .par_iter()
                .zip(&realized)
                .map(|(ctx, realized)| {
                    let scores = strat.scores(ctx)?;
                    let order = crate::auction::rank_by_score(&scores)?;
                    let selected: Vec<usize> =
                        order.into_iter().take(ctx.subset_size).collect();
                    config
                        .metrics_k
                        .iter()
                        .map(|&k| {
                            let r = compute_metrics(&selected, &ctx.bids, realized, k)?;
                            Ok((r.swr, r.recall, r.revr))
                        })
                        .collect()
                })
                .collect();
            let mut sums = vec![(0.0, 0.0, 0.0); n_ks];
            let mut n_ok = 0usize;
            for (ai, res) in per_auction.into_iter().enumerate() {
                match res {
                    Ok(vals) => {
                        n_ok += 1;
                        for (s, v) in sums.iter_mut().zip(vals) {
                            s.0 += v.0;
                            s.1 += v.1;
                            s.2 += v.2;
                        }
                    }
                    Err(e) => failures.push(format!(
                        "rep {rep}: strategy {} failed on test auction {ai}: {e}",
                        strat.name()
                    )),
                }
            }
            if n_ok == 0 {
                return Err(Error::Degenerate(format!(
                    "strategy {} failed on every test auction",
                    strat.name()
                )));
            }
            Ok(sums
                .into_iter()
                .map(|(a, b, c)| (a / n_ok as f64, b / n_ok as f64, c / n_ok as f64))
                .collect())
        };

        let mut gdy_means: Option<Vec<(f64, f64, f64)>> = None;
        for (si, (name, strat)) in resolved.iter().enumerate() {
            let means = eval_one(strat.as_ref(), &mut failures)?;
            for (ki, m) in means.iter().enumerate() {
                accum[si][ki][0].push(m.0);
                accum[si][ki][1].push(m.1);
                accum[si][ki][2].push(m.2);
            }
            if name == "gdy" {
                gdy_means = Some(means.clone());
            }
            rep_rows.push(means);
        }
        let gdy_means = match (gdy_means, &baseline) {
            (Some(m), _) => m,
            (None, Some(b)) => eval_one(b.as_ref(), &mut failures)?,
            (None, None) => unreachable!(),
        };
        for (ki, m) in gdy_means.iter().enumerate() {
            gdy_accum[ki][0].push(m.0);
            gdy_accum[ki][1].push(m.1);
            gdy_accum[ki][2].push(m.2);
        }
        per_repetition.push(rep_rows);
    }

    let mut rows = Vec::new();
    for (si, name) in config.strategies.iter().enumerate() {
        for (ki, &k) in config.metrics_k.iter().enumerate() {
            for (mi, metric) in METRIC_NAMES.iter().enumerate() {
                let (mean, std) = mean_and_std(&accum[si][ki][mi]);
                let (gdy_mean, _) = mean_and_std(&gdy_accum[ki][mi]);
                let improvement_pct = if gdy_mean.abs() > 1e-300 {
                    (mean - gdy_mean) / gdy_mean * 100.0
                } else {
                    0.0
                };
                rows.push(MetricRow {
                    strategy: name.clone(),
                    k,
                    metric: metric.to_string(),
                    mean,
                    std,
                    improvement_pct,
                });
            }
        }
    }
    Ok(ExperimentResult {
        rows,
        failures,
        per_repetition,
    })
}

/// Renders the aggregated rows as CSV (byte-stable for fixed inputs).
pub fn experiment_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("strategy,k,metric,mean,std,improvement_pct\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.4}\n",
            r.strategy, r.k, r.metric, r.mean, r.std, r.improvement_pct
        ));
    }
    out
}

/// Renders IC reports as CSV, one row per strategy.
pub fn ic_csv(reports: &[crate::ic::IcReport]) -> String {
    let mut out = String::from("strategy,n_tests,failures,failure_rate,seed\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{:.6},{}\n",
            r.strategy, r.n_tests, r.n_failures, r.failure_rate, r.seed
        ));
    }
    out
}

/// Plot-ready score traces for one auction: for each strategy, every ad's
/// refined rank, its normalized refined score, the normalized pre-auction
/// score, and whether it entered the second stage.
pub fn score_traces(
    auction: &LoggedAuction,
    strategies: &[(String, Box<dyn Strategy>)],
    auction_seed: u64,
) -> Result<String> {
    let ctx = context_from_logged(auction, auction_seed);
    let realized = require_realized(auction, "trace rendering")?;
    let refined: Vec<f64> = ctx
        .bids
        .iter()
        .zip(realized)
        .map(|(b, c)| b * c)
        .collect();
    let order = crate::auction::rank_by_score(&refined)?;
    let mut rank_of = vec![0usize; refined.len()];
    for (rank, &ad) in order.iter().enumerate() {
        rank_of[ad] = rank + 1;
    }
    let max_refined = refined.iter().copied().fold(f64::MIN, f64::max).max(1e-300);
    let mut out = String::from("strategy,ad_id,refined_rank,refined_score_norm,pre_score_norm,entered\n");
    for (name, strat) in strategies {
        let scores = strat.scores(&ctx)?;
        let max_score = scores.iter().copied().fold(f64::MIN, f64::max).max(1e-300);
        let sel_order = crate::auction::rank_by_score(&scores)?;
        let entered: std::collections::HashSet<usize> =
            sel_order.iter().take(ctx.subset_size).copied().collect();
        for ad in 0..refined.len() {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{}\n",
                name,
                ad,
                rank_of[ad],
                refined[ad] / max_refined,
                scores[ad] / max_score,
                entered.contains(&ad) as u8
            ));
        }
    }
    Ok(out)
}
