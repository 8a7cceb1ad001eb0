//! Supervised training of pre-auction scorers.
//!
//! The listwise path minimizes the cross entropy between the top-1
//! distribution induced by the labels (`y_i / sum(y)`) and the softmax of
//! the model logits, batch-averaged. The regression paths minimize mean
//! square error against `bid * ctr` (REG) or `ctr` alone with the bid
//! column masked from the input (REGCTR).
//!
//! Features and regression labels are standardized for optimization; the
//! affine maps are folded back into the first/last layer weights before the
//! parameters are returned, so a trained [`ScorerParams`] consumes raw
//! features directly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{compute_metrics, rank_by_score};
use crate::env::feature;
use crate::error::Error;
use crate::scorer::{
    backward, forward_cached, scorer_forward, Architecture, ScoreRule, ScorerParams, ScoringSpec,
};
use crate::Result;

/// Labels are clamped to at least this value so the top-1 normalization
/// stays defined when a realized CTR is zero; ranking is preserved.
pub const LABEL_FLOOR: f64 = 1e-9;

/// One listwise training sample: the features of all `N` ads of an auction
/// and the per-ad labels `y_i = bid_i * ctr_i` under the refined estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

/// A validation auction for early stopping: model scores select the top
/// `M`, and the realized CTRs grade the selection.
#[derive(Debug, Clone)]
pub struct EvalAuction {
    pub features: Vec<Vec<f64>>,
    pub bids: Vec<f64>,
    pub realized_ctrs: Vec<f64>,
    pub subset_size: usize,
}

/// Regression label choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionTarget {
    /// Labels `bid * ctr`; full feature set; score is the raw output.
    BidTimesCtr,
    /// Labels `ctr`; the bid column is masked from the input and the score
    /// is `bid * clamp(output, 0, 1)` at selection time.
    CtrOnly,
}

/// Hyperparameters of the mini-batch gradient descent loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub n_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Init half-width is `weight_init_scale / sqrt(fan_in)`.
    pub weight_init_scale: f64,
    pub hidden_dim: usize,
    /// Early stopping monitors `SWr@K` on the validation set at this `K`.
    pub early_stop_k: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.15,
            n_epochs: 40,
            batch_size: 16,
            seed: 0,
            weight_init_scale: 1.0,
            hidden_dim: 32,
            early_stop_k: 5,
            patience: 6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite()
            || self.learning_rate < 0.0
            || self.n_epochs == 0
            || self.batch_size == 0
        {
            return Err(Error::InvalidArgument(
                "need learning_rate >= 0, n_epochs >= 1, batch_size >= 1".into(),
            ));
        }
        if self.hidden_dim == 0 || self.early_stop_k == 0 {
            return Err(Error::InvalidArgument(
                "need hidden_dim >= 1 and early_stop_k >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Listwise softmax cross entropy for one sample:
/// `-sum_i P_y(i) * log softmax(logits)_i` with `P_y(i) = y_i / sum(y)`.
///
/// The softmax is computed with max-shift stabilization; adding a constant
/// to all logits leaves the loss unchanged.
pub fn listwise_loss(logits: &[f64], y: &[f64]) -> Result<f64> {
    let (p_y, log_p_f) = listwise_distributions(logits, y)?;
    Ok(-p_y.iter().zip(&log_p_f).map(|(p, lq)| p * lq).sum::<f64>())
}

/// Gradient of [`listwise_loss`] with respect to the logits:
/// `softmax(logits) - P_y`.
pub fn listwise_loss_grad(logits: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let (p_y, log_p_f) = listwise_distributions(logits, y)?;
    Ok(log_p_f
        .iter()
        .zip(&p_y)
        .map(|(lq, p)| lq.exp() - p)
        .collect())
}

fn listwise_distributions(logits: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if logits.len() != y.len() || y.is_empty() {
        return Err(Error::InvalidArgument("logits/label length mismatch".into()));
    }
    if y.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidArgument("labels must be positive".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite logit".into()));
    }
    let y_total: f64 = y.iter().sum();
    let p_y: Vec<f64> = y.iter().map(|v| v / y_total).collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    let log_p_f: Vec<f64> = logits.iter().map(|l| l - max - log_z).collect();
    Ok((p_y, log_p_f))
}

fn mse_loss_grad(pred: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(y)
        .map(|(p, t)| {
            let e = p - t;
            loss += e * e;
            2.0 * e / n
        })
        .collect();
    (loss / n, grad)
}

struct Standardization {
    mu: Vec<f64>,
    sd: Vec<f64>,
}

fn fit_standardization(samples: &[&[Vec<f64>]]) -> Standardization {
    let d = samples[0][0].len();
    let mut mu = vec![0.0; d];
    let mut count = 0usize;
    for rows in samples {
        for row in rows.iter() {
            for (m, v) in mu.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
    }
    mu.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; d];
    for rows in samples {
        for row in rows.iter() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mu) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let sd = var
        .iter()
        .map(|s| {
            let sd = (s / count as f64).sqrt();
            if sd < 1e-12 {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Standardization { mu, sd }
}

impl Standardization {
    fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|row| {
                row.iter()
                    .zip(self.mu.iter().zip(&self.sd))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect()
    }
}

fn drop_bid_column(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(i, _)| *i != feature::BID)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect()
}

/// Scores raw (unstandardized) full-feature rows with a trained model,
/// applying its scoring rule.
pub fn model_scores(
    params: &ScorerParams,
    scoring: &ScoringSpec,
    bids: &[f64],
    features: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let input = if scoring.mask_bid {
        drop_bid_column(features)
    } else {
        features.to_vec()
    };
    let out = scorer_forward(params, &input)?;
    Ok(match scoring.rule {
        ScoreRule::Direct => out,
        ScoreRule::BidTimesCtr => bids
            .iter()
            .zip(&out)
            .map(|(b, o)| b * o.clamp(0.0, 1.0))
            .collect(),
    })
}

enum LossKind {
    Listwise,
    Mse,
}

struct Dataset {
    /// Standardized model inputs per auction.
    inputs: Vec<Vec<Vec<f64>>>,
    /// Targets per auction (raw for listwise, standardized for MSE).
    targets: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn run_sgd(
    dataset: &Dataset,
    val: &[EvalAuction],
    cfg: &TrainConfig,
    arch: Architecture,
    loss_kind: LossKind,
    feat_std: &Standardization,
    scoring: &ScoringSpec,
    label_affine: (f64, f64),
) -> Result<ScorerParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ScorerParams::init(arch, cfg.weight_init_scale, &mut rng)?;
    let n_samples = dataset.inputs.len();
    let mut order: Vec<usize> = (0..n_samples).collect();

    let (label_mu, label_sd) = label_affine;
    // validation inputs are fixed across epochs; standardize them once
    let val_inputs: Vec<Vec<Vec<f64>>> = val
        .iter()
        .map(|auction| {
            let input_rows = if scoring.mask_bid {
                drop_bid_column(&auction.features)
            } else {
                auction.features.clone()
            };
            feat_std.apply(&input_rows)
        })
        .collect();
    let val_score = |params: &ScorerParams| -> Result<f64> {
        // collect per-auction scores and sum in index order; a parallel
        // reduction would make the f64 total depend on work stealing
        let per_auction: Vec<Result<f64>> = val
            .par_iter()
            .zip(&val_inputs)
            .map(|(auction, std_rows)| {
                let out = scorer_forward(params, std_rows)?;
                let scores: Vec<f64> = match scoring.rule {
                    ScoreRule::Direct => out,
                    ScoreRule::BidTimesCtr => auction
                        .bids
                        .iter()
                        .zip(&out)
                        .map(|(b, o)| b * (o * label_sd + label_mu).clamp(0.0, 1.0))
                        .collect(),
                };
                let order = rank_by_score(&scores)?;
                let selected: Vec<usize> =
                    order.into_iter().take(auction.subset_size).collect();
                let report = compute_metrics(
                    &selected,
                    &auction.bids,
                    &auction.realized_ctrs,
                    cfg.early_stop_k,
                )?;
                Ok(report.swr)
            })
            .collect();
        let mut total = 0.0;
        for swr in per_auction {
            total += swr?;
        }
        Ok(total / val.len() as f64)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale_epochs = 0;
    for _epoch in 0..cfg.n_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inv = 1.0 / batch.len() as f64;
            // per-sample gradients in parallel, folded in batch order so
            // the accumulation stays deterministic
            let per_sample: Vec<Result<(f64, Vec<f64>)>> = batch
                .par_iter()
                .map(|&si| {
                    let (out, cache) = forward_cached(&params, &dataset.inputs[si])?;
                    let (loss, mut dlogits) = match loss_kind {
                        LossKind::Listwise => {
                            let loss = listwise_loss(&out, &dataset.targets[si])?;
                            (loss, listwise_loss_grad(&out, &dataset.targets[si])?)
                        }
                        LossKind::Mse => mse_loss_grad(&out, &dataset.targets[si]),
                    };
                    dlogits.iter_mut().for_each(|g| *g *= inv);
                    Ok((loss, backward(&params, &cache, &dlogits)))
                })
                .collect();
            let mut grad_acc = vec![0.0; params.weights.len()];
            for res in per_sample {
                let (loss, g) = res?;
                epoch_loss += loss;
                for (acc, gi) in grad_acc.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            for (w, g) in params.weights.iter_mut().zip(&grad_acc) {
                *w -= cfg.learning_rate * g;
            }
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged(format!(
                "epoch loss became {epoch_loss}; lower the learning rate"
            )));
        }
        if !val.is_empty() {
            let sw = val_score(&params)?;
            match &best {
                Some((b, _)) if sw <= *b => {
                    stale_epochs += 1;
                    if stale_epochs >= cfg.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((sw, params.weights.clone()));
                    stale_epochs = 0;
                }
            }
        }
    }
    if let Some((_, weights)) = best {
        params.weights = weights;
    }
    params.fold_input_standardization(&feat_std.mu, &feat_std.sd)?;
    params.fold_output_affine(label_sd, label_mu)?;
    Ok(params)
}

fn check_dataset(train: &[TrainingSample]) -> Result<usize> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let d = train[0].features.first().map(|r| r.len()).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidArgument("empty feature rows".into()));
    }
    for s in train {
        if s.features.len() != s.labels.len() || s.features.is_empty() {
            return Err(Error::InvalidArgument(
                "feature row count must equal label count".into(),
            ));
        }
        if s.features.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("inconsistent feature dims".into()));
        }
    }
    Ok(d)
}

/// Trains the listwise set-encoding scorer. Labels are clamped to
/// [`LABEL_FLOOR`]; early stopping monitors validation `SWr@K` and the best
/// snapshot is returned (the final parameters when `val` is empty).
pub fn train_pas(
    train: &[TrainingSample],
    val: &[EvalAuction],
    cfg: &TrainConfig,
) -> Result<ScorerParams> {
    cfg.validate()?;
    let d = check_dataset(train)?;
    let feats: Vec<&[Vec<f64>]> = train.iter().map(|s| s.features.as_slice()).collect();
    let feat_std = fit_standardization(&feats);
    let dataset = Dataset {
        inputs: train.iter().map(|s| feat_std.apply(&s.features)).collect(),
        targets: train
            .iter()
            .map(|s| s.labels.iter().map(|y| y.max(LABEL_FLOOR)).collect())
            .collect(),
    };
    let scoring = ScoringSpec {
        rule: ScoreRule::Direct,
        mask_bid: false,
    };
    run_sgd(
        &dataset,
        val,
        cfg,
        Architecture::standard(d, cfg.hidden_dim),
        LossKind::Listwise,
        &feat_std,
        &scoring,
        (0.0, 1.0),
    )
}

/// Trains a mean-square regression scorer (the REG / REGCTR baselines).
///
/// For [`RegressionTarget::CtrOnly`] the label becomes `y / bid` and the
/// bid column is removed from the input.
pub fn train_regression(
    train: &[TrainingSample],
    target: RegressionTarget,
    val: &[EvalAuction],
    cfg: &TrainConfig,
) -> Result<ScorerParams> {
    cfg.validate()?;
    check_dataset(train)?;
    let mask_bid = target == RegressionTarget::CtrOnly;
    let mut features: Vec<Vec<Vec<f64>>> = Vec::with_capacity(train.len());
    let mut labels: Vec<Vec<f64>> = Vec::with_capacity(train.len());
    for s in train {
        let ys = match target {
            RegressionTarget::BidTimesCtr => s.labels.clone(),
            RegressionTarget::CtrOnly => s
                .labels
                .iter()
                .zip(&s.features)
                .map(|(y, row)| {
                    let bid = row[feature::BID];
                    if bid <= 0.0 {
                        return Err(Error::InvalidArgument(
                            "ctr label needs a positive bid".into(),
                        ));
                    }
                    Ok(y / bid)
                })
                .collect::<Result<Vec<f64>>>()?,
        };
        labels.push(ys);
        features.push(if mask_bid {
            drop_bid_column(&s.features)
        } else {
            s.features.clone()
        });
    }
    let d = features[0][0].len();
    let feat_refs: Vec<&[Vec<f64>]> = features.iter().map(|f| f.as_slice()).collect();
    let feat_std = fit_standardization(&feat_refs);

    let all_labels: Vec<f64> = labels.iter().flatten().copied().collect();
    let label_mu = all_labels.iter().sum::<f64>() / all_labels.len() as f64;
    let label_var = all_labels
        .iter()
        .map(|y| (y - label_mu) * (y - label_mu))
        .sum::<f64>()
        / all_labels.len() as f64;
    let label_sd = if label_var.sqrt() < 1e-12 {
        1.0
    } else {
        label_var.sqrt()
    };

    let dataset = Dataset {
        inputs: features.iter().map(|f| feat_std.apply(f)).collect(),
        targets: labels
            .iter()
            .map(|ys| ys.iter().map(|y| (y - label_mu) / label_sd).collect())
            .collect(),
    };
    let scoring = ScoringSpec {
        rule: if mask_bid {
            ScoreRule::BidTimesCtr
        } else {
            ScoreRule::Direct
        },
        mask_bid,
    };
    run_sgd(
        &dataset,
        val,
        cfg,
        Architecture::standard(d, cfg.hidden_dim),
        LossKind::Mse,
        &feat_std,
        &scoring,
        (label_mu, label_sd),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const TOL: f64 = 1e-12;

    #[test]
    fn listwise_loss_uniform_case() {
        let loss = listwise_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-9);
    }

    #[test]
    fn listwise_loss_minimum_is_label_entropy() {
        // logits = log y achieves the cross-entropy lower bound H(P_y)
        let y = [0.3, 1.2, 0.5];
        let logits: Vec<f64> = y.iter().map(|v: &f64| v.ln()).collect();
        let loss = listwise_loss(&logits, &y).unwrap();
        let total: f64 = y.iter().sum();
        let entropy: f64 = -y
            .iter()
            .map(|v| (v / total) * (v / total).ln())
            .sum::<f64>();
        assert!((loss - entropy).abs() < 1e-12);
        // any other logits do worse
        assert!(listwise_loss(&[0.1, 0.0, 2.0], &y).unwrap() >= loss);
    }

    #[test]
    fn listwise_loss_is_shift_invariant() {
        let y = [0.4, 0.9, 2.0];
        let a = listwise_loss(&[0.2, -1.0, 0.5], &y).unwrap();
        let b = listwise_loss(&[100.2, 99.0, 100.5], &y).unwrap();
        assert!((a - b).abs() < TOL);
    }

    #[test]
    fn listwise_grad_properties() {
        let y = [0.4, 0.9, 2.0];
        // stationary at logits = log y
        let logits: Vec<f64> = y.iter().map(|v: &f64| v.ln()).collect();
        for g in listwise_loss_grad(&logits, &y).unwrap() {
            assert!(g.abs() < 1e-12);
        }
        // gradient entries always sum to zero
        let g = listwise_loss_grad(&[0.3, 2.0, -1.0], &y).unwrap();
        assert!(g.iter().sum::<f64>().abs() < TOL);
        // nonpositive labels rejected
        assert!(listwise_loss(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn listwise_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..7);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let logits: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let grad = listwise_loss_grad(&logits, &y).unwrap();
            let h = 1e-6;
            for i in 0..n {
                let mut up = logits.clone();
                up[i] += h;
                let mut dn = logits.clone();
                dn[i] -= h;
                let fd =
                    (listwise_loss(&up, &y).unwrap() - listwise_loss(&dn, &y).unwrap()) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-6);
            }
        }
    }

    fn toy_sample(rng: &mut ChaCha8Rng, n: usize, d: usize) -> TrainingSample {
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(0.1..1.0)).collect())
            .collect();
        let labels: Vec<f64> = features
            .iter()
            .map(|row| row[0] * row[1].max(0.05))
            .collect();
        TrainingSample { features, labels }
    }

    #[test]
    fn zero_learning_rate_keeps_init_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let train = vec![toy_sample(&mut rng, 6, 5)];
        let cfg = TrainConfig {
            learning_rate: 0.0,
            n_epochs: 3,
            hidden_dim: 4,
            seed: 9,
            ..TrainConfig::default()
        };
        let trained = train_pas(&train, &[], &cfg).unwrap();
        // re-derive the untouched init and fold the same standardization
        let mut rng2 = ChaCha8Rng::seed_from_u64(9);
        let mut init =
            ScorerParams::init(Architecture::standard(5, 4), 1.0, &mut rng2).unwrap();
        let feats: Vec<&[Vec<f64>]> = train.iter().map(|s| s.features.as_slice()).collect();
        let std = fit_standardization(&feats);
        init.fold_input_standardization(&std.mu, &std.sd).unwrap();
        assert_eq!(trained.weights, init.weights);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let train: Vec<TrainingSample> = (0..6).map(|_| toy_sample(&mut rng, 8, 5)).collect();
        let cfg = TrainConfig {
            n_epochs: 4,
            hidden_dim: 6,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = train_pas(&train, &[], &cfg).unwrap();
        let b = train_pas(&train, &[], &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
    }

    #[test]
    fn overfitting_one_sample_recovers_label_ranking() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let sample = toy_sample(&mut rng, 6, 5);
        let train: Vec<TrainingSample> = vec![sample.clone(); 8];
        let cfg = TrainConfig {
            learning_rate: 0.5,
            n_epochs: 300,
            batch_size: 8,
            hidden_dim: 16,
            seed: 5,
            ..TrainConfig::default()
        };
        let params = train_pas(&train, &[], &cfg).unwrap();
        let logits = scorer_forward(&params, &sample.features).unwrap();
        let want = rank_by_score(&sample.labels).unwrap();
        let got = rank_by_score(&logits).unwrap();
        assert_eq!(want, got, "logit ranking must match label ranking");
    }

    #[test]
    fn final_epoch_loss_not_worse_than_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let train: Vec<TrainingSample> = (0..10).map(|_| toy_sample(&mut rng, 8, 5)).collect();
        let cfg = TrainConfig {
            n_epochs: 30,
            hidden_dim: 8,
            seed: 3,
            ..TrainConfig::default()
        };
        let trained = train_pas(&train, &[], &cfg).unwrap();
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let mut init =
            ScorerParams::init(Architecture::standard(5, 8), 1.0, &mut rng2).unwrap();
        let feats: Vec<&[Vec<f64>]> = train.iter().map(|s| s.features.as_slice()).collect();
        let std = fit_standardization(&feats);
        init.fold_input_standardization(&std.mu, &std.sd).unwrap();
        let dataset_loss = |p: &ScorerParams| -> f64 {
            train
                .iter()
                .map(|s| {
                    let out = scorer_forward(p, &s.features).unwrap();
                    listwise_loss(&out, &s.labels).unwrap()
                })
                .sum::<f64>()
        };
        assert!(dataset_loss(&trained) <= dataset_loss(&init));
    }

    #[test]
    fn regression_fits_constant_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let train: Vec<TrainingSample> = (0..6)
            .map(|_| {
                let mut s = toy_sample(&mut rng, 6, 5);
                s.labels.iter_mut().for_each(|y| *y = 0.37);
                s
            })
            .collect();
        let cfg = TrainConfig {
            n_epochs: 60,
            hidden_dim: 8,
            seed: 13,
            ..TrainConfig::default()
        };
        let params = train_regression(&train, RegressionTarget::BidTimesCtr, &[], &cfg).unwrap();
        let preds = scorer_forward(&params, &train[0].features).unwrap();
        for p in preds {
            assert!((p - 0.37).abs() < 0.05, "prediction {p} far from 0.37");
        }
    }

    #[test]
    fn regctr_input_has_no_bid_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let train: Vec<TrainingSample> = (0..4).map(|_| toy_sample(&mut rng, 6, 5)).collect();
        let cfg = TrainConfig {
            n_epochs: 2,
            hidden_dim: 4,
            ..TrainConfig::default()
        };
        let params = train_regression(&train, RegressionTarget::CtrOnly, &[], &cfg).unwrap();
        assert_eq!(params.arch.input_dim, 4);
        // model_scores multiplies the clamped output back by the bid
        let bids: Vec<f64> = train[0].features.iter().map(|r| r[feature::BID]).collect();
        let scoring = ScoringSpec {
            rule: ScoreRule::BidTimesCtr,
            mask_bid: true,
        };
        let scores = model_scores(&params, &scoring, &bids, &train[0].features).unwrap();
        assert_eq!(scores.len(), bids.len());
        for (s, b) in scores.iter().zip(&bids) {
            assert!(*s >= 0.0 && *s <= *b + TOL);
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let pred = [0.4, -0.2, 1.1];
        let y = [0.5, 0.0, 0.9];
        let (_, grad) = mse_loss_grad(&pred, &y);
        let h = 1e-6;
        for i in 0..pred.len() {
            let mut up = pred;
            up[i] += h;
            let mut dn = pred;
            dn[i] -= h;
            let fd = (mse_loss_grad(&up, &y).0 - mse_loss_grad(&dn, &y).0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let train: Vec<TrainingSample> = (0..4).map(|_| toy_sample(&mut rng, 8, 5)).collect();
        let cfg = TrainConfig {
            learning_rate: 1e12,
            n_epochs: 40,
            hidden_dim: 8,
            ..TrainConfig::default()
        };
        match train_regression(&train, RegressionTarget::BidTimesCtr, &[], &cfg) {
            Err(Error::Diverged(_)) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
