//! Pre-auction strategies behind a common scoring interface.
//!
//! Every strategy maps an auction to one score per ad; the pre-auction
//! keeps the top `M`. Strategies must be deterministic functions of the
//! auction (Monte Carlo ones derive their stream from the auction's own
//! seed), which is what makes perturbation testing well defined.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::env::{feature, CtrDistribution, SimpaInstance};
use crate::error::Error;
use crate::scorer::{ScorerParams, ScoringSpec};
use crate::select;
use crate::train::model_scores;
use crate::Result;

/// Everything a strategy may look at for one auction.
#[derive(Debug, Clone)]
pub struct AuctionContext {
    pub bids: Vec<f64>,
    /// Assembled model features per ad (bid at [`feature::BID`], user
    /// features appended).
    pub features: Vec<Vec<f64>>,
    /// The environment's CTR distributions, indexed like `bids`.
    pub dists: Vec<CtrDistribution>,
    pub n_slots: usize,
    pub subset_size: usize,
    /// Stable per-auction seed; fixed under bid perturbation so stochastic
    /// strategies stay deterministic per auction.
    pub auction_seed: u64,
}

impl AuctionContext {
    pub fn n_ads(&self) -> usize {
        self.bids.len()
    }

    /// Returns a copy with ad `i`'s bid replaced by `factor * bid`,
    /// rewriting every feature slot that derives from the bid.
    pub fn with_perturbed_bid(&self, ad: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.bids[ad] *= factor;
        out.features[ad][feature::BID] *= factor;
        out
    }

    fn simpa(&self) -> Result<SimpaInstance> {
        SimpaInstance::independent(
            self.bids.clone(),
            self.dists.clone(),
            self.subset_size,
            self.n_slots,
        )
    }
}

/// An ad-wise scoring rule for the pre-auction stage.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;
    /// One score per ad; the caller ranks and truncates at `M`.
    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>>;
}

/// Greedy baseline: `bid * coarse estimate` straight from the features.
pub struct GdyStrategy;

impl Strategy for GdyStrategy {
    fn name(&self) -> &str {
        "gdy"
    }

    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>> {
        Ok(ctx
            .features
            .iter()
            .map(|f| f[feature::BID] * f[feature::COARSE_EST])
            .collect())
    }
}

/// Exact top-`K` membership probabilities from the environment
/// distributions. Only viable on enumeration-sized instances.
pub struct PasExactStrategy;

impl Strategy for PasExactStrategy {
    fn name(&self) -> &str {
        "pas-exact"
    }

    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>> {
        Ok(select::pas_exact(&ctx.simpa()?)?.probs)
    }
}

/// Monte Carlo top-`K` membership probabilities.
pub struct PasMcStrategy {
    pub samples: usize,
}

impl Strategy for PasMcStrategy {
    fn name(&self) -> &str {
        "pas-mc"
    }

    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.auction_seed, 0x70a5));
        Ok(select::pas_monte_carlo(&ctx.simpa()?, self.samples, &mut rng)?.probs)
    }
}

/// A trained scorer (learned PAS, REG, or REGCTR).
pub struct LearnedStrategy {
    pub label: String,
    pub params: ScorerParams,
    pub scoring: ScoringSpec,
}

impl Strategy for LearnedStrategy {
    fn name(&self) -> &str {
        &self.label
    }

    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>> {
        model_scores(&self.params, &self.scoring, &ctx.bids, &ctx.features)
    }
}

/// Converts a chosen subset (in pick order) into an ad-wise score vector
/// whose top-`M` reproduces the subset.
fn subset_to_scores(n: usize, subset: &[usize]) -> Vec<f64> {
    let mut scores = vec![-1.0; n];
    for (rank, &i) in subset.iter().enumerate() {
        scores[i] = (subset.len() - rank) as f64;
    }
    scores
}

/// Lazy-greedy submodular maximization of the expected welfare objective;
/// exact when the outcome space is enumerable, otherwise a fixed
/// common-random-numbers panel.
pub struct GreedySubmodularStrategy {
    pub mc_panel: usize,
}

impl Strategy for GreedySubmodularStrategy {
    fn name(&self) -> &str {
        "greedy-submodular"
    }

    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>> {
        let inst = ctx.simpa()?;
        let (subset, _) = match select::lazy_greedy_subset(&inst) {
            Ok(r) => r,
            Err(Error::TooLarge(_)) => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(ctx.auction_seed, 0x9eed));
                select::lazy_greedy_subset_mc(&inst, self.mc_panel, &mut rng)?
            }
            Err(e) => return Err(e),
        };
        Ok(subset_to_scores(ctx.n_ads(), &subset))
    }
}

/// Exhaustive maximizer of the expected welfare objective. Tiny instances
/// only; larger ones fail loudly.
pub struct OracleStrategy;

impl Strategy for OracleStrategy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn scores(&self, ctx: &AuctionContext) -> Result<Vec<f64>> {
        let (subset, _) = select::brute_force_optimal_subset(&ctx.simpa()?)?;
        Ok(subset_to_scores(ctx.n_ads(), &subset))
    }
}

/// Strategy names resolvable without a trained model.
pub const BUILTIN_STRATEGIES: &[&str] =
    &["gdy", "pas-exact", "pas-mc", "greedy-submodular", "oracle"];
/// Strategy names that require training.
pub const LEARNED_STRATEGIES: &[&str] = &["pas-learned", "reg", "regctr"];

/// Resolves a built-in strategy by registry name.
pub fn builtin_strategy(name: &str, mc_samples: usize) -> Result<Box<dyn Strategy>> {
    Ok(match name {
        "gdy" => Box::new(GdyStrategy),
        "pas-exact" => Box::new(PasExactStrategy),
        "pas-mc" => Box::new(PasMcStrategy {
            samples: mc_samples,
        }),
        "greedy-submodular" => Box::new(GreedySubmodularStrategy {
            mc_panel: mc_samples,
        }),
        "oracle" => Box::new(OracleStrategy),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown strategy {other:?} (known: {BUILTIN_STRATEGIES:?} plus {LEARNED_STRATEGIES:?})"
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_auction, EnvConfig};
    use crate::harness::context_from_logged;
    use crate::harness::LoggedAuction;
    use crate::select::select_by_scores;

    fn tiny_context(seed: u64) -> AuctionContext {
        let mut cfg = EnvConfig::public1_like();
        cfg.n_ads = 8;
        cfg.subset_size = 4;
        cfg.n_slots = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (instance, dists) = generate_auction(&cfg, &mut rng).unwrap();
        let realized = crate::env::sample_realization(&dists, &mut rng);
        context_from_logged(
            &LoggedAuction {
                auction_id: 0,
                instance,
                dists,
                realized_ctrs: Some(realized),
            },
            seed,
        )
    }

    #[test]
    fn oracle_dominates_gdy_in_expectation() {
        for seed in 0..10 {
            let ctx = tiny_context(seed);
            let inst = ctx.simpa().unwrap();
            let gdy_sel =
                select_by_scores(&GdyStrategy.scores(&ctx).unwrap(), ctx.subset_size, "gdy")
                    .unwrap();
            let oracle_sel = select_by_scores(
                &OracleStrategy.scores(&ctx).unwrap(),
                ctx.subset_size,
                "oracle",
            )
            .unwrap();
            let gdy_obj = select::simpa_objective(&gdy_sel.selected, &inst).unwrap();
            let oracle_obj = select::simpa_objective(&oracle_sel.selected, &inst).unwrap();
            assert!(oracle_obj >= gdy_obj - 1e-12);
        }
    }

    #[test]
    fn pas_mc_is_deterministic_per_auction() {
        let ctx = tiny_context(7);
        let strat = PasMcStrategy { samples: 256 };
        assert_eq!(strat.scores(&ctx).unwrap(), strat.scores(&ctx).unwrap());
    }

    #[test]
    fn greedy_submodular_matches_oracle_on_tiny_instances() {
        let mut better = 0;
        for seed in 0..10 {
            let ctx = tiny_context(seed + 100);
            let inst = ctx.simpa().unwrap();
            let g = select_by_scores(
                &GreedySubmodularStrategy { mc_panel: 64 }.scores(&ctx).unwrap(),
                ctx.subset_size,
                "g",
            )
            .unwrap();
            let o = select_by_scores(&OracleStrategy.scores(&ctx).unwrap(), ctx.subset_size, "o")
                .unwrap();
            let g_obj = select::simpa_objective(&g.selected, &inst).unwrap();
            let o_obj = select::simpa_objective(&o.selected, &inst).unwrap();
            assert!(g_obj <= o_obj + 1e-12);
            if g_obj >= (1.0 - 1.0 / std::f64::consts::E) * o_obj - 1e-9 {
                better += 1;
            }
        }
        assert_eq!(better, 10, "greedy must keep the (1 - 1/e) guarantee");
    }

    #[test]
    fn unknown_strategy_name_is_rejected() {
        assert!(builtin_strategy("nope", 16).is_err());
    }

    #[test]
    fn perturbation_rewrites_bid_and_feature() {
        let ctx = tiny_context(3);
        let p = ctx.with_perturbed_bid(2, 0.5);
        assert!((p.bids[2] - ctx.bids[2] * 0.5).abs() < 1e-15);
        assert!(
            (p.features[2][feature::BID] - ctx.features[2][feature::BID] * 0.5).abs() < 1e-15
        );
        assert_eq!(p.features[2][feature::COARSE_EST], ctx.features[2][feature::COARSE_EST]);
        assert_eq!(p.auction_seed, ctx.auction_seed);
    }
}
