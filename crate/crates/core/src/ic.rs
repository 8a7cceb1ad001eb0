//! Incentive-compatibility testing.
//!
//! The two-stage auction is IC for value maximizers when the allocation is
//! monotone in each bid and winners pay critical prices. The second stage
//! (GSP) satisfies both by construction; what needs checking is the
//! pre-auction: does entry into the second stage behave like a monotone
//! step in the ad's own bid? [`run_perturbation_test`] replays an auction
//! under a grid of multiplicative bid factors and checks exactly that.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::auction::{gsp_run, rank_by_score, AuctionOutcome};
use crate::error::Error;
use crate::strategy::{AuctionContext, Strategy};
use crate::{derive_seed, Result};

/// The default multiplicative factor grid `{0.2 j | j = 1..10}`.
pub fn default_factors() -> Vec<f64> {
    (1..=10).map(|j| 0.2 * j as f64).collect()
}

/// Outcome of one counterfactual perturbation test on a single
/// (auction, ad) pair.
#[derive(Debug, Clone)]
pub struct PerturbationTest {
    pub auction_index: usize,
    pub ad_id: usize,
    pub factors: Vec<f64>,
    /// Whether the ad entered the second stage at each factor.
    pub entered: Vec<bool>,
}

impl PerturbationTest {
    /// A test passes iff entry is a monotone step: either the ad never
    /// enters, or there is a threshold factor beyond which it always does
    /// (equivalently, entry never switches off as the bid rises).
    pub fn passed(&self) -> bool {
        let mut seen_entry = false;
        for &e in &self.entered {
            if seen_entry && !e {
                return false;
            }
            seen_entry |= e;
        }
        true
    }
}

/// Aggregate perturbation failure counts for one strategy.
#[derive(Debug, Clone)]
pub struct IcReport {
    pub strategy: String,
    pub n_tests: usize,
    pub n_failures: usize,
    pub failure_rate: f64,
    pub seed: u64,
}

fn validate_factors(factors: &[f64]) -> Result<()> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("empty factor grid".into()));
    }
    if factors.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(Error::InvalidArgument("factors must be positive".into()));
    }
    for w in factors.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "factors must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Replays the pre-auction under each factor `alpha`, with ad `ad_id`'s bid
/// replaced by `alpha * bid` (its bid-derived feature slots updated, its
/// coarse CTR untouched), and records second-stage entry.
pub fn run_perturbation_test(
    strategy: &dyn Strategy,
    ctx: &AuctionContext,
    auction_index: usize,
    ad_id: usize,
    factors: &[f64],
) -> Result<PerturbationTest> {
    validate_factors(factors)?;
    if ad_id >= ctx.n_ads() {
        return Err(Error::InvalidArgument(format!(
            "ad {ad_id} not in auction of {} ads",
            ctx.n_ads()
        )));
    }
    let mut entered = Vec::with_capacity(factors.len());
    for &alpha in factors {
        let perturbed = ctx.with_perturbed_bid(ad_id, alpha);
        let scores = strategy.scores(&perturbed)?;
        let order = rank_by_score(&scores)?;
        entered.push(order.iter().take(ctx.subset_size).any(|&i| i == ad_id));
    }
    Ok(PerturbationTest {
        auction_index,
        ad_id,
        factors: factors.to_vec(),
        entered,
    })
}

/// How many ads per auction enter the test pool.
#[derive(Debug, Clone, Copy)]
pub enum AdSampling {
    /// Every ad of every auction.
    All,
    /// A seeded sample of this many ads per auction.
    PerAuction(usize),
}

/// Aggregate failure rate of a strategy over sampled (auction, ad) pairs.
/// One test is one pair. Deterministic given the seed.
pub fn ic_failure_rate(
    strategy: &dyn Strategy,
    auctions: &[AuctionContext],
    ads_per_auction: AdSampling,
    factors: &[f64],
    seed: u64,
) -> Result<IcReport> {
    if auctions.is_empty() {
        return Err(Error::InvalidArgument("no auctions to test".into()));
    }
    validate_factors(factors)?;
    let counts: Vec<Result<(usize, usize)>> = auctions
        .par_iter()
        .enumerate()
        .map(|(ai, ctx)| {
            let ads: Vec<usize> = match ads_per_auction {
                AdSampling::All => (0..ctx.n_ads()).collect(),
                AdSampling::PerAuction(count) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ai as u64));
                    let mut all: Vec<usize> = (0..ctx.n_ads()).collect();
                    all.shuffle(&mut rng);
                    all.truncate(count);
                    all.sort_unstable();
                    all
                }
            };
            let mut tests = 0;
            let mut failures = 0;
            for ad in ads {
                let test = run_perturbation_test(strategy, ctx, ai, ad, factors)?;
                tests += 1;
                if !test.passed() {
                    failures += 1;
                }
            }
            Ok((tests, failures))
        })
        .collect();
    let mut n_tests = 0;
    let mut n_failures = 0;
    for c in counts {
        let (t, f) = c?;
        n_tests += t;
        n_failures += f;
    }
    Ok(IcReport {
        strategy: strategy.name().to_string(),
        n_tests,
        n_failures,
        failure_rate: n_failures as f64 / n_tests as f64,
        seed,
    })
}

/// Checks a GSP outcome against the conditions that make it IC and IR:
/// (a) no payment exceeds the winner's bid; (b) each payment is the
/// critical price, `payment * ctr_(k) = b_(k+1) * ctr_(k+1)` within 1e-9;
/// (c) raising any winner's bid over a grid never worsens its slot.
pub fn verify_gsp_conditions(
    outcome: &AuctionOutcome,
    bids: &[f64],
    ctrs: &[f64],
) -> Result<bool> {
    if bids.len() != ctrs.len() {
        return Err(Error::InvalidArgument("bid/ctr length mismatch".into()));
    }
    if outcome.allocation.len() != outcome.payments_per_click.len() {
        return Err(Error::InvalidArgument("malformed outcome".into()));
    }
    let scores: Vec<f64> = bids.iter().zip(ctrs).map(|(b, c)| b * c).collect();
    let order = rank_by_score(&scores)?;
    let k = outcome.allocation.len();
    for (slot, (&winner, &price)) in outcome
        .allocation
        .iter()
        .zip(&outcome.payments_per_click)
        .enumerate()
    {
        if price > bids[winner] + 1e-9 {
            return Ok(false); // IR violated
        }
        let runner = order
            .get(slot + 1)
            .map(|&r| scores[r])
            .filter(|&s| s > 0.0)
            .unwrap_or(0.0);
        if (price * ctrs[winner] - runner).abs() > 1e-9 {
            return Ok(false); // not the critical price
        }
    }
    // allocation monotonicity on a grid of raised bids
    for slot in 0..k {
        let winner = outcome.allocation[slot];
        for factor in [1.0, 1.5, 2.0, 5.0, 10.0] {
            let mut raised = bids.to_vec();
            raised[winner] *= factor;
            let new_outcome = gsp_run(&raised, ctrs, k)?;
            match new_outcome.allocation.iter().position(|&a| a == winner) {
                Some(new_slot) if new_slot <= slot => {}
                _ => return Ok(false),
            }
        }
    }
    Ok(true)
}
