//! Second-stage auction machinery: ranking, `SumTopK`, GSP allocation with
//! critical-price payments, and the evaluation metrics `SWr@K`, `Recall@K`,
//! `REVr@K`.
//!
//! Everything here is a pure function of its inputs and safe to call from
//! many workers concurrently.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// One advertiser/ad inside an auction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdRecord {
    /// Index of the ad, unique within its auction.
    pub ad_id: usize,
    /// Bid per click; nonnegative.
    pub bid: f64,
    /// Features visible to the pre-auction stage (layout documented in
    /// [`crate::env::feature`]).
    pub partial_features: Vec<f64>,
    /// Handle into the auction's CTR distribution table.
    pub ctr_dist_id: usize,
    /// Exact mean of the ad's refined-CTR distribution.
    pub coarse_ctr: f64,
}

/// The full candidate set for one page view.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuctionInstance {
    pub ads: Vec<AdRecord>,
    /// User-side features, broadcast to every ad at scoring time.
    pub user_features: Vec<f64>,
    /// Number of ad slots `K`.
    pub n_slots: usize,
    /// Pre-auction subset size `M`, with `K <= M <= N`.
    pub subset_size: usize,
}

impl AuctionInstance {
    /// Validates the structural invariants: `K <= M <= N`, unique ad ids,
    /// nonnegative finite bids.
    pub fn validate(&self) -> Result<()> {
        let n = self.ads.len();
        if self.n_slots == 0 || self.n_slots > self.subset_size || self.subset_size > n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= K <= M <= N, got K={} M={} N={}",
                self.n_slots, self.subset_size, n
            )));
        }
        let mut seen = vec![false; n];
        for ad in &self.ads {
            if !ad.bid.is_finite() || ad.bid < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "ad {} has invalid bid {}",
                    ad.ad_id, ad.bid
                )));
            }
            match seen.get_mut(ad.ad_id) {
                Some(s) if !*s => *s = true,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "duplicate or out-of-range ad_id {}",
                        ad.ad_id
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn bids(&self) -> Vec<f64> {
        self.ads.iter().map(|a| a.bid).collect()
    }
}

/// Slot allocation and per-click payments from one GSP run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionOutcome {
    /// `allocation[j]` is the ad at slot `j + 1`; ads not listed lose.
    pub allocation: Vec<usize>,
    /// Per-click price for each allocated slot; zero when no runner-up.
    pub payments_per_click: Vec<f64>,
    /// Expected revenue: sum of runner-up scores over payable slots.
    pub expected_revenue: f64,
}

/// Metric triple for one auction at a given `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Social welfare rate in `[0, 1]`.
    pub swr: f64,
    /// Top-`K` recall in `{0, 1/K, ..., 1}`.
    pub recall: f64,
    /// Revenue rate (can exceed 1 on degenerate instances but is
    /// nonnegative).
    pub revr: f64,
    pub k: usize,
}

/// Sum of the `min(k, |values|)` largest elements; 0 for empty input.
pub fn sum_top_k(values: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("sum_top_k needs k >= 1".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v.iter().take(k).sum())
}

/// Ranking kernel shared by the GSP stage and every selection strategy.
///
/// Returns the permutation of indices ordered by descending score, ties
/// broken by ascending index. NaN scores are rejected.
pub fn rank_by_score(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score in ranking".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(idx)
}

/// Indices of the top-`k` elements by score, index tie-break.
pub fn top_k_set(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    let order = rank_by_score(scores)?;
    Ok(order.into_iter().take(k).collect())
}

/// Runs a GSP auction over `(bids, ctrs)` for `k` slots.
///
/// Slot `j` goes to the ad with the `j`-th highest `bid * ctr`. The slot-`j`
/// winner pays `b_(j+1) * ctr_(j+1) / ctr_(j)` per click — the critical
/// price — or zero when there is no runner-up. A zero-CTR winner can only
/// sit above runner-ups with zero score, so the division is never taken in
/// that case and the payment is zero.
pub fn gsp_run(bids: &[f64], ctrs: &[f64], k: usize) -> Result<AuctionOutcome> {
    if bids.len() != ctrs.len() || bids.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "gsp_run needs equal nonempty bid/ctr lists, got {} and {}",
            bids.len(),
            ctrs.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("gsp_run needs k >= 1".into()));
    }
    if ctrs.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidArgument("ctr outside [0, 1]".into()));
    }
    let scores: Vec<f64> = bids.iter().zip(ctrs).map(|(b, c)| b * c).collect();
    let order = rank_by_score(&scores)?;
    let n_slots = k.min(order.len());

    let mut allocation = Vec::with_capacity(n_slots);
    let mut payments = Vec::with_capacity(n_slots);
    let mut revenue = 0.0;
    for j in 0..n_slots {
        let winner = order[j];
        allocation.push(winner);
        let runner_score = order.get(j + 1).map(|&r| scores[r]).unwrap_or(0.0);
        let price = if runner_score > 0.0 {
            runner_score / ctrs[winner]
        } else {
            0.0
        };
        payments.push(price);
        if order.get(j + 1).is_some() {
            revenue += runner_score;
        }
    }
    Ok(AuctionOutcome {
        allocation,
        payments_per_click: payments,
        expected_revenue: revenue,
    })
}

/// Expected social welfare of the displayed slate: `SumTopK({b_i * ctr_i})`.
pub fn expected_social_welfare(bids: &[f64], ctrs: &[f64], k: usize) -> Result<f64> {
    if bids.len() != ctrs.len() {
        return Err(Error::InvalidArgument(
            "bid/ctr length mismatch".into(),
        ));
    }
    let scores: Vec<f64> = bids.iter().zip(ctrs).map(|(b, c)| b * c).collect();
    sum_top_k(&scores, k)
}

/// Computes `SWr@K`, `Recall@K`, and `REVr@K` for a pre-auction selection
/// against the full candidate set, under one realized refined-CTR vector.
///
/// `selected` holds indices into `bids`/`realized_ctrs`. Both the selected
/// and the full top-`K` sets use the shared ranking kernel, so ties resolve
/// identically everywhere. A zero full-set welfare makes the ratio
/// undefined; the instance is flagged degenerate unless the numerator is
/// also zero, in which case each rate is 1.
pub fn compute_metrics(
    selected: &[usize],
    bids: &[f64],
    realized_ctrs: &[f64],
    k: usize,
) -> Result<MetricsReport> {
    let n = bids.len();
    if realized_ctrs.len() != n {
        return Err(Error::InvalidArgument(
            "bid/ctr length mismatch".into(),
        ));
    }
    if selected.is_empty() || selected.iter().any(|&i| i >= n) {
        return Err(Error::InvalidArgument(
            "selection empty or out of range".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("metrics need k >= 1".into()));
    }
    let scores: Vec<f64> = bids.iter().zip(realized_ctrs).map(|(b, c)| b * c).collect();

    let top_full = top_k_set(&scores, k)?;
    let sel_scores: Vec<f64> = selected.iter().map(|&i| scores[i]).collect();
    let sel_order = rank_by_score(&sel_scores)?;
    let top_sel: Vec<usize> = sel_order.iter().take(k).map(|&j| selected[j]).collect();

    let num: f64 = top_sel.iter().map(|&i| scores[i]).sum();
    let den: f64 = top_full.iter().map(|&i| scores[i]).sum();
    let swr = if den > 0.0 {
        num / den
    } else if num == 0.0 {
        1.0
    } else {
        return Err(Error::Degenerate(
            "full-set top-K welfare is zero but selection welfare is not".into(),
        ));
    };

    let in_full: std::collections::HashSet<usize> = top_full.iter().copied().collect();
    let hits = top_sel.iter().filter(|i| in_full.contains(i)).count();
    let recall = hits as f64 / k as f64;

    // Revenue rate: GSP expected revenue over the selected set vs the full set.
    let sel_bids: Vec<f64> = selected.iter().map(|&i| bids[i]).collect();
    let sel_ctrs: Vec<f64> = selected.iter().map(|&i| realized_ctrs[i]).collect();
    let rev_sel = gsp_run(&sel_bids, &sel_ctrs, k)?.expected_revenue;
    let rev_full = gsp_run(bids, realized_ctrs, k)?.expected_revenue;
    let revr = if rev_full > 0.0 {
        rev_sel / rev_full
    } else if rev_sel == 0.0 {
        1.0
    } else {
        return Err(Error::Degenerate(
            "full-set revenue is zero but selection revenue is not".into(),
        ));
    };

    Ok(MetricsReport {
        swr,
        recall,
        revr,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn sum_top_k_examples() {
        assert_eq!(sum_top_k(&[5.0, 1.0, 3.0], 2).unwrap(), 8.0);
        assert_eq!(sum_top_k(&[], 3).unwrap(), 0.0);
        assert!((sum_top_k(&[0.8, 0.6, 1.5], 2).unwrap() - 2.3).abs() < TOL);
        assert!(sum_top_k(&[1.0], 0).is_err());
    }

    #[test]
    fn rank_by_score_examples() {
        assert_eq!(rank_by_score(&[1.5, 0.8, 0.6]).unwrap(), vec![0, 1, 2]);
        assert_eq!(rank_by_score(&[1.0, 1.0]).unwrap(), vec![0, 1]);
        assert_eq!(rank_by_score(&[0.6, 1.5, 0.8]).unwrap(), vec![1, 2, 0]);
        assert!(rank_by_score(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn gsp_worked_example() {
        // scores 1.5, 0.8, 0.6; p1 = 0.8/0.5, p2 = 0.6/0.4; REV = 0.8 + 0.6
        let out = gsp_run(&[3.0, 2.0, 1.0], &[0.5, 0.4, 0.6], 2).unwrap();
        assert_eq!(out.allocation, vec![0, 1]);
        assert!((out.payments_per_click[0] - 1.6).abs() < TOL);
        assert!((out.payments_per_click[1] - 1.5).abs() < TOL);
        assert!((out.expected_revenue - 1.4).abs() < TOL);
    }

    #[test]
    fn gsp_single_bidder_pays_nothing() {
        let out = gsp_run(&[1.0], &[0.5], 1).unwrap();
        assert_eq!(out.allocation, vec![0]);
        assert_eq!(out.payments_per_click, vec![0.0]);
        assert_eq!(out.expected_revenue, 0.0);
    }

    #[test]
    fn gsp_tied_scores_pay_the_tie() {
        let out = gsp_run(&[2.0, 2.0], &[0.3, 0.3], 1).unwrap();
        assert_eq!(out.allocation, vec![0]);
        assert!((out.payments_per_click[0] - 2.0).abs() < TOL);
        assert!((out.expected_revenue - 0.6).abs() < TOL);
    }

    #[test]
    fn gsp_all_zero_scores_allocates_by_tiebreak_for_free() {
        let out = gsp_run(&[1.0, 2.0], &[0.0, 0.0], 2).unwrap();
        assert_eq!(out.allocation, vec![0, 1]);
        assert_eq!(out.payments_per_click, vec![0.0, 0.0]);
        assert_eq!(out.expected_revenue, 0.0);
    }

    #[test]
    fn welfare_examples() {
        assert!(
            (expected_social_welfare(&[3.0, 2.0, 1.0], &[0.5, 0.4, 0.6], 2).unwrap() - 2.3).abs()
                < TOL
        );
        assert_eq!(expected_social_welfare(&[1.0], &[0.0], 1).unwrap(), 0.0);
        assert!((expected_social_welfare(&[2.0, 2.0], &[0.3, 0.3], 3).unwrap() - 1.2).abs() < TOL);
    }

    #[test]
    fn metrics_worked_example() {
        // N=3 scores (1.5, 0.8, 0.6); selected = ads {0, 2}; K=2.
        let r = compute_metrics(&[0, 2], &[3.0, 2.0, 1.0], &[0.5, 0.4, 0.6], 2).unwrap();
        assert!((r.swr - 2.1 / 2.3).abs() < 1e-9);
        assert!((r.recall - 0.5).abs() < TOL);
    }

    #[test]
    fn metrics_identity_selection_is_perfect() {
        let bids = [1.0, 2.0, 0.5, 1.5];
        let ctrs = [0.3, 0.2, 0.9, 0.1];
        let r = compute_metrics(&[0, 1, 2, 3], &bids, &ctrs, 2).unwrap();
        assert!((r.swr - 1.0).abs() < TOL);
        assert!((r.recall - 1.0).abs() < TOL);
        assert!((r.revr - 1.0).abs() < TOL);
    }

    #[test]
    fn metrics_disjoint_selection_has_zero_recall() {
        let r = compute_metrics(&[2, 3], &[1.0; 4], &[0.9, 0.8, 0.1, 0.2], 2).unwrap();
        assert_eq!(r.recall, 0.0);
    }

    #[test]
    fn metrics_degenerate_denominator() {
        let r = compute_metrics(&[0], &[1.0, 1.0], &[0.0, 0.0], 1).unwrap();
        assert_eq!(r.swr, 1.0);
        assert_eq!(r.revr, 1.0);
    }

    #[test]
    fn payments_satisfy_critical_price_identity_and_ir() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(1..8);
            let bids: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            let ctrs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let k = rng.gen_range(1..5);
            let out = gsp_run(&bids, &ctrs, k).unwrap();
            let scores: Vec<f64> = bids.iter().zip(&ctrs).map(|(b, c)| b * c).collect();
            let order = rank_by_score(&scores).unwrap();
            for (j, &w) in out.allocation.iter().enumerate() {
                assert!(out.payments_per_click[j] <= bids[w] + TOL, "IR violated");
                let runner = order.get(j + 1).map(|&r| scores[r]).unwrap_or(0.0);
                assert!(
                    (out.payments_per_click[j] * ctrs[w] - if runner > 0.0 { runner } else { 0.0 })
                        .abs()
                        < TOL
                );
            }
        }
    }

    proptest! {
        #[test]
        fn sum_top_k_is_monotone_in_elements(
            mut v in proptest::collection::vec(0.0f64..10.0, 0..12),
            x in 0.0f64..10.0,
            k in 1usize..6,
        ) {
            let before = sum_top_k(&v, k).unwrap();
            v.push(x);
            let after = sum_top_k(&v, k).unwrap();
            prop_assert!(after >= before - 1e-12);
        }

        #[test]
        fn ranking_is_permutation_equivariant_for_distinct_scores(
            scores in proptest::collection::hash_set(0u32..1_000_000, 2..10),
        ) {
            let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 1e4).collect();
            let order = rank_by_score(&scores).unwrap();
            // rotate the input; the ranked values must match up.
            let mut rotated = scores.clone();
            rotated.rotate_left(1);
            let order_rot = rank_by_score(&rotated).unwrap();
            let ranked: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
            let ranked_rot: Vec<f64> = order_rot.iter().map(|&i| rotated[i]).collect();
            prop_assert_eq!(ranked, ranked_rot);
        }

        #[test]
        fn raising_a_bid_never_lowers_the_slot(
            bids in proptest::collection::vec(0.01f64..5.0, 2..7),
            ctrs_raw in proptest::collection::vec(0.01f64..1.0, 2..7),
            which in 0usize..7,
            factor in 1.0f64..10.0,
        ) {
            let n = bids.len().min(ctrs_raw.len());
            let bids = &bids[..n];
            let ctrs = &ctrs_raw[..n];
            let i = which % n;
            let slot_of = |bids: &[f64]| -> Option<usize> {
                let out = gsp_run(bids, ctrs, n).unwrap();
                out.allocation.iter().position(|&a| a == i)
            };
            let before = slot_of(bids).unwrap();
            let mut raised = bids.to_vec();
            raised[i] *= factor;
            let after = slot_of(&raised).unwrap();
            prop_assert!(after <= before);
        }
    }
}
