//! Plackett-Luce permutation probabilities.
//!
//! A positive score vector `y` induces a distribution over the `N!`
//! rankings: position by position, item `i` is drawn with probability
//! proportional to `y_i` among the remaining items. The listwise training
//! loss matches the top-1 marginal of this model; the exhaustive top-`K`
//! marginals here exist to certify its order-consistency at desk scale.

use crate::error::Error;
use crate::Result;

/// Exhaustive permutation enumeration is capped at this many items.
pub const MAX_PL_ITEMS: usize = 8;

fn check_positive(y: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty score vector".into()));
    }
    if y.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidArgument(
            "Plackett-Luce scores must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// Probability of drawing exactly the ranking `perm` (a bijection on
/// `0..N`, best first) under scores `y`.
pub fn pl_permutation_prob(perm: &[usize], y: &[f64]) -> Result<f64> {
    check_positive(y)?;
    let n = y.len();
    let mut seen = vec![false; n];
    for &i in perm {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument("perm is not a bijection".into()));
        }
        seen[i] = true;
    }
    if perm.len() != n {
        return Err(Error::InvalidArgument("perm length mismatch".into()));
    }
    let mut remaining: f64 = y.iter().sum();
    let mut prob = 1.0;
    for &i in perm {
        prob *= y[i] / remaining;
        remaining -= y[i];
    }
    Ok(prob)
}

/// Top-1 marginal: `y_i / sum(y)`.
pub fn pl_top1(y: &[f64]) -> Result<Vec<f64>> {
    check_positive(y)?;
    let total: f64 = y.iter().sum();
    Ok(y.iter().map(|v| v / total).collect())
}

/// Probability that each item lands in the first `k` positions, by
/// exhaustive enumeration of all `N!` rankings.
pub fn pl_prob_in_topk(y: &[f64], k: usize) -> Result<Vec<f64>> {
    check_positive(y)?;
    let n = y.len();
    if n > MAX_PL_ITEMS {
        return Err(Error::TooLarge(format!(
            "{n} items need {n}! permutations; bound is {MAX_PL_ITEMS}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut probs = vec![0.0; n];
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm, accumulating each permutation's mass on its top-k
    let mut c = vec![0usize; n];
    let account = |perm: &[usize], probs: &mut [f64]| {
        let p = pl_permutation_prob(perm, y).expect("validated");
        for &i in perm.iter().take(k) {
            probs[i] += p;
        }
    };
    account(&perm, &mut probs);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            account(&perm, &mut probs);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn permutation_prob_two_items() {
        let y = [3.0, 1.0];
        assert!((pl_permutation_prob(&[0, 1], &y).unwrap() - 0.75).abs() < TOL);
        assert!((pl_permutation_prob(&[1, 0], &y).unwrap() - 0.25).abs() < TOL);
    }

    #[test]
    fn uniform_scores_make_uniform_permutations() {
        let y = [2.0; 4];
        let p = pl_permutation_prob(&[2, 0, 3, 1], &y).unwrap();
        assert!((p - 1.0 / 24.0).abs() < TOL);
    }

    #[test]
    fn single_item_is_certain() {
        assert!((pl_permutation_prob(&[0], &[5.0]).unwrap() - 1.0).abs() < TOL);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pl_permutation_prob(&[0, 1], &[1.0, -1.0]).is_err());
        assert!(pl_permutation_prob(&[0, 0], &[1.0, 1.0]).is_err());
        assert!(pl_top1(&[0.0, 1.0]).is_err());
        assert!(pl_prob_in_topk(&[1.0; 9], 2).is_err());
    }

    #[test]
    fn top1_examples() {
        assert_eq!(pl_top1(&[2.0, 1.0, 1.0]).unwrap(), vec![0.5, 0.25, 0.25]);
        assert_eq!(pl_top1(&[1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn topk_321_frozen_values() {
        // exhaustive 6-permutation enumeration gives 51/60, 44/60, 25/60
        let p = pl_prob_in_topk(&[3.0, 2.0, 1.0], 2).unwrap();
        assert!((p[0] - 51.0 / 60.0).abs() < TOL);
        assert!((p[1] - 44.0 / 60.0).abs() < TOL);
        assert!((p[2] - 25.0 / 60.0).abs() < TOL);
    }

    #[test]
    fn topk_boundaries() {
        let y = [1.5, 0.4, 2.0];
        let all = pl_prob_in_topk(&y, 3).unwrap();
        assert!(all.iter().all(|&p| (p - 1.0).abs() < TOL));
        let one = pl_prob_in_topk(&y, 1).unwrap();
        let top1 = pl_top1(&y).unwrap();
        for (a, b) in one.iter().zip(&top1) {
            assert!((a - b).abs() < TOL);
        }
    }

    proptest! {
        #[test]
        fn permutation_probs_normalize(
            y in proptest::collection::vec(0.05f64..5.0, 1..6),
        ) {
            // sum over all permutations via the top-N marginal of any item
            let n = y.len();
            let p = pl_prob_in_topk(&y, n).unwrap();
            prop_assert!((p[0] - 1.0).abs() < 1e-9);
        }

        #[test]
        fn higher_scores_get_higher_topk_probability(
            raw in proptest::collection::hash_set(1u32..10_000, 3..7),
            k in 2usize..5,
        ) {
            let y: Vec<f64> = raw.into_iter().map(|v| v as f64 / 100.0).collect();
            let n = y.len();
            let k = k.min(n - 1);
            let p = pl_prob_in_topk(&y, k).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if y[i] > y[j] {
                        prop_assert!(p[i] > p[j]);
                    }
                }
            }
        }
    }
}
