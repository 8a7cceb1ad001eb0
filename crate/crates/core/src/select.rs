//! Pre-auction subset selection.
//!
//! Strategies score every ad and keep the top `M`; the scores are retained
//! so perturbation tests can replay them. Exact operations enumerate the
//! joint CTR outcome space and fail loudly past their bounds instead of
//! silently degrading; Monte Carlo variants cover the rest.

use rand::Rng;

use crate::auction::{rank_by_score, sum_top_k, top_k_set};
use crate::env::SimpaInstance;
use crate::error::Error;
use crate::Result;

/// Hard bound on enumerated outcome rows.
pub const MAX_OUTCOMES: usize = 1_000_000;
/// Hard bound on enumerated subsets in the brute-force oracle.
pub const MAX_SUBSETS: usize = 100_000;

/// A pre-auction allocation: the chosen ads in rank order plus the scores
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Top `min(M, N)` ad indices in descending score order.
    pub selected: Vec<usize>,
    /// Score per ad over all `N` ads.
    pub scores: Vec<f64>,
    pub strategy_name: String,
}

/// Per-ad probability of ending up among the final top `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PasScores {
    pub probs: Vec<f64>,
}

/// Shared adapter turning any ad-wise metric into a pre-auction allocation:
/// top `M` by score, ties by ascending index.
pub fn select_by_scores(scores: &[f64], m: usize, strategy_name: &str) -> Result<SelectionResult> {
    let order = rank_by_score(scores)?;
    Ok(SelectionResult {
        selected: order.into_iter().take(m).collect(),
        scores: scores.to_vec(),
        strategy_name: strategy_name.to_string(),
    })
}

/// Greedy baseline: rank by `bid * coarse_ctr` and keep the top `M`.
pub fn select_gdy(bids: &[f64], coarse_ctrs: &[f64], m: usize) -> Result<SelectionResult> {
    if bids.len() != coarse_ctrs.len() {
        return Err(Error::InvalidArgument(
            "bids/coarse_ctrs length mismatch".into(),
        ));
    }
    let scores: Vec<f64> = bids.iter().zip(coarse_ctrs).map(|(b, c)| b * c).collect();
    select_by_scores(&scores, m, "gdy")
}

/// Enumerates the joint outcome space as `(probability, value per ad)` rows,
/// with values `b_i * ctr_i`.
pub fn enumerate_outcomes(inst: &SimpaInstance) -> Result<Vec<(f64, Vec<f64>)>> {
    inst.validate()?;
    let n = inst.n_ads();
    if let Some(joint) = &inst.joint {
        if joint.rows.len() > MAX_OUTCOMES {
            return Err(Error::TooLarge(format!(
                "joint table has {} rows (bound {MAX_OUTCOMES}); use the Monte Carlo path",
                joint.rows.len()
            )));
        }
        return Ok(joint
            .rows
            .iter()
            .map(|(p, ctrs)| {
                let values = ctrs.iter().zip(&inst.bids).map(|(c, b)| b * c).collect();
                (*p, values)
            })
            .collect());
    }
    let mut total: usize = 1;
    for d in &inst.dists {
        total = total.saturating_mul(d.support().len());
        if total > MAX_OUTCOMES {
            return Err(Error::TooLarge(format!(
                "outcome space exceeds {MAX_OUTCOMES}; use pas_monte_carlo / the MC objective"
            )));
        }
    }
    let mut rows = Vec::with_capacity(total);
    let mut counter = vec![0usize; n];
    loop {
        let mut prob = 1.0;
        let mut values = Vec::with_capacity(n);
        for (i, d) in inst.dists.iter().enumerate() {
            let (v, p) = d.support()[counter[i]];
            prob *= p;
            values.push(inst.bids[i] * v);
        }
        rows.push((prob, values));
        // mixed-radix increment
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(rows);
            }
            counter[pos] += 1;
            if counter[pos] < inst.dists[pos].support().len() {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact per-ad probability of membership in the realized top `K`, by full
/// outcome enumeration. Ties inside an outcome break by ad index.
pub fn pas_exact(inst: &SimpaInstance) -> Result<PasScores> {
    let rows = enumerate_outcomes(inst)?;
    let n = inst.n_ads();
    let mut probs = vec![0.0; n];
    for (p, values) in &rows {
        for i in top_k_set(values, inst.n_slots)? {
            probs[i] += p;
        }
    }
    Ok(PasScores { probs })
}

/// Monte Carlo estimate of the top-`K` membership probabilities for
/// independent instances. Standard error per entry is at most
/// `0.5 / sqrt(n_samples)`.
pub fn pas_monte_carlo<R: Rng>(
    inst: &SimpaInstance,
    n_samples: usize,
    rng: &mut R,
) -> Result<PasScores> {
    inst.validate()?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    if inst.joint.is_some() {
        return Err(Error::InvalidArgument(
            "pas_monte_carlo requires independent distributions".into(),
        ));
    }
    let n = inst.n_ads();
    let mut counts = vec![0usize; n];
    for _ in 0..n_samples {
        let ctrs = inst.sample(rng);
        let values: Vec<f64> = ctrs.iter().zip(&inst.bids).map(|(c, b)| b * c).collect();
        for i in top_k_set(&values, inst.n_slots)? {
            counts[i] += 1;
        }
    }
    Ok(PasScores {
        probs: counts.iter().map(|&c| c as f64 / n_samples as f64).collect(),
    })
}

fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n || seen[i] {
            return Err(Error::InvalidArgument(format!(
                "subset member {i} out of range or repeated"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}

fn objective_over_rows(rows: &[(f64, Vec<f64>)], subset: &[usize], k: usize) -> f64 {
    let mut buf = Vec::with_capacity(subset.len());
    let mut total = 0.0;
    for (p, values) in rows {
        buf.clear();
        buf.extend(subset.iter().map(|&i| values[i]));
        total += p * sum_top_k(&buf, k).expect("k >= 1 validated");
    }
    total
}

/// Expected `SumTopK` of the subset's values, by exact enumeration.
pub fn simpa_objective(subset: &[usize], inst: &SimpaInstance) -> Result<f64> {
    check_subset(subset, inst.n_ads())?;
    if subset.is_empty() {
        return Ok(0.0);
    }
    let rows = enumerate_outcomes(inst)?;
    Ok(objective_over_rows(&rows, subset, inst.n_slots))
}

/// Monte Carlo estimate of the subset objective with its standard error.
pub fn simpa_objective_mc<R: Rng>(
    subset: &[usize],
    inst: &SimpaInstance,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_subset(subset, inst.n_ads())?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
    }
    if subset.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut draws = Vec::with_capacity(n_samples);
    let mut buf = Vec::with_capacity(subset.len());
    for _ in 0..n_samples {
        let ctrs = inst.sample(rng);
        buf.clear();
        buf.extend(subset.iter().map(|&i| inst.bids[i] * ctrs[i]));
        draws.push(sum_top_k(&buf, inst.n_slots)?);
    }
    let mean = draws.iter().sum::<f64>() / n_samples as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>()
        / (n_samples.max(2) - 1) as f64;
    Ok((mean, (var / n_samples as f64).sqrt()))
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Exhaustive maximizer of the subset objective over all size-`M` subsets.
/// Ties resolve to the lexicographically smallest subset.
pub fn brute_force_optimal_subset(inst: &SimpaInstance) -> Result<(Vec<usize>, f64)> {
    inst.validate()?;
    let n = inst.n_ads();
    let m = inst.subset_size.min(n);
    if m == 0 {
        return Ok((Vec::new(), 0.0));
    }
    if binomial(n, m) > MAX_SUBSETS {
        return Err(Error::TooLarge(format!(
            "C({n}, {m}) subsets exceed the bound {MAX_SUBSETS}"
        )));
    }
    let rows = enumerate_outcomes(inst)?;
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        let obj = objective_over_rows(&rows, &subset, inst.n_slots);
        match &best {
            Some((_, b)) if *b >= obj => {}
            _ => best = Some((subset.clone(), obj)),
        }
        // next lexicographic combination
        let mut i = m;
        loop {
            if i == 0 {
                let (sel, obj) = best.expect("at least one subset evaluated");
                return Ok((sel, obj));
            }
            i -= 1;
            if subset[i] != i + n - m {
                subset[i] += 1;
                for j in i + 1..m {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Objective evaluator backing the lazy-greedy search: either the exact
/// enumerated table or a fixed panel of common random realizations (each
/// panel member weighted equally), which keeps the estimated objective
/// submodular so lazy pruning stays sound.
enum Evaluator {
    Exact(Vec<(f64, Vec<f64>)>),
    Panel(Vec<Vec<f64>>),
}

impl Evaluator {
    fn objective(&self, subset: &[usize], k: usize) -> f64 {
        match self {
            Evaluator::Exact(rows) => objective_over_rows(rows, subset, k),
            Evaluator::Panel(panel) => {
                let mut buf = Vec::with_capacity(subset.len());
                let mut total = 0.0;
                for values in panel {
                    buf.clear();
                    buf.extend(subset.iter().map(|&i| values[i]));
                    total += sum_top_k(&buf, k).expect("k >= 1 validated");
                }
                total / panel.len() as f64
            }
        }
    }
}

fn lazy_greedy_core(inst: &SimpaInstance, eval: &Evaluator) -> (Vec<usize>, f64) {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Entry {
        gain: f64,
        idx: Reverse<usize>,
        round: usize,
    }
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.gain
                .total_cmp(&other.gain)
                .then(self.idx.cmp(&other.idx))
        }
    }

    let n = inst.n_ads();
    let m = inst.subset_size.min(n);
    let k = inst.n_slots;
    let mut heap: BinaryHeap<Entry> = (0..n)
        .map(|i| Entry {
            gain: eval.objective(&[i], k),
            idx: Reverse(i),
            round: 0,
        })
        .collect();
    let mut selected: Vec<usize> = Vec::with_capacity(m);
    let mut best_obj = 0.0;
    for _ in 0..m {
        loop {
            let top = match heap.pop() {
                Some(t) => t,
                None => return (selected, best_obj),
            };
            // an entry is fresh iff its gain was computed against the
            // current selected set
            if top.round == selected.len() {
                selected.push(top.idx.0);
                best_obj += top.gain;
                break;
            }
            let mut candidate = selected.clone();
            candidate.push(top.idx.0);
            let gain = eval.objective(&candidate, k) - best_obj;
            heap.push(Entry {
                gain,
                idx: top.idx,
                round: selected.len(),
            });
        }
    }
    // recompute the final objective directly to avoid accumulated drift
    let obj = eval.objective(&selected, k);
    (selected, obj)
}

/// Lazy-greedy subset maximization over the exact enumerated objective.
///
/// Diminishing returns of the objective justify the stale-bound pruning;
/// ties break by ad index.
pub fn lazy_greedy_subset(inst: &SimpaInstance) -> Result<(Vec<usize>, f64)> {
    let rows = enumerate_outcomes(inst)?;
    Ok(lazy_greedy_core(inst, &Evaluator::Exact(rows)))
}

/// Lazy-greedy over a Monte Carlo objective with common random numbers: one
/// realization panel is drawn up front and reused for every evaluation.
pub fn lazy_greedy_subset_mc<R: Rng>(
    inst: &SimpaInstance,
    panel_size: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, f64)> {
    inst.validate()?;
    if panel_size == 0 {
        return Err(Error::InvalidArgument("panel_size must be >= 1".into()));
    }
    let panel: Vec<Vec<f64>> = (0..panel_size)
        .map(|_| {
            let ctrs = inst.sample(rng);
            ctrs.iter().zip(&inst.bids).map(|(c, b)| b * c).collect()
        })
        .collect();
    Ok(lazy_greedy_core(inst, &Evaluator::Panel(panel)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_example1, set_cover_to_simpa, CtrDistribution};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    fn two_ad_instance() -> SimpaInstance {
        // ad0: b=1, deterministic ctr 0.5; ad1: b=1, ctr {0.9 w.p. 0.4, 0.1 w.p. 0.6}
        SimpaInstance::independent(
            vec![1.0, 1.0],
            vec![
                CtrDistribution::deterministic(0.5).unwrap(),
                CtrDistribution::new(vec![(0.9, 0.4), (0.1, 0.6)]).unwrap(),
            ],
            1,
            1,
        )
        .unwrap()
    }

    /// Random small independent instance for oracle cross-checks.
    pub(crate) fn random_instance<R: Rng>(
        rng: &mut R,
        max_n: usize,
        max_support: usize,
        m: Option<usize>,
        max_k: usize,
    ) -> SimpaInstance {
        let n = rng.gen_range(2..=max_n);
        let k = rng.gen_range(1..=max_k.min(n));
        let m = m.unwrap_or_else(|| rng.gen_range(k..=n)).min(n);
        let bids: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let dists = (0..n)
            .map(|_| {
                let s = rng.gen_range(1..=max_support);
                let mut vals: Vec<f64> = Vec::new();
                while vals.len() < s {
                    let v: f64 = rng.gen();
                    if !vals.contains(&v) {
                        vals.push(v);
                    }
                }
                let mut probs: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= total);
                CtrDistribution::new(vals.into_iter().zip(probs).collect()).unwrap()
            })
            .collect();
        SimpaInstance::independent(bids, dists, m, k).unwrap()
    }

    #[test]
    fn pas_exact_two_ads() {
        let scores = pas_exact(&two_ad_instance()).unwrap();
        assert!((scores.probs[0] - 0.6).abs() < TOL);
        assert!((scores.probs[1] - 0.4).abs() < TOL);
    }

    #[test]
    fn pas_exact_k_equals_n_is_all_ones() {
        let mut inst = two_ad_instance();
        inst.n_slots = 2;
        let scores = pas_exact(&inst).unwrap();
        assert!(scores.probs.iter().all(|&p| (p - 1.0).abs() < TOL));
    }

    #[test]
    fn pas_exact_deterministic_is_indicator() {
        let inst = SimpaInstance::independent(
            vec![1.0, 1.0, 1.0],
            vec![
                CtrDistribution::deterministic(0.9).unwrap(),
                CtrDistribution::deterministic(0.5).unwrap(),
                CtrDistribution::deterministic(0.7).unwrap(),
            ],
            2,
            2,
        )
        .unwrap();
        let scores = pas_exact(&inst).unwrap();
        assert_eq!(scores.probs, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn pas_exact_rejects_oversized_state_space() {
        let n = 25;
        let dist = CtrDistribution::new(vec![(0.2, 0.5), (0.8, 0.5)]).unwrap();
        let inst =
            SimpaInstance::independent(vec![1.0; n], vec![dist; n], 5, 2).unwrap();
        assert!(matches!(pas_exact(&inst), Err(Error::TooLarge(_))));
    }

    #[test]
    fn pas_monte_carlo_on_deterministic_instance_is_indicator() {
        let inst = SimpaInstance::independent(
            vec![1.0, 1.0, 1.0],
            vec![
                CtrDistribution::deterministic(0.2).unwrap(),
                CtrDistribution::deterministic(0.9).unwrap(),
                CtrDistribution::deterministic(0.5).unwrap(),
            ],
            2,
            1,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mc = pas_monte_carlo(&inst, 7, &mut rng).unwrap();
        assert_eq!(mc.probs, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn pas_monte_carlo_matches_exact() {
        let inst = two_ad_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mc = pas_monte_carlo(&inst, 100_000, &mut rng).unwrap();
        assert!((mc.probs[0] - 0.6).abs() < 0.01);
        assert!((mc.probs[1] - 0.4).abs() < 0.01);
        // determinism
        let mut rng2 = ChaCha8Rng::seed_from_u64(17);
        let mc2 = pas_monte_carlo(&inst, 100_000, &mut rng2).unwrap();
        assert_eq!(mc.probs, mc2.probs);
        assert!(pas_monte_carlo(&inst, 0, &mut rng).is_err());
    }

    #[test]
    fn simpa_objective_example1_values() {
        let inst = generate_example1(3, 2, 1, 10.0).unwrap();
        assert!((simpa_objective(&[0, 2], &inst).unwrap() - 1.9).abs() < TOL);
        assert!((simpa_objective(&[0, 1], &inst).unwrap() - 1.0).abs() < TOL);
        assert_eq!(simpa_objective(&[], &inst).unwrap(), 0.0);
    }

    #[test]
    fn brute_force_finds_the_gamble() {
        let inst = generate_example1(3, 2, 1, 10.0).unwrap();
        let (subset, obj) = brute_force_optimal_subset(&inst).unwrap();
        assert_eq!(subset, vec![0, 2]);
        assert!((obj - 1.9).abs() < TOL);
    }

    #[test]
    fn gdy_misses_the_gamble_on_example1() {
        let inst = generate_example1(3, 2, 1, 10.0).unwrap();
        let sel = select_gdy(&inst.bids, &inst.coarse_ctrs(), inst.subset_size).unwrap();
        assert_eq!(sel.selected, vec![0, 1]);
        let gdy_obj = simpa_objective(&sel.selected, &inst).unwrap();
        assert!((gdy_obj - 1.0).abs() < TOL);
    }

    #[test]
    fn gdy_trivial_cases() {
        // M = N selects everything
        let sel = select_gdy(&[1.0, 2.0], &[0.5, 0.5], 2).unwrap();
        assert_eq!(sel.selected.len(), 2);
        // equal coarse ctrs reduce to top-M bids
        let sel = select_gdy(&[0.3, 0.9, 0.5], &[0.2, 0.2, 0.2], 2).unwrap();
        assert_eq!(sel.selected, vec![1, 2]);
    }

    #[test]
    fn select_by_scores_examples() {
        assert_eq!(select_by_scores(&[0.6, 0.4], 1, "pas").unwrap().selected, vec![0]);
        assert_eq!(
            select_by_scores(&[0.5, 0.5, 0.5], 2, "x").unwrap().selected,
            vec![0, 1]
        );
        assert_eq!(
            select_by_scores(&[0.1, 0.9, 0.5], 2, "x").unwrap().selected,
            vec![1, 2]
        );
    }

    #[test]
    fn brute_force_on_deterministic_instance_is_topm() {
        let inst = SimpaInstance::independent(
            vec![1.0, 1.0, 1.0, 1.0],
            vec![
                CtrDistribution::deterministic(0.1).unwrap(),
                CtrDistribution::deterministic(0.9).unwrap(),
                CtrDistribution::deterministic(0.5).unwrap(),
                CtrDistribution::deterministic(0.7).unwrap(),
            ],
            2,
            2,
        )
        .unwrap();
        let (subset, obj) = brute_force_optimal_subset(&inst).unwrap();
        assert_eq!(subset, vec![1, 3]);
        assert!((obj - 1.6).abs() < TOL);
    }

    #[test]
    fn set_cover_objective_values() {
        let feasible = set_cover_to_simpa(2, &[vec![0], vec![1]], 2).unwrap();
        let (_, obj) = brute_force_optimal_subset(&feasible).unwrap();
        assert!((obj - 1.0).abs() < TOL);

        let infeasible = set_cover_to_simpa(2, &[vec![0], vec![0]], 2).unwrap();
        let (_, obj) = brute_force_optimal_subset(&infeasible).unwrap();
        assert!(obj < 1.0 - TOL);

        let empty = set_cover_to_simpa(2, &[vec![0], vec![1]], 0).unwrap();
        let (sel, obj) = brute_force_optimal_subset(&empty).unwrap();
        assert!(sel.is_empty());
        assert_eq!(obj, 0.0);
    }

    #[test]
    fn lazy_greedy_on_example1() {
        let inst = generate_example1(3, 2, 1, 10.0).unwrap();
        let (subset, obj) = lazy_greedy_subset(&inst).unwrap();
        assert_eq!(subset, vec![0, 2]);
        assert!((obj - 1.9).abs() < TOL);
    }

    #[test]
    fn lazy_greedy_m_equals_n_takes_everything() {
        let mut inst = two_ad_instance();
        inst.subset_size = 2;
        let (subset, obj) = lazy_greedy_subset(&inst).unwrap();
        assert_eq!(subset.len(), 2);
        let full = simpa_objective(&[0, 1], &inst).unwrap();
        assert!((obj - full).abs() < TOL);
    }

    #[test]
    fn lazy_greedy_matches_brute_force_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let inst = random_instance(&mut rng, 6, 3, None, 3);
            let (_, best) = brute_force_optimal_subset(&inst).unwrap();
            let (_, greedy) = lazy_greedy_subset(&inst).unwrap();
            assert!(
                greedy >= (1.0 - 1.0 / std::f64::consts::E) * best - 1e-9,
                "greedy {greedy} vs best {best}"
            );
        }
    }

    #[test]
    fn lazy_greedy_mc_uses_common_random_numbers_deterministically() {
        let inst = generate_example1(4, 2, 1, 10.0).unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            lazy_greedy_subset_mc(&inst, 512, &mut rng).unwrap()
        };
        assert_eq!(run(3).0, run(3).0);
    }

    #[test]
    fn expected_recall_identity() {
        // E[|S ∩ topK|] enumerated directly equals the sum of PAS entries.
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for _ in 0..50 {
            let inst = random_instance(&mut rng, 6, 3, None, 2);
            let n = inst.n_ads();
            let subset: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if subset.is_empty() {
                continue;
            }
            let pas = pas_exact(&inst).unwrap();
            let direct: f64 = enumerate_outcomes(&inst)
                .unwrap()
                .iter()
                .map(|(p, values)| {
                    let topk = top_k_set(values, inst.n_slots).unwrap();
                    p * subset.iter().filter(|i| topk.contains(i)).count() as f64
                })
                .sum();
            let via_pas: f64 = subset.iter().map(|&i| pas.probs[i]).sum();
            assert!((direct - via_pas).abs() < TOL);
        }
    }

    #[test]
    fn objective_is_monotone_and_submodular() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..30 {
            let inst = random_instance(&mut rng, 5, 2, None, 2);
            let n = inst.n_ads();
            let rows = enumerate_outcomes(&inst).unwrap();
            let obj: Vec<f64> = (0..1usize << n)
                .map(|mask| {
                    let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                    objective_over_rows(&rows, &subset, inst.n_slots)
                })
                .collect();
            for t_mask in 0..1usize << n {
                // monotone: adding any j never decreases
                for j in 0..n {
                    if t_mask >> j & 1 == 1 {
                        continue;
                    }
                    assert!(obj[t_mask | 1 << j] >= obj[t_mask] - 1e-9);
                }
                // submodular: marginal gains shrink on supersets
                let mut s_mask = t_mask;
                loop {
                    for j in 0..n {
                        if t_mask >> j & 1 == 1 {
                            continue;
                        }
                        let gain_s = obj[s_mask | 1 << j] - obj[s_mask];
                        let gain_t = obj[t_mask | 1 << j] - obj[t_mask];
                        assert!(gain_s >= gain_t - 1e-9);
                    }
                    if s_mask == 0 {
                        break;
                    }
                    s_mask = (s_mask - 1) & t_mask;
                }
            }
        }
    }

    #[test]
    fn pas_is_monotone_in_own_bid() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 5, 3, None, 2);
            let ad = rng.gen_range(0..inst.n_ads());
            let mut prev = -1.0;
            for step in 0..8 {
                let mut bumped = inst.clone();
                bumped.bids[ad] *= 0.25 * (step + 1) as f64;
                let p = pas_exact(&bumped).unwrap().probs[ad];
                assert!(p >= prev - TOL, "PAS dropped as bid rose");
                prev = p;
            }
        }
    }

    #[test]
    fn gdy_is_optimal_when_m_equals_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..40 {
            let inst = random_instance(&mut rng, 6, 3, None, 3);
            let mut inst = inst;
            inst.subset_size = inst.n_slots;
            let sel = select_gdy(&inst.bids, &inst.coarse_ctrs(), inst.subset_size).unwrap();
            let gdy_obj = simpa_objective(&sel.selected, &inst).unwrap();
            let (_, best) = brute_force_optimal_subset(&inst).unwrap();
            assert!((gdy_obj - best).abs() < TOL, "gdy {gdy_obj} vs best {best}");
        }
    }
}
