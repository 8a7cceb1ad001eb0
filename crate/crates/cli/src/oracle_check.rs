//! Desk-scale verification suite behind `twostage oracle-check`.
//!
//! Each check cross-validates an analytic claim against an independent
//! brute-force computation on instances small enough to enumerate. The
//! command prints one line per check and exits nonzero if any fails.

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twostage::auction::{gsp_run, sum_top_k, top_k_set};
use twostage::env::{
    generate_auction, generate_example1, sample_realization, set_cover_to_simpa, CtrDistribution,
    EnvConfig, SimpaInstance,
};
use twostage::ic::verify_gsp_conditions;
use twostage::pl::{pl_prob_in_topk, pl_top1};
use twostage::select::{
    brute_force_optimal_subset, enumerate_outcomes, lazy_greedy_subset, pas_exact, select_gdy,
    simpa_objective,
};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_instance(rng: &mut ChaCha8Rng, max_n: usize, max_support: usize) -> SimpaInstance {
    let n = rng.gen_range(2..=max_n);
    let k = rng.gen_range(1..=2usize.min(n));
    let m = rng.gen_range(k..=n);
    let bids: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
    let dists: Vec<CtrDistribution> = (0..n)
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

pub fn run_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // PAS top-M selection maximizes expected recall (exhaustive cross-check)
    {
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for _ in 0..40 {
            let inst = random_instance(&mut rng, 7, 3);
            let pas = pas_exact(&inst)?;
            let rows = enumerate_outcomes(&inst)?;
            let n = inst.n_ads();
            let m = inst.subset_size.min(n);
            let direct_recall = |subset: &[usize]| -> f64 {
                rows.iter()
                    .map(|(p, values)| {
                        let topk = top_k_set(values, inst.n_slots).unwrap();
                        p * subset.iter().filter(|i| topk.contains(i)).count() as f64
                    })
                    .sum()
            };
            let mut best = 0.0f64;
            for mask in 0..1usize << n {
                let subset: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                if subset.len() == m {
                    best = best.max(direct_recall(&subset));
                }
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| pas.probs[b].total_cmp(&pas.probs[a]).then(a.cmp(&b)));
            let by_pas = direct_recall(&order[..m]);
            worst = worst.max((best - by_pas).abs());
            ok &= (best - by_pas).abs() < 1e-12;
        }
        checks.push(Check {
            name: "pas-recall-optimality",
            passed: ok,
            detail: format!("max |gap| = {worst:.2e} over 40 instances"),
        });
    }

    // expected-recall identity: E[|S ∩ topK|] = sum of PAS over S
    {
        let mut worst: f64 = 0.0;
        for _ in 0..40 {
            let inst = random_instance(&mut rng, 7, 3);
            let n = inst.n_ads();
            let subset: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if subset.is_empty() {
                continue;
            }
            let pas = pas_exact(&inst)?;
            let rows = enumerate_outcomes(&inst)?;
            let direct: f64 = rows
                .iter()
                .map(|(p, values)| {
                    let topk = top_k_set(values, inst.n_slots).unwrap();
                    p * subset.iter().filter(|i| topk.contains(i)).count() as f64
                })
                .sum();
            let via: f64 = subset.iter().map(|&i| pas.probs[i]).sum();
            worst = worst.max((direct - via).abs());
        }
        checks.push(Check {
            name: "expected-recall-identity",
            passed: worst < 1e-12,
            detail: format!("max |delta| = {worst:.2e}"),
        });
    }

    // submodularity + lazy-greedy guarantee
    {
        let mut ok = true;
        let mut worst_ratio = f64::INFINITY;
        for _ in 0..25 {
            let inst = random_instance(&mut rng, 6, 2);
            let (_, best) = brute_force_optimal_subset(&inst)?;
            let (_, greedy) = lazy_greedy_subset(&inst)?;
            if best > 1e-12 {
                worst_ratio = worst_ratio.min(greedy / best);
            }
            ok &= greedy >= (1.0 - 1.0 / std::f64::consts::E) * best - 1e-9;
        }
        checks.push(Check {
            name: "lazy-greedy-guarantee",
            passed: ok,
            detail: format!("worst greedy/optimal = {worst_ratio:.4}"),
        });
    }

    // set-cover reduction fidelity on all tiny instances
    {
        let (ok, tested) = set_cover_fidelity()?;
        checks.push(Check {
            name: "set-cover-reduction",
            passed: ok,
            detail: format!("{tested} instances cross-checked"),
        });
    }

    // Plackett-Luce frozen values and order consistency
    {
        let p = pl_prob_in_topk(&[3.0, 2.0, 1.0], 2)?;
        let frozen = (p[0] - 51.0 / 60.0).abs() < 1e-12
            && (p[1] - 44.0 / 60.0).abs() < 1e-12
            && (p[2] - 25.0 / 60.0).abs() < 1e-12;
        let mut order_ok = true;
        for _ in 0..25 {
            let n = rng.gen_range(3..=6);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..4.0)).collect();
            let k = rng.gen_range(2..n);
            let probs = pl_prob_in_topk(&y, k)?;
            let top1 = pl_top1(&y)?;
            for i in 0..n {
                for j in 0..n {
                    if y[i] > y[j] {
                        order_ok &= probs[i] > probs[j] && top1[i] > top1[j];
                    }
                }
            }
        }
        checks.push(Check {
            name: "plackett-luce",
            passed: frozen && order_ok,
            detail: "frozen top-2 values and order consistency".to_string(),
        });
    }

    // GSP worked example and fuzzed IC/IR conditions
    {
        let out = gsp_run(&[3.0, 2.0, 1.0], &[0.5, 0.4, 0.6], 2)?;
        let mut ok = (out.payments_per_click[0] - 1.6).abs() < 1e-12
            && (out.payments_per_click[1] - 1.5).abs() < 1e-12
            && (out.expected_revenue - 1.4).abs() < 1e-12;
        for _ in 0..500 {
            let n = rng.gen_range(1..8);
            let bids: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
            let ctrs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let k = rng.gen_range(1..4);
            let outcome = gsp_run(&bids, &ctrs, k)?;
            ok &= verify_gsp_conditions(&outcome, &bids, &ctrs)?;
        }
        checks.push(Check {
            name: "gsp-conditions",
            passed: ok,
            detail: "worked example + 500 fuzzed auctions".to_string(),
        });
    }

    // greedy-on-means is optimal when M = K
    {
        let mut worst: f64 = 0.0;
        for _ in 0..40 {
            let mut inst = random_instance(&mut rng, 6, 3);
            inst.subset_size = inst.n_slots;
            let sel = select_gdy(&inst.bids, &inst.coarse_ctrs(), inst.subset_size)?;
            let gdy_obj = simpa_objective(&sel.selected, &inst)?;
            let (_, best) = brute_force_optimal_subset(&inst)?;
            worst = worst.max((best - gdy_obj).abs());
        }
        checks.push(Check {
            name: "gdy-optimal-at-m-equals-k",
            passed: worst < 1e-12,
            detail: format!("max |gap| = {worst:.2e}"),
        });
    }

    // the adversarial instance separates the oracle from the greedy stage
    {
        let inst = generate_example1(3, 2, 1, 10.0)?;
        let (opt_subset, opt) = brute_force_optimal_subset(&inst)?;
        let gdy = select_gdy(&inst.bids, &inst.coarse_ctrs(), inst.subset_size)?;
        let gdy_obj = simpa_objective(&gdy.selected, &inst)?;
        let ok = opt_subset == vec![0, 2]
            && (opt - 1.9).abs() < 1e-12
            && gdy.selected == vec![0, 1]
            && (gdy_obj - 1.0).abs() < 1e-12;
        checks.push(Check {
            name: "adversarial-example",
            passed: ok,
            detail: format!("oracle {opt:.3} vs greedy {gdy_obj:.3}"),
        });
    }

    // realized welfare dominates coarse-score welfare (Jensen direction)
    {
        let cfg = EnvConfig::public1_like();
        let mut env_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
        let (instance, dists) = generate_auction(&cfg, &mut env_rng)?;
        let bids: Vec<f64> = instance.ads.iter().map(|a| a.bid).collect();
        let coarse: Vec<f64> = instance.ads.iter().map(|a| a.bid * a.coarse_ctr).collect();
        let coarse_welfare = sum_top_k(&coarse, cfg.n_slots)?;
        let mut welfares = Vec::with_capacity(400);
        for _ in 0..400 {
            let ctrs = sample_realization(&dists, &mut env_rng);
            let scores: Vec<f64> = bids.iter().zip(&ctrs).map(|(b, c)| b * c).collect();
            welfares.push(sum_top_k(&scores, cfg.n_slots)?);
        }
        let mean = welfares.iter().sum::<f64>() / welfares.len() as f64;
        let var = welfares.iter().map(|w| (w - mean).powi(2)).sum::<f64>()
            / (welfares.len() - 1) as f64;
        let se = (var / welfares.len() as f64).sqrt();
        checks.push(Check {
            name: "jensen-gap",
            passed: mean >= coarse_welfare - 3.0 * se,
            detail: format!("realized {mean:.4} vs coarse {coarse_welfare:.4} (se {se:.4})"),
        });
    }

    Ok(checks)
}

/// Enumerates every set-cover instance with a universe of up to 3 elements
/// and up to 3 subsets, plus a sample of size-4 ones, and confirms the
/// reduction: optimum 1 iff a cover of size <= M exists.
fn set_cover_fidelity() -> Result<(bool, usize)> {
    let mut tested = 0;
    for l in 1..=3usize {
        let nonempty: Vec<Vec<usize>> = (1..1u32 << l)
            .map(|mask| (0..l).filter(|e| mask >> e & 1 == 1).collect())
            .collect();
        let n_choices = nonempty.len();
        for count in 1..=3usize {
            // all multisets of `count` subsets, as non-decreasing index
            // sequences
            let mut picks = vec![0usize; count];
            'multisets: loop {
                let subsets: Vec<Vec<usize>> =
                    picks.iter().map(|&p| nonempty[p].clone()).collect();
                for m in 0..=count {
                    let inst = set_cover_to_simpa(l, &subsets, m)?;
                    let (_, opt) = brute_force_optimal_subset(&inst)?;
                    let cover_exists = cover_of_size_exists(l, &subsets, m);
                    let reduction_says = (opt - 1.0).abs() < 1e-12;
                    tested += 1;
                    if cover_exists != reduction_says {
                        return Ok((false, tested));
                    }
                }
                let mut pos = count;
                while pos > 0 {
                    pos -= 1;
                    if picks[pos] + 1 < n_choices {
                        let v = picks[pos] + 1;
                        for p in picks.iter_mut().skip(pos) {
                            *p = v;
                        }
                        continue 'multisets;
                    }
                }
                break;
            }
        }
    }
    Ok((true, tested))
}

fn cover_of_size_exists(l: usize, subsets: &[Vec<usize>], m: usize) -> bool {
    let full = (1u32 << l) - 1;
    let masks: Vec<u32> = subsets
        .iter()
        .map(|s| s.iter().fold(0u32, |acc, &e| acc | 1 << e))
        .collect();
    // brute force over all subsets of the collection with size <= m
    for pick in 0..1u32 << masks.len() {
        if (pick.count_ones() as usize) <= m {
            let union = masks
                .iter()
                .enumerate()
                .filter(|(i, _)| pick >> i & 1 == 1)
                .fold(0u32, |acc, (_, &mask)| acc | mask);
            if union == full {
                return true;
            }
        }
    }
    false
}
