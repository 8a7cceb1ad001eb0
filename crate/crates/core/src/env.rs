//! Stochastic CTR environment.
//!
//! From the pre-auction stage's point of view the refined CTR of an ad is a
//! random variable; its conditional mean given the coarse information is the
//! coarse CTR. This module realizes that model with finite-support discrete
//! distributions, which keep every expectation exactly computable by
//! enumeration at desk scale.
//!
//! The synthetic generator emulates the production estimator pair: both the
//! coarse and the refined model are assumed calibrated for negative
//! downsampling at rate `eta`. The coarse estimator output is
//! `cal(p_base)` while refined realizations are `cal(p)` for `p` spread
//! around `p_base`; since the calibration map is convex, the coarse output
//! is a Jensen-biased underestimate of the true mean refined CTR, and the
//! bias grows as `eta` shrinks. This reproduces the gap regimes that a
//! downsampling rate of 0.01 vs 0.05 produces on real data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auction::{AdRecord, AuctionInstance};
use crate::error::Error;
use crate::Result;

/// Tolerance for probability-mass bookkeeping.
pub const PROB_TOL: f64 = 1e-12;

/// Feature layout of [`AdRecord::partial_features`] produced by
/// [`generate_auction`]. User features are broadcast separately.
pub mod feature {
    /// The ad's bid. Perturbation tests rewrite exactly this slot.
    pub const BID: usize = 0;
    /// Output of the synthetic coarse estimator (not the distribution mean).
    pub const COARSE_EST: usize = 1;
    /// Volatility signal driving the refined-CTR spread.
    pub const VOLATILITY: usize = 2;
    /// Probability mass on the upside branch of the distribution.
    pub const UPSIDE_PROB: usize = 3;
    /// First of `noise_dims` uninformative dimensions.
    pub const NOISE0: usize = 4;
}

/// Discrete distribution over refined CTR realizations.
///
/// Support values are distinct, sorted ascending, and lie in `[0, 1]`;
/// probabilities are positive and sum to one. A single-point support is a
/// deterministic refined CTR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrDistribution {
    support: Vec<(f64, f64)>,
}

impl CtrDistribution {
    /// Builds a distribution from `(ctr value, probability)` pairs.
    ///
    /// Zero-probability atoms are dropped and duplicate values merged before
    /// validation.
    pub fn new(mut support: Vec<(f64, f64)>) -> Result<Self> {
        support.retain(|&(_, p)| p != 0.0);
        support.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(support.len());
        for (v, p) in support {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        if merged.is_empty() {
            return Err(Error::InvalidArgument("empty CTR support".into()));
        }
        let mut total = 0.0;
        for &(v, p) in &merged {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "support value {v} outside [0, 1]"
                )));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!("bad probability {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { support: merged })
    }

    /// Deterministic distribution concentrated on one value.
    pub fn deterministic(value: f64) -> Result<Self> {
        Self::new(vec![(value, 1.0)])
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// Mean of the distribution, i.e. the coarse CTR `E[ctr | coarse info]`.
    pub fn mean(&self) -> f64 {
        self.support.iter().map(|&(v, p)| v * p).sum()
    }

    /// One draw by inverse-CDF over the sorted support.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(v, p) in &self.support {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.support.last().expect("nonempty support").0
    }
}

/// Coarse CTR of a distribution: its exact mean.
pub fn coarse_ctr(dist: &CtrDistribution) -> f64 {
    dist.mean()
}

/// Inverts negative down-sampling: an estimator trained on 1:1 samples that
/// outputs `p` corresponds to a calibrated rate `p / (p + (1 - p) / eta)`.
pub fn calibrate_downsampled(p: f64, eta: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (0, 1)")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} outside (0, 1]")));
    }
    Ok(p / (p + (1.0 - p) / eta))
}

/// Knobs of the synthetic environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Candidate set size `N`.
    pub n_ads: usize,
    /// Pre-auction subset size `M`.
    pub subset_size: usize,
    /// Slot count `K`.
    pub n_slots: usize,
    /// Maximum outcomes per CTR distribution.
    pub support_size: usize,
    /// Uniform bid sampling range `(low, high)`.
    pub bid_range: (f64, f64),
    /// Scale of the coarse-refined divergence; 0 collapses every support to
    /// a single point.
    pub gap_factor: f64,
    /// Negative down-sampling rate used by the synthetic calibration.
    pub downsampling_rate: f64,
    /// Range of the raw (pre-calibration) base probability.
    pub base_prob_range: (f64, f64),
    /// Range of the upside branch probability.
    pub upside_prob_range: (f64, f64),
    /// Uninformative per-ad feature dimensions.
    pub noise_dims: usize,
    /// User feature dimensions (broadcast at scoring time).
    pub user_dims: usize,
    /// Base seed; generators additionally take an explicit RNG.
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::public1_like()
    }
}

impl EnvConfig {
    /// Large coarse-refined gap regime (down-sampling rate 0.01).
    pub fn public1_like() -> Self {
        Self {
            n_ads: 100,
            subset_size: 10,
            n_slots: 5,
            support_size: 2,
            bid_range: (0.1, 1.0),
            gap_factor: 1.0,
            downsampling_rate: 0.01,
            base_prob_range: (0.15, 0.85),
            upside_prob_range: (0.03, 0.35),
            noise_dims: 2,
            user_dims: 2,
            seed: 0,
        }
    }

    /// Moderate gap regime (down-sampling rate 0.05).
    pub fn public5_like() -> Self {
        Self {
            downsampling_rate: 0.05,
            gap_factor: 0.6,
            ..Self::public1_like()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 || self.n_slots > self.subset_size || self.subset_size > self.n_ads {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= K <= M <= N, got K={} M={} N={}",
                self.n_slots, self.subset_size, self.n_ads
            )));
        }
        if self.support_size == 0 {
            return Err(Error::InvalidArgument("support_size must be >= 1".into()));
        }
        let (lo, hi) = self.bid_range;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::InvalidArgument(format!("bad bid range ({lo}, {hi})")));
        }
        if self.gap_factor < 0.0 {
            return Err(Error::InvalidArgument("gap_factor must be >= 0".into()));
        }
        if !(self.downsampling_rate > 0.0 && self.downsampling_rate <= 1.0) {
            return Err(Error::InvalidArgument("downsampling_rate outside (0, 1]".into()));
        }
        let (plo, phi) = self.base_prob_range;
        if !(plo > 0.0 && phi < 1.0 && phi >= plo) {
            return Err(Error::InvalidArgument("base_prob_range outside (0, 1)".into()));
        }
        Ok(())
    }

    /// Per-ad feature dimension of the generated `partial_features`.
    pub fn ad_feature_dims(&self) -> usize {
        feature::NOISE0 + self.noise_dims
    }
}

/// Spread of the secondary upside atoms relative to the main one; only
/// relevant for `support_size >= 3`.
const UPSIDE_ATOM_SPREAD: f64 = 0.3;
/// Raw probabilities are kept below this before calibration.
const RAW_PROB_CAP: f64 = 0.98;

/// Generates one auction: `N` ads with uniform bids and mean-preserving
/// spread distributions in raw probability space, calibrated at the
/// configured down-sampling rate.
///
/// `partial_features` carry `[bid, coarse estimate, volatility, upside
/// probability, noise...]`; the `coarse_ctr` field on each ad is the exact
/// distribution mean. With `gap_factor = 0` every support collapses to a
/// single point and the two coincide.
pub fn generate_auction<R: Rng>(
    config: &EnvConfig,
    rng: &mut R,
) -> Result<(AuctionInstance, Vec<CtrDistribution>)> {
    config.validate()?;
    let eta = config.downsampling_rate;
    let s_atoms = config.support_size.max(1);
    let mut ads = Vec::with_capacity(config.n_ads);
    let mut dists = Vec::with_capacity(config.n_ads);
    for ad_id in 0..config.n_ads {
        let bid = rng.gen_range(config.bid_range.0..=config.bid_range.1);
        let p_base = rng.gen_range(config.base_prob_range.0..=config.base_prob_range.1);
        let vol: f64 = rng.gen();
        let q = rng.gen_range(config.upside_prob_range.0..=config.upside_prob_range.1);
        let noise: Vec<f64> = (0..config.noise_dims).map(|_| rng.gen()).collect();

        let dist = spread_distribution(p_base, q, config.gap_factor * vol, s_atoms, eta)?;
        let coarse_est = calibrate_downsampled(p_base, eta)?;
        let mut partial_features = vec![bid, coarse_est, vol, q];
        partial_features.extend(noise);
        ads.push(AdRecord {
            ad_id,
            bid,
            partial_features,
            ctr_dist_id: ad_id,
            coarse_ctr: dist.mean(),
        });
        dists.push(dist);
    }
    let user_features: Vec<f64> = (0..config.user_dims).map(|_| rng.gen()).collect();
    let instance = AuctionInstance {
        ads,
        user_features,
        n_slots: config.n_slots,
        subset_size: config.subset_size,
    };
    instance.validate()?;
    Ok((instance, dists))
}

/// Mean-preserving spread around `p_base` in raw probability space, then
/// calibrated. One low atom with mass `1 - q`; `n_atoms - 1` upside atoms
/// with equal shares of mass `q`, centered so the raw mean stays `p_base`
/// exactly.
fn spread_distribution(
    p_base: f64,
    q: f64,
    spread: f64,
    n_atoms: usize,
    eta: f64,
) -> Result<CtrDistribution> {
    if n_atoms == 1 || spread == 0.0 {
        return CtrDistribution::deterministic(calibrate_downsampled(p_base, eta)?);
    }
    let n_up = n_atoms - 1;
    // largest relative offset among the upside atoms
    let c_max = 1.0 + UPSIDE_ATOM_SPREAD * (n_up as f64 - 1.0) / n_atoms as f64;
    let cap = q / (1.0 - q) * (RAW_PROB_CAP / p_base - 1.0) / c_max;
    let s = spread.min(cap).max(0.0);
    let mut atoms = Vec::with_capacity(n_atoms);
    atoms.push((p_base * (1.0 - s), 1.0 - q));
    for j in 1..=n_up {
        // offsets (2j - n_atoms)/n_atoms sum to zero over j = 1..n_up
        let c_j = 1.0 + UPSIDE_ATOM_SPREAD * (2.0 * j as f64 - n_atoms as f64) / n_atoms as f64;
        let up = p_base * (1.0 + s * (1.0 - q) / q * c_j);
        atoms.push((up, q / n_up as f64));
    }
    let support = atoms
        .into_iter()
        .map(|(p, w)| Ok((calibrate_downsampled(p.clamp(1e-9, RAW_PROB_CAP), eta)?, w)))
        .collect::<Result<Vec<_>>>()?;
    CtrDistribution::new(support)
}

/// One refined-CTR draw per ad, independently.
pub fn sample_realization<R: Rng>(dists: &[CtrDistribution], rng: &mut R) -> Vec<f64> {
    dists.iter().map(|d| d.sample(rng)).collect()
}

/// Explicit joint distribution over correlated CTR outcomes: rows of
/// `(probability, ctr per ad)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTable {
    pub rows: Vec<(f64, Vec<f64>)>,
}

impl JointTable {
    pub fn validate(&self, n_ads: usize) -> Result<()> {
        let mut total = 0.0;
        for (p, ctrs) in &self.rows {
            if ctrs.len() != n_ads {
                return Err(Error::InvalidArgument("joint row arity mismatch".into()));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidArgument("negative joint probability".into()));
            }
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidArgument(format!(
                "joint probabilities sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    /// Samples one row of CTR realizations.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> &[f64] {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (p, ctrs) in &self.rows {
            acc += p;
            if u < acc {
                return ctrs;
            }
        }
        &self.rows.last().expect("nonempty joint table").1
    }
}

/// Inputs of the stochastic subset-selection problem: bids plus a CTR
/// distribution per ad.
///
/// Outcomes are independent across ads unless `joint` is set, in which case
/// `dists` holds the per-ad marginals and sampling/enumeration go through
/// the joint table. `coarse_ctrs`, when present, is the coarse-estimator
/// view the pre-auction ranks with; it defaults to the distribution means
/// and deviates from them only in estimator-gap constructions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimpaInstance {
    pub bids: Vec<f64>,
    pub dists: Vec<CtrDistribution>,
    /// Cardinality bound `M`.
    pub subset_size: usize,
    /// Slot count `K`.
    pub n_slots: usize,
    pub joint: Option<JointTable>,
    pub coarse_ctrs: Option<Vec<f64>>,
}

impl SimpaInstance {
    pub fn independent(
        bids: Vec<f64>,
        dists: Vec<CtrDistribution>,
        subset_size: usize,
        n_slots: usize,
    ) -> Result<Self> {
        let inst = Self {
            bids,
            dists,
            subset_size,
            n_slots,
            joint: None,
            coarse_ctrs: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n_ads(&self) -> usize {
        self.bids.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dists.len() != self.bids.len() {
            return Err(Error::InvalidArgument("bids/dists length mismatch".into()));
        }
        if self.n_slots == 0 {
            return Err(Error::InvalidArgument("need K >= 1".into()));
        }
        if self.bids.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::InvalidArgument("invalid bid".into()));
        }
        if let Some(joint) = &self.joint {
            joint.validate(self.bids.len())?;
        }
        if let Some(coarse) = &self.coarse_ctrs {
            if coarse.len() != self.bids.len() {
                return Err(Error::InvalidArgument("coarse_ctrs length mismatch".into()));
            }
        }
        Ok(())
    }

    /// Coarse CTR per ad: the declared estimator view when present,
    /// otherwise the distribution means.
    pub fn coarse_ctrs(&self) -> Vec<f64> {
        match &self.coarse_ctrs {
            Some(c) => c.clone(),
            None => self.dists.iter().map(|d| d.mean()).collect(),
        }
    }

    /// One realization of all CTRs.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.joint {
            Some(joint) => joint.sample(rng).to_vec(),
            None => sample_realization(&self.dists, rng),
        }
    }
}

/// Builds the adversarial instance on which coarse-score greedy selection is
/// provably suboptimal.
///
/// Ads `1..=m` are deterministic with values `1.0, 0.9, ...` descending.
/// Ad `m + 1` is a gamble: value `t * w_k` with probability `1/t`, zero
/// otherwise, so its true mean value equals `w_k` (the `k`-th deterministic
/// value). Its declared coarse score is pinned just below ad `m`'s, modeling
/// the estimator gap that makes the greedy stage discard it. Any further ads
/// are low deterministic fillers.
pub fn generate_example1(n: usize, m: usize, k: usize, t: f64) -> Result<SimpaInstance> {
    if !(k >= 1 && k <= m && m < n) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= K <= M < N, got K={k} M={m} N={n}"
        )));
    }
    if !t.is_finite() || t < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "upside factor t = {t} must be >= 1"
        )));
    }
    let step = (0.1f64).min(0.8 / m as f64);
    let det_value = |i: usize| 1.0 - step * i as f64; // i = 0-based rank
    let mut bids = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n);
    let mut coarse = Vec::with_capacity(n);
    for i in 0..m {
        bids.push(1.0);
        dists.push(CtrDistribution::deterministic(det_value(i))?);
        coarse.push(det_value(i));
    }
    // the gamble ad
    let w_k = det_value(k - 1);
    let high_value = t * w_k;
    let p_hi = 1.0 / t;
    bids.push(high_value);
    dists.push(CtrDistribution::new(vec![(1.0, p_hi), (0.0, 1.0 - p_hi)])?);
    let declared_value = det_value(m - 1) - 0.01;
    coarse.push(declared_value / high_value);
    // low deterministic fillers
    for j in 0..n - m - 1 {
        let v = declared_value / (2u32.pow(j as u32 + 1) as f64);
        bids.push(1.0);
        dists.push(CtrDistribution::deterministic(v)?);
        coarse.push(v);
    }
    let inst = SimpaInstance {
        bids,
        dists,
        subset_size: m,
        n_slots: k,
        joint: None,
        coarse_ctrs: Some(coarse),
    };
    inst.validate()?;
    Ok(inst)
}

/// Cap on the set-cover universe: the joint table has `2^L - 1` rows.
pub const MAX_SET_COVER_UNIVERSE: usize = 20;

/// Reduces a set-cover instance to subset selection.
///
/// A nonempty `U' ⊆ {0..universe_size-1}` is drawn uniformly; ad `i`
/// realizes value `b_i * ctr_i = 1` iff its subset intersects `U'`, else 0.
/// A cover of size `<= m` exists iff the optimum of the resulting `K = 1`
/// selection problem equals 1.
pub fn set_cover_to_simpa(
    universe_size: usize,
    subsets: &[Vec<usize>],
    m: usize,
) -> Result<SimpaInstance> {
    if universe_size == 0 {
        return Err(Error::InvalidArgument("empty universe".into()));
    }
    if universe_size > MAX_SET_COVER_UNIVERSE {
        return Err(Error::TooLarge(format!(
            "universe of {universe_size} elements needs a joint table of 2^{universe_size} - 1 rows"
        )));
    }
    let masks: Vec<u32> = subsets
        .iter()
        .map(|s| {
            if s.is_empty() {
                return Err(Error::InvalidArgument("empty subset".into()));
            }
            let mut mask = 0u32;
            for &e in s {
                if e >= universe_size {
                    return Err(Error::InvalidArgument(format!(
                        "element {e} outside universe of size {universe_size}"
                    )));
                }
                mask |= 1 << e;
            }
            Ok(mask)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = masks.len();
    let n_rows = (1u32 << universe_size) - 1;
    let p_row = 1.0 / n_rows as f64;
    let mut rows = Vec::with_capacity(n_rows as usize);
    let mut covered_count = vec![0u32; n];
    for u_prime in 1..=n_rows {
        let ctrs: Vec<f64> = masks
            .iter()
            .enumerate()
            .map(|(i, &mask)| {
                let hit = mask & u_prime != 0;
                if hit {
                    covered_count[i] += 1;
                }
                if hit {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        rows.push((p_row, ctrs));
    }
    let dists = covered_count
        .iter()
        .map(|&c| {
            let p = c as f64 / n_rows as f64;
            CtrDistribution::new(vec![(1.0, p), (0.0, 1.0 - p)])
        })
        .collect::<Result<Vec<_>>>()?;
    let inst = SimpaInstance {
        bids: vec![1.0; n],
        dists,
        subset_size: m,
        n_slots: 1,
        joint: Some(JointTable { rows }),
        coarse_ctrs: None,
    };
    inst.validate()?;
    Ok(inst)
}
