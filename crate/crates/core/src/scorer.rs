//! Permutation-equivariant set-encoding scorer.
//!
//! Every ad's raw feature vector runs through a shared encoder MLP; the
//! per-ad encodings aggregate into one global vector (mean and max,
//! concatenated); each ad is then scored by a shared head MLP on
//! `[raw features ‖ global encoding]`. Permuting the input rows permutes
//! the outputs identically, so an ad's score is well defined over an
//! unordered candidate set while still seeing the whole set.
//!
//! Weights live in one flat `f64` vector; the architecture descriptor fixes
//! the index map (per layer: row-major `fan_in x fan_out` matrix, then the
//! bias). Gradients come from reverse-mode accumulation in [`backward`].

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Permutation-invariant pooling operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Mean,
    Max,
}

/// Shape of the scorer network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Per-ad input feature dimension.
    pub input_dim: usize,
    /// Hidden widths of the shared per-ad encoder.
    pub encoder_widths: Vec<usize>,
    /// Pooling operators applied to the final encoder output.
    pub aggregators: Vec<Aggregator>,
    /// Hidden widths of the per-ad score head (output width 1 is implied).
    pub head_widths: Vec<usize>,
    /// Activation between hidden layers.
    pub activation: String,
}

impl Architecture {
    /// Standard shape used by the training pipeline.
    pub fn standard(input_dim: usize, hidden: usize) -> Self {
        Self {
            input_dim,
            encoder_widths: vec![hidden, hidden],
            aggregators: vec![Aggregator::Mean, Aggregator::Max],
            head_widths: vec![hidden],
            activation: "relu".to_string(),
        }
    }

    fn encoder_out(&self) -> usize {
        *self.encoder_widths.last().unwrap_or(&self.input_dim)
    }

    fn head_input(&self) -> usize {
        self.input_dim + self.aggregators.len() * self.encoder_out()
    }

    fn layer_dims(&self) -> Vec<(usize, usize, bool)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &w in &self.encoder_widths {
            dims.push((prev, w, true));
            prev = w;
        }
        prev = self.head_input();
        for &w in &self.head_widths {
            dims.push((prev, w, true));
            prev = w;
        }
        dims.push((prev, 1, false));
        dims
    }

    /// Total number of weights implied by the descriptor.
    pub fn weight_count(&self) -> usize {
        self.layer_dims()
            .iter()
            .map(|&(i, o, _)| i * o + o)
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be >= 1".into()));
        }
        if self.aggregators.is_empty() {
            return Err(Error::InvalidArgument("need at least one aggregator".into()));
        }
        if self.encoder_widths.iter().chain(&self.head_widths).any(|&w| w == 0) {
            return Err(Error::InvalidArgument("zero-width layer".into()));
        }
        if self.activation != "relu" {
            return Err(Error::InvalidArgument(format!(
                "unsupported activation {:?}",
                self.activation
            )));
        }
        Ok(())
    }
}

/// Trainable parameters plus their architecture descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub arch: Architecture,
    pub weights: Vec<f64>,
    pub version: u32,
}

/// Current model format version.
pub const MODEL_VERSION: u32 = 1;
/// Format tag written to model files.
pub const MODEL_FORMAT_TAG: &str = "pas-scorer/v1";

impl ScorerParams {
    /// Seeded uniform init: `U(-s, s)` with `s = scale / sqrt(fan_in)`,
    /// zero biases.
    pub fn init<R: Rng>(arch: Architecture, scale: f64, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut weights = Vec::with_capacity(arch.weight_count());
        for (fan_in, fan_out, _) in arch.layer_dims() {
            let s = scale / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                weights.push(rng.gen_range(-s..=s));
            }
            weights.resize(weights.len() + fan_out, 0.0);
        }
        Ok(Self {
            arch,
            weights,
            version: MODEL_VERSION,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        if self.weights.len() != self.arch.weight_count() {
            return Err(Error::ModelFormat(format!(
                "weight count {} does not match descriptor ({})",
                self.weights.len(),
                self.arch.weight_count()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::ModelFormat("non-finite weight".into()));
        }
        Ok(())
    }

    /// Folds the input standardization `x -> (x - mu) / sd` into the
    /// weights, so the returned parameters consume raw features.
    ///
    /// Raw features enter the network twice — at the encoder and at the
    /// head (concatenated before the global encoding) — so both first
    /// layers are rewritten.
    pub fn fold_input_standardization(&mut self, mu: &[f64], sd: &[f64]) -> Result<()> {
        let d = self.arch.input_dim;
        if mu.len() != d || sd.len() != d {
            return Err(Error::InvalidArgument(
                "standardization dims do not match input".into(),
            ));
        }
        if self.arch.encoder_widths.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot fold standardization without an encoder layer".into(),
            ));
        }
        let dims = self.arch.layer_dims();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut o = 0;
        for &(i, out, _) in &dims {
            offsets.push(o);
            o += i * out + out;
        }
        let head_first = self.arch.encoder_widths.len();
        for layer in [0, head_first] {
            let (in_dim, out_dim, _) = dims[layer];
            let off = offsets[layer];
            for i in 0..d {
                for j in 0..out_dim {
                    let scaled = self.weights[off + i * out_dim + j] / sd[i];
                    self.weights[off + i * out_dim + j] = scaled;
                    self.weights[off + in_dim * out_dim + j] -= scaled * mu[i];
                }
            }
        }
        Ok(())
    }

    /// Folds `output -> output * scale + shift` into the final layer.
    pub fn fold_output_affine(&mut self, scale: f64, shift: f64) -> Result<()> {
        if scale == 1.0 && shift == 0.0 {
            return Ok(());
        }
        let dims = self.arch.layer_dims();
        let (in_dim, out_dim, _) = *dims.last().expect("at least one layer");
        debug_assert_eq!(out_dim, 1);
        let off = self.weights.len() - (in_dim * out_dim + out_dim);
        for w in &mut self.weights[off..off + in_dim * out_dim] {
            *w *= scale;
        }
        let b = &mut self.weights[off + in_dim * out_dim];
        *b = *b * scale + shift;
        Ok(())
    }
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    n_ads: usize,
    /// Activations entering each layer: encoder inputs, then head inputs.
    layer_inputs: Vec<Vec<f64>>,
    /// Post-activation outputs of each layer.
    layer_outputs: Vec<Vec<f64>>,
    /// Row index of the per-unit maximum, per Max aggregator.
    argmax: Vec<usize>,
}

fn layer_forward(
    input: &[f64],
    n_rows: usize,
    w: &[f64],
    b: &[f64],
    in_dim: usize,
    out_dim: usize,
    relu: bool,
) -> Vec<f64> {
    let mut out = vec![0.0; n_rows * out_dim];
    for r in 0..n_rows {
        let x = &input[r * in_dim..(r + 1) * in_dim];
        let o = &mut out[r * out_dim..(r + 1) * out_dim];
        o.copy_from_slice(b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * out_dim..(i + 1) * out_dim];
            for (oj, wj) in o.iter_mut().zip(row) {
                *oj += xi * wj;
            }
        }
        if relu {
            for v in o.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    out
}

/// Per-ad logits for an `N x input_dim` feature matrix (rows are ads).
pub fn scorer_forward(params: &ScorerParams, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(forward_cached(params, features)?.0)
}

/// Forward pass that also returns the cache needed by [`backward`].
pub fn forward_cached(
    params: &ScorerParams,
    features: &[Vec<f64>],
) -> Result<(Vec<f64>, ForwardCache)> {
    params.validate()?;
    let arch = &params.arch;
    let n = features.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty ad set".into()));
    }
    let d = arch.input_dim;
    for row in features {
        if row.len() != d {
            return Err(Error::InvalidArgument(format!(
                "feature dim {} does not match architecture input {d}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature".into()));
        }
    }
    let flat: Vec<f64> = features.iter().flatten().copied().collect();
    let dims = arch.layer_dims();
    let n_enc = arch.encoder_widths.len();

    let mut layer_inputs = Vec::with_capacity(dims.len());
    let mut layer_outputs = Vec::with_capacity(dims.len());
    let mut offset = 0;
    let mut cur = flat.clone();
    for (li, &(in_dim, out_dim, relu)) in dims.iter().enumerate().take(n_enc) {
        let w = &params.weights[offset..offset + in_dim * out_dim];
        let b = &params.weights[offset + in_dim * out_dim..offset + in_dim * out_dim + out_dim];
        offset += in_dim * out_dim + out_dim;
        let out = layer_forward(&cur, n, w, b, in_dim, out_dim, relu);
        layer_inputs.push(cur);
        layer_outputs.push(out.clone());
        cur = out;
        let _ = li;
    }
    let enc_out = arch.encoder_out();
    let enc = if n_enc == 0 { &flat } else { &cur };

    // aggregate
    let mut global = Vec::with_capacity(arch.aggregators.len() * enc_out);
    let mut argmax = Vec::new();
    for agg in &arch.aggregators {
        match agg {
            Aggregator::Mean => {
                for j in 0..enc_out {
                    let s: f64 = (0..n).map(|r| enc[r * enc_out + j]).sum();
                    global.push(s / n as f64);
                }
            }
            Aggregator::Max => {
                for j in 0..enc_out {
                    let mut best_r = 0;
                    let mut best = enc[j];
                    for r in 1..n {
                        let v = enc[r * enc_out + j];
                        if v > best {
                            best = v;
                            best_r = r;
                        }
                    }
                    global.push(best);
                    argmax.push(best_r);
                }
            }
        }
    }

    // head input: [x_i ‖ global]
    let h_in = arch.head_input();
    let mut cur: Vec<f64> = Vec::with_capacity(n * h_in);
    for r in 0..n {
        cur.extend_from_slice(&flat[r * d..(r + 1) * d]);
        cur.extend_from_slice(&global);
    }
    for &(in_dim, out_dim, relu) in dims.iter().skip(n_enc) {
        let w = &params.weights[offset..offset + in_dim * out_dim];
        let b = &params.weights[offset + in_dim * out_dim..offset + in_dim * out_dim + out_dim];
        offset += in_dim * out_dim + out_dim;
        let out = layer_forward(&cur, n, w, b, in_dim, out_dim, relu);
        layer_inputs.push(cur);
        layer_outputs.push(out.clone());
        cur = out;
    }
    debug_assert_eq!(offset, params.weights.len());
    let logits = cur;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite logits".into()));
    }
    Ok((
        logits.clone(),
        ForwardCache {
            n_ads: n,
            layer_inputs,
            layer_outputs,
            argmax,
        },
    ))
}

/// Reverse-mode gradient of a scalar loss with respect to all weights,
/// given `dL/dlogits`. Returns a flat vector in the same index order as
/// [`ScorerParams::weights`].
pub fn backward(params: &ScorerParams, cache: &ForwardCache, dlogits: &[f64]) -> Vec<f64> {
    let arch = &params.arch;
    let n = cache.n_ads;
    assert_eq!(dlogits.len(), n);
    let dims = arch.layer_dims();
    let n_enc = arch.encoder_widths.len();
    let d = arch.input_dim;
    let enc_out = arch.encoder_out();

    let mut grads = vec![0.0; params.weights.len()];
    let layer_offsets: Vec<usize> = {
        let mut offs = Vec::with_capacity(dims.len());
        let mut o = 0;
        for &(i, out, _) in &dims {
            offs.push(o);
            o += i * out + out;
        }
        offs
    };

    let backprop_layer = |li: usize, dout: &[f64], grads: &mut [f64]| -> Vec<f64> {
        let (in_dim, out_dim, _) = dims[li];
        let off = layer_offsets[li];
        let input = &cache.layer_inputs[li];
        let w = &params.weights[off..off + in_dim * out_dim];
        let mut dinput = vec![0.0; n * in_dim];
        for r in 0..n {
            let dor = &dout[r * out_dim..(r + 1) * out_dim];
            let xr = &input[r * in_dim..(r + 1) * in_dim];
            for j in 0..out_dim {
                grads[off + in_dim * out_dim + j] += dor[j];
            }
            for i in 0..in_dim {
                let xi = xr[i];
                let grow = &mut grads[off + i * out_dim..off + (i + 1) * out_dim];
                for (g, &dj) in grow.iter_mut().zip(dor) {
                    *g += xi * dj;
                }
                let wrow = &w[i * out_dim..(i + 1) * out_dim];
                let mut acc = 0.0;
                for (wj, &dj) in wrow.iter().zip(dor) {
                    acc += wj * dj;
                }
                dinput[r * in_dim + i] = acc;
            }
        }
        dinput
    };

    // head layers, last to first
    let mut dout: Vec<f64> = dlogits.to_vec();
    for li in (n_enc..dims.len()).rev() {
        // mask by this layer's own relu before stepping through it
        if dims[li].2 {
            let out = &cache.layer_outputs[li];
            for (dv, &ov) in dout.iter_mut().zip(out) {
                if ov <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        dout = backprop_layer(li, &dout, &mut grads);
    }

    // split head-input gradient into (discarded) raw-feature part and the
    // aggregated-global part, summed over ads
    let h_in = arch.head_input();
    let g_dim = arch.aggregators.len() * enc_out;
    let mut dglobal = vec![0.0; g_dim];
    for r in 0..n {
        for j in 0..g_dim {
            dglobal[j] += dout[r * h_in + d + j];
        }
    }

    // aggregator backward into the final encoder output
    let mut denc = vec![0.0; n * enc_out];
    let mut max_slot = 0;
    let mut g_off = 0;
    for agg in &arch.aggregators {
        match agg {
            Aggregator::Mean => {
                for j in 0..enc_out {
                    let dm = dglobal[g_off + j] / n as f64;
                    for r in 0..n {
                        denc[r * enc_out + j] += dm;
                    }
                }
            }
            Aggregator::Max => {
                for j in 0..enc_out {
                    let r = cache.argmax[max_slot * enc_out + j];
                    denc[r * enc_out + j] += dglobal[g_off + j];
                }
                max_slot += 1;
            }
        }
        g_off += enc_out;
    }

    // encoder layers, last to first
    let mut dout = denc;
    for li in (0..n_enc).rev() {
        if dims[li].2 {
            let out = &cache.layer_outputs[li];
            for (dv, &ov) in dout.iter_mut().zip(out) {
                if ov <= 0.0 {
                    *dv = 0.0;
                }
            }
        }
        dout = backprop_layer(li, &dout, &mut grads);
    }
    grads
}

/// Writes a model file: a JSON header line (format tag, version,
/// architecture, scoring metadata), then the weights as little-endian
/// 64-bit floats in index-map order.
pub fn save_model<P: AsRef<Path>>(
    path: P,
    params: &ScorerParams,
    scoring: &ScoringSpec,
) -> Result<()> {
    params.validate()?;
    let header = serde_json::json!({
        "format": MODEL_FORMAT_TAG,
        "version": params.version,
        "arch": params.arch,
        "scoring": scoring,
        "n_weights": params.weights.len(),
    });
    let mut file = std::fs::File::create(path)?;
    serde_json::to_writer(&mut file, &header)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    file.write_all(b"\n")?;
    let mut bytes = Vec::with_capacity(params.weights.len() * 8);
    for w in &params.weights {
        bytes.extend_from_slice(&w.to_le_bytes());
    }
    file.write_all(&bytes)?;
    Ok(())
}

/// How the harness turns raw model output into a pre-auction score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreRule {
    /// Use the logit directly (listwise-trained scorers and REG).
    Direct,
    /// Clamp the output to `[0, 1]` as a CTR estimate and multiply by bid
    /// (REGCTR; its input lacks the bid column).
    BidTimesCtr,
}

/// Scoring metadata persisted with a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringSpec {
    pub rule: ScoreRule,
    /// Whether the bid column is removed from the model input.
    pub mask_bid: bool,
}

/// Loads a model file written by [`save_model`].
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<(ScorerParams, ScoringSpec)> {
    let mut file = std::fs::File::open(path)?;
    let mut contents = Vec::new();
    file.read_to_end(&mut contents)?;
    let newline = contents
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::ModelFormat("missing header line".into()))?;
    let header: serde_json::Value = serde_json::from_slice(&contents[..newline])
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    if header["format"] != MODEL_FORMAT_TAG {
        return Err(Error::ModelFormat(format!(
            "unknown format tag {}",
            header["format"]
        )));
    }
    let arch: Architecture = serde_json::from_value(header["arch"].clone())
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    let scoring: ScoringSpec = serde_json::from_value(header["scoring"].clone())
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    let version = header["version"].as_u64().unwrap_or(0) as u32;
    let n_weights = header["n_weights"].as_u64().unwrap_or(0) as usize;
    let body = &contents[newline + 1..];
    if body.len() != n_weights * 8 || n_weights != arch.weight_count() {
        return Err(Error::ModelFormat(format!(
            "expected {} weights, file carries {} bytes",
            arch.weight_count(),
            body.len()
        )));
    }
    let weights: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let params = ScorerParams {
        arch,
        weights,
        version,
    };
    params.validate()?;
    Ok((params, scoring))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn demo_params(seed: u64, d: usize, h: usize) -> ScorerParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScorerParams::init(Architecture::standard(d, h), 1.0, &mut rng).unwrap()
    }

    fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn forward_is_permutation_equivariant() {
        let params = demo_params(1, 5, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.gen_range(2..10);
            let feats = random_features(&mut rng, n, 5);
            let logits = scorer_forward(&params, &feats).unwrap();
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&i| feats[i].clone()).collect();
            let plogits = scorer_forward(&params, &permuted).unwrap();
            for (j, &i) in perm.iter().enumerate() {
                assert!((plogits[j] - logits[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_rows_get_equal_logits() {
        let params = demo_params(3, 4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut feats = random_features(&mut rng, 3, 4);
        feats.push(feats[1].clone());
        let logits = scorer_forward(&params, &feats).unwrap();
        assert_eq!(logits[1], logits[3]);
    }

    #[test]
    fn zero_weights_score_everything_equally() {
        let arch = Architecture::standard(4, 6);
        let params = ScorerParams {
            weights: vec![0.0; arch.weight_count()],
            arch,
            version: MODEL_VERSION,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let feats = random_features(&mut rng, 5, 4);
        let logits = scorer_forward(&params, &feats).unwrap();
        assert!(logits.iter().all(|&l| l == logits[0]));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let params = demo_params(6, 4, 6);
        let feats = vec![vec![0.0; 3]];
        assert!(scorer_forward(&params, &feats).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        // scalar loss = sum of logits; checks dL/dw for every weight
        let mut params = demo_params(7, 3, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let feats = random_features(&mut rng, 4, 3);
        let (logits, cache) = forward_cached(&params, &feats).unwrap();
        let dlogits = vec![1.0; logits.len()];
        let grads = backward(&params, &cache, &dlogits);
        let h = 1e-6;
        for wi in (0..params.weights.len()).step_by(7) {
            let orig = params.weights[wi];
            params.weights[wi] = orig + h;
            let up: f64 = scorer_forward(&params, &feats).unwrap().iter().sum();
            params.weights[wi] = orig - h;
            let dn: f64 = scorer_forward(&params, &feats).unwrap().iter().sum();
            params.weights[wi] = orig;
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (fd - grads[wi]).abs() <= 1e-5 * fd.abs().max(grads[wi].abs()).max(1e-3),
                "weight {wi}: fd {fd} vs analytic {}",
                grads[wi]
            );
        }
    }

    #[test]
    fn folded_standardization_reproduces_standardized_forward() {
        let params = demo_params(12, 4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let feats = random_features(&mut rng, 5, 4);
        let mu = vec![0.3, -0.1, 0.7, 0.0];
        let sd = vec![0.5, 2.0, 1.3, 0.9];
        let standardized: Vec<Vec<f64>> = feats
            .iter()
            .map(|r| {
                r.iter()
                    .zip(mu.iter().zip(&sd))
                    .map(|(v, (m, s))| (v - m) / s)
                    .collect()
            })
            .collect();
        let want: Vec<f64> = scorer_forward(&params, &standardized)
            .unwrap()
            .iter()
            .map(|l| l * 2.5 + 0.4)
            .collect();
        let mut folded = params.clone();
        folded.fold_input_standardization(&mu, &sd).unwrap();
        folded.fold_output_affine(2.5, 0.4).unwrap();
        let got = scorer_forward(&folded, &feats).unwrap();
        for (w, g) in want.iter().zip(&got) {
            assert!((w - g).abs() < 1e-9, "{w} vs {g}");
        }
    }

    #[test]
    fn model_file_round_trips() {
        let params = demo_params(9, 6, 8);
        let scoring = ScoringSpec {
            rule: ScoreRule::Direct,
            mask_bid: false,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scorer.model");
        save_model(&path, &params, &scoring).unwrap();
        let (loaded, loaded_scoring) = load_model(&path).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(loaded_scoring, scoring);

        // identical saves are byte-identical
        let path2 = dir.path().join("scorer2.model");
        save_model(&path2, &params, &scoring).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());

        // corrupted weight section is rejected
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 4);
        std::fs::write(&path, bytes).unwrap();
        assert!(load_model(&path).is_err());
    }
}
