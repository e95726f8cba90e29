//! A tiny deterministic transformer used as an end-to-end accuracy oracle.
//!
//! Proxy error sums say how much attention moved; they cannot say whether
//! the model still picks the same tokens. This module answers that directly
//! with a small randomly initialized decoder-only transformer: generate
//! greedy continuations at full precision, regenerate them with the KV cache
//! re-quantized at every step under a candidate configuration, and score the
//! fraction of tokens that survive unchanged. Everything is a pure function
//! of the seed, so results are exactly reproducible.

use crate::attention::attention_forward;
use crate::quant::PrecisionPair;
use crate::rng::{derive_seed, Rng};
use crate::search::{Oracle, PrecisionConfig, SearchError};
use crate::tensor::{Tensor2, Tensor3};

/// Toy transformer dimensions. The defaults are the profile every built-in
/// oracle run uses; tests shrink them for speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyArch {
    pub num_layers: usize,
    pub d_model: usize,
    pub num_q_heads: usize,
    pub num_kv_heads: usize,
    pub head_dim: usize,
    pub vocab: usize,
    pub mlp_hidden: usize,
    pub num_prompts: usize,
    pub prompt_len: usize,
    pub decode_len: usize,
    /// Multiplier applied to every eighth key-projection output channel
    /// (channel index taken within each head, same period as the synthetic
    /// trace generator). 1.0 leaves the weights as drawn. Larger values give
    /// the key cache the channel-magnitude skew real models exhibit, which
    /// both sharpens attention and makes low-bit per-token key quantization
    /// disproportionately lossy; a freshly initialized model otherwise has
    /// none of that structure.
    pub key_outlier_scale: f64,
}

impl Default for ToyArch {
    fn default() -> Self {
        ToyArch {
            num_layers: 8,
            d_model: 64,
            num_q_heads: 4,
            num_kv_heads: 2,
            head_dim: 16,
            vocab: 256,
            mlp_hidden: 256,
            num_prompts: 8,
            prompt_len: 32,
            decode_len: 64,
            key_outlier_scale: 1.0,
        }
    }
}

impl ToyArch {
    /// Default dimensions plus key-channel outliers at the synthetic-trace
    /// scale. Use this profile to study key-versus-value sensitivity: it is
    /// the cache structure under which the key side genuinely dominates.
    pub fn with_key_outliers() -> Self {
        ToyArch { key_outlier_scale: crate::trace::OUTLIER_SCALE as f64, ..ToyArch::default() }
    }
}

const RMS_EPS: f64 = 1e-6;

fn rmsnorm(x: &[f32]) -> Vec<f32> {
    let mean_sq = x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len() as f64;
    let inv = 1.0 / (mean_sq + RMS_EPS).sqrt();
    x.iter().map(|&v| (v as f64 * inv) as f32).collect()
}

fn silu(x: f32) -> f32 {
    x / (1.0 + (-x).exp())
}

fn matvec(w: &Tensor2, x: &[f32]) -> Vec<f32> {
    debug_assert_eq!(w.cols, x.len());
    (0..w.rows).map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f32>()).collect()
}

/// One decoder block's weights.
struct ToyLayer {
    w_q: Tensor2,
    w_k: Tensor2,
    w_v: Tensor2,
    w_o: Tensor2,
    w_up: Tensor2,
    w_down: Tensor2,
}

/// Pre-norm decoder-only transformer with grouped-query attention, a SiLU
/// feed-forward block, tied input/output embeddings, gain-free RMSNorm, and
/// no positional encoding. Weights are Gaussian with std 1/sqrt(fan_in),
/// drawn from per-matrix derived streams.
pub struct ToyModel {
    pub arch: ToyArch,
    embed: Tensor2,
    layers: Vec<ToyLayer>,
}

/// Per-layer K/V quantization to apply during a decode; `None` runs at full
/// precision. Pairs are indexed by layer.
pub type QuantPlan<'a> = Option<(crate::profile::QuantModePreset, &'a [PrecisionPair])>;

impl ToyModel {
    pub fn new(seed: u64, arch: ToyArch) -> Self {
        assert_eq!(arch.num_q_heads * arch.head_dim, arch.d_model, "q heads must tile d_model");
        assert_eq!(arch.num_q_heads % arch.num_kv_heads, 0, "head grouping");

        let matrix = |tags: &[u64], rows: usize, cols: usize| -> Tensor2 {
            let mut rng = Rng::new(derive_seed(seed, tags));
            let std = 1.0 / (cols as f64).sqrt();
            Tensor2::new(
                rows,
                cols,
                (0..rows * cols).map(|_| (rng.next_gauss() * std) as f32).collect(),
            )
        };

        let kv_dim = arch.num_kv_heads * arch.head_dim;
        let key_matrix = |tags: &[u64]| -> Tensor2 {
            let mut w = matrix(tags, kv_dim, arch.d_model);
            if arch.key_outlier_scale != 1.0 {
                for r in 0..kv_dim {
                    if (r % arch.head_dim) % crate::trace::OUTLIER_PERIOD == 0 {
                        for v in &mut w.data[r * arch.d_model..(r + 1) * arch.d_model] {
                            *v = (*v as f64 * arch.key_outlier_scale) as f32;
                        }
                    }
                }
            }
            w
        };
        let layers = (0..arch.num_layers)
            .map(|l| ToyLayer {
                w_q: matrix(&[1, l as u64, 0], arch.d_model, arch.d_model),
                w_k: key_matrix(&[1, l as u64, 1]),
                w_v: matrix(&[1, l as u64, 2], kv_dim, arch.d_model),
                w_o: matrix(&[1, l as u64, 3], arch.d_model, arch.d_model),
                w_up: matrix(&[1, l as u64, 4], arch.mlp_hidden, arch.d_model),
                w_down: matrix(&[1, l as u64, 5], arch.d_model, arch.mlp_hidden),
            })
            .collect();

        ToyModel { arch, embed: matrix(&[0], arch.vocab, arch.d_model), layers }
    }

    /// Feeds the prompt token by token, then greedily decodes `decode_len`
    /// tokens. Every attention call sees the full accumulated cache,
    /// re-quantized from the exact stored values according to `plan`, so
    /// quantization error influences the residual stream during prefill and
    /// decode alike. Ties in the logits resolve to the lowest token id.
    pub fn greedy_decode(&self, prompt: &[u32], plan: QuantPlan) -> Vec<u32> {
        let arch = &self.arch;
        // Per layer, per kv head: flat [t, head_dim] buffers.
        let mut k_cache: Vec<Vec<Vec<f32>>> =
            vec![vec![Vec::new(); arch.num_kv_heads]; arch.num_layers];
        let mut v_cache: Vec<Vec<Vec<f32>>> =
            vec![vec![Vec::new(); arch.num_kv_heads]; arch.num_layers];

        let step = |token: u32,
                        k_cache: &mut Vec<Vec<Vec<f32>>>,
                        v_cache: &mut Vec<Vec<Vec<f32>>>|
         -> Vec<f32> {
            let mut x = self.embed.row(token as usize).to_vec();
            for (l, layer) in self.layers.iter().enumerate() {
                let h = rmsnorm(&x);
                let q = matvec(&layer.w_q, &h);
                let k = matvec(&layer.w_k, &h);
                let v = matvec(&layer.w_v, &h);
                for head in 0..arch.num_kv_heads {
                    let span = head * arch.head_dim..(head + 1) * arch.head_dim;
                    k_cache[l][head].extend_from_slice(&k[span.clone()]);
                    v_cache[l][head].extend_from_slice(&v[span]);
                }

                let t = k_cache[l][0].len() / arch.head_dim;
                let k_full = Tensor3::new(
                    arch.num_kv_heads,
                    t,
                    arch.head_dim,
                    k_cache[l].concat(),
                );
                let v_full = Tensor3::new(
                    arch.num_kv_heads,
                    t,
                    arch.head_dim,
                    v_cache[l].concat(),
                );
                let (k_seen, v_seen) = match plan {
                    Some((preset, pairs)) if pairs[l] != PrecisionPair::of(16, 16) => preset
                        .quantize_kv(&k_full, &v_full, pairs[l])
                        .expect("cache tensors are finite and well-shaped"),
                    _ => (k_full, v_full),
                };

                let q_t = Tensor3::new(arch.num_q_heads, 1, arch.head_dim, q);
                let (_, attn) = attention_forward(&q_t, &k_seen, &v_seen, t - 1)
                    .expect("decode shapes are consistent");
                x = x
                    .iter()
                    .zip(matvec(&layer.w_o, &attn.data))
                    .map(|(a, b)| a + b)
                    .collect();

                let h2 = rmsnorm(&x);
                let mut up = matvec(&layer.w_up, &h2);
                for u in up.iter_mut() {
                    *u = silu(*u);
                }
                x = x.iter().zip(matvec(&layer.w_down, &up)).map(|(a, b)| a + b).collect();
            }
            let h = rmsnorm(&x);
            matvec(&self.embed, &h)
        };

        let mut logits = Vec::new();
        for &token in prompt {
            logits = step(token, &mut k_cache, &mut v_cache);
        }
        let mut out = Vec::with_capacity(arch.decode_len);
        for _ in 0..arch.decode_len {
            let next = argmax_lowest(&logits);
            out.push(next);
            logits = step(next, &mut k_cache, &mut v_cache);
        }
        out
    }
}

fn argmax_lowest(logits: &[f32]) -> u32 {
    let mut best = 0usize;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best as u32
}

/// Accuracy oracle backed by [`ToyModel`]: the score of a configuration is
/// the fraction of greedily decoded tokens, across all prompts, that match
/// the full-precision decode of the same model and prompts.
pub struct ToyLlmOracle {
    model: ToyModel,
    prompts: Vec<Vec<u32>>,
    baseline: Option<Vec<Vec<u32>>>,
    jobs: usize,
}

impl ToyLlmOracle {
    pub fn new(seed: u64) -> Self {
        Self::with_arch(seed, ToyArch::default())
    }

    pub fn with_arch(seed: u64, arch: ToyArch) -> Self {
        let model = ToyModel::new(derive_seed(seed, &[2]), arch);
        let prompts = (0..arch.num_prompts)
            .map(|p| {
                let mut rng = Rng::new(derive_seed(seed, &[3, p as u64]));
                (0..arch.prompt_len).map(|_| rng.next_index(arch.vocab) as u32).collect()
            })
            .collect();
        let jobs = arch.num_prompts;
        ToyLlmOracle { model, prompts, baseline: None, jobs }
    }

    /// Caps decode worker threads. Scores are identical at any setting; the
    /// default is one worker per prompt.
    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    /// Decodes every prompt under the plan on up to `jobs` worker threads,
    /// prompts assigned round-robin so output order is fixed.
    fn decode_all(&self, plan: QuantPlan) -> Vec<Vec<u32>> {
        let jobs = self.jobs.min(self.prompts.len()).max(1);
        let mut slots: Vec<Option<Vec<u32>>> = vec![None; self.prompts.len()];
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|worker| {
                    scope.spawn(move || {
                        let mut done = Vec::new();
                        let mut p = worker;
                        while p < self.prompts.len() {
                            done.push((p, self.model.greedy_decode(&self.prompts[p], plan)));
                            p += jobs;
                        }
                        done
                    })
                })
                .collect();
            for handle in handles {
                for (p, decoded) in handle.join().expect("decode worker panicked") {
                    slots[p] = Some(decoded);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("prompt left undecoded")).collect()
    }

    fn baseline(&mut self) -> Vec<Vec<u32>> {
        if self.baseline.is_none() {
            self.baseline = Some(self.decode_all(None));
        }
        self.baseline.clone().expect("just computed")
    }
}

impl Oracle for ToyLlmOracle {
    fn evaluate(&mut self, config: &PrecisionConfig) -> Result<f64, SearchError> {
        let pairs = config.layer_pairs();
        if pairs.len() != self.model.arch.num_layers {
            return Err(SearchError::ConfigShape(format!(
                "config assigns {} layers, model has {}",
                pairs.len(),
                self.model.arch.num_layers
            )));
        }
        let baseline = self.baseline();
        let decoded = self.decode_all(Some((config.quant_method, &pairs)));

        let mut matches = 0usize;
        let mut total = 0usize;
        for (a, b) in baseline.iter().zip(&decoded) {
            for (x, y) in a.iter().zip(b) {
                matches += usize::from(x == y);
                total += 1;
            }
        }
        Ok(matches as f64 / total as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::QuantModePreset;

    fn small_arch() -> ToyArch {
        ToyArch {
            num_layers: 2,
            d_model: 32,
            num_q_heads: 4,
            num_kv_heads: 2,
            head_dim: 8,
            vocab: 64,
            mlp_hidden: 64,
            num_prompts: 2,
            prompt_len: 8,
            decode_len: 12,
            key_outlier_scale: 1.0,
        }
    }

    fn uniform_config(arch: &ToyArch, k: u8, v: u8, mode: QuantModePreset) -> PrecisionConfig {
        PrecisionConfig::from_pairs(
            "toy",
            mode,
            &vec![PrecisionPair::of(k, v); arch.num_layers],
        )
    }

    #[test]
    fn rmsnorm_normalizes_constant_vectors() {
        let y = rmsnorm(&[3.0; 16]);
        for v in y {
            assert!((v - 1.0).abs() < 1e-5, "{v}");
        }
        let z = rmsnorm(&[0.0; 4]);
        assert_eq!(z, vec![0.0; 4]);
    }

    #[test]
    fn silu_matches_reference_values() {
        assert_eq!(silu(0.0), 0.0);
        // Reference: 1 / (1 + exp(-1)) computed independently.
        assert!((silu(1.0) - 0.7310585786300049).abs() < 1e-6);
        assert!(silu(-20.0).abs() < 1e-7);
        assert!((silu(20.0) - 20.0).abs() < 1e-5);
    }

    #[test]
    fn decode_is_deterministic_and_in_vocab() {
        let arch = small_arch();
        let model = ToyModel::new(5, arch);
        let prompt: Vec<u32> = vec![1, 2, 3, 4, 5, 6, 7, 8];
        let a = model.greedy_decode(&prompt, None);
        let b = model.greedy_decode(&prompt, None);
        assert_eq!(a, b);
        assert_eq!(a.len(), arch.decode_len);
        assert!(a.iter().all(|&t| (t as usize) < arch.vocab));

        let other = ToyModel::new(6, arch).greedy_decode(&prompt, None);
        assert_ne!(a, other, "different weights should decode differently");
    }

    #[test]
    fn full_precision_config_scores_exactly_one() {
        let arch = small_arch();
        let mut oracle = ToyLlmOracle::with_arch(11, arch);
        for mode in QuantModePreset::ALL {
            let config = uniform_config(&arch, 16, 16, mode);
            assert_eq!(oracle.evaluate(&config).unwrap(), 1.0, "{mode}");
        }
    }

    #[test]
    fn more_bits_never_scores_worse_on_this_seed() {
        let arch = small_arch();
        let mut oracle = ToyLlmOracle::with_arch(12, arch);
        let acc8 = oracle
            .evaluate(&uniform_config(&arch, 8, 8, QuantModePreset::PerTokenAsym))
            .unwrap();
        let acc2 = oracle
            .evaluate(&uniform_config(&arch, 2, 2, QuantModePreset::PerTokenAsym))
            .unwrap();
        assert!(acc8 >= acc2, "8-bit {acc8} vs 2-bit {acc2}");
        assert!(acc2 < 1.0, "2-bit decode should disturb at least one token");
        assert!(acc8 > 0.5, "8-bit decode should track the baseline closely");
    }

    #[test]
    fn config_layer_count_is_validated() {
        let arch = small_arch();
        let mut oracle = ToyLlmOracle::with_arch(13, arch);
        let short = PrecisionConfig::from_pairs(
            "toy",
            QuantModePreset::Kivi,
            &[PrecisionPair::of(4, 4)],
        );
        assert!(matches!(oracle.evaluate(&short), Err(SearchError::ConfigShape(_))));
    }

    #[test]
    fn key_outliers_make_key_bits_matter_more_than_value_bits() {
        // Same memory cost, opposite split. With channel outliers in the key
        // projections, per-token key quantization wastes its range on the
        // outlier channels and sharp attention turns the resulting logit
        // noise into wrong argmax picks, so starving keys loses more tokens
        // than starving values. Without outliers the cache is isotropic and
        // this asymmetry does not exist, which is why the outlier profile is
        // the one that mirrors trained-model behavior.
        let arch = ToyArch::with_key_outliers();
        let mut mean = (0.0f64, 0.0f64);
        for seed in [2u64, 7, 8] {
            let mut oracle = ToyLlmOracle::with_arch(seed, arch);
            mean.0 += oracle
                .evaluate(&uniform_config(&arch, 4, 2, QuantModePreset::PerTokenAsym))
                .unwrap();
            mean.1 += oracle
                .evaluate(&uniform_config(&arch, 2, 4, QuantModePreset::PerTokenAsym))
                .unwrap();
        }
        assert!(
            mean.0 > mean.1,
            "mean K4V2 agreement {} should beat mean K2V4 agreement {}",
            mean.0 / 3.0,
            mean.1 / 3.0
        );
    }
}
