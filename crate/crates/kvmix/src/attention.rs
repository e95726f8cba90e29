//! Grouped-query attention and the four quantization error metrics.
//!
//! The forward pass computes, per query head h and query row i,
//!
//! ```text
//! scores_i = softmax(q_i K^T / sqrt(D))    (causal mask applied)
//! output_i = scores_i V
//! ```
//!
//! where K and V come from the KV head `h / (H_q / H_kv)`. Softmax runs with
//! max-subtraction in f64; scores are stored as f32 and outputs accumulate the
//! f64 probabilities.
//!
//! Error metrics compare a full-precision run against a run whose K/V were
//! replaced by dequantized tensors:
//!
//! * `e_k`, `e_v`: mean relative element error of the cache tensors,
//!   elements with magnitude below [`RELATIVE_ERROR_FLOOR`] excluded;
//! * `e_a`: mean absolute score error over unmasked score entries, where the
//!   perturbed scores use the quantized keys;
//! * `e_o`: mean relative output error, with the same magnitude floor, where
//!   the perturbed output uses both quantized scores and quantized values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quant::{quantize_dequantize, Axis, GroupSize, QuantSpec};
use crate::rng::{derive_seed, Rng};
use crate::tensor::Tensor3;

/// Elements smaller than this in magnitude are excluded from relative-error
/// means; the ratio |x - xhat| / |x| is not meaningful at zero.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AttentionError {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("query heads {q} not divisible by kv heads {kv}")]
    HeadDivisibility { q: usize, kv: usize },
    #[error("causal offset {offset} inconsistent: keys {s}, queries {t_q}")]
    BadOffset { offset: usize, s: usize, t_q: usize },
    #[error("non-finite attention result")]
    NonFinite,
}

/// The four error metrics of one quantized-vs-full comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionErrors {
    pub e_k: f64,
    pub e_v: f64,
    pub e_a: f64,
    pub e_o: f64,
}

impl AttentionErrors {
    pub const ZERO: AttentionErrors = AttentionErrors { e_k: 0.0, e_v: 0.0, e_a: 0.0, e_o: 0.0 };
}

/// Sum/count accumulators behind the four means. Profiling adds several
/// prompts into one accumulator so every element keeps equal weight no matter
/// how long each prompt is.
#[derive(Debug, Clone, Copy, Default)]
pub struct ErrorAccum {
    pub e_k: (f64, u64),
    pub e_v: (f64, u64),
    pub e_a: (f64, u64),
    pub e_o: (f64, u64),
}

impl ErrorAccum {
    pub fn merge(&mut self, other: &ErrorAccum) {
        for (a, b) in [
            (&mut self.e_k, other.e_k),
            (&mut self.e_v, other.e_v),
            (&mut self.e_a, other.e_a),
            (&mut self.e_o, other.e_o),
        ] {
            a.0 += b.0;
            a.1 += b.1;
        }
    }

    pub fn finalize(&self) -> AttentionErrors {
        let mean = |(sum, n): (f64, u64)| if n == 0 { 0.0 } else { sum / n as f64 };
        AttentionErrors {
            e_k: mean(self.e_k),
            e_v: mean(self.e_v),
            e_a: mean(self.e_a),
            e_o: mean(self.e_o),
        }
    }
}

fn check_shapes(q: &Tensor3, k: &Tensor3, v: &Tensor3, causal_offset: usize) -> Result<(), AttentionError> {
    if k.dims() != v.dims() {
        return Err(AttentionError::DimMismatch(format!("K {:?} vs V {:?}", k.dims(), v.dims())));
    }
    if q.d2 != k.d2 {
        return Err(AttentionError::DimMismatch(format!("head dim Q {} vs K {}", q.d2, k.d2)));
    }
    if k.d0 == 0 || q.d0 == 0 {
        return Err(AttentionError::DimMismatch("zero heads".into()));
    }
    if q.d0 % k.d0 != 0 {
        return Err(AttentionError::HeadDivisibility { q: q.d0, kv: k.d0 });
    }
    if k.d1 != q.d1 + causal_offset {
        return Err(AttentionError::BadOffset { offset: causal_offset, s: k.d1, t_q: q.d1 });
    }
    Ok(())
}

/// Causal grouped-query attention over an entire cache.
///
/// Query row i attends to keys j <= i + causal_offset, so passing
/// `causal_offset = prefill_len` with decode-phase queries reproduces the
/// cache state each decode step saw. Masked score entries are stored as 0.
pub fn attention_forward(
    q: &Tensor3,
    k: &Tensor3,
    v: &Tensor3,
    causal_offset: usize,
) -> Result<(Tensor3, Tensor3), AttentionError> {
    check_shapes(q, k, v, causal_offset)?;
    let (h_q, t_q, d) = q.dims();
    let s = k.d1;
    let group = h_q / k.d0;
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();

    let mut scores = Tensor3::zeros(h_q, t_q, s);
    let mut output = Tensor3::zeros(h_q, t_q, d);
    let mut logits = vec![0.0f64; s];
    let mut probs = vec![0.0f64; s];

    for h in 0..h_q {
        let kv = h / group;
        for i in 0..t_q {
            let visible = i + causal_offset + 1; // keys 0..visible
            let q_row = q.row(h, i);
            let mut max_logit = f64::NEG_INFINITY;
            for j in 0..visible {
                let k_row = k.row(kv, j);
                let mut dot = 0.0f64;
                for c in 0..d {
                    dot += q_row[c] as f64 * k_row[c] as f64;
                }
                let l = dot * inv_sqrt_d;
                logits[j] = l;
                if l > max_logit {
                    max_logit = l;
                }
            }
            let mut denom = 0.0f64;
            for j in 0..visible {
                let e = (logits[j] - max_logit).exp();
                probs[j] = e;
                denom += e;
            }
            for j in 0..visible {
                probs[j] /= denom;
                scores.set(h, i, j, probs[j] as f32);
            }
            for c in 0..d {
                let mut acc = 0.0f64;
                for j in 0..visible {
                    acc += probs[j] * v.at(kv, j, c) as f64;
                }
                output.set(h, i, c, acc as f32);
            }
        }
    }
    if !scores.is_finite() || !output.is_finite() {
        return Err(AttentionError::NonFinite);
    }
    Ok((scores, output))
}

/// Relative mean error between two same-shape tensors, small-magnitude
/// reference elements excluded. Returns (sum, count).
fn relative_error_sums(reference: &[f32], perturbed: &[f32]) -> (f64, u64) {
    let mut sum = 0.0f64;
    let mut n = 0u64;
    for (&a, &b) in reference.iter().zip(perturbed) {
        let a = a as f64;
        if a.abs() >= RELATIVE_ERROR_FLOOR {
            sum += (a - b as f64).abs() / a.abs();
            n += 1;
        }
    }
    (sum, n)
}

/// Error sums for one prompt/layer. [`attention_errors`] finalizes a single
/// call; the profiler merges several before finalizing.
pub fn attention_error_accum(
    q: &Tensor3,
    k: &Tensor3,
    v: &Tensor3,
    k_hat: &Tensor3,
    v_hat: &Tensor3,
    causal_offset: usize,
) -> Result<ErrorAccum, AttentionError> {
    if k.dims() != k_hat.dims() || v.dims() != v_hat.dims() {
        return Err(AttentionError::DimMismatch("quantized tensor shape".into()));
    }
    let (scores, output) = attention_forward(q, k, v, causal_offset)?;
    let (scores_hat, output_hat) = attention_forward(q, k_hat, v_hat, causal_offset)?;

    let mut acc = ErrorAccum {
        e_k: relative_error_sums(&k.data, &k_hat.data),
        e_v: relative_error_sums(&v.data, &v_hat.data),
        ..Default::default()
    };

    let (h_q, t_q, _) = q.dims();
    for h in 0..h_q {
        for i in 0..t_q {
            for j in 0..=(i + causal_offset) {
                acc.e_a.0 += (scores.at(h, i, j) as f64 - scores_hat.at(h, i, j) as f64).abs();
                acc.e_a.1 += 1;
            }
        }
    }
    acc.e_o = relative_error_sums(&output.data, &output_hat.data);
    Ok(acc)
}

/// The four error metrics for one quantized cache against full precision.
pub fn attention_errors(
    q: &Tensor3,
    k: &Tensor3,
    v: &Tensor3,
    k_hat: &Tensor3,
    v_hat: &Tensor3,
    causal_offset: usize,
) -> Result<AttentionErrors, AttentionError> {
    Ok(attention_error_accum(q, k, v, k_hat, v_hat, causal_offset)?.finalize())
}

/// Mean-pools score maps over block x block tiles along (query, key); edge
/// tiles average over the elements they actually cover. Block 1 is identity.
pub fn block_attention_map(scores: &Tensor3, block: usize) -> Tensor3 {
    assert!(block >= 1, "block size must be at least 1");
    let (h_n, t_q, s) = scores.dims();
    let bt = t_q.div_ceil(block);
    let bs = s.div_ceil(block);
    let mut out = Tensor3::zeros(h_n, bt, bs);
    for h in 0..h_n {
        for bi in 0..bt {
            for bj in 0..bs {
                let i1 = ((bi + 1) * block).min(t_q);
                let j1 = ((bj + 1) * block).min(s);
                let mut sum = 0.0f64;
                let mut n = 0u64;
                for i in bi * block..i1 {
                    for j in bj * block..j1 {
                        sum += scores.at(h, i, j) as f64;
                        n += 1;
                    }
                }
                out.set(h, bi, bj, (sum / n as f64) as f32);
            }
        }
    }
    out
}

/// Outcome of one dominant-key-vs-uniform comparison.
#[derive(Debug, Clone, Copy)]
pub struct DominantProbe {
    pub e_a_dominant: f64,
    pub e_a_uniform: f64,
    /// Whether key quantization left the dominant instance's top-scoring key
    /// unchanged.
    pub argmax_preserved: bool,
}

const PROBE_SEQ: usize = 64;
const PROBE_DIM: usize = 32;

/// Builds two 64-key, 32-dim single-query instances sharing one random draw:
/// one where a chosen key's logit sits `margin` above every other logit, and
/// one with the keys as drawn (i.i.d. logits). Keys are quantized per-token at
/// `bits`; returns the score error of both instances plus whether the
/// dominant instance kept its argmax key.
///
/// Concentrated score mass is expected to make the dominant instance nearly
/// immune to key quantization: every competing logit stays `margin` minus a
/// perturbation below the top one, so the softmax still assigns it almost all
/// mass.
pub fn dominant_token_probe_detail(margin: f64, bits: u8, seed: u64) -> DominantProbe {
    assert!(margin > 0.0, "margin must be positive");
    let mut rng = Rng::new(derive_seed(seed, &[0x0d0a]));
    let s = PROBE_SEQ;
    let d = PROBE_DIM;

    let k_data: Vec<f32> = (0..s * d).map(|_| rng.next_gauss() as f32).collect();
    let v_data: Vec<f32> = (0..s * d).map(|_| rng.next_gauss() as f32).collect();
    let q_data: Vec<f32> = (0..d).map(|_| rng.next_gauss() as f32).collect();
    let star = rng.next_index(s);

    let k_uniform = Tensor3::new(1, s, d, k_data.clone());
    let v = Tensor3::new(1, s, d, v_data);
    let q = Tensor3::new(1, 1, d, q_data.clone());

    // Shift key `star` along q so its logit lands exactly margin above the
    // best of the others.
    let sqrt_d = (d as f64).sqrt();
    let logit = |row: &[f32]| -> f64 {
        row.iter().zip(&q_data).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() / sqrt_d
    };
    let logits: Vec<f64> = (0..s).map(|j| logit(&k_data[j * d..(j + 1) * d])).collect();
    let best_other = (0..s)
        .filter(|&j| j != star)
        .map(|j| logits[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let q_norm_sq: f64 = q_data.iter().map(|&x| (x as f64) * (x as f64)).sum();
    let alpha = (best_other + margin - logits[star]) * sqrt_d / q_norm_sq;
    let mut k_dom_data = k_data;
    for c in 0..d {
        k_dom_data[star * d + c] = (k_dom_data[star * d + c] as f64 + alpha * q_data[c] as f64) as f32;
    }
    let k_dominant = Tensor3::new(1, s, d, k_dom_data);

    let spec = QuantSpec::new(bits, Axis::PerToken, GroupSize::Full, 0).expect("valid probe bits");
    let quantize_keys = |k: &Tensor3| -> Tensor3 {
        let plane = quantize_dequantize(&k.plane(0), spec).expect("finite probe keys");
        let mut out = Tensor3::zeros(1, s, d);
        out.set_plane(0, &plane);
        out
    };

    let e_a_of = |k: &Tensor3, k_hat: &Tensor3| -> (f64, usize) {
        let errs = attention_errors(&q, k, &v, k_hat, &v, s - 1).expect("probe shapes are valid");
        let (scores_hat, _) = attention_forward(&q, k_hat, &v, s - 1).expect("probe forward");
        let row: Vec<f32> = (0..s).map(|j| scores_hat.at(0, 0, j)).collect();
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite scores"))
            .map(|(j, _)| j)
            .unwrap_or(0);
        (errs.e_a, argmax)
    };

    let (e_a_dominant, argmax_dom) = e_a_of(&k_dominant, &quantize_keys(&k_dominant));
    let (e_a_uniform, _) = e_a_of(&k_uniform, &quantize_keys(&k_uniform));
    DominantProbe { e_a_dominant, e_a_uniform, argmax_preserved: argmax_dom == star }
}

/// The (dominant, uniform) score-error pair of [`dominant_token_probe_detail`].
pub fn dominant_token_probe(margin: f64, bits: u8, seed: u64) -> (f64, f64) {
    let probe = dominant_token_probe_detail(margin, bits, seed);
    (probe.e_a_dominant, probe.e_a_uniform)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_head(rows: Vec<Vec<f32>>) -> Tensor3 {
        let d = rows[0].len();
        let n = rows.len();
        Tensor3::new(1, n, d, rows.into_iter().flatten().collect())
    }

    #[test]
    fn single_key_gives_unit_score_and_copies_value() {
        let q = single_head(vec![vec![3.0, -1.0]]);
        let k = single_head(vec![vec![0.5, 2.0]]);
        let v = single_head(vec![vec![7.0, -4.0]]);
        let (scores, out) = attention_forward(&q, &k, &v, 0).unwrap();
        assert_eq!(scores.at(0, 0, 0), 1.0);
        assert_eq!(out.row(0, 0), &[7.0, -4.0]);
    }

    #[test]
    fn zero_query_gives_uniform_scores() {
        let q = single_head(vec![vec![0.0, 0.0]]);
        let k = single_head(vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![2.0, 2.0], vec![0.0, 9.0]]);
        let v = single_head(vec![vec![1.0, 0.0]; 4]);
        let (scores, _) = attention_forward(&q, &k, &v, 3).unwrap();
        for j in 0..4 {
            assert_eq!(scores.at(0, 0, j), 0.25);
        }
    }

    #[test]
    fn two_key_logits_match_scalar_softmax() {
        // q=[1,0], keys [10,0] and [0,0], D=2: logits are [10/sqrt(2), 0].
        // Reference probabilities computed by a separate high-precision
        // evaluation of the same formula.
        let q = single_head(vec![vec![1.0, 0.0]]);
        let k = single_head(vec![vec![10.0, 0.0], vec![0.0, 0.0]]);
        let v = single_head(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let (scores, _) = attention_forward(&q, &k, &v, 1).unwrap();
        // Scores are stored as f32, so allow half an f32 ulp at each scale.
        let p0 = 0.99915139503728889_f64;
        let p1 = 0.00084860496271118744_f64;
        assert!((scores.at(0, 0, 0) as f64 - p0).abs() < 1e-7);
        assert!((scores.at(0, 0, 1) as f64 - p1).abs() < 1e-10);
    }

    #[test]
    fn causal_mask_hides_future_keys() {
        let q = single_head(vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let k = single_head(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let v = single_head(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let (scores, out) = attention_forward(&q, &k, &v, 0).unwrap();
        // Row 0 sees only key 0.
        assert_eq!(scores.at(0, 0, 0), 1.0);
        assert_eq!(scores.at(0, 0, 1), 0.0);
        assert_eq!(out.row(0, 0), &[1.0, 2.0]);
        // Row 1 sees both; symmetric logits give an even split.
        assert!((scores.at(0, 1, 0) - 0.5).abs() < 1e-6);
        assert!((scores.at(0, 1, 1) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn score_rows_sum_to_one() {
        let mut rng = crate::rng::Rng::new(31);
        let q = Tensor3::new(4, 5, 8, (0..4 * 5 * 8).map(|_| rng.next_gauss() as f32).collect());
        let k = Tensor3::new(2, 9, 8, (0..2 * 9 * 8).map(|_| rng.next_gauss() as f32).collect());
        let v = Tensor3::new(2, 9, 8, (0..2 * 9 * 8).map(|_| rng.next_gauss() as f32).collect());
        let (scores, _) = attention_forward(&q, &k, &v, 4).unwrap();
        for h in 0..4 {
            for i in 0..5 {
                let sum: f64 = (0..9).map(|j| scores.at(h, i, j) as f64).sum();
                assert!((sum - 1.0).abs() < 1e-5, "row sum {sum}");
            }
        }
    }

    #[test]
    fn gqa_matches_duplicated_mha() {
        let mut rng = crate::rng::Rng::new(32);
        let q = Tensor3::new(4, 3, 8, (0..4 * 3 * 8).map(|_| rng.next_gauss() as f32).collect());
        let k = Tensor3::new(2, 6, 8, (0..2 * 6 * 8).map(|_| rng.next_gauss() as f32).collect());
        let v = Tensor3::new(2, 6, 8, (0..2 * 6 * 8).map(|_| rng.next_gauss() as f32).collect());

        // Duplicate each KV head to match the query head count.
        let dup = |t: &Tensor3| {
            let mut big = Tensor3::zeros(4, t.d1, t.d2);
            for h in 0..4 {
                big.set_plane(h, &t.plane(h / 2));
            }
            big
        };
        let (s_gqa, o_gqa) = attention_forward(&q, &k, &v, 3).unwrap();
        let (s_mha, o_mha) = attention_forward(&q, &dup(&k), &dup(&v), 3).unwrap();
        assert_eq!(s_gqa.data, s_mha.data);
        assert_eq!(o_gqa.data, o_mha.data);
    }

    #[test]
    fn shape_violations_are_reported() {
        let q = Tensor3::zeros(3, 1, 4);
        let k = Tensor3::zeros(2, 1, 4);
        let v = Tensor3::zeros(2, 1, 4);
        assert!(matches!(
            attention_forward(&q, &k, &v, 0),
            Err(AttentionError::HeadDivisibility { q: 3, kv: 2 })
        ));
        let q = Tensor3::zeros(2, 2, 4);
        assert!(matches!(
            attention_forward(&q, &k, &v, 0),
            Err(AttentionError::BadOffset { .. })
        ));
    }

    #[test]
    fn identity_quantization_gives_zero_errors() {
        let mut rng = crate::rng::Rng::new(33);
        let q = Tensor3::new(2, 2, 4, (0..16).map(|_| rng.next_gauss() as f32).collect());
        let k = Tensor3::new(1, 5, 4, (0..20).map(|_| rng.next_gauss() as f32).collect());
        let v = Tensor3::new(1, 5, 4, (0..20).map(|_| rng.next_gauss() as f32).collect());
        let e = attention_errors(&q, &k, &v, &k.clone(), &v.clone(), 3).unwrap();
        assert_eq!(e, AttentionErrors::ZERO);
    }

    #[test]
    fn single_key_score_error_is_zero_under_any_key_change() {
        // Softmax over one logit is always 1, so e_a cannot move.
        let q = single_head(vec![vec![1.0, 2.0]]);
        let k = single_head(vec![vec![3.0, 4.0]]);
        let k_hat = single_head(vec![vec![-9.0, 0.25]]);
        let v = single_head(vec![vec![1.0, 1.0]]);
        let e = attention_errors(&q, &k, &v, &k_hat, &v, 0).unwrap();
        assert_eq!(e.e_a, 0.0);
        assert!(e.e_k > 0.0);
    }

    #[test]
    fn perturbed_key_error_matches_independent_recomputation() {
        let q = single_head(vec![vec![1.0, 0.5]]);
        let k = single_head(vec![vec![0.2, -0.4], vec![0.6, 0.1]]);
        let mut k_hat = k.clone();
        k_hat.set(0, 1, 0, k.at(0, 1, 0) + 0.1);
        let v = single_head(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let e = attention_errors(&q, &k, &v, &k_hat, &v, 1).unwrap();

        // Plain-f64 reference for the same two-key instance, reading the
        // f32 values actually stored in the tensors.
        let softmax2 = |l0: f64, l1: f64| {
            let m = l0.max(l1);
            let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
            (e0 / (e0 + e1), e1 / (e0 + e1))
        };
        let d = 2.0f64.sqrt();
        let logit = |key: &Tensor3, t: usize| {
            (q.at(0, 0, 0) as f64 * key.at(0, t, 0) as f64
                + q.at(0, 0, 1) as f64 * key.at(0, t, 1) as f64)
                / d
        };
        let (a0, a1) = softmax2(logit(&k, 0), logit(&k, 1));
        let (b0, b1) = softmax2(logit(&k_hat, 0), logit(&k_hat, 1));
        let expect = (((a0 as f32) as f64 - (b0 as f32) as f64).abs()
            + ((a1 as f32) as f64 - (b1 as f32) as f64).abs())
            / 2.0;
        assert!((e.e_a - expect).abs() < 1e-12, "e_a {} expect {}", e.e_a, expect);
    }

    #[test]
    fn block_map_of_one_is_identity() {
        let mut rng = crate::rng::Rng::new(34);
        let q = Tensor3::new(1, 8, 4, (0..32).map(|_| rng.next_gauss() as f32).collect());
        let k = Tensor3::new(1, 8, 4, (0..32).map(|_| rng.next_gauss() as f32).collect());
        let v = Tensor3::new(1, 8, 4, (0..32).map(|_| rng.next_gauss() as f32).collect());
        let (scores, _) = attention_forward(&q, &k, &v, 0).unwrap();
        let pooled = block_attention_map(&scores, 1);
        assert_eq!(pooled.data, scores.data);
    }

    #[test]
    fn uniform_scores_pool_to_the_same_constant() {
        let scores = Tensor3::new(1, 8, 8, vec![0.125; 64]);
        let pooled = block_attention_map(&scores, 4);
        assert_eq!(pooled.dims(), (1, 2, 2));
        for x in &pooled.data {
            assert!((x - 0.125).abs() < 1e-7);
        }
    }

    #[test]
    fn block_map_matches_naive_double_loop() {
        let mut rng = crate::rng::Rng::new(35);
        let scores = Tensor3::new(2, 8, 8, (0..128).map(|_| rng.next_f64() as f32).collect());
        let pooled = block_attention_map(&scores, 3);
        assert_eq!(pooled.dims(), (2, 3, 3));
        for h in 0..2 {
            for bi in 0..3 {
                for bj in 0..3 {
                    let mut sum = 0.0f64;
                    let mut n = 0;
                    for i in (bi * 3)..((bi * 3 + 3).min(8)) {
                        for j in (bj * 3)..((bj * 3 + 3).min(8)) {
                            sum += scores.at(h, i, j) as f64;
                            n += 1;
                        }
                    }
                    let expect = (sum / n as f64) as f32;
                    assert_eq!(pooled.at(h, bi, bj), expect);
                }
            }
        }
    }

    #[test]
    fn probe_is_deterministic_and_passthrough_at_16_bits() {
        let a = dominant_token_probe(20.0, 2, 7);
        let b = dominant_token_probe(20.0, 2, 7);
        assert_eq!(a, b);
        let (dom, unif) = dominant_token_probe(20.0, 16, 7);
        assert_eq!(dom, 0.0);
        assert_eq!(unif, 0.0);
    }

    #[test]
    fn dominant_instance_is_robust_at_two_bits() {
        let (dom, unif) = dominant_token_probe(20.0, 2, 123);
        assert!(dom <= 1e-3, "dominant e_a {dom}");
        assert!(dom < unif / 10.0, "dominant {dom} vs uniform {unif}");
    }
}
