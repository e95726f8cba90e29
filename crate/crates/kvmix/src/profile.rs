//! Per-layer sensitivity profiling: sweep key/value precision pairs over a
//! calibration trace and record the attention error each pair induces.
//!
//! Queries come from the decode phase only, so every profiled score row
//! attends across the whole accumulated cache, which is where quantization
//! error actually hurts. Errors are averaged with equal weight per element
//! across prompts, not per prompt, so longer prompts count proportionally.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attention::{attention_error_accum, AttentionError, AttentionErrors, ErrorAccum};
use crate::quant::{
    kivi_quantize_kv, quantize_kv_tensor, Axis, GroupSize, PrecisionPair, QuantError, QuantSpec,
};
use crate::tensor::Tensor3;
use crate::trace::CalibrationTrace;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("layer {layer} out of range for {num_layers}-layer trace")]
    LayerOutOfRange { layer: usize, num_layers: usize },
    #[error("no precision pairs to profile")]
    EmptyPairs,
    #[error("trace has no decode-phase queries to profile")]
    NoQueries,
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Attention(#[from] AttentionError),
}

/// How K and V are grouped and quantized, independent of bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantModePreset {
    /// K and V both quantized per token over whole rows.
    #[serde(rename = "per-token-asym")]
    PerTokenAsym,
    /// K per channel (absorbing channel outliers), V per token, whole
    /// rows/columns as single groups.
    #[serde(rename = "per-channel-asym")]
    PerChannelAsymKey,
    /// Streaming-cache layout: K per channel and V per token in groups of
    /// 32, with the most recent 32 tokens held at full precision.
    #[serde(rename = "kivi")]
    Kivi,
}

impl QuantModePreset {
    pub const ALL: [QuantModePreset; 3] =
        [QuantModePreset::PerTokenAsym, QuantModePreset::PerChannelAsymKey, QuantModePreset::Kivi];

    /// Group length and full-precision tail used by the streaming preset.
    pub const KIVI_GROUP: usize = 32;
    pub const KIVI_RESIDUAL: usize = 32;

    pub fn name(&self) -> &'static str {
        match self {
            QuantModePreset::PerTokenAsym => "per-token-asym",
            QuantModePreset::PerChannelAsymKey => "per-channel-asym",
            QuantModePreset::Kivi => "kivi",
        }
    }

    /// Simulates cache quantization of one layer's K/V under this preset.
    pub fn quantize_kv(
        &self,
        k: &Tensor3,
        v: &Tensor3,
        pair: PrecisionPair,
    ) -> Result<(Tensor3, Tensor3), QuantError> {
        match self {
            QuantModePreset::PerTokenAsym => {
                let k_spec = QuantSpec::new(pair.key_bits, Axis::PerToken, GroupSize::Full, 0)?;
                let v_spec = QuantSpec::new(pair.value_bits, Axis::PerToken, GroupSize::Full, 0)?;
                Ok((quantize_kv_tensor(k, k_spec)?, quantize_kv_tensor(v, v_spec)?))
            }
            QuantModePreset::PerChannelAsymKey => {
                let k_spec = QuantSpec::new(pair.key_bits, Axis::PerChannel, GroupSize::Full, 0)?;
                let v_spec = QuantSpec::new(pair.value_bits, Axis::PerToken, GroupSize::Full, 0)?;
                Ok((quantize_kv_tensor(k, k_spec)?, quantize_kv_tensor(v, v_spec)?))
            }
            QuantModePreset::Kivi => {
                kivi_quantize_kv(k, v, pair, Self::KIVI_GROUP, Self::KIVI_RESIDUAL)
            }
        }
    }
}

impl std::fmt::Display for QuantModePreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for QuantModePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-token-asym" => Ok(QuantModePreset::PerTokenAsym),
            "per-channel-asym" => Ok(QuantModePreset::PerChannelAsymKey),
            "kivi" => Ok(QuantModePreset::Kivi),
            other => Err(format!(
                "unknown quantization preset '{other}' (expected per-token-asym, per-channel-asym, or kivi)"
            )),
        }
    }
}

/// One profiled precision pair and the errors it induced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    #[serde(flatten)]
    pub pair: PrecisionPair,
    #[serde(flatten)]
    pub errors: AttentionErrors,
}

/// Sensitivity table for one layer: every profiled pair with its errors,
/// in the order the pairs were supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerProfile {
    pub layer: usize,
    pub mode: QuantModePreset,
    pub entries: Vec<ProfileEntry>,
}

impl LayerProfile {
    pub fn errors_for(&self, pair: PrecisionPair) -> Option<AttentionErrors> {
        self.entries.iter().find(|e| e.pair == pair).map(|e| e.errors)
    }
}

/// Profiles one layer: for each pair, quantizes every prompt's K/V and
/// accumulates attention errors, merging across prompts element-weighted.
pub fn profile_layer(
    trace: &CalibrationTrace,
    layer: usize,
    mode: QuantModePreset,
    pairs: &[PrecisionPair],
) -> Result<LayerProfile, ProfileError> {
    if layer >= trace.num_layers {
        return Err(ProfileError::LayerOutOfRange { layer, num_layers: trace.num_layers });
    }
    if pairs.is_empty() {
        return Err(ProfileError::EmptyPairs);
    }
    if trace.prompts.iter().all(|p| p.decode_len == 0) {
        return Err(ProfileError::NoQueries);
    }

    let mut entries = Vec::with_capacity(pairs.len());
    for &pair in pairs {
        let mut acc = ErrorAccum::default();
        for prompt in &trace.prompts {
            if prompt.decode_len == 0 {
                continue;
            }
            let tensors = &prompt.layers[layer];
            let (k_hat, v_hat) = mode.quantize_kv(&tensors.k, &tensors.v, pair)?;
            let prompt_acc = attention_error_accum(
                &tensors.q,
                &tensors.k,
                &tensors.v,
                &k_hat,
                &v_hat,
                prompt.prefill_len,
            )?;
            acc.merge(&prompt_acc);
        }
        entries.push(ProfileEntry { pair, errors: acc.finalize() });
    }
    Ok(LayerProfile { layer, mode, entries })
}

/// Profiles every layer, optionally fanning layers out over `jobs` worker
/// threads. Output order and content are independent of `jobs`.
pub fn profile_model(
    trace: &CalibrationTrace,
    mode: QuantModePreset,
    pairs: &[PrecisionPair],
    jobs: usize,
) -> Result<Vec<LayerProfile>, ProfileError> {
    let jobs = jobs.max(1).min(trace.num_layers.max(1));
    if jobs <= 1 {
        return (0..trace.num_layers).map(|l| profile_layer(trace, l, mode, pairs)).collect();
    }

    let mut slots: Vec<Option<Result<LayerProfile, ProfileError>>> =
        (0..trace.num_layers).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(jobs);
        for worker in 0..jobs {
            handles.push(scope.spawn(move || {
                let mut results = Vec::new();
                let mut l = worker;
                while l < trace.num_layers {
                    results.push((l, profile_layer(trace, l, mode, pairs)));
                    l += jobs;
                }
                results
            }));
        }
        for handle in handles {
            for (l, result) in handle.join().expect("profiling worker panicked") {
                slots[l] = Some(result);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("layer left unprofiled")).collect()
}

/// Aggregate shape statistics of one head's score map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPatternStats {
    pub head: usize,
    /// Mean over query rows of the largest score in the row. High values
    /// mean attention concentrates on few tokens.
    pub mean_max_score: f64,
    /// Mean over query rows of the row entropy (natural log). Uniform
    /// attention over n keys gives ln(n); one-hot rows give 0.
    pub mean_entropy: f64,
}

/// Summarizes attention concentration per head from a score tensor produced
/// by [`crate::attention::attention_forward`]. Masked entries are zero and
/// contribute nothing to either statistic.
pub fn pattern_stats(scores: &Tensor3) -> Vec<HeadPatternStats> {
    let (heads, rows, _) = scores.dims();
    let mut out = Vec::with_capacity(heads);
    for h in 0..heads {
        let mut max_sum = 0.0f64;
        let mut ent_sum = 0.0f64;
        for i in 0..rows {
            let row = scores.row(h, i);
            let mut row_max = 0.0f64;
            let mut row_ent = 0.0f64;
            for &a in row {
                let a = a as f64;
                row_max = row_max.max(a);
                if a > 0.0 {
                    row_ent -= a * a.ln();
                }
            }
            max_sum += row_max;
            ent_sum += row_ent;
        }
        let n = rows.max(1) as f64;
        out.push(HeadPatternStats { head: h, mean_max_score: max_sum / n, mean_entropy: ent_sum / n });
    }
    out
}
