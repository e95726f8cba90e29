//! Round-to-nearest asymmetric quantization of KV-cache tensors.
//!
//! A statistic group (one token row, one channel column, or a fixed-size chunk
//! of either) is quantized as
//!
//! ```text
//! z = min(group)            s = (max(group) - min(group)) / (2^B - 1)
//! code(x) = round((x - z) / s)          xhat = code * s + z
//! ```
//!
//! with round-half-away-from-zero. Group statistics and code arithmetic run in
//! f64; reconstructed values are rounded to f32 once. Two conventions hold
//! everywhere:
//!
//! * a degenerate group (max == min) uses s := 1 and all-zero codes, so
//!   reconstruction is exact instead of dividing by zero;
//! * 16-bit means full-precision passthrough, whatever the other settings.
//!
//! Rows are tokens, columns are channels. `residual_len` trailing token rows
//! are kept at full precision, mirroring how a streaming cache quantizer
//! leaves the most recent tokens untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Tensor2, Tensor3};

#[derive(Debug, Error)]
pub enum QuantError {
    #[error("non-finite value in quantizer input")]
    NonFinite,
    #[error("unsupported bit width {0}: expected one of 2, 4, 8, 16")]
    BadBits(u8),
    #[error("key/value tensor shape mismatch: {0:?} vs {1:?}")]
    KvShapeMismatch((usize, usize, usize), (usize, usize, usize)),
}

/// Which way the statistic window runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Statistics per token row, over its channels.
    PerToken,
    /// Statistics per channel column, over token rows.
    PerChannel,
}

/// Size of one statistic group along the window direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSize {
    /// One group spanning the whole window.
    Full,
    /// Fixed-size chunks; the last chunk may be partial.
    Of(usize),
}

/// Everything needed to reproduce one quantization pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantSpec {
    pub bits: u8,
    pub axis: Axis,
    pub group_size: GroupSize,
    /// Trailing token rows returned at full precision.
    pub residual_len: usize,
}

impl QuantSpec {
    pub fn new(bits: u8, axis: Axis, group_size: GroupSize, residual_len: usize) -> Result<Self, QuantError> {
        if !matches!(bits, 2 | 4 | 8 | 16) {
            return Err(QuantError::BadBits(bits));
        }
        if let GroupSize::Of(g) = group_size {
            assert!(g >= 1, "group size must be at least 1");
        }
        Ok(QuantSpec { bits, axis, group_size, residual_len })
    }
}

/// Key/value bit widths for one layer.
///
/// The search space draws both from {2, 4, 8}; 16 is admitted so the
/// full-precision baseline config can be expressed with the same type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrecisionPair {
    #[serde(rename = "k")]
    pub key_bits: u8,
    #[serde(rename = "v")]
    pub value_bits: u8,
}

impl PrecisionPair {
    pub fn new(key_bits: u8, value_bits: u8) -> Result<Self, QuantError> {
        for b in [key_bits, value_bits] {
            if !matches!(b, 2 | 4 | 8 | 16) {
                return Err(QuantError::BadBits(b));
            }
        }
        Ok(PrecisionPair { key_bits, value_bits })
    }

    /// Panicking constructor for literals known to be valid.
    pub fn of(key_bits: u8, value_bits: u8) -> Self {
        Self::new(key_bits, value_bits).expect("valid bit widths")
    }
}

impl std::fmt::Display for PrecisionPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.key_bits == self.value_bits {
            write!(f, "KV{}", self.key_bits)
        } else {
            write!(f, "K{}V{}", self.key_bits, self.value_bits)
        }
    }
}

impl std::str::FromStr for PrecisionPair {
    type Err = String;

    /// Accepts the usual shorthand: "K8V4", "KV4" (equal bits), case-insensitive.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let u = s.trim().to_ascii_uppercase();
        let parse = |t: &str| t.parse::<u8>().map_err(|_| format!("bad precision pair '{s}'"));
        let (k, v) = if let Some(rest) = u.strip_prefix("KV") {
            let b = parse(rest)?;
            (b, b)
        } else if let Some(rest) = u.strip_prefix('K') {
            let (kb, vb) = rest.split_once('V').ok_or(format!("bad precision pair '{s}'"))?;
            (parse(kb)?, parse(vb)?)
        } else {
            return Err(format!("bad precision pair '{s}'"));
        };
        PrecisionPair::new(k, v).map_err(|e| e.to_string())
    }
}

/// Per-pair contribution to the memory objective: (B_k + B_v) / 2.
pub fn pair_equivalent_bits(pair: PrecisionPair) -> f64 {
    (pair.key_bits as f64 + pair.value_bits as f64) / 2.0
}

/// The nine-pair candidate grid {2,4,8} x {2,4,8}, in descending order of
/// equivalent bits with descending key bits as the tie-break. Pruning and
/// clustering keep this order for all derived artifacts.
pub fn candidate_pairs() -> Vec<PrecisionPair> {
    let mut pairs: Vec<PrecisionPair> = [8u8, 4, 2]
        .iter()
        .flat_map(|&k| [8u8, 4, 2].iter().map(move |&v| PrecisionPair::of(k, v)))
        .collect();
    sort_pairs_canonical(&mut pairs);
    pairs
}

/// Descending equivalent bits, then descending key bits, then value bits.
pub fn sort_pairs_canonical(pairs: &mut [PrecisionPair]) {
    pairs.sort_by(|a, b| {
        let ba = a.key_bits as u16 + a.value_bits as u16;
        let bb = b.key_bits as u16 + b.value_bits as u16;
        bb.cmp(&ba)
            .then(b.key_bits.cmp(&a.key_bits))
            .then(b.value_bits.cmp(&a.value_bits))
    });
}

/// Quantized form of a 2-D tensor: codes plus per-group (zero, scale).
///
/// Codes live in [0, 2^B - 1]. The trailing residual rows and the 16-bit
/// passthrough case carry their values verbatim.
#[derive(Debug, Clone)]
pub struct QuantizedTensor {
    pub spec: QuantSpec,
    pub rows: usize,
    pub cols: usize,
    /// Row-major codes for rows [0, quant_rows); empty for 16-bit.
    codes: Vec<u16>,
    /// Per-group scale, in group emission order.
    scales: Vec<f64>,
    /// Per-group zero point (the group minimum), same order as scales.
    zeros: Vec<f32>,
    /// Trailing rows [quant_rows, rows) stored at full precision.
    residual_rows: Vec<f32>,
    /// Full copy when bits = 16.
    passthrough: Option<Vec<f32>>,
}

impl QuantizedTensor {
    fn quant_rows(&self) -> usize {
        self.rows - self.residual_rows.len() / self.cols.max(1)
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn max_code(&self) -> u16 {
        (((1u32 << self.spec.bits) - 1).min(u16::MAX as u32)) as u16
    }

    /// Reconstructs the tensor. Dims always equal the original input.
    pub fn dequantize(&self) -> Tensor2 {
        if let Some(values) = &self.passthrough {
            return Tensor2::new(self.rows, self.cols, values.clone());
        }
        let qr = self.quant_rows();
        let mut out = Tensor2::zeros(self.rows, self.cols);
        let mut group = 0usize;
        for_each_group(self.spec.axis, self.spec.group_size, qr, self.cols, |elems| {
            let z = self.zeros[group] as f64;
            let s = self.scales[group];
            for &(r, c) in elems {
                let code = self.codes[r * self.cols + c] as f64;
                out.set(r, c, (z + code * s) as f32);
            }
            group += 1;
        });
        out.data[qr * self.cols..].copy_from_slice(&self.residual_rows);
        out
    }
}

/// Calls `f` once per statistic group with that group's (row, col) elements.
/// Group emission order is rows then chunks for PerToken, columns then chunks
/// for PerChannel; both are fixed so codes and statistics stay aligned.
fn for_each_group(
    axis: Axis,
    group_size: GroupSize,
    quant_rows: usize,
    cols: usize,
    mut f: impl FnMut(&[(usize, usize)]),
) {
    let mut elems: Vec<(usize, usize)> = Vec::new();
    match axis {
        Axis::PerToken => {
            for r in 0..quant_rows {
                let step = match group_size {
                    GroupSize::Full => cols,
                    GroupSize::Of(g) => g,
                };
                let mut c0 = 0;
                while c0 < cols {
                    let c1 = (c0 + step).min(cols);
                    elems.clear();
                    elems.extend((c0..c1).map(|c| (r, c)));
                    f(&elems);
                    c0 = c1;
                }
            }
        }
        Axis::PerChannel => {
            for c in 0..cols {
                let step = match group_size {
                    GroupSize::Full => quant_rows.max(1),
                    GroupSize::Of(g) => g,
                };
                let mut r0 = 0;
                while r0 < quant_rows {
                    let r1 = (r0 + step).min(quant_rows);
                    elems.clear();
                    elems.extend((r0..r1).map(|r| (r, c)));
                    f(&elems);
                    r0 = r1;
                }
            }
        }
    }
}

/// Quantizes a [tokens, channels] tensor. See the module docs for the exact
/// arithmetic and conventions.
pub fn quantize(x: &Tensor2, spec: QuantSpec) -> Result<QuantizedTensor, QuantError> {
    if !x.is_finite() {
        return Err(QuantError::NonFinite);
    }
    if !matches!(spec.bits, 2 | 4 | 8 | 16) {
        return Err(QuantError::BadBits(spec.bits));
    }
    if spec.bits == 16 {
        return Ok(QuantizedTensor {
            spec,
            rows: x.rows,
            cols: x.cols,
            codes: Vec::new(),
            scales: Vec::new(),
            zeros: Vec::new(),
            residual_rows: Vec::new(),
            passthrough: Some(x.data.clone()),
        });
    }
    let residual = spec.residual_len.min(x.rows);
    let qr = x.rows - residual;
    let max_code = (1u32 << spec.bits) - 1;
    let levels = max_code as f64;

    let mut codes = vec![0u16; qr * x.cols];
    let mut scales = Vec::new();
    let mut zeros = Vec::new();

    for_each_group(spec.axis, spec.group_size, qr, x.cols, |elems| {
        let mut lo = f32::INFINITY;
        let mut hi = f32::NEG_INFINITY;
        for &(r, c) in elems {
            let v = x.at(r, c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi > lo {
            let s = (hi as f64 - lo as f64) / levels;
            for &(r, c) in elems {
                let code = ((x.at(r, c) as f64 - lo as f64) / s).round();
                codes[r * x.cols + c] = (code as u32).min(max_code) as u16;
            }
            scales.push(s);
        } else {
            // Degenerate range: all codes stay 0 and reconstruction is z.
            scales.push(1.0);
        }
        zeros.push(lo);
    });

    Ok(QuantizedTensor {
        spec,
        rows: x.rows,
        cols: x.cols,
        codes,
        scales,
        zeros,
        residual_rows: x.data[qr * x.cols..].to_vec(),
        passthrough: None,
    })
}

/// Quantize and immediately reconstruct: the simulated low-precision tensor.
pub fn quantize_dequantize(x: &Tensor2, spec: QuantSpec) -> Result<Tensor2, QuantError> {
    Ok(quantize(x, spec)?.dequantize())
}

/// Streaming-cache quantization of per-head K/V tensors [heads, tokens, dim]:
/// keys per-channel in token groups, values per-token in channel groups, and
/// the most recent `residual` tokens of both kept at full precision.
pub fn kivi_quantize_kv(
    k: &Tensor3,
    v: &Tensor3,
    pair: PrecisionPair,
    group: usize,
    residual: usize,
) -> Result<(Tensor3, Tensor3), QuantError> {
    if k.dims() != v.dims() {
        return Err(QuantError::KvShapeMismatch(k.dims(), v.dims()));
    }
    let k_spec = QuantSpec::new(pair.key_bits, Axis::PerChannel, GroupSize::Of(group), residual)?;
    let v_spec = QuantSpec::new(pair.value_bits, Axis::PerToken, GroupSize::Of(group), residual)?;
    let k_hat = quantize_kv_tensor(k, k_spec)?;
    let v_hat = quantize_kv_tensor(v, v_spec)?;
    Ok((k_hat, v_hat))
}

/// Applies one spec to every head plane of a [heads, tokens, dim] tensor.
pub fn quantize_kv_tensor(x: &Tensor3, spec: QuantSpec) -> Result<Tensor3, QuantError> {
    let mut out = Tensor3::zeros(x.d0, x.d1, x.d2);
    for h in 0..x.d0 {
        let plane = x.plane(h);
        out.set_plane(h, &quantize_dequantize(&plane, spec)?);
    }
    Ok(out)
}
