//! Calibration traces: per-layer, per-prompt Q/K/V tensors with an on-disk
//! format built for exact reproducibility.
//!
//! A trace directory holds `manifest.json` plus one raw tensor file per
//! (prompt, layer, tensor). Tensor files are little-endian f32, row-major,
//! headerless; every shape lives in the manifest, so a loader never guesses.
//! K and V cover the full sequence `[num_kv_heads, prefill+decode, head_dim]`
//! while Q holds only decode-phase queries `[num_q_heads, decode, head_dim]`,
//! which is exactly what sensitivity profiling consumes.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, Rng};
use crate::tensor::Tensor3;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("query heads {q} not divisible by kv heads {kv}")]
    HeadDivisibility { q: usize, kv: usize },
    #[error("dimension must be at least 1: {0}")]
    BadDim(&'static str),
    #[error("prompt {prompt}: expected {expected} layer entries, found {found}")]
    LayerCount { prompt: String, expected: usize, found: usize },
    #[error("tensor file {path}: expected {expected} bytes for shape {shape:?}, found {found}")]
    ByteLength { path: PathBuf, expected: usize, found: usize, shape: (usize, usize, usize) },
    #[error("tensor file {path}: non-finite value at element {index}")]
    NonFinite { path: PathBuf, index: usize },
}

/// Manifest schema, exactly as serialized to `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceManifest {
    pub model_name: String,
    pub num_layers: usize,
    pub num_q_heads: usize,
    pub num_kv_heads: usize,
    pub head_dim: usize,
    pub prompts: Vec<PromptEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptEntry {
    pub prompt_id: String,
    pub prefill_len: usize,
    pub decode_len: usize,
    /// One entry per layer, each naming the K/V/Q tensor files relative to
    /// the manifest.
    pub layers: Vec<LayerFiles>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFiles {
    pub k: String,
    pub v: String,
    pub q: String,
}

/// One prompt's tensors, all layers loaded.
#[derive(Debug, Clone)]
pub struct PromptTrace {
    pub prompt_id: String,
    pub prefill_len: usize,
    pub decode_len: usize,
    pub layers: Vec<LayerTensors>,
}

impl PromptTrace {
    pub fn total_len(&self) -> usize {
        self.prefill_len + self.decode_len
    }
}

#[derive(Debug, Clone)]
pub struct LayerTensors {
    pub k: Tensor3,
    pub v: Tensor3,
    pub q: Tensor3,
}

/// A fully loaded calibration trace. Immutable once built; profiling workers
/// share it read-only.
#[derive(Debug, Clone)]
pub struct CalibrationTrace {
    pub model_name: String,
    pub num_layers: usize,
    pub num_q_heads: usize,
    pub num_kv_heads: usize,
    pub head_dim: usize,
    pub prompts: Vec<PromptTrace>,
}

impl CalibrationTrace {
    fn validate_dims(&self) -> Result<(), TraceError> {
        if self.num_layers == 0 {
            return Err(TraceError::BadDim("num_layers"));
        }
        if self.num_q_heads == 0 {
            return Err(TraceError::BadDim("num_q_heads"));
        }
        if self.num_kv_heads == 0 {
            return Err(TraceError::BadDim("num_kv_heads"));
        }
        if self.head_dim == 0 {
            return Err(TraceError::BadDim("head_dim"));
        }
        if self.num_q_heads % self.num_kv_heads != 0 {
            return Err(TraceError::HeadDivisibility { q: self.num_q_heads, kv: self.num_kv_heads });
        }
        Ok(())
    }
}

fn read_tensor(path: &Path, shape: (usize, usize, usize)) -> Result<Tensor3, TraceError> {
    let bytes = fs::read(path).map_err(|source| TraceError::Io { path: path.to_path_buf(), source })?;
    let expected = shape.0 * shape.1 * shape.2 * 4;
    if bytes.len() != expected {
        return Err(TraceError::ByteLength {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
            shape,
        });
    }
    let mut data = Vec::with_capacity(bytes.len() / 4);
    for chunk in bytes.chunks_exact(4) {
        data.push(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(TraceError::NonFinite { path: path.to_path_buf(), index });
    }
    Ok(Tensor3::new(shape.0, shape.1, shape.2, data))
}

fn write_tensor(path: &Path, t: &Tensor3) -> Result<(), TraceError> {
    let wrap = |source| TraceError::Io { path: path.to_path_buf(), source };
    let mut f = fs::File::create(path).map_err(wrap)?;
    let mut buf = Vec::with_capacity(t.data.len() * 4);
    for v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    f.write_all(&buf).map_err(wrap)
}

/// Loads and fully validates a trace from its manifest path.
pub fn load_trace(manifest_path: &Path) -> Result<CalibrationTrace, TraceError> {
    let text = fs::read_to_string(manifest_path)
        .map_err(|source| TraceError::Io { path: manifest_path.to_path_buf(), source })?;
    let manifest: TraceManifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut prompts = Vec::with_capacity(manifest.prompts.len());
    for entry in &manifest.prompts {
        if entry.prefill_len == 0 {
            return Err(TraceError::BadDim("prefill_len"));
        }
        if entry.layers.len() != manifest.num_layers {
            return Err(TraceError::LayerCount {
                prompt: entry.prompt_id.clone(),
                expected: manifest.num_layers,
                found: entry.layers.len(),
            });
        }
        let total = entry.prefill_len + entry.decode_len;
        let kv_shape = (manifest.num_kv_heads, total, manifest.head_dim);
        let q_shape = (manifest.num_q_heads, entry.decode_len, manifest.head_dim);
        let mut layers = Vec::with_capacity(entry.layers.len());
        for files in &entry.layers {
            layers.push(LayerTensors {
                k: read_tensor(&base.join(&files.k), kv_shape)?,
                v: read_tensor(&base.join(&files.v), kv_shape)?,
                q: read_tensor(&base.join(&files.q), q_shape)?,
            });
        }
        prompts.push(PromptTrace {
            prompt_id: entry.prompt_id.clone(),
            prefill_len: entry.prefill_len,
            decode_len: entry.decode_len,
            layers,
        });
    }

    let trace = CalibrationTrace {
        model_name: manifest.model_name,
        num_layers: manifest.num_layers,
        num_q_heads: manifest.num_q_heads,
        num_kv_heads: manifest.num_kv_heads,
        head_dim: manifest.head_dim,
        prompts,
    };
    trace.validate_dims()?;
    Ok(trace)
}

/// Writes a trace into `dir` and returns the manifest path. Loading the
/// result reproduces the trace bit for bit.
pub fn save_trace(trace: &CalibrationTrace, dir: &Path) -> Result<PathBuf, TraceError> {
    trace.validate_dims()?;
    fs::create_dir_all(dir).map_err(|source| TraceError::Io { path: dir.to_path_buf(), source })?;

    let mut entries = Vec::with_capacity(trace.prompts.len());
    for (pi, prompt) in trace.prompts.iter().enumerate() {
        let mut layer_files = Vec::with_capacity(prompt.layers.len());
        for (li, layer) in prompt.layers.iter().enumerate() {
            let files = LayerFiles {
                k: format!("prompt{pi:03}_layer{li:03}_k.bin"),
                v: format!("prompt{pi:03}_layer{li:03}_v.bin"),
                q: format!("prompt{pi:03}_layer{li:03}_q.bin"),
            };
            write_tensor(&dir.join(&files.k), &layer.k)?;
            write_tensor(&dir.join(&files.v), &layer.v)?;
            write_tensor(&dir.join(&files.q), &layer.q)?;
            layer_files.push(files);
        }
        entries.push(PromptEntry {
            prompt_id: prompt.prompt_id.clone(),
            prefill_len: prompt.prefill_len,
            decode_len: prompt.decode_len,
            layers: layer_files,
        });
    }

    let manifest = TraceManifest {
        model_name: trace.model_name.clone(),
        num_layers: trace.num_layers,
        num_q_heads: trace.num_q_heads,
        num_kv_heads: trace.num_kv_heads,
        head_dim: trace.head_dim,
        prompts: entries,
    };
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, text + "\n")
        .map_err(|source| TraceError::Io { path: manifest_path.clone(), source })?;
    Ok(manifest_path)
}

/// Synthetic key/value distribution shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutlierProfile {
    /// Unit-variance Gaussian everywhere.
    None,
    /// Key channels c with c % 8 == 0 scaled by 11, mimicking the strong
    /// channel-wise outliers real key caches exhibit. The period and scale
    /// are synthetic choices, not calibrated to any model.
    ChannelOutliers,
}

impl std::fmt::Display for OutlierProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OutlierProfile::None => write!(f, "none"),
            OutlierProfile::ChannelOutliers => write!(f, "channel-outliers"),
        }
    }
}

impl std::str::FromStr for OutlierProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(OutlierProfile::None),
            "channel-outliers" => Ok(OutlierProfile::ChannelOutliers),
            other => {
                Err(format!("unknown outlier profile '{other}' (expected none or channel-outliers)"))
            }
        }
    }
}

/// Key-channel scale applied by [`OutlierProfile::ChannelOutliers`].
pub const OUTLIER_SCALE: f32 = 11.0;
/// Every OUTLIER_PERIOD-th key channel is scaled.
pub const OUTLIER_PERIOD: usize = 8;

/// Generates a deterministic synthetic trace. The content is a pure function
/// of the arguments: each (prompt, layer, tensor) gets its own derived PRNG
/// stream, so neither prompt count nor generation order perturbs other
/// tensors.
#[allow(clippy::too_many_arguments)]
pub fn synth_trace(
    seed: u64,
    num_layers: usize,
    num_q_heads: usize,
    num_kv_heads: usize,
    head_dim: usize,
    prompts: usize,
    prefill_len: usize,
    decode_len: usize,
    outlier_profile: OutlierProfile,
) -> Result<CalibrationTrace, TraceError> {
    fn gauss(stream: u64, n: usize) -> Vec<f32> {
        let mut rng = Rng::new(stream);
        (0..n).map(|_| rng.next_gauss() as f32).collect()
    }

    if prompts > 0 && prefill_len == 0 {
        return Err(TraceError::BadDim("prefill_len"));
    }
    let total = prefill_len + decode_len;
    let mut prompt_traces = Vec::with_capacity(prompts);
    for p in 0..prompts {
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            let tag = |kind: u64| derive_seed(seed, &[kind, p as u64, l as u64]);
            let mut k_data = gauss(tag(0), num_kv_heads * total * head_dim);
            if outlier_profile == OutlierProfile::ChannelOutliers {
                for (i, v) in k_data.iter_mut().enumerate() {
                    let channel = i % head_dim;
                    if channel % OUTLIER_PERIOD == 0 {
                        *v *= OUTLIER_SCALE;
                    }
                }
            }
            layers.push(LayerTensors {
                k: Tensor3::new(num_kv_heads, total, head_dim, k_data),
                v: Tensor3::new(num_kv_heads, total, head_dim, gauss(tag(1), num_kv_heads * total * head_dim)),
                q: Tensor3::new(num_q_heads, decode_len, head_dim, gauss(tag(2), num_q_heads * decode_len * head_dim)),
            });
        }
        prompt_traces.push(PromptTrace {
            prompt_id: format!("p{p:03}"),
            prefill_len,
            decode_len,
            layers,
        });
    }

    let trace = CalibrationTrace {
        model_name: "synthetic".to_string(),
        num_layers,
        num_q_heads,
        num_kv_heads,
        head_dim,
        prompts: prompt_traces,
    };
    trace.validate_dims()?;
    Ok(trace)
}
