//! Offline toolkit for mixed-precision KV-cache quantization.
//!
//! The pipeline runs entirely on recorded attention traces, no inference
//! framework required:
//!
//! 1. [`trace`] loads or synthesizes per-layer Q/K/V calibration tensors.
//! 2. [`quant`] simulates integer quantization of K/V under configurable
//!    bit widths, grouping axes, and full-precision residual windows.
//! 3. [`attention`] recomputes attention from quantized caches and measures
//!    the induced error against the full-precision reference.
//! 4. [`profile`] sweeps key/value precision pairs per layer to build
//!    sensitivity tables.
//! 5. [`prune`] discards dominated precision pairs per layer and clusters
//!    layers with similar sensitivity to shrink the search space.
//! 6. [`search`] finds Pareto-optimal layer-wise precision assignments under
//!    memory and accuracy-loss constraints, with exhaustive and evolutionary
//!    backends and pluggable accuracy oracles.
//!
//! The [`cli`] module wires these stages into subcommands; every stage writes
//! deterministic artifacts so identical inputs reproduce identical bytes.

pub mod attention;
pub mod cli;
pub mod pipeline;
pub mod profile;
pub mod prune;
pub mod quant;
pub mod rng;
pub mod search;
pub mod tensor;
pub mod toyllm;
pub mod trace;
