//! Round-to-nearest asymmetric quantization at 2, 4, 8, and 16 bits.
//!
//! Demonstrates the core quantizer contract on one random token-by-channel
//! tensor: the per-element reconstruction error is bounded by half a
//! quantization step, 16 bits passes values through untouched, and
//! re-quantizing an already quantized tensor is exact (grid idempotence).
//!
//! Run: cargo run --example quantize_roundtrip

use kvmix::quant::{quantize_dequantize, Axis, GroupSize, QuantSpec};
use kvmix::rng::Rng;
use kvmix::tensor::Tensor2;

fn main() {
    let mut rng = Rng::new(7);
    let x = Tensor2::new(16, 32, (0..16 * 32).map(|_| rng.next_gauss() as f32).collect());

    println!("tokens x channels = {} x {}, values ~ N(0, 1)\n", x.rows, x.cols);
    println!(
        "{:>4} {:>12} {:>12} {:>12} {:>12}",
        "bits", "max |err|", "bound s/2", "mean |err|", "idempotent"
    );

    for bits in [2u8, 4, 8, 16] {
        let spec = QuantSpec::new(bits, Axis::PerToken, GroupSize::Full, 0).unwrap();
        let y = quantize_dequantize(&x, spec).unwrap();

        // Independent bound: with per-token statistics over full rows, the
        // step of row r is (max - min) / (2^bits - 1), so no element may
        // move further than half the widest row's step.
        let levels = ((1u32 << bits) - 1) as f64;
        let widest_step = (0..x.rows)
            .map(|r| {
                let row = x.row(r);
                let min = row.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
                let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
                (max - min) / levels
            })
            .fold(0.0f64, f64::max);

        let mut max_err = 0.0f64;
        let mut sum_err = 0.0f64;
        for (a, b) in x.data.iter().zip(&y.data) {
            let e = (*a as f64 - *b as f64).abs();
            max_err = max_err.max(e);
            sum_err += e;
        }

        // Grid idempotence: quantizing the reconstruction changes nothing.
        let idempotent = quantize_dequantize(&y, spec).unwrap().data == y.data;

        println!(
            "{bits:>4} {max_err:>12.6} {:>12.6} {:>12.6} {idempotent:>12}",
            widest_step / 2.0,
            sum_err / x.data.len() as f64,
        );
    }

    // Grouping trades metadata for accuracy: smaller groups, tighter ranges.
    println!("\n4-bit per-channel error vs group size (tokens per statistics group):");
    for (label, group) in [
        ("one group", GroupSize::Full),
        ("groups of 8", GroupSize::Of(8)),
        ("groups of 4", GroupSize::Of(4)),
    ] {
        let spec = QuantSpec::new(4, Axis::PerChannel, group, 0).unwrap();
        let y = quantize_dequantize(&x, spec).unwrap();
        let mse: f64 = x
            .data
            .iter()
            .zip(&y.data)
            .map(|(a, b)| ((*a - *b) as f64).powi(2))
            .sum::<f64>()
            / x.data.len() as f64;
        println!("  {label:>12}: rms error {:.6}", mse.sqrt());
    }
}
