//! Attention error metrics under KV quantization, and why the grouping axis
//! matters when keys carry channel outliers.
//!
//! Builds one grouped-query attention instance whose keys have two channels
//! scaled 11x (the structure real key caches exhibit), quantizes K and V,
//! and reports the four error metrics: relative key error e_k, relative
//! value error e_v, mean attention-score shift e_a, and relative output
//! error e_o. Per-token key quantization must stretch each row's range over
//! the outliers, wrecking the remaining channels; per-channel quantization
//! gives the outlier channels their own statistics and stays accurate.
//!
//! Run: cargo run --example attention_errors

use kvmix::attention::attention_errors;
use kvmix::quant::{PrecisionPair, QuantSpec};
use kvmix::rng::Rng;
use kvmix::tensor::Tensor3;
use kvmix::{profile::QuantModePreset, quant::quantize_dequantize};

fn gauss_tensor(rng: &mut Rng, heads: usize, rows: usize, dim: usize) -> Tensor3 {
    Tensor3::new(heads, rows, dim, (0..heads * rows * dim).map(|_| rng.next_gauss() as f32).collect())
}

fn main() {
    let (kv_heads, q_heads, tokens, queries, dim) = (2usize, 4usize, 96usize, 8usize, 16usize);
    let mut rng = Rng::new(11);

    let mut k = gauss_tensor(&mut rng, kv_heads, tokens, dim);
    let v = gauss_tensor(&mut rng, kv_heads, tokens, dim);
    let q = gauss_tensor(&mut rng, q_heads, queries, dim);

    // Scale every eighth key channel 11x, mimicking outlier channels.
    for h in 0..kv_heads {
        for t in 0..tokens {
            for c in (0..dim).step_by(8) {
                k.set(h, t, c, k.at(h, t, c) * 11.0);
            }
        }
    }

    // The queries attend causally: query i sees keys 0..=i+offset.
    let offset = tokens - queries;

    println!("tokens={tokens}, queries={queries}, head dim={dim}, key outliers at channels 0 and 8\n");
    println!("{:<18} {:>5} {:>10} {:>10} {:>10} {:>10}", "preset", "pair", "e_k", "e_v", "e_a", "e_o");
    for mode in QuantModePreset::ALL {
        for (kb, vb) in [(8, 8), (4, 4), (2, 2)] {
            let pair = PrecisionPair::of(kb, vb);
            let (k_hat, v_hat) = mode.quantize_kv(&k, &v, pair).unwrap();
            let e = attention_errors(&q, &k, &v, &k_hat, &v_hat, offset).unwrap();
            println!(
                "{:<18} {:>5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
                mode.name(),
                pair.to_string(),
                e.e_k,
                e.e_v,
                e.e_a,
                e.e_o
            );
        }
    }

    // The same contrast at the raw-tensor level: per-token vs per-channel
    // key error at 4 bits.
    use kvmix::quant::{Axis, GroupSize};
    let per_token = QuantSpec::new(4, Axis::PerToken, GroupSize::Full, 0).unwrap();
    let per_channel = QuantSpec::new(4, Axis::PerChannel, GroupSize::Full, 0).unwrap();
    let rel_err = |spec: QuantSpec| -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for h in 0..kv_heads {
            let plane = k.plane(h);
            let hat = quantize_dequantize(&plane, spec).unwrap();
            for (a, b) in plane.data.iter().zip(&hat.data) {
                num += ((*a - *b) as f64).abs();
                den += (*a as f64).abs();
            }
        }
        num / den
    };
    println!(
        "\n4-bit key error, relative: per-token {:.5} vs per-channel {:.5}",
        rel_err(per_token),
        rel_err(per_channel)
    );
}
