//! Generate a synthetic attention calibration trace, write it to disk, and
//! read it back.
//!
//! The trace is the raw material for every other stage: per-prompt,
//! per-layer K/V/Q tensors plus a JSON manifest describing shapes and file
//! names. The synthetic generator draws Gaussian tensors from seeded
//! streams, optionally scaling every eighth key channel to mimic the strong
//! channel-wise outliers real key caches exhibit.
//!
//! Run: cargo run --example synth_trace

use kvmix::trace::{load_trace, save_trace, synth_trace, OutlierProfile, OUTLIER_PERIOD};

fn main() {
    let trace = synth_trace(
        42,                              // seed
        4,                               // layers
        4,                               // query heads
        2,                               // kv heads
        16,                              // head dim
        2,                               // prompts
        96,                              // prefill tokens per prompt
        16,                              // decode tokens per prompt
        OutlierProfile::ChannelOutliers, // key channel outliers on
    )
    .expect("valid dimensions");

    println!(
        "trace: {} layers, {} prompts, {} query heads over {} kv heads, head dim {}",
        trace.num_layers,
        trace.prompts.len(),
        trace.num_q_heads,
        trace.num_kv_heads,
        trace.head_dim
    );

    // The outlier profile scales key channels 0, 8, 16, ... Show the effect
    // by comparing per-channel standard deviations in layer 0 of prompt 0.
    let k = &trace.prompts[0].layers[0].k;
    let (_, tokens, dim) = k.dims();
    let channel_std = |c: usize| -> f64 {
        let mut sum_sq = 0.0f64;
        for t in 0..tokens {
            let v = k.at(0, t, c) as f64;
            sum_sq += v * v;
        }
        (sum_sq / tokens as f64).sqrt()
    };
    println!("key channel std, layer 0 head 0 (every {OUTLIER_PERIOD}th channel is scaled):");
    for c in 0..dim {
        let marker = if c % OUTLIER_PERIOD == 0 { "  <- outlier" } else { "" };
        println!("  channel {c:2}: {:6.2}{marker}", channel_std(c));
    }

    // Round-trip through disk: binary little-endian tensors plus manifest.
    let dir = std::env::temp_dir().join("kvmix-example-trace");
    let manifest = save_trace(&trace, &dir).expect("writable temp dir");
    let reloaded = load_trace(&manifest).expect("just written");
    let same = reloaded.prompts[0].layers[0].k.data == trace.prompts[0].layers[0].k.data;
    println!("saved to {} and reloaded bit-exactly: {same}", manifest.display());
}
