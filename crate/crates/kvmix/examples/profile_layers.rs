//! Per-layer sensitivity profiling: how much each precision pair hurts each
//! layer of a trace.
//!
//! Profiles a synthetic trace under the streaming-cache preset and prints
//! one row per (layer, pair) with the four error metrics, which is exactly
//! the table the pruning and clustering stages consume. Layers react
//! differently to the same pair because their key/value distributions
//! differ, and that spread is what makes mixed-precision search worthwhile.
//!
//! Run: cargo run --example profile_layers

use kvmix::profile::{profile_model, QuantModePreset};
use kvmix::quant::{candidate_pairs, pair_equivalent_bits};
use kvmix::trace::{synth_trace, OutlierProfile};

fn main() {
    let trace = synth_trace(3, 4, 4, 2, 16, 2, 96, 16, OutlierProfile::ChannelOutliers)
        .expect("valid dimensions");

    // All nine candidate pairs, profiled over every layer; two worker
    // threads (the result is identical at any thread count).
    let pairs = candidate_pairs();
    let profiles = profile_model(&trace, QuantModePreset::Kivi, &pairs, 2).expect("trace profiles");

    println!("preset kivi, {} layers x {} pairs\n", profiles.len(), pairs.len());
    println!("{:>5} {:>6} {:>6} {:>10} {:>10} {:>10} {:>10}", "layer", "pair", "bits", "e_k", "e_v", "e_a", "e_o");
    for profile in &profiles {
        for entry in &profile.entries {
            println!(
                "{:>5} {:>6} {:>6.1} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
                profile.layer,
                entry.pair.to_string(),
                pair_equivalent_bits(entry.pair),
                entry.errors.e_k,
                entry.errors.e_v,
                entry.errors.e_a,
                entry.errors.e_o
            );
        }
        println!();
    }

    // The spread across layers at one fixed pair is the layer sensitivity
    // signal the clustering stage groups on.
    let pair = pairs[pairs.len() - 1]; // the cheapest pair
    print!("output error at {pair} per layer:");
    for profile in &profiles {
        print!(" {:.4}", profile.errors_for(pair).unwrap().e_o);
    }
    println!();
}
