//! Two-stage search-space reduction: intra-layer Pareto pruning, then
//! inter-layer grouping by density clustering.
//!
//! A layer's profile maps nine precision pairs to error metrics. Pruning
//! keeps only pairs on the (memory, output error) Pareto frontier: anything
//! beaten on both axes can never appear in an optimal configuration.
//! Clustering then merges layers whose surviving pairs AND error vectors
//! match, so the search assigns one decision per group instead of per
//! layer. The product of per-decision candidate counts is the search-space
//! size; both stages shrink it by orders of magnitude.
//!
//! Run: cargo run --example prune_and_cluster

use kvmix::profile::{profile_model, QuantModePreset};
use kvmix::prune::{cluster_layers, pareto_prune_layer, search_space_size};
use kvmix::quant::candidate_pairs;
use kvmix::trace::{synth_trace, OutlierProfile};

fn main() {
    let trace = synth_trace(5, 8, 4, 2, 16, 2, 96, 16, OutlierProfile::ChannelOutliers)
        .expect("valid dimensions");
    let pairs = candidate_pairs();
    let profiles = profile_model(&trace, QuantModePreset::Kivi, &pairs, 4).expect("profiles");

    println!("pruning: surviving pairs per layer (of {} candidates)", pairs.len());
    for profile in &profiles {
        let survivors = pareto_prune_layer(profile).expect("non-empty profile");
        let names: Vec<String> = survivors.iter().map(|e| e.pair.to_string()).collect();
        println!("  layer {}: {}", profile.layer, names.join(" "));
    }

    // The clustering radius eps is in output-error units: layers whose
    // pruned error vectors sit within eps of a density core share a group.
    // Tight radii keep every layer separate; widening them merges layers
    // whose sensitivity curves agree.
    let min_samples = 2;
    println!("\nclustering at increasing radius (min_samples={min_samples}):");
    let mut coarsest = None;
    for eps in [0.05, 0.5, 2.0] {
        let groups = cluster_layers(&profiles, eps, min_samples).expect("clustering");
        let members: Vec<String> =
            groups.iter().map(|g| format!("{:?}", g.layer_ids)).collect();
        println!("  eps={eps:<4} -> {} groups: {}", groups.len(), members.join(" "));
        coarsest = Some(groups);
    }
    let groups = coarsest.expect("at least one eps value");

    // Search-space arithmetic before and after the reduction.
    let full = search_space_size(&vec![pairs.len(); profiles.len()]);
    let pruned_counts: Vec<usize> = profiles
        .iter()
        .map(|p| pareto_prune_layer(p).expect("non-empty profile").len())
        .collect();
    let pruned = search_space_size(&pruned_counts);
    let grouped = search_space_size(&groups.iter().map(|g| g.pairs.len()).collect::<Vec<_>>());
    println!("\nsearch space: {full} full");
    println!("          ->  {pruned} after per-layer pruning");
    println!("          ->  {grouped} after grouping at eps=2");
}
