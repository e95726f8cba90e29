//! The whole offline pipeline as one program: synthesize, profile, prune,
//! cluster, search, report.
//!
//! Every stage reads the previous stage's artifact file and writes its own,
//! exactly as the `kvmix` binary's subcommands do, so a run leaves a
//! directory that documents itself: a trace with its manifest, the profile
//! JSON, candidate sets, layer groups, one config JSON per Pareto point,
//! the frontier CSV, and a pipeline manifest recording how each artifact
//! was produced. Re-running writes byte-identical files.
//!
//! Run: cargo run --example full_pipeline

use kvmix::pipeline::{
    stage_cluster, stage_profile, stage_prune, stage_report, stage_search, stage_synth,
    SearchParams, SearchStrategy, SynthParams,
};
use kvmix::profile::QuantModePreset;
use kvmix::quant::candidate_pairs;
use kvmix::search::SearchConstraints;
use kvmix::trace::OutlierProfile;

fn main() {
    let dir = std::env::temp_dir().join("kvmix-example-pipeline");
    if dir.exists() {
        std::fs::remove_dir_all(&dir).expect("clear previous run");
    }
    std::fs::create_dir_all(&dir).expect("create output dir");

    let synth = SynthParams {
        seed: 17,
        num_layers: 8,
        num_q_heads: 4,
        num_kv_heads: 2,
        head_dim: 16,
        prompts: 2,
        prefill_len: 96,
        decode_len: 16,
        outliers: OutlierProfile::ChannelOutliers,
    };
    let trace_manifest = stage_synth(&synth, &dir.join("trace")).expect("synth");
    println!("[1/6] synth    -> {}", trace_manifest.display());

    let profile_path = dir.join("profile.json");
    stage_profile(&trace_manifest, QuantModePreset::Kivi, &candidate_pairs(), 4, &profile_path)
        .expect("profile");
    println!("[2/6] profile  -> {}", profile_path.display());

    let candidates_path = dir.join("candidates.json");
    let sets = stage_prune(&profile_path, &candidates_path).expect("prune");
    let survivors: usize = sets.iter().map(|s| s.pairs.len()).sum();
    println!("[3/6] prune    -> {} ({survivors} pairs kept)", candidates_path.display());

    let groups_path = dir.join("groups.json");
    let groups = stage_cluster(&profile_path, 0.05, 2, &groups_path).expect("cluster");
    println!("[4/6] cluster  -> {} ({} groups)", groups_path.display(), groups.len());

    let search_dir = dir.join("search");
    let params = SearchParams {
        strategy: SearchStrategy::Moead,
        budget: 80,
        population: 12,
        seed: 5,
        constraints: SearchConstraints { max_equivalent_bits: 9.0, max_accuracy_loss: 0.5 },
        // The proxy oracle maps summed output error to exp(-beta * sum).
        // Match beta to the error scale of the trace: these eight layers
        // sum to roughly 20 at KV2, so 0.05 spreads accuracy over (0, 1)
        // instead of crushing every lossy config toward zero.
        beta: 0.05,
        ..SearchParams::default()
    };
    let summary = stage_search(&profile_path, &groups_path, &params, &search_dir).expect("search");
    println!(
        "[5/6] search   -> {} ({} Pareto points, {} evaluations)",
        search_dir.display(),
        summary.frontier.len(),
        summary.oracle_evaluations
    );

    println!("[6/6] report:\n");
    print!("{}", stage_report(&search_dir).expect("report"));
}
