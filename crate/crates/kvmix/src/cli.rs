//! Command-line front end over the pipeline stages.
//!
//! Each subcommand wraps exactly one stage function from [`crate::pipeline`]
//! and exchanges data with the others purely through artifact files, so any
//! stage can be re-run by hand. Exit codes: 0 on success, 1 when a stage
//! fails (with a message naming the stage and file), 2 on usage errors.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::pipeline::{
    config_equivalent_bits, stage_cluster, stage_export, stage_profile, stage_prune,
    stage_report, stage_search, stage_synth, OracleChoice, SearchParams, SearchStrategy,
    StageFailure, SynthParams,
};
use crate::profile::QuantModePreset;
use crate::quant::{candidate_pairs, PrecisionPair};
use crate::search::{ProxyOracle, SearchConstraints};
use crate::trace::OutlierProfile;

#[derive(Debug, Parser)]
#[command(
    name = "kvmix",
    version,
    about = "Mixed-precision KV cache quantization: profile, prune, and search layer-wise precision configurations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic attention calibration trace.
    Synth {
        /// Stream seed; required so traces are reproducible by construction.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        layers: usize,
        #[arg(long, default_value_t = 4)]
        q_heads: usize,
        #[arg(long, default_value_t = 2)]
        kv_heads: usize,
        #[arg(long, default_value_t = 16)]
        head_dim: usize,
        #[arg(long, default_value_t = 4)]
        prompts: usize,
        /// Cached tokens per prompt before the scored queries start.
        #[arg(long, default_value_t = 224)]
        prefill: usize,
        /// Scored query tokens per prompt.
        #[arg(long, default_value_t = 32)]
        decode: usize,
        /// Key distribution shape: none or channel-outliers.
        #[arg(long, default_value_t = OutlierProfile::ChannelOutliers)]
        outliers: OutlierProfile,
        /// Directory to write the tensors and trace manifest into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Profile per-layer sensitivity of a trace to every precision pair.
    Profile {
        /// Path of a trace manifest written by synth (or hand-assembled).
        #[arg(long)]
        trace: PathBuf,
        /// Quantization preset: per-token-asym, per-channel-asym, or kivi.
        #[arg(long, default_value = "per-token-asym")]
        preset: QuantModePreset,
        /// Comma-separated candidate list override, e.g. "KV8,K8V4,KV4".
        #[arg(long)]
        pairs: Option<String>,
        /// Worker threads across layers.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output profile JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Prune each layer's profile to its Pareto-optimal precision pairs.
    Prune {
        /// Profile JSON written by the profile stage.
        #[arg(long)]
        profile: PathBuf,
        /// Output candidate-sets JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Group layers that share candidate sets and error behavior.
    Cluster {
        /// Profile JSON written by the profile stage.
        #[arg(long)]
        profile: PathBuf,
        /// Neighborhood radius on output-error vectors.
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Points within eps needed to seed a cluster.
        #[arg(long, default_value_t = 2)]
        min_samples: usize,
        /// Output groups JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search the grouped space for Pareto-optimal precision configurations.
    Search {
        /// Profile JSON written by the profile stage.
        #[arg(long)]
        profile: PathBuf,
        /// Groups JSON written by the cluster stage.
        #[arg(long)]
        groups: PathBuf,
        /// Accuracy oracle: proxy, toyllm, or external:<command>.
        #[arg(long, default_value = "proxy")]
        oracle: OracleChoice,
        /// Search strategy: moead or exhaustive.
        #[arg(long, default_value = "moead")]
        strategy: SearchStrategy,
        /// Oracle evaluation budget.
        #[arg(long, default_value_t = 200)]
        budget: usize,
        /// Scalar subproblems held by the evolutionary search.
        #[arg(long, default_value_t = 20)]
        population: usize,
        /// Search seed; required so published frontiers are reproducible.
        #[arg(long)]
        seed: u64,
        /// Upper bound M on mean equivalent bits (soft constraint).
        #[arg(long = "max-bits", default_value_t = 16.0)]
        max_bits: f64,
        /// Upper bound on accuracy loss versus the all-16-bit baseline.
        #[arg(long = "max-loss", default_value_t = 1.0)]
        max_loss: f64,
        /// Proxy oracle sharpness (accuracy = exp(-beta * error sum)).
        #[arg(long, default_value_t = ProxyOracle::DEFAULT_BETA)]
        beta: f64,
        /// Seconds allowed per external oracle call.
        #[arg(long = "oracle-timeout", default_value_t = 60)]
        oracle_timeout: u64,
        /// Upper bound on concurrent external oracle processes. Evaluations
        /// are issued sequentially for determinism, so at most one runs at a
        /// time regardless of this limit.
        #[arg(long = "oracle-concurrency", default_value_t = 1)]
        oracle_concurrency: usize,
        /// Worker threads inside the toyllm oracle.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Model name stamped into emitted configs.
        #[arg(long = "model-name", default_value = "synthetic")]
        model_name: String,
        /// Directory for frontier.csv, search.json, and config files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert a profile JSON artifact to CSV.
    Export {
        /// Profile JSON written by the profile stage.
        #[arg(long)]
        profile: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a finished search: Pareto points plus the frontier CSV.
    Report {
        /// Directory written by the search stage.
        search_dir: PathBuf,
    },
    /// Print the equivalent bits of a config file.
    Fm {
        /// Config JSON path.
        config: PathBuf,
    },
}

fn parse_pairs(text: &str) -> Result<Vec<PrecisionPair>, StageFailure> {
    let mut pairs = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let pair: PrecisionPair = part.parse().map_err(|e| StageFailure {
            stage: "profile",
            path: PathBuf::from("--pairs"),
            message: format!("{e}"),
        })?;
        pairs.push(pair);
    }
    if pairs.is_empty() {
        return Err(StageFailure {
            stage: "profile",
            path: PathBuf::from("--pairs"),
            message: "no pairs given".to_string(),
        });
    }
    Ok(pairs)
}

fn dispatch(command: Command) -> Result<(), StageFailure> {
    match command {
        Command::Synth {
            seed,
            layers,
            q_heads,
            kv_heads,
            head_dim,
            prompts,
            prefill,
            decode,
            outliers,
            out,
        } => {
            let params = SynthParams {
                seed,
                num_layers: layers,
                num_q_heads: q_heads,
                num_kv_heads: kv_heads,
                head_dim,
                prompts,
                prefill_len: prefill,
                decode_len: decode,
                outliers,
            };
            let manifest = stage_synth(&params, &out)?;
            println!("wrote trace manifest {}", manifest.display());
        }
        Command::Profile { trace, preset, pairs, jobs, out } => {
            let pairs = match pairs {
                Some(text) => parse_pairs(&text)?,
                None => candidate_pairs(),
            };
            let profiles = stage_profile(&trace, preset, &pairs, jobs, &out)?;
            println!(
                "profiled {} layers x {} pairs ({}) -> {}",
                profiles.len(),
                pairs.len(),
                preset,
                out.display()
            );
        }
        Command::Prune { profile, out } => {
            let sets = stage_prune(&profile, &out)?;
            let survivors: usize = sets.iter().map(|s| s.pairs.len()).sum();
            println!("pruned to {survivors} candidate pairs across {} layers -> {}",
                sets.len(),
                out.display()
            );
        }
        Command::Cluster { profile, eps, min_samples, out } => {
            let groups = stage_cluster(&profile, eps, min_samples, &out)?;
            println!("clustered into {} layer groups -> {}", groups.len(), out.display());
        }
        Command::Search {
            profile,
            groups,
            oracle,
            strategy,
            budget,
            population,
            seed,
            max_bits,
            max_loss,
            beta,
            oracle_timeout,
            oracle_concurrency,
            jobs,
            model_name,
            out,
        } => {
            if oracle_concurrency == 0 {
                return Err(StageFailure {
                    stage: "search",
                    path: PathBuf::from("--oracle-concurrency"),
                    message: "concurrency limit must be at least 1".to_string(),
                });
            }
            let params = SearchParams {
                strategy,
                oracle,
                budget,
                population,
                seed,
                constraints: SearchConstraints {
                    max_equivalent_bits: max_bits,
                    max_accuracy_loss: max_loss,
                },
                beta,
                external_timeout: Duration::from_secs(oracle_timeout),
                jobs,
                model_name,
            };
            let summary = stage_search(&profile, &groups, &params, &out)?;
            println!(
                "searched with {} evaluations, {} Pareto points -> {}",
                summary.oracle_evaluations,
                summary.frontier.len(),
                out.display()
            );
        }
        Command::Export { profile, out } => {
            stage_export(&profile, &out)?;
            println!("exported {}", out.display());
        }
        Command::Report { search_dir } => {
            print!("{}", stage_report(&search_dir)?);
        }
        Command::Fm { config } => {
            println!("{:.2}", config_equivalent_bits(&config)?);
        }
    }
    Ok(())
}

/// Parses arguments from the environment, runs the subcommand, and returns
/// the process exit code. Usage errors exit with code 2 before this
/// function returns.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(failure) => {
            eprintln!("error: {failure}");
            1
        }
    }
}
