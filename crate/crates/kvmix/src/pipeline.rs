//! File-level pipeline stages.
//!
//! Each stage is a plain function from input artifact paths to output
//! artifact paths: synthesize a trace, profile it, prune and cluster the
//! profile, search the reduced space, and report the frontier. Every stage
//! also upserts its record into a `pipeline.json` manifest next to its
//! output, so a finished directory documents how it was produced. Nothing
//! here keeps hidden state: any stage can be re-run from its input files
//! alone, and re-running with the same inputs and seeds rewrites every
//! artifact byte for byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::profile::{profile_model, LayerProfile, QuantModePreset};
use crate::prune::{cluster_layers, pareto_prune_layer, LayerGroup};
use crate::quant::{sort_pairs_canonical, PrecisionPair};
use crate::search::{
    exhaustive_search, memory_objective, moead_search, save_config, ExternalOracle, MoeadParams,
    Oracle, ProxyOracle, SearchConstraints, SearchProblem,
};
use crate::toyllm::ToyLlmOracle;
use crate::trace::{load_trace, save_trace, synth_trace, OutlierProfile};

/// A stage that could not complete, with the stage name and the file it was
/// working on so the caller can print a one-line diagnosis.
#[derive(Debug)]
pub struct StageFailure {
    pub stage: &'static str,
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for StageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed on {}: {}", self.stage, self.path.display(), self.message)
    }
}

impl std::error::Error for StageFailure {}

fn fail(stage: &'static str, path: &Path, message: impl fmt::Display) -> StageFailure {
    StageFailure { stage, path: path.to_path_buf(), message: message.to_string() }
}

fn write_json<T: Serialize>(
    stage: &'static str,
    value: &T,
    path: &Path,
) -> Result<(), StageFailure> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| fail(stage, path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| fail(stage, path, e))
}

fn read_json<T: DeserializeOwned>(stage: &'static str, path: &Path) -> Result<T, StageFailure> {
    let text = fs::read_to_string(path).map_err(|e| fail(stage, path, e))?;
    serde_json::from_str(&text).map_err(|e| fail(stage, path, e))
}

/// Renders `path` relative to `base` whenever a lexical relative form
/// exists, walking up through `..` for siblings. Keeps manifests readable,
/// keeps a relocated output tree valid, and keeps re-runs in different
/// directories byte-identical. Falls back to the path as given when the two
/// share no common ancestor (mixed absolute and relative arguments).
fn rel_display(base: &Path, path: &Path) -> String {
    if let Ok(stripped) = path.strip_prefix(base) {
        return stripped.display().to_string();
    }
    if base.is_absolute() != path.is_absolute() {
        return path.display().to_string();
    }
    let base_parts: Vec<_> = base.components().collect();
    let path_parts: Vec<_> = path.components().collect();
    let common = base_parts.iter().zip(&path_parts).take_while(|(a, b)| a == b).count();
    let mut rel = PathBuf::new();
    for _ in common..base_parts.len() {
        rel.push("..");
    }
    for part in &path_parts[common..] {
        rel.push(part);
    }
    if rel.as_os_str().is_empty() {
        rel.push(".");
    }
    rel.display().to_string()
}

// ---------------------------------------------------------------------------
// Pipeline manifest

pub const MANIFEST_FILE: &str = "pipeline.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One stage's contribution to the pipeline manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

/// What produced the artifacts in a directory: tool version plus one record
/// per stage, held in pipeline order. Re-running a stage replaces its record
/// instead of appending, so the manifest is as reproducible as the
/// artifacts themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub tool_version: String,
    pub stages: Vec<StageRecord>,
}

fn stage_rank(stage: &str) -> usize {
    ["synth", "profile", "prune", "cluster", "search", "export", "report"]
        .iter()
        .position(|s| *s == stage)
        .unwrap_or(usize::MAX)
}

/// Inserts or replaces `record` in the manifest in `dir`, creating the
/// manifest on first use.
pub fn record_stage(dir: &Path, record: StageRecord) -> Result<PathBuf, StageFailure> {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest: PipelineManifest = if path.exists() {
        read_json("manifest", &path)?
    } else {
        PipelineManifest { tool_version: TOOL_VERSION.to_string(), stages: Vec::new() }
    };
    manifest.tool_version = TOOL_VERSION.to_string();
    manifest.stages.retain(|s| s.stage != record.stage);
    manifest.stages.push(record);
    manifest.stages.sort_by_key(|s| stage_rank(&s.stage));
    write_json("manifest", &manifest, &path)?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Synthesis

/// Inputs for the trace-synthesis stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthParams {
    pub seed: u64,
    pub num_layers: usize,
    pub num_q_heads: usize,
    pub num_kv_heads: usize,
    pub head_dim: usize,
    pub prompts: usize,
    pub prefill_len: usize,
    pub decode_len: usize,
    pub outliers: OutlierProfile,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            num_layers: 8,
            num_q_heads: 4,
            num_kv_heads: 2,
            head_dim: 16,
            prompts: 4,
            prefill_len: 224,
            decode_len: 32,
            outliers: OutlierProfile::ChannelOutliers,
        }
    }
}

/// Generates a synthetic trace into `out_dir` and returns the path of the
/// trace manifest it wrote.
pub fn stage_synth(params: &SynthParams, out_dir: &Path) -> Result<PathBuf, StageFailure> {
    let trace = synth_trace(
        params.seed,
        params.num_layers,
        params.num_q_heads,
        params.num_kv_heads,
        params.head_dim,
        params.prompts,
        params.prefill_len,
        params.decode_len,
        params.outliers,
    )
    .map_err(|e| fail("synth", out_dir, e))?;
    fs::create_dir_all(out_dir).map_err(|e| fail("synth", out_dir, e))?;
    let manifest = save_trace(&trace, out_dir).map_err(|e| fail("synth", out_dir, e))?;
    record_stage(
        out_dir,
        StageRecord {
            stage: "synth".to_string(),
            preset: None,
            seed: Some(params.seed),
            inputs: Vec::new(),
            outputs: vec![rel_display(out_dir, &manifest)],
        },
    )?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Profiling

pub fn save_profiles(profiles: &[LayerProfile], path: &Path) -> Result<(), StageFailure> {
    write_json("profile", &profiles, path)
}

pub fn load_profiles(path: &Path) -> Result<Vec<LayerProfile>, StageFailure> {
    read_json("profile", path)
}

/// Profiles every layer of the trace under one preset and writes the result
/// as a JSON array of per-layer sensitivity tables.
pub fn stage_profile(
    trace_manifest: &Path,
    mode: QuantModePreset,
    pairs: &[PrecisionPair],
    jobs: usize,
    out: &Path,
) -> Result<Vec<LayerProfile>, StageFailure> {
    let trace = load_trace(trace_manifest).map_err(|e| fail("profile", trace_manifest, e))?;
    let profiles =
        profile_model(&trace, mode, pairs, jobs).map_err(|e| fail("profile", trace_manifest, e))?;
    save_profiles(&profiles, out)?;
    let dir = out.parent().unwrap_or(Path::new("."));
    record_stage(
        dir,
        StageRecord {
            stage: "profile".to_string(),
            preset: Some(mode.name().to_string()),
            seed: None,
            inputs: vec![rel_display(dir, trace_manifest)],
            outputs: vec![rel_display(dir, out)],
        },
    )?;
    Ok(profiles)
}

/// Renders profiles as CSV, one row per (layer, pair).
pub fn profile_csv(profiles: &[LayerProfile]) -> String {
    let mut out = String::from("layer,B_k,B_v,e_k,e_v,e_a,e_o\n");
    for profile in profiles {
        for entry in &profile.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                profile.layer,
                entry.pair.key_bits,
                entry.pair.value_bits,
                entry.errors.e_k,
                entry.errors.e_v,
                entry.errors.e_a,
                entry.errors.e_o,
            ));
        }
    }
    out
}

/// Converts a profile JSON artifact to its CSV form.
pub fn stage_export(profile_json: &Path, out: &Path) -> Result<(), StageFailure> {
    let profiles = load_profiles(profile_json).map_err(|e| fail("export", profile_json, e.message))?;
    fs::write(out, profile_csv(&profiles)).map_err(|e| fail("export", out, e))?;
    let dir = out.parent().unwrap_or(Path::new("."));
    record_stage(
        dir,
        StageRecord {
            stage: "export".to_string(),
            preset: None,
            seed: None,
            inputs: vec![rel_display(dir, profile_json)],
            outputs: vec![rel_display(dir, out)],
        },
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Pruning and clustering

/// Surviving candidate pairs for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub layer: usize,
    pub pairs: Vec<PrecisionPair>,
}

/// Checks that every layer was profiled over the same pair set, so
/// downstream stages can compare layers pair for pair.
fn check_profile_complete(
    stage: &'static str,
    path: &Path,
    profiles: &[LayerProfile],
) -> Result<(), StageFailure> {
    if profiles.is_empty() {
        return Err(fail(stage, path, "incomplete profile: no layers"));
    }
    let mut union: Vec<PrecisionPair> = Vec::new();
    for profile in profiles {
        for entry in &profile.entries {
            if !union.contains(&entry.pair) {
                union.push(entry.pair);
            }
        }
    }
    sort_pairs_canonical(&mut union);
    for profile in profiles {
        for &pair in &union {
            if profile.errors_for(pair).is_none() {
                return Err(fail(
                    stage,
                    path,
                    format!("incomplete profile: layer {} is missing {}", profile.layer, pair),
                ));
            }
        }
    }
    Ok(())
}

/// Prunes each layer's profile to its Pareto-optimal pairs and writes the
/// per-layer candidate sets as a JSON array.
pub fn stage_prune(profile_json: &Path, out: &Path) -> Result<Vec<CandidateSet>, StageFailure> {
    let profiles = load_profiles(profile_json)?;
    check_profile_complete("prune", profile_json, &profiles)?;
    let mut sets = Vec::with_capacity(profiles.len());
    for profile in &profiles {
        let entries = pareto_prune_layer(profile).map_err(|e| fail("prune", profile_json, e))?;
        sets.push(CandidateSet {
            layer: profile.layer,
            pairs: entries.iter().map(|e| e.pair).collect(),
        });
    }
    write_json("prune", &sets, out)?;
    let dir = out.parent().unwrap_or(Path::new("."));
    record_stage(
        dir,
        StageRecord {
            stage: "prune".to_string(),
            preset: None,
            seed: None,
            inputs: vec![rel_display(dir, profile_json)],
            outputs: vec![rel_display(dir, out)],
        },
    )?;
    Ok(sets)
}

/// Grouping artifact: the layer groups that share candidate sets and error
/// behavior, in search order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsDoc {
    pub groups: Vec<LayerGroup>,
}

pub fn load_groups(path: &Path) -> Result<Vec<LayerGroup>, StageFailure> {
    let doc: GroupsDoc = read_json("cluster", path)?;
    Ok(doc.groups)
}

/// Prunes, partitions by candidate set, and density-clusters the layers,
/// writing the resulting groups artifact.
pub fn stage_cluster(
    profile_json: &Path,
    eps: f64,
    min_samples: usize,
    out: &Path,
) -> Result<Vec<LayerGroup>, StageFailure> {
    let profiles = load_profiles(profile_json)?;
    check_profile_complete("cluster", profile_json, &profiles)?;
    let groups = cluster_layers(&profiles, eps, min_samples)
        .map_err(|e| fail("cluster", profile_json, e))?;
    write_json("cluster", &GroupsDoc { groups: groups.clone() }, out)?;
    let dir = out.parent().unwrap_or(Path::new("."));
    record_stage(
        dir,
        StageRecord {
            stage: "cluster".to_string(),
            preset: None,
            seed: None,
            inputs: vec![rel_display(dir, profile_json)],
            outputs: vec![rel_display(dir, out)],
        },
    )?;
    Ok(groups)
}

// ---------------------------------------------------------------------------
// Search

/// Which accuracy oracle scores configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleChoice {
    /// Separable surrogate built from the profile's output errors.
    Proxy,
    /// Greedy-decode agreement of the built-in toy transformer.
    ToyLlm,
    /// External command receiving a config path, printing an accuracy.
    External(String),
}

impl fmt::Display for OracleChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleChoice::Proxy => write!(f, "proxy"),
            OracleChoice::ToyLlm => write!(f, "toyllm"),
            OracleChoice::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl std::str::FromStr for OracleChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proxy" => Ok(OracleChoice::Proxy),
            "toyllm" => Ok(OracleChoice::ToyLlm),
            _ => match s.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => {
                    Ok(OracleChoice::External(cmd.to_string()))
                }
                _ => Err(format!(
                    "unknown oracle {s:?}; expected proxy, toyllm, or external:<command>"
                )),
            },
        }
    }
}

/// How the configuration space is explored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    Moead,
    Exhaustive,
}

impl fmt::Display for SearchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchStrategy::Moead => write!(f, "moead"),
            SearchStrategy::Exhaustive => write!(f, "exhaustive"),
        }
    }
}

impl std::str::FromStr for SearchStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "moead" => Ok(SearchStrategy::Moead),
            "exhaustive" => Ok(SearchStrategy::Exhaustive),
            _ => Err(format!("unknown strategy {s:?}; expected moead or exhaustive")),
        }
    }
}

/// Inputs for the search stage.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub strategy: SearchStrategy,
    pub oracle: OracleChoice,
    pub budget: usize,
    pub population: usize,
    pub seed: u64,
    pub constraints: SearchConstraints,
    /// Proxy oracle sharpness.
    pub beta: f64,
    /// Wall-clock allowance per external oracle call.
    pub external_timeout: Duration,
    /// Worker threads inside the toy oracle.
    pub jobs: usize,
    /// Name stamped into emitted configs.
    pub model_name: String,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            strategy: SearchStrategy::Moead,
            oracle: OracleChoice::Proxy,
            budget: 200,
            population: 20,
            seed: 0,
            constraints: SearchConstraints::unconstrained(),
            beta: ProxyOracle::DEFAULT_BETA,
            external_timeout: Duration::from_secs(60),
            jobs: 1,
            model_name: "synthetic".to_string(),
        }
    }
}

/// One frontier row as recorded in the search summary and the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub f_m: f64,
    pub f_a: f64,
    pub accuracy: f64,
    pub config_path: String,
}

/// Everything the search stage learned, written as `search.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub strategy: SearchStrategy,
    pub oracle: String,
    pub budget: usize,
    pub population: usize,
    pub seed: u64,
    pub max_equivalent_bits: f64,
    pub max_accuracy_loss: f64,
    pub baseline_accuracy: f64,
    pub oracle_evaluations: usize,
    pub frontier: Vec<FrontierRow>,
}

pub const FRONTIER_FILE: &str = "frontier.csv";
pub const SEARCH_SUMMARY_FILE: &str = "search.json";

fn frontier_csv(rows: &[FrontierRow]) -> String {
    let mut out = String::from("f_m,f_a,accuracy,config_path\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.f_m, row.f_a, row.accuracy, row.config_path
        ));
    }
    out
}

/// Runs the configured search over the grouped space and writes one config
/// JSON per frontier point, `frontier.csv`, and `search.json` into
/// `out_dir`. Paths inside the CSV are relative to `out_dir`.
pub fn stage_search(
    profile_json: &Path,
    groups_json: &Path,
    params: &SearchParams,
    out_dir: &Path,
) -> Result<SearchSummary, StageFailure> {
    let profiles = load_profiles(profile_json).map_err(|e| fail("search", profile_json, e.message))?;
    if profiles.is_empty() {
        return Err(fail("search", profile_json, "empty profile"));
    }
    let mode = profiles[0].mode;
    if let Some(odd) = profiles.iter().find(|p| p.mode != mode) {
        return Err(fail(
            "search",
            profile_json,
            format!("layer {} was profiled under {}, expected {}", odd.layer, odd.mode, mode),
        ));
    }
    let groups = load_groups(groups_json).map_err(|e| fail("search", groups_json, e.message))?;
    let problem = SearchProblem::new(&params.model_name, mode, &groups)
        .map_err(|e| fail("search", groups_json, e))?;

    let mut oracle: Box<dyn Oracle> = match &params.oracle {
        OracleChoice::Proxy => Box::new(ProxyOracle::from_profiles(&profiles, params.beta)),
        OracleChoice::ToyLlm => {
            Box::new(ToyLlmOracle::new(params.seed).with_jobs(params.jobs))
        }
        OracleChoice::External(cmd) => Box::new(
            ExternalOracle::new(cmd, params.external_timeout)
                .map_err(|e| fail("search", groups_json, e))?,
        ),
    };

    let result = match params.strategy {
        SearchStrategy::Exhaustive => {
            exhaustive_search(&problem, oracle.as_mut(), &params.constraints)
        }
        SearchStrategy::Moead => moead_search(
            &problem,
            oracle.as_mut(),
            &params.constraints,
            MoeadParams {
                population: params.population,
                budget: params.budget,
                seed: params.seed,
            },
        ),
    }
    .map_err(|e| fail("search", groups_json, e))?;

    fs::create_dir_all(out_dir).map_err(|e| fail("search", out_dir, e))?;
    let mut rows = Vec::with_capacity(result.frontier.len());
    for (i, point) in result.frontier.iter().enumerate() {
        let name = format!("config_{i:03}.json");
        let config = problem.config_for(&point.genome);
        let config_path = out_dir.join(&name);
        save_config(&config, &config_path).map_err(|e| fail("search", &config_path, e))?;
        rows.push(FrontierRow {
            f_m: point.f_m,
            f_a: point.f_a,
            accuracy: point.accuracy,
            config_path: name,
        });
    }
    let csv_path = out_dir.join(FRONTIER_FILE);
    fs::write(&csv_path, frontier_csv(&rows)).map_err(|e| fail("search", &csv_path, e))?;

    let summary = SearchSummary {
        strategy: params.strategy,
        oracle: params.oracle.to_string(),
        budget: params.budget,
        population: params.population,
        seed: params.seed,
        max_equivalent_bits: params.constraints.max_equivalent_bits,
        max_accuracy_loss: params.constraints.max_accuracy_loss,
        baseline_accuracy: result.baseline_accuracy,
        oracle_evaluations: result.oracle_evaluations,
        frontier: rows.clone(),
    };
    write_json("search", &summary, &out_dir.join(SEARCH_SUMMARY_FILE))?;

    let mut outputs: Vec<String> = vec![FRONTIER_FILE.to_string(), SEARCH_SUMMARY_FILE.to_string()];
    outputs.extend(rows.iter().map(|r| r.config_path.clone()));
    record_stage(
        out_dir,
        StageRecord {
            stage: "search".to_string(),
            preset: Some(mode.name().to_string()),
            seed: Some(params.seed),
            inputs: vec![rel_display(out_dir, profile_json), rel_display(out_dir, groups_json)],
            outputs,
        },
    )?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// Reporting

/// Compresses a config's per-layer pairs into "pair x count" runs for the
/// report, e.g. "K8V4 x4, KV4 x4".
fn render_pairs(pairs: &[PrecisionPair]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j] == pairs[i] {
            j += 1;
        }
        parts.push(format!("{} x{}", pairs[i], j - i));
        i = j;
    }
    parts.join(", ")
}

/// Reads the search artifacts back, re-verifies that every referenced config
/// parses, and renders a text summary followed by the frontier CSV.
pub fn stage_report(search_dir: &Path) -> Result<String, StageFailure> {
    let summary_path = search_dir.join(SEARCH_SUMMARY_FILE);
    let summary: SearchSummary = read_json("report", &summary_path)?;

    let mut text = format!(
        "search: strategy {} with {} oracle, budget {} ({} evaluations used), population {}, seed {}\n",
        summary.strategy,
        summary.oracle,
        summary.budget,
        summary.oracle_evaluations,
        summary.population,
        summary.seed,
    );
    text.push_str(&format!(
        "constraints: equivalent bits <= {}, accuracy loss <= {}\n",
        summary.max_equivalent_bits, summary.max_accuracy_loss
    ));
    text.push_str(&format!("baseline accuracy: {:.6}\n", summary.baseline_accuracy));
    text.push_str(&format!("frontier: {} Pareto points\n", summary.frontier.len()));
    for row in &summary.frontier {
        let config_path = search_dir.join(&row.config_path);
        let config = crate::search::load_config(&config_path)
            .map_err(|e| fail("report", &config_path, e))?;
        text.push_str(&format!(
            "  f_m={:.4}  f_a={:.6}  accuracy={:.6}  {}  [{}]\n",
            row.f_m,
            row.f_a,
            row.accuracy,
            row.config_path,
            render_pairs(&config.layer_pairs()),
        ));
    }
    text.push('\n');
    text.push_str(&frontier_csv(&summary.frontier));
    Ok(text)
}

/// Recomputes a config file's equivalent bits from its per-layer pairs.
pub fn config_equivalent_bits(path: &Path) -> Result<f64, StageFailure> {
    let config = crate::search::load_config(path).map_err(|e| fail("fm", path, e))?;
    let pairs = config.layer_pairs();
    if pairs.is_empty() {
        return Err(fail("fm", path, "config has no layers"));
    }
    Ok(memory_objective(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attention::AttentionErrors;
    use crate::profile::ProfileEntry;
    use crate::quant::candidate_pairs;
    use crate::search::PrecisionConfig;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("kvmix-pipeline-{tag}-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).expect("clear temp dir");
        }
        fs::create_dir_all(&dir).expect("create temp dir");
        dir
    }

    fn small_synth(seed: u64) -> SynthParams {
        SynthParams {
            seed,
            num_layers: 3,
            num_q_heads: 2,
            num_kv_heads: 1,
            head_dim: 8,
            prompts: 2,
            prefill_len: 24,
            decode_len: 8,
            outliers: OutlierProfile::ChannelOutliers,
        }
    }

    #[test]
    fn full_chain_produces_consistent_artifacts() {
        let dir = tmpdir("chain");
        let trace_manifest = stage_synth(&small_synth(9), &dir.join("trace")).unwrap();

        let profile_path = dir.join("profile.json");
        let pairs = candidate_pairs();
        let profiles =
            stage_profile(&trace_manifest, QuantModePreset::PerTokenAsym, &pairs, 2, &profile_path)
                .unwrap();
        assert_eq!(profiles.len(), 3);

        let sets = stage_prune(&profile_path, &dir.join("candidates.json")).unwrap();
        assert_eq!(sets.len(), 3);
        assert!(sets.iter().all(|s| !s.pairs.is_empty()));

        let groups_path = dir.join("groups.json");
        let groups = stage_cluster(&profile_path, 0.05, 2, &groups_path).unwrap();
        let grouped: usize = groups.iter().map(|g| g.layer_ids.len()).sum();
        assert_eq!(grouped, 3, "groups must partition the layers");

        let search_dir = dir.join("search");
        let params = SearchParams {
            strategy: SearchStrategy::Exhaustive,
            constraints: SearchConstraints {
                max_equivalent_bits: 16.0,
                max_accuracy_loss: 1.0,
            },
            ..SearchParams::default()
        };
        let summary = stage_search(&profile_path, &groups_path, &params, &search_dir).unwrap();
        assert!(!summary.frontier.is_empty());
        for row in &summary.frontier {
            let config =
                crate::search::load_config(&search_dir.join(&row.config_path)).unwrap();
            assert_eq!(config.layer_pairs().len(), 3);
            assert!((memory_objective(&config.layer_pairs()) - row.f_m).abs() < 1e-12);
        }
        let csv = fs::read_to_string(search_dir.join(FRONTIER_FILE)).unwrap();
        assert!(csv.starts_with("f_m,f_a,accuracy,config_path\n"));
        assert_eq!(csv.lines().count(), summary.frontier.len() + 1);

        let report = stage_report(&search_dir).unwrap();
        assert!(report.contains("Pareto points"));
        assert!(report.contains("f_m,f_a,accuracy,config_path"));

        let manifest: PipelineManifest =
            read_json("manifest", &dir.join(MANIFEST_FILE)).unwrap();
        let stages: Vec<&str> = manifest.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(stages, ["profile", "prune", "cluster"]);
        let trace_manifest_doc: PipelineManifest =
            read_json("manifest", &dir.join("trace").join(MANIFEST_FILE)).unwrap();
        assert_eq!(trace_manifest_doc.stages[0].stage, "synth");
        assert_eq!(trace_manifest_doc.tool_version, TOOL_VERSION);

        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir = tmpdir("rerun");
        let trace_manifest = stage_synth(&small_synth(10), &dir.join("trace")).unwrap();
        let profile_path = dir.join("profile.json");
        let pairs = candidate_pairs();

        let mut snapshots = Vec::new();
        for _ in 0..2 {
            stage_profile(&trace_manifest, QuantModePreset::Kivi, &pairs, 1, &profile_path)
                .unwrap();
            stage_cluster(&profile_path, 0.05, 2, &dir.join("groups.json")).unwrap();
            let params = SearchParams {
                strategy: SearchStrategy::Moead,
                budget: 30,
                population: 8,
                seed: 4,
                ..SearchParams::default()
            };
            stage_search(&profile_path, &dir.join("groups.json"), &params, &dir.join("search"))
                .unwrap();
            let mut bytes = Vec::new();
            for file in ["profile.json", "groups.json", MANIFEST_FILE] {
                bytes.push(fs::read(dir.join(file)).unwrap());
            }
            bytes.push(fs::read(dir.join("search").join(FRONTIER_FILE)).unwrap());
            bytes.push(fs::read(dir.join("search").join(SEARCH_SUMMARY_FILE)).unwrap());
            bytes.push(fs::read(dir.join("search").join(MANIFEST_FILE)).unwrap());
            snapshots.push(bytes);
        }
        assert_eq!(snapshots[0], snapshots[1], "stage re-runs must be byte-identical");

        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn prune_rejects_ragged_profiles() {
        let dir = tmpdir("ragged");
        let entry = |k, v| ProfileEntry {
            pair: PrecisionPair::of(k, v),
            errors: AttentionErrors::ZERO,
        };
        let profiles = vec![
            LayerProfile {
                layer: 0,
                mode: QuantModePreset::PerTokenAsym,
                entries: vec![entry(8, 8), entry(4, 4)],
            },
            LayerProfile {
                layer: 1,
                mode: QuantModePreset::PerTokenAsym,
                entries: vec![entry(8, 8)],
            },
        ];
        let path = dir.join("profile.json");
        save_profiles(&profiles, &path).unwrap();
        let err = stage_prune(&path, &dir.join("candidates.json")).unwrap_err();
        assert!(err.message.contains("incomplete profile"), "{err}");
        assert!(err.message.contains("layer 1"), "{err}");
        assert!(err.message.contains("KV4"), "{err}");

        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn profile_csv_renders_expected_rows() {
        let profiles = vec![LayerProfile {
            layer: 2,
            mode: QuantModePreset::Kivi,
            entries: vec![ProfileEntry {
                pair: PrecisionPair::of(8, 4),
                errors: AttentionErrors { e_k: 0.5, e_v: 0.25, e_a: 0.125, e_o: 0.0625 },
            }],
        }];
        assert_eq!(
            profile_csv(&profiles),
            "layer,B_k,B_v,e_k,e_v,e_a,e_o\n2,8,4,0.5,0.25,0.125,0.0625\n"
        );
    }

    #[test]
    fn manifest_rerun_replaces_stage_record() {
        let dir = tmpdir("manifest");
        for seed in [1u64, 2] {
            record_stage(
                &dir,
                StageRecord {
                    stage: "search".to_string(),
                    preset: None,
                    seed: Some(seed),
                    inputs: Vec::new(),
                    outputs: Vec::new(),
                },
            )
            .unwrap();
        }
        record_stage(
            &dir,
            StageRecord {
                stage: "profile".to_string(),
                preset: Some("kivi".to_string()),
                seed: None,
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        )
        .unwrap();
        let manifest: PipelineManifest = read_json("manifest", &dir.join(MANIFEST_FILE)).unwrap();
        let stages: Vec<(&str, Option<u64>)> =
            manifest.stages.iter().map(|s| (s.stage.as_str(), s.seed)).collect();
        assert_eq!(stages, [("profile", None), ("search", Some(2))]);

        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn equivalent_bits_recomputed_from_layers() {
        let dir = tmpdir("fm");
        let config = PrecisionConfig::from_pairs(
            "demo",
            QuantModePreset::Kivi,
            &[PrecisionPair::of(8, 4), PrecisionPair::of(2, 2)],
        );
        let path = dir.join("config.json");
        save_config(&config, &path).unwrap();
        assert_eq!(config_equivalent_bits(&path).unwrap(), 4.0);

        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn oracle_choice_parses_and_rejects() {
        assert_eq!("proxy".parse::<OracleChoice>().unwrap(), OracleChoice::Proxy);
        assert_eq!("toyllm".parse::<OracleChoice>().unwrap(), OracleChoice::ToyLlm);
        assert_eq!(
            "external:python eval.py".parse::<OracleChoice>().unwrap(),
            OracleChoice::External("python eval.py".to_string())
        );
        assert!("external:".parse::<OracleChoice>().is_err());
        assert!("nnoracle".parse::<OracleChoice>().is_err());
        assert_eq!(
            "external:python eval.py".parse::<OracleChoice>().unwrap().to_string(),
            "external:python eval.py"
        );
    }
}
