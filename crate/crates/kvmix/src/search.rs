//! Multi-objective search for layer-wise precision assignments.
//!
//! A configuration assigns one key/value bit pair to every layer group. Two
//! objectives are minimized together: the memory footprint of the cache in
//! equivalent bits, and the accuracy lost relative to the full-precision
//! baseline. Accuracy comes from a pluggable [`Oracle`]; the search itself
//! never assumes anything about where the number comes from.
//!
//! Small spaces can be enumerated exactly with [`exhaustive_search`]. Larger
//! ones go through [`moead_search`], a decomposition-based evolutionary
//! search that spends a fixed oracle budget and returns the non-dominated
//! set of everything it evaluated, so its frontier is a subset of what
//! exhaustive enumeration would return.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{LayerProfile, QuantModePreset};
use crate::prune::{search_space_size, LayerGroup};
use crate::quant::PrecisionPair;
use crate::rng::{derive_seed, Rng};

/// Exhaustive enumeration refuses spaces larger than this.
pub const EXHAUSTIVE_CAP: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no layer groups to search over")]
    NoGroups,
    #[error("group {0} has no candidate pairs")]
    EmptyCandidates(usize),
    #[error("layer {0} is covered by more than one group")]
    DuplicateLayer(usize),
    #[error("layer {0} is not covered by any group")]
    MissingLayer(usize),
    #[error("search space holds {size} configurations, above the exhaustive cap of {cap}")]
    SpaceTooLarge { size: BigUint, cap: u64 },
    #[error("population must be at least 2, got {0}")]
    BadPopulation(usize),
    #[error("budget {budget} is below the population size {population}")]
    BudgetBelowPopulation { budget: usize, population: usize },
    #[error("layer {layer} pair {pair} missing from the sensitivity profile")]
    MissingProfile { layer: usize, pair: PrecisionPair },
    #[error("configuration shape mismatch: {0}")]
    ConfigShape(String),
    #[error("oracle command failed with status {status}: {stderr}")]
    OracleFailed { status: i32, stderr: String },
    #[error("oracle printed no parsable accuracy (last token '{0}')")]
    OracleUnparsable(String),
    #[error("oracle accuracy {0} outside [0, 1]")]
    OracleOutOfRange(f64),
    #[error("oracle timed out after {0:.1?}")]
    OracleTimeout(Duration),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Mean equivalent bits per cached element: sum of key and value bits over
/// layers, divided by twice the layer count. All-16-bit gives 16, all-4-bit
/// gives 4.
pub fn memory_objective(pairs: &[PrecisionPair]) -> f64 {
    assert!(!pairs.is_empty(), "memory objective of an empty assignment");
    let total: u32 = pairs.iter().map(|p| p.key_bits as u32 + p.value_bits as u32).sum();
    total as f64 / (2.0 * pairs.len() as f64)
}

/// Accuracy lost against the full-precision baseline; negative means the
/// quantized configuration happened to score higher.
pub fn accuracy_objective(baseline_accuracy: f64, config_accuracy: f64) -> f64 {
    baseline_accuracy - config_accuracy
}

/// Upper bounds the search must respect: a memory budget in equivalent bits
/// and a tolerated accuracy drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConstraints {
    pub max_equivalent_bits: f64,
    pub max_accuracy_loss: f64,
}

impl SearchConstraints {
    pub fn unconstrained() -> Self {
        SearchConstraints { max_equivalent_bits: 16.0, max_accuracy_loss: 1.0 }
    }

    pub fn is_feasible(&self, f_m: f64, f_a: f64) -> bool {
        f_m <= self.max_equivalent_bits && f_a <= self.max_accuracy_loss
    }

    /// Total constraint violation, zero when feasible. Infeasible candidates
    /// are compared by this first, so the search walks toward the feasible
    /// region before optimizing inside it.
    pub fn violation(&self, f_m: f64, f_a: f64) -> f64 {
        (f_m - self.max_equivalent_bits).max(0.0) + (f_a - self.max_accuracy_loss).max(0.0)
    }
}

/// One layer's bit assignment inside a serialized configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPrecision {
    pub layer: usize,
    pub key_bits: u8,
    pub value_bits: u8,
}

/// A complete, serializable precision assignment. This is the file handed
/// to accuracy oracles and emitted for every frontier point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    pub model_name: String,
    pub quant_method: QuantModePreset,
    pub equivalent_bits: f64,
    pub layers: Vec<LayerPrecision>,
}

impl PrecisionConfig {
    pub fn from_pairs(model_name: &str, method: QuantModePreset, pairs: &[PrecisionPair]) -> Self {
        PrecisionConfig {
            model_name: model_name.to_string(),
            quant_method: method,
            equivalent_bits: memory_objective(pairs),
            layers: pairs
                .iter()
                .enumerate()
                .map(|(layer, p)| LayerPrecision {
                    layer,
                    key_bits: p.key_bits,
                    value_bits: p.value_bits,
                })
                .collect(),
        }
    }

    /// Per-layer pairs in layer order.
    pub fn layer_pairs(&self) -> Vec<PrecisionPair> {
        let mut layers = self.layers.clone();
        layers.sort_by_key(|l| l.layer);
        layers.iter().map(|l| PrecisionPair { key_bits: l.key_bits, value_bits: l.value_bits }).collect()
    }
}

/// Anything that can score a configuration. Implementations may keep caches
/// or other state, hence `&mut self`. Accuracy must land in [0, 1].
pub trait Oracle {
    fn evaluate(&mut self, config: &PrecisionConfig) -> Result<f64, SearchError>;
}

/// Closed-form stand-in oracle: accuracy decays exponentially with the sum
/// of profiled per-layer output errors, `exp(-beta * sum)`. Fast, smooth,
/// and monotone in every layer's error, which makes search behavior easy
/// to reason about in tests and dry runs.
pub struct ProxyOracle {
    beta: f64,
    e_o: HashMap<(usize, PrecisionPair), f64>,
}

impl ProxyOracle {
    pub const DEFAULT_BETA: f64 = 1.0;

    pub fn from_profiles(profiles: &[LayerProfile], beta: f64) -> Self {
        let mut e_o = HashMap::new();
        for profile in profiles {
            for entry in &profile.entries {
                e_o.insert((profile.layer, entry.pair), entry.errors.e_o);
            }
        }
        ProxyOracle { beta, e_o }
    }

    fn layer_error(&self, layer: usize, pair: PrecisionPair) -> Result<f64, SearchError> {
        if pair == PrecisionPair::of(16, 16) {
            return Ok(0.0);
        }
        self.e_o
            .get(&(layer, pair))
            .copied()
            .ok_or(SearchError::MissingProfile { layer, pair })
    }
}

impl Oracle for ProxyOracle {
    fn evaluate(&mut self, config: &PrecisionConfig) -> Result<f64, SearchError> {
        let mut sum = 0.0;
        for l in &config.layers {
            sum += self.layer_error(l.layer, PrecisionPair { key_bits: l.key_bits, value_bits: l.value_bits })?;
        }
        Ok((-self.beta * sum).exp())
    }
}

/// Runs a user-supplied command once per evaluation. The configuration is
/// written to a scratch JSON file whose path becomes `$1`; the command's
/// last whitespace-separated stdout token must be an accuracy in [0, 1].
pub struct ExternalOracle {
    command: String,
    timeout: Duration,
    scratch: tempfile::TempDir,
    counter: usize,
}

impl ExternalOracle {
    pub fn new(command: &str, timeout: Duration) -> Result<Self, SearchError> {
        Ok(ExternalOracle {
            command: command.to_string(),
            timeout,
            scratch: tempfile::tempdir()?,
            counter: 0,
        })
    }
}

impl Oracle for ExternalOracle {
    fn evaluate(&mut self, config: &PrecisionConfig) -> Result<f64, SearchError> {
        let config_path = self.scratch.path().join(format!("config_{:06}.json", self.counter));
        let stdout_path = self.scratch.path().join(format!("stdout_{:06}.txt", self.counter));
        let stderr_path = self.scratch.path().join(format!("stderr_{:06}.txt", self.counter));
        self.counter += 1;
        fs::write(&config_path, serde_json::to_string_pretty(config)?)?;

        let mut child = Command::new("sh")
            .arg("-c")
            .arg(format!("{} \"$1\"", self.command))
            .arg("sh")
            .arg(&config_path)
            .stdin(Stdio::null())
            .stdout(Stdio::from(fs::File::create(&stdout_path)?))
            .stderr(Stdio::from(fs::File::create(&stderr_path)?))
            .spawn()?;

        let started = Instant::now();
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if started.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(SearchError::OracleTimeout(self.timeout));
            }
            std::thread::sleep(Duration::from_millis(10));
        };

        if !status.success() {
            let stderr = fs::read_to_string(&stderr_path).unwrap_or_default();
            return Err(SearchError::OracleFailed {
                status: status.code().unwrap_or(-1),
                stderr: stderr.trim().to_string(),
            });
        }
        let stdout = fs::read_to_string(&stdout_path)?;
        let last = stdout
            .split_whitespace()
            .last()
            .ok_or_else(|| SearchError::OracleUnparsable(String::new()))?;
        let accuracy: f64 =
            last.parse().map_err(|_| SearchError::OracleUnparsable(last.to_string()))?;
        if !(0.0..=1.0).contains(&accuracy) || accuracy.is_nan() {
            return Err(SearchError::OracleOutOfRange(accuracy));
        }
        Ok(accuracy)
    }
}

/// A validated search instance: grouped layers, the quantization mode the
/// resulting configs will name, and the model they describe.
#[derive(Debug, Clone)]
pub struct SearchProblem<'a> {
    pub model_name: String,
    pub mode: QuantModePreset,
    pub groups: &'a [LayerGroup],
    num_layers: usize,
}

impl<'a> SearchProblem<'a> {
    /// Checks that the groups partition layers 0..L with candidates in
    /// every group.
    pub fn new(
        model_name: &str,
        mode: QuantModePreset,
        groups: &'a [LayerGroup],
    ) -> Result<Self, SearchError> {
        if groups.is_empty() {
            return Err(SearchError::NoGroups);
        }
        let mut seen = BTreeSet::new();
        for group in groups {
            if group.pairs.is_empty() {
                return Err(SearchError::EmptyCandidates(group.group_id));
            }
            for &layer in &group.layer_ids {
                if !seen.insert(layer) {
                    return Err(SearchError::DuplicateLayer(layer));
                }
            }
        }
        let num_layers = *seen.iter().next_back().expect("groups are non-empty") + 1;
        if let Some(gap) = (0..num_layers).find(|l| !seen.contains(l)) {
            return Err(SearchError::MissingLayer(gap));
        }
        Ok(SearchProblem { model_name: model_name.to_string(), mode, groups, num_layers })
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn candidate_counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.pairs.len()).collect()
    }

    pub fn space_size(&self) -> BigUint {
        search_space_size(&self.candidate_counts())
    }

    /// Expands a per-group choice vector into per-layer pairs.
    pub fn layer_pairs(&self, genome: &[usize]) -> Vec<PrecisionPair> {
        assert_eq!(genome.len(), self.groups.len(), "genome length");
        let mut pairs = vec![PrecisionPair::of(16, 16); self.num_layers];
        for (group, &choice) in self.groups.iter().zip(genome) {
            let pair = group.pairs[choice];
            for &layer in &group.layer_ids {
                pairs[layer] = pair;
            }
        }
        pairs
    }

    pub fn config_for(&self, genome: &[usize]) -> PrecisionConfig {
        PrecisionConfig::from_pairs(&self.model_name, self.mode, &self.layer_pairs(genome))
    }

    /// The all-16-bit reference configuration the accuracy loss is measured
    /// against.
    pub fn baseline_config(&self) -> PrecisionConfig {
        let pairs = vec![PrecisionPair::of(16, 16); self.num_layers];
        PrecisionConfig::from_pairs(&self.model_name, self.mode, &pairs)
    }
}

/// One point the search decided to keep: both objectives, the raw accuracy,
/// and the assignment that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoPoint {
    pub f_m: f64,
    pub f_a: f64,
    pub accuracy: f64,
    /// Chosen candidate index per group.
    pub genome: Vec<usize>,
    /// The genome expanded to one pair per layer.
    pub pairs: Vec<PrecisionPair>,
}

/// Search output: the baseline accuracy, the non-dominated feasible points
/// sorted by ascending memory objective, and how many oracle calls were
/// spent (the baseline call is bookkeeping, not part of the count).
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub baseline_accuracy: f64,
    pub frontier: Vec<ParetoPoint>,
    pub oracle_evaluations: usize,
}

/// One oracle evaluation as the evolutionary search saw it, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub genome: Vec<usize>,
    pub f_m: f64,
    pub f_a: f64,
    pub accuracy: f64,
}

/// Non-dominated filter under (f_m, f_a), both minimized. Exact ties on
/// both objectives keep only the earliest point. Output is sorted by
/// ascending f_m (hence descending f_a).
pub fn pareto_frontier(points: Vec<ParetoPoint>) -> Vec<ParetoPoint> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .f_m
            .partial_cmp(&points[b].f_m)
            .expect("objectives are never NaN")
            .then(points[a].f_a.partial_cmp(&points[b].f_a).expect("objectives are never NaN"))
            .then(a.cmp(&b))
    });
    let mut kept = Vec::new();
    let mut best_f_a = f64::INFINITY;
    for i in order {
        if points[i].f_a < best_f_a {
            best_f_a = points[i].f_a;
            kept.push(points[i].clone());
        }
    }
    kept
}

/// Enumerates the whole space and returns the exact feasible frontier.
/// Refuses spaces above [`EXHAUSTIVE_CAP`].
pub fn exhaustive_search(
    problem: &SearchProblem,
    oracle: &mut dyn Oracle,
    constraints: &SearchConstraints,
) -> Result<SearchResult, SearchError> {
    let size = problem.space_size();
    if size > BigUint::from(EXHAUSTIVE_CAP) {
        return Err(SearchError::SpaceTooLarge { size, cap: EXHAUSTIVE_CAP });
    }

    let baseline_accuracy = oracle.evaluate(&problem.baseline_config())?;
    let counts = problem.candidate_counts();
    let mut genome = vec![0usize; counts.len()];
    let mut evaluations = 0usize;
    let mut feasible = Vec::new();

    'enumerate: loop {
        let pairs = problem.layer_pairs(&genome);
        let f_m = memory_objective(&pairs);
        let accuracy = oracle.evaluate(&problem.config_for(&genome))?;
        evaluations += 1;
        let f_a = accuracy_objective(baseline_accuracy, accuracy);
        if constraints.is_feasible(f_m, f_a) {
            feasible.push(ParetoPoint { f_m, f_a, accuracy, genome: genome.clone(), pairs });
        }

        // Odometer increment, last group fastest.
        let mut pos = genome.len();
        loop {
            if pos == 0 {
                break 'enumerate;
            }
            pos -= 1;
            genome[pos] += 1;
            if genome[pos] < counts[pos] {
                break;
            }
            genome[pos] = 0;
        }
    }

    Ok(SearchResult { baseline_accuracy, frontier: pareto_frontier(feasible), oracle_evaluations: evaluations })
}

/// Evolutionary search settings. `budget` bounds oracle evaluations (the
/// baseline evaluation is free); repeated genomes are memoized and cost
/// nothing. The generation count is also capped at `budget` so the loop
/// terminates even when memoization stops consuming evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoeadParams {
    pub population: usize,
    pub budget: usize,
    pub seed: u64,
}

const CROSSOVER_RATE: f64 = 0.9;
const WEIGHT_FLOOR: f64 = 1e-6;

/// Decomposition-based evolutionary search; see [`moead_search_trace`] for
/// the variant that also returns the evaluation log.
pub fn moead_search(
    problem: &SearchProblem,
    oracle: &mut dyn Oracle,
    constraints: &SearchConstraints,
    params: MoeadParams,
) -> Result<SearchResult, SearchError> {
    moead_search_trace(problem, oracle, constraints, params).map(|(result, _)| result)
}

/// The search decomposes the two objectives into `population` scalar
/// subproblems with uniformly spaced weights, each minimizing a weighted
/// Tchebycheff distance to the best values seen so far. Every generation,
/// each subproblem breeds a child from two neighbors (uniform crossover,
/// per-gene reset mutation) and the child replaces any neighbor it beats,
/// comparing constraint violation before scalarized cost. The returned
/// frontier is the non-dominated feasible subset of every evaluation made,
/// alongside the full evaluation log in order.
pub fn moead_search_trace(
    problem: &SearchProblem,
    oracle: &mut dyn Oracle,
    constraints: &SearchConstraints,
    params: MoeadParams,
) -> Result<(SearchResult, Vec<EvalRecord>), SearchError> {
    if params.population < 2 {
        return Err(SearchError::BadPopulation(params.population));
    }
    if params.budget < params.population {
        return Err(SearchError::BudgetBelowPopulation {
            budget: params.budget,
            population: params.population,
        });
    }

    let n = params.population;
    let counts = problem.candidate_counts();
    let genes = counts.len();
    let mutation_rate = 1.0 / genes as f64;

    // Uniformly spaced weights over the two objectives, floored away from
    // zero so no objective is ever fully ignored.
    let weights: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            (t.max(WEIGHT_FLOOR), (1.0 - t).max(WEIGHT_FLOOR))
        })
        .collect();

    let t_size = (n / 5).max(2).min(n);
    let neighborhoods: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut by_distance: Vec<usize> = (0..n).collect();
            by_distance.sort_by(|&a, &b| {
                let da = (weights[i].0 - weights[a].0).powi(2) + (weights[i].1 - weights[a].1).powi(2);
                let db = (weights[i].0 - weights[b].0).powi(2) + (weights[i].1 - weights[b].1).powi(2);
                da.partial_cmp(&db).expect("finite distances").then(a.cmp(&b))
            });
            by_distance.truncate(t_size);
            by_distance
        })
        .collect();

    let baseline_accuracy = oracle.evaluate(&problem.baseline_config())?;

    let mut rng = Rng::new(derive_seed(params.seed, &[0x6d0e_a2d]));
    let mut memo: HashMap<Vec<usize>, (f64, f64)> = HashMap::new();
    let mut log: Vec<EvalRecord> = Vec::new();
    let mut evaluations = 0usize;
    let mut ideal = (f64::INFINITY, f64::INFINITY);

    // Looks a genome up or spends one evaluation on it; None means the
    // genome is new but the budget is gone.
    let mut assess = |genome: &[usize],
                      oracle: &mut dyn Oracle,
                      evaluations: &mut usize,
                      log: &mut Vec<EvalRecord>,
                      ideal: &mut (f64, f64)|
     -> Result<Option<(f64, f64)>, SearchError> {
        if let Some(&(f_m, f_a)) = memo.get(genome) {
            return Ok(Some((f_m, f_a)));
        }
        if *evaluations >= params.budget {
            return Ok(None);
        }
        let pairs = problem.layer_pairs(genome);
        let f_m = memory_objective(&pairs);
        let accuracy = oracle.evaluate(&problem.config_for(genome))?;
        *evaluations += 1;
        let f_a = accuracy_objective(baseline_accuracy, accuracy);
        memo.insert(genome.to_vec(), (f_m, f_a));
        log.push(EvalRecord { genome: genome.to_vec(), f_m, f_a, accuracy });
        ideal.0 = ideal.0.min(f_m);
        ideal.1 = ideal.1.min(f_a);
        Ok(Some((f_m, f_a)))
    };

    // Random initial population. Budget >= population, so every slot gets
    // an assessment (memo hits for repeated genomes are free).
    let mut population: Vec<(Vec<usize>, f64, f64)> = Vec::with_capacity(n);
    for _ in 0..n {
        let genome: Vec<usize> = counts.iter().map(|&c| rng.next_index(c)).collect();
        let (f_m, f_a) = assess(&genome, oracle, &mut evaluations, &mut log, &mut ideal)?
            .expect("initial population fits in the budget");
        population.push((genome, f_m, f_a));
    }

    let tchebycheff = |f: (f64, f64), w: (f64, f64), z: (f64, f64)| -> f64 {
        (w.0 * (f.0 - z.0).abs()).max(w.1 * (f.1 - z.1).abs())
    };

    let mut generation = 0usize;
    'outer: while evaluations < params.budget && generation < params.budget {
        generation += 1;
        for i in 0..n {
            let hood = &neighborhoods[i];
            let a = hood[rng.next_index(hood.len())];
            let mut b = hood[rng.next_index(hood.len())];
            while b == a {
                b = hood[rng.next_index(hood.len())];
            }

            let mut child = population[a].0.clone();
            if rng.next_f64() < CROSSOVER_RATE {
                for (gene, other) in child.iter_mut().zip(&population[b].0) {
                    if rng.next_bool(0.5) {
                        *gene = *other;
                    }
                }
            }
            for (gene, &count) in child.iter_mut().zip(&counts) {
                if rng.next_f64() < mutation_rate {
                    *gene = rng.next_index(count);
                }
            }

            let Some((f_m, f_a)) =
                assess(&child, oracle, &mut evaluations, &mut log, &mut ideal)?
            else {
                break 'outer;
            };

            for &j in hood {
                let (_, cur_m, cur_a) = population[j];
                let challenger = (
                    constraints.violation(f_m, f_a),
                    tchebycheff((f_m, f_a), weights[j], ideal),
                );
                let incumbent = (
                    constraints.violation(cur_m, cur_a),
                    tchebycheff((cur_m, cur_a), weights[j], ideal),
                );
                if challenger < incumbent {
                    population[j] = (child.clone(), f_m, f_a);
                }
            }
        }
    }

    let feasible: Vec<ParetoPoint> = log
        .iter()
        .filter(|r| constraints.is_feasible(r.f_m, r.f_a))
        .map(|r| ParetoPoint {
            f_m: r.f_m,
            f_a: r.f_a,
            accuracy: r.accuracy,
            genome: r.genome.clone(),
            pairs: problem.layer_pairs(&r.genome),
        })
        .collect();

    let result = SearchResult {
        baseline_accuracy,
        frontier: pareto_frontier(feasible),
        oracle_evaluations: evaluations,
    };
    Ok((result, log))
}

/// Area dominated by `points` and bounded by `reference`, both objectives
/// minimized; points not strictly inside the reference box contribute
/// nothing. The usual yardstick for comparing two frontiers.
pub fn hypervolume_2d(points: &[(f64, f64)], reference: (f64, f64)) -> f64 {
    let mut inside: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| x < reference.0 && y < reference.1)
        .collect();
    inside.sort_by(|a, b| a.partial_cmp(b).expect("finite objectives"));
    let mut volume = 0.0;
    let mut prev_y = reference.1;
    for (x, y) in inside {
        if y < prev_y {
            volume += (reference.0 - x) * (prev_y - y);
            prev_y = y;
        }
    }
    volume
}

/// Reads a configuration back from JSON.
pub fn load_config(path: &Path) -> Result<PrecisionConfig, SearchError> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a configuration as pretty JSON with a trailing newline.
pub fn save_config(config: &PrecisionConfig, path: &Path) -> Result<(), SearchError> {
    let text = serde_json::to_string_pretty(config)?;
    fs::write(path, text + "\n")?;
    Ok(())
}
