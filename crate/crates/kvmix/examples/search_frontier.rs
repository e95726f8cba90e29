//! Multi-objective search over layer-group precision assignments, comparing
//! the evolutionary search against exhaustive enumeration.
//!
//! Objectives: f_m, the mean equivalent bits per cached element (memory),
//! and f_a, the accuracy lost versus the all-16-bit baseline. The searcher
//! returns the Pareto frontier: every configuration not beaten on both
//! objectives at once. On a space small enough to enumerate, the
//! decomposition-based search recovers nearly all of the true frontier's
//! hypervolume on a fraction of the evaluations.
//!
//! Run: cargo run --example search_frontier

use kvmix::profile::QuantModePreset;
use kvmix::prune::LayerGroup;
use kvmix::quant::PrecisionPair;
use kvmix::search::{
    exhaustive_search, hypervolume_2d, moead_search, MoeadParams, Oracle, PrecisionConfig,
    SearchConstraints, SearchError, SearchProblem,
};

/// A stand-in oracle, so the example runs with no trace or profile on disk.
/// The quantization step halves with every extra bit, so each layer's
/// contribution to the accuracy penalty decays as 2^-bits, keys weighted
/// heavier than values and deeper layers more fragile.
struct BitBudgetOracle;

impl Oracle for BitBudgetOracle {
    fn evaluate(&mut self, config: &PrecisionConfig) -> Result<f64, SearchError> {
        let mut penalty = 0.0f64;
        for (i, layer) in config.layers.iter().enumerate() {
            let sensitivity = 1.0 + i as f64 / 4.0;
            penalty += sensitivity
                * (0.25 * (-(layer.key_bits as f64)).exp2()
                    + 0.15 * (-(layer.value_bits as f64)).exp2());
        }
        Ok((-penalty).exp())
    }
}

fn main() {
    // Three groups of two layers each, five candidate pairs per group:
    // 125 configurations, small enough to enumerate exactly.
    let pairs: Vec<PrecisionPair> =
        ["KV8", "K8V4", "KV4", "K4V2", "KV2"].iter().map(|s| s.parse().unwrap()).collect();
    let groups: Vec<LayerGroup> = (0..3)
        .map(|g| LayerGroup {
            group_id: g,
            layer_ids: vec![2 * g, 2 * g + 1],
            pairs: pairs.clone(),
        })
        .collect();
    let problem = SearchProblem::new("demo", QuantModePreset::Kivi, &groups).unwrap();
    println!("search space: {} configurations", problem.space_size());

    let constraints = SearchConstraints { max_equivalent_bits: 8.0, max_accuracy_loss: 0.5 };

    let exact = exhaustive_search(&problem, &mut BitBudgetOracle, &constraints).unwrap();
    println!(
        "\nexhaustive: {} evaluations, {} Pareto points",
        exact.oracle_evaluations,
        exact.frontier.len()
    );
    for p in &exact.frontier {
        let names: Vec<String> = p.pairs.iter().map(|q| q.to_string()).collect();
        println!("  f_m={:.3}  f_a={:.4}  layers [{}]", p.f_m, p.f_a, names.join(" "));
    }

    let params = MoeadParams { population: 10, budget: 40, seed: 1 };
    let evolved = moead_search(&problem, &mut BitBudgetOracle, &constraints, params).unwrap();
    println!(
        "\nevolutionary: {} evaluations (budget {}), {} Pareto points",
        evolved.oracle_evaluations,
        params.budget,
        evolved.frontier.len()
    );
    for p in &evolved.frontier {
        let names: Vec<String> = p.pairs.iter().map(|q| q.to_string()).collect();
        println!("  f_m={:.3}  f_a={:.4}  layers [{}]", p.f_m, p.f_a, names.join(" "));
    }

    // Hypervolume captured relative to the true frontier, measured from the
    // worst corner (16 bits, full accuracy loss).
    let reference = (16.0, 1.0);
    let to_xy = |pts: &[kvmix::search::ParetoPoint]| -> Vec<(f64, f64)> {
        pts.iter().map(|p| (p.f_m, p.f_a)).collect()
    };
    let hv_exact = hypervolume_2d(&to_xy(&exact.frontier), reference);
    let hv_evolved = hypervolume_2d(&to_xy(&evolved.frontier), reference);
    println!(
        "\nhypervolume: evolutionary {:.4} / exhaustive {:.4} = {:.1}% with {}x fewer evaluations",
        hv_evolved,
        hv_exact,
        100.0 * hv_evolved / hv_exact,
        exact.oracle_evaluations / evolved.oracle_evaluations
    );
}
