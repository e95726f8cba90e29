//! Search-space reduction before configuration search.
//!
//! Two independent cuts compose here. Within a layer, precision pairs that
//! cost at least as much memory and hurt accuracy at least as much as some
//! other pair are dominated and dropped. Across layers, layers whose pruned
//! tables look alike are clustered and share one decision variable, so the
//! remaining space is a product over groups instead of over layers.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{LayerProfile, ProfileEntry};
use crate::quant::{sort_pairs_canonical, PrecisionPair};

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("layer {0} has an empty sensitivity profile")]
    EmptyProfile(usize),
}

/// Keeps the Pareto-optimal rows of one layer's sensitivity table under
/// (equivalent bits, output error), both minimized. A row survives when no
/// other row is at least as good on both axes and strictly better on one;
/// exact ties on both axes all survive. Survivors come back in descending
/// equivalent bits with the same tie-break order as the candidate grid.
pub fn pareto_prune_layer(profile: &LayerProfile) -> Result<Vec<ProfileEntry>, PruneError> {
    if profile.entries.is_empty() {
        return Err(PruneError::EmptyProfile(profile.layer));
    }

    // Bucket by total bits (twice the equivalent bits, an exact integer).
    let mut levels: BTreeMap<u16, Vec<ProfileEntry>> = BTreeMap::new();
    for entry in &profile.entries {
        let bits = entry.pair.key_bits as u16 + entry.pair.value_bits as u16;
        levels.entry(bits).or_default().push(*entry);
    }

    // Sweep levels cheapest first: a row survives iff it achieves its
    // level's minimum error and that minimum strictly beats every cheaper
    // level. Anything else is dominated by one of those rows.
    let mut survivors = Vec::new();
    let mut best_so_far = f64::INFINITY;
    for group in levels.values() {
        let level_min = group.iter().map(|e| e.errors.e_o).fold(f64::INFINITY, f64::min);
        if level_min < best_so_far {
            survivors.extend(group.iter().filter(|e| e.errors.e_o == level_min).copied());
            best_so_far = level_min;
        }
    }

    survivors.sort_by(|a, b| {
        let ba = a.pair.key_bits as u16 + a.pair.value_bits as u16;
        let bb = b.pair.key_bits as u16 + b.pair.value_bits as u16;
        bb.cmp(&ba).then(b.pair.key_bits.cmp(&a.pair.key_bits))
    });
    Ok(survivors)
}

/// Groups layer indices whose candidate sets contain exactly the same pairs.
/// Groups appear in order of their first member; sets are compared after
/// canonical sorting, so supply order does not matter.
pub fn partition_by_candidate_set(sets: &[Vec<PrecisionPair>]) -> Vec<Vec<usize>> {
    let mut keys: Vec<Vec<PrecisionPair>> = Vec::new();
    let mut partitions: Vec<Vec<usize>> = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let mut canon = set.clone();
        sort_pairs_canonical(&mut canon);
        match keys.iter().position(|k| *k == canon) {
            Some(p) => partitions[p].push(i),
            None => {
                keys.push(canon);
                partitions.push(vec![i]);
            }
        }
    }
    partitions
}

/// Density-based clustering with Euclidean distance. A point is a core
/// point when at least `min_samples` points (itself included) lie within
/// `eps`; clusters grow from core points in index order, and points that
/// end up in no cluster become singletons. Returns one label per point;
/// labels are dense and deterministic for a given input order.
pub fn dbscan_cluster(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<usize> {
    assert!(eps >= 0.0, "eps must be non-negative");
    assert!(min_samples >= 1, "min_samples must be at least 1");
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = points[0].len();
    for p in points {
        assert_eq!(p.len(), dim, "all points must share one dimension");
    }

    let eps2 = eps * eps;
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| {
                let d2: f64 =
                    points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                d2 <= eps2
            })
            .collect()
    };

    const UNVISITED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut labels = vec![UNVISITED; n];
    let mut next_label = 0usize;

    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let seed_neighbors = neighbors(i);
        if seed_neighbors.len() < min_samples {
            labels[i] = NOISE;
            continue;
        }
        let cluster = next_label;
        next_label += 1;
        labels[i] = cluster;
        let mut queue = seed_neighbors;
        let mut qi = 0;
        while qi < queue.len() {
            let j = queue[qi];
            qi += 1;
            if labels[j] == NOISE {
                // Border point: joins the first cluster that reaches it.
                labels[j] = cluster;
                continue;
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let nb = neighbors(j);
            if nb.len() >= min_samples {
                queue.extend(nb);
            }
        }
    }

    for label in labels.iter_mut() {
        if *label == NOISE {
            *label = next_label;
            next_label += 1;
        }
    }
    labels
}

/// A set of layers sharing one precision decision and its allowed pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGroup {
    pub group_id: usize,
    /// Member layer ids, ascending.
    pub layer_ids: Vec<usize>,
    /// Shared candidate pairs, descending equivalent bits.
    pub pairs: Vec<PrecisionPair>,
}

/// Full reduction: prune every layer, split layers by identical candidate
/// sets, then density-cluster each split on its error vectors (the pruned
/// output errors, in candidate order). Groups are numbered by their lowest
/// member layer id.
pub fn cluster_layers(
    profiles: &[LayerProfile],
    eps: f64,
    min_samples: usize,
) -> Result<Vec<LayerGroup>, PruneError> {
    let pruned: Vec<Vec<ProfileEntry>> =
        profiles.iter().map(pareto_prune_layer).collect::<Result<_, _>>()?;
    let sets: Vec<Vec<PrecisionPair>> =
        pruned.iter().map(|entries| entries.iter().map(|e| e.pair).collect()).collect();

    let mut raw_groups: Vec<Vec<usize>> = Vec::new();
    for partition in partition_by_candidate_set(&sets) {
        let vectors: Vec<Vec<f64>> = partition
            .iter()
            .map(|&i| pruned[i].iter().map(|e| e.errors.e_o).collect())
            .collect();
        let labels = dbscan_cluster(&vectors, eps, min_samples);
        let clusters = labels.iter().max().map_or(0, |m| m + 1);
        for c in 0..clusters {
            let members: Vec<usize> = partition
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(&i, _)| i)
                .collect();
            if !members.is_empty() {
                raw_groups.push(members);
            }
        }
    }

    raw_groups.sort_by_key(|members| members.iter().map(|&i| profiles[i].layer).min());
    Ok(raw_groups
        .into_iter()
        .enumerate()
        .map(|(group_id, members)| {
            let mut layer_ids: Vec<usize> = members.iter().map(|&i| profiles[i].layer).collect();
            layer_ids.sort_unstable();
            LayerGroup { group_id, layer_ids, pairs: sets[members[0]].clone() }
        })
        .collect())
}

/// Number of distinct configurations: the product of per-decision candidate
/// counts, exact at any magnitude.
pub fn search_space_size(candidate_counts: &[usize]) -> BigUint {
    let mut total = BigUint::from(1u32);
    for &count in candidate_counts {
        total *= BigUint::from(count);
    }
    total
}
