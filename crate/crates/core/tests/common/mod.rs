#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ftbn_core::model::FaultTree;
use ftbn_core::random::{random_tree, TreeShape};
use ftbn_core::GateKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn tree_for_seed(seed: u64, max_basics: usize, shared_probability: f64) -> FaultTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basics = 1 + (seed as usize * 7 + 3) % max_basics;
    random_tree(
        &mut rng,
        &TreeShape {
            basics,
            shared_probability,
            with_rates: false,
        },
    )
}

pub fn basic_ids(tree: &FaultTree) -> Vec<String> {
    tree.basic_events().map(|id| id.to_string()).collect()
}

/// Recursive structure function, written against the raw gate map only.
pub fn phi(tree: &FaultTree, node: &str, on: &BTreeSet<String>) -> bool {
    match tree.gates().get(node) {
        None => on.contains(node),
        Some(gate) => {
            let mut values = gate.inputs.iter().map(|i| phi(tree, i.as_str(), on));
            match gate.kind {
                GateKind::And => values.all(|v| v),
                GateKind::Or => values.any(|v| v),
            }
        }
    }
}

/// Every subset of `ids` as a set, indexed by bitmask.
pub fn subset(ids: &[String], mask: u64) -> BTreeSet<String> {
    ids.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, id)| id.clone())
        .collect()
}

/// Minimal true points of the structure function by exhaustive search.
pub fn brute_force_cut_sets(tree: &FaultTree) -> BTreeSet<BTreeSet<String>> {
    let ids = basic_ids(tree);
    let top = tree.top().to_string();
    let mut masks: Vec<u64> = (0..1u64 << ids.len())
        .filter(|&m| phi(tree, &top, &subset(&ids, m)))
        .collect();
    masks.sort_by_key(|m| m.count_ones());
    let mut minimal: Vec<u64> = Vec::new();
    for m in masks {
        if !minimal.iter().any(|&k| k & !m == 0) {
            minimal.push(m);
        }
    }
    minimal.into_iter().map(|m| subset(&ids, m)).collect()
}

/// Brute-force joint over basic events, for checking posteriors.
pub fn brute_force_posteriors(
    tree: &FaultTree,
    probs: &BTreeMap<String, f64>,
    evidence: &BTreeMap<String, bool>,
) -> Option<BTreeMap<String, f64>> {
    let ids = basic_ids(tree);
    let nodes: Vec<String> = tree.events().keys().map(|k| k.to_string()).collect();
    let mut mass = 0.0;
    let mut on_mass: BTreeMap<String, f64> = nodes.iter().map(|n| (n.clone(), 0.0)).collect();
    for mask in 0..1u64 << ids.len() {
        let on = subset(&ids, mask);
        let states: BTreeMap<&String, bool> =
            nodes.iter().map(|n| (n, phi(tree, n, &on))).collect();
        if evidence.iter().any(|(k, &v)| states[k] != v) {
            continue;
        }
        let w: f64 = ids
            .iter()
            .map(|id| if on.contains(id) { probs[id] } else { 1.0 - probs[id] })
            .product();
        mass += w;
        for (n, &s) in &states {
            if s {
                *on_mass.get_mut(*n).unwrap() += w;
            }
        }
    }
    (mass > 0.0).then(|| on_mass.into_iter().map(|(k, v)| (k, v / mass)).collect())
}
