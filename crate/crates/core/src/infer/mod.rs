//! Exact inference on binary Bayesian networks.
//!
//! [`marginal`] and [`posterior_all`] use variable elimination with a
//! min-fill order. Nodes that are neither ancestors of the query nor of the
//! evidence are dropped first, and deterministic gates are split into
//! chains of two-input gates so a wide OR never becomes a wide table.
//! [`enumerate_marginal`] sums the joint distribution directly and serves as
//! the reference the eliminator is tested against.

mod factor;

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bn::{BayesianNetwork, CptTable, NodeId};
use crate::model::{EventId, GateKind};
use factor::Factor;

pub use factor::MAX_FACTOR_ROWS;

/// Node limit for exhaustive enumeration.
pub const ENUMERATION_NODE_CAP: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {0} is observed twice")]
    DuplicateObservation(NodeId),
    #[error("evidence has zero probability")]
    InconsistentEvidence,
    #[error("assignment is missing nodes: {0:?}")]
    IncompleteAssignment(Vec<NodeId>),
    #[error("enumeration is limited to {cap} nodes, network has {nodes}")]
    EnumerationCap { nodes: usize, cap: usize },
    #[error("intermediate factor with {rows} rows exceeds the {cap}-row cap")]
    FactorTooLarge { rows: u128, cap: usize },
    #[error("invalid evidence {0:?}: expected NODE=true or NODE=false")]
    BadEvidenceSyntax(String),
}

/// Observed node states.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence {
    observations: BTreeMap<NodeId, bool>,
}

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, node: NodeId, state: bool) -> Result<(), InferError> {
        if self.observations.contains_key(&node) {
            return Err(InferError::DuplicateObservation(node));
        }
        self.observations.insert(node, state);
        Ok(())
    }

    pub fn with(mut self, node: &str, state: bool) -> Result<Self, InferError> {
        let id = EventId::new(node).map_err(|_| InferError::UnknownNode(node.to_string()))?;
        self.observe(id, state)?;
        Ok(self)
    }

    /// Parses `NODE=true` / `NODE=false`.
    pub fn parse_assignment(text: &str) -> Result<(NodeId, bool), InferError> {
        let bad = || InferError::BadEvidenceSyntax(text.to_string());
        let (node, state) = text.split_once('=').ok_or_else(bad)?;
        let state = match state.trim() {
            "true" | "1" => true,
            "false" | "0" => false,
            _ => return Err(bad()),
        };
        Ok((EventId::new(node.trim()).map_err(|_| bad())?, state))
    }

    pub fn get(&self, node: &str) -> Option<bool> {
        self.observations.get(node).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, bool)> {
        self.observations.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceMethod {
    VariableElimination,
    Enumeration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    /// P(node = true | evidence), in network order.
    pub posteriors: IndexMap<NodeId, f64>,
    pub evidence: Evidence,
    pub method: InferenceMethod,
}

/// Product of every node's CPT entry under a full assignment.
pub fn joint_probability(
    bn: &BayesianNetwork,
    assignment: &BTreeMap<NodeId, bool>,
) -> Result<f64, InferError> {
    if let Some(unknown) = assignment.keys().find(|k| bn.node(k.as_str()).is_none()) {
        return Err(InferError::UnknownNode(unknown.to_string()));
    }
    let missing: Vec<NodeId> = bn
        .nodes()
        .keys()
        .filter(|id| !assignment.contains_key(*id))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(InferError::IncompleteAssignment(missing));
    }
    Ok(bn
        .nodes()
        .iter()
        .map(|(id, cpt)| {
            let parents: Vec<bool> = cpt.parents.iter().map(|p| assignment[p]).collect();
            let p = cpt.prob_true(&parents);
            if assignment[id] {
                p
            } else {
                1.0 - p
            }
        })
        .product())
}

/// Evidence translated to node indices.
fn index_evidence(bn: &BayesianNetwork, evidence: &Evidence) -> Result<Vec<(usize, bool)>, InferError> {
    evidence
        .iter()
        .map(|(id, state)| {
            bn.index_of(id.as_str())
                .map(|i| (i, state))
                .ok_or_else(|| InferError::UnknownNode(id.to_string()))
        })
        .collect()
}

/// Evidence-restricted factors of every node, built once and shared across
/// queries.
struct Workspace<'a> {
    bn: &'a BayesianNetwork,
    parents: Vec<Vec<usize>>,
    /// Factors contributed by each network node.
    factors: Vec<Vec<Factor>>,
    /// Ordering key for every variable, auxiliary ones included.
    names: Vec<String>,
    observed: BTreeMap<usize, bool>,
}

impl<'a> Workspace<'a> {
    fn new(bn: &'a BayesianNetwork, evidence: &Evidence) -> Result<Self, InferError> {
        let observed: BTreeMap<usize, bool> = index_evidence(bn, evidence)?.into_iter().collect();
        let parents = bn.parent_indices();
        let mut names: Vec<String> = bn.nodes().keys().map(|id| id.to_string()).collect();
        let mut factors = Vec::with_capacity(bn.len());
        for (node, cpt) in bn.nodes().values().enumerate() {
            let scope = &parents[node];
            let mut own = match &cpt.table {
                CptTable::Gate(kind) => {
                    let mut inputs = scope.clone();
                    let mut seen = BTreeSet::new();
                    inputs.retain(|v| seen.insert(*v));
                    gate_chain(*kind, &inputs, node, &mut names)?
                }
                CptTable::Rows(rows) => {
                    let mut full = scope.clone();
                    full.push(node);
                    let k = scope.len();
                    vec![Factor::tabulate(&full, |s| {
                        let row = s[..k].iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
                        if s[k] {
                            rows[row]
                        } else {
                            1.0 - rows[row]
                        }
                    })?]
                }
            };
            for f in &mut own {
                for (&var, &state) in &observed {
                    if f.contains(var) {
                        *f = f.restrict(var, state);
                    }
                }
            }
            factors.push(own);
        }
        Ok(Self {
            bn,
            parents,
            factors,
            names,
            observed,
        })
    }

    /// Ancestral closure of `roots` in the network.
    fn relevant(&self, roots: impl Iterator<Item = usize>) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = roots.collect();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.parents[n].iter().copied());
            }
        }
        seen
    }

    /// Unnormalized distribution of `keep` (or of nothing) jointly with the
    /// evidence, as stored values plus a shared power-of-two scale.
    fn eliminate(&self, keep: Option<usize>) -> Result<Factor, InferError> {
        let roots = keep.into_iter().chain(self.observed.keys().copied());
        let relevant = self.relevant(roots);
        let mut pool: Vec<Factor> = relevant
            .iter()
            .flat_map(|&n| self.factors[n].iter().cloned())
            .collect();

        let mut graph: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for f in &pool {
            for &a in &f.vars {
                let entry = graph.entry(a).or_default();
                entry.extend(f.vars.iter().copied().filter(|&b| b != a));
            }
        }
        let mut pending: BTreeSet<usize> = graph.keys().copied().filter(|&v| Some(v) != keep).collect();

        while !pending.is_empty() {
            let var = *pending
                .iter()
                .min_by(|&&a, &&b| {
                    fill_in(&graph, a)
                        .cmp(&fill_in(&graph, b))
                        .then_with(|| self.names[a].cmp(&self.names[b]))
                })
                .unwrap();
            pending.remove(&var);

            let (touching, rest): (Vec<Factor>, Vec<Factor>) =
                pool.into_iter().partition(|f| f.contains(var));
            pool = rest;
            let mut product = Factor::constant(1.0);
            for f in &touching {
                product = product.product(f)?;
            }
            pool.push(product.sum_out(var));

            let neighbours = graph.remove(&var).unwrap_or_default();
            for &a in &neighbours {
                let entry = graph.get_mut(&a).unwrap();
                entry.remove(&var);
                entry.extend(neighbours.iter().copied().filter(|&b| b != a));
            }
        }

        let mut result = Factor::constant(1.0);
        for f in &pool {
            result = result.product(f)?;
        }
        Ok(result)
    }

    fn evidence_is_possible(&self) -> Result<bool, InferError> {
        let f = self.eliminate(None)?;
        Ok(f.get(0) > 0.0)
    }

    fn posterior(&self, node: usize) -> Result<f64, InferError> {
        if let Some(&state) = self.observed.get(&node) {
            if !self.evidence_is_possible()? {
                return Err(InferError::InconsistentEvidence);
            }
            return Ok(if state { 1.0 } else { 0.0 });
        }
        let f = self.eliminate(Some(node))?;
        let (when_false, when_true) = if f.vars.is_empty() {
            // The query variable has no factor left; cannot happen for a
            // node in its own ancestral set, kept for robustness.
            let c = f.get(0);
            (c, c)
        } else {
            (f.get(0), f.get(1))
        };
        let total = when_false + when_true;
        if total <= 0.0 {
            return Err(InferError::InconsistentEvidence);
        }
        Ok(when_true / total)
    }

    fn node(&self, id: &str) -> Result<usize, InferError> {
        self.bn
            .index_of(id)
            .ok_or_else(|| InferError::UnknownNode(id.to_string()))
    }
}

fn fill_in(graph: &BTreeMap<usize, BTreeSet<usize>>, var: usize) -> usize {
    let Some(neighbours) = graph.get(&var) else {
        return 0;
    };
    let list: Vec<usize> = neighbours.iter().copied().collect();
    let mut missing = 0;
    for (i, &a) in list.iter().enumerate() {
        for &b in &list[i + 1..] {
            if !graph.get(&a).is_some_and(|s| s.contains(&b)) {
                missing += 1;
            }
        }
    }
    missing
}

/// Factors for `output = kind(inputs)`, split into two-input links through
/// fresh auxiliary variables once there are more than three inputs.
fn gate_chain(
    kind: GateKind,
    inputs: &[usize],
    output: usize,
    names: &mut Vec<String>,
) -> Result<Vec<Factor>, InferError> {
    let table = |scope: &[usize]| {
        Factor::tabulate(scope, |s| {
            let (ins, out) = s.split_at(s.len() - 1);
            if kind.eval(ins.iter().copied()) == out[0] {
                1.0
            } else {
                0.0
            }
        })
    };
    if inputs.len() <= 3 {
        let mut scope = inputs.to_vec();
        scope.push(output);
        return Ok(vec![table(&scope)?]);
    }
    let mut out = Vec::with_capacity(inputs.len() - 1);
    let mut carry = inputs[0];
    for (j, &next) in inputs[1..].iter().enumerate() {
        let last = j + 2 == inputs.len();
        let target = if last {
            output
        } else {
            names.push(format!("{}#{:03}", names[output], j + 1));
            names.len() - 1
        };
        out.push(table(&[carry, next, target])?);
        carry = target;
    }
    Ok(out)
}

/// Exact P(node = true | evidence) by variable elimination.
pub fn marginal(bn: &BayesianNetwork, node: &str, evidence: &Evidence) -> Result<f64, InferError> {
    let ws = Workspace::new(bn, evidence)?;
    ws.posterior(ws.node(node)?)
}

/// Posterior of every node. Factor construction and evidence restriction
/// are shared across queries; each value equals the corresponding
/// [`marginal`] call exactly.
pub fn posterior_all(bn: &BayesianNetwork, evidence: &Evidence) -> Result<PosteriorReport, InferError> {
    let ws = Workspace::new(bn, evidence)?;
    if !ws.observed.is_empty() && !ws.evidence_is_possible()? {
        return Err(InferError::InconsistentEvidence);
    }
    let posteriors = bn
        .nodes()
        .keys()
        .enumerate()
        .map(|(n, id)| Ok((id.clone(), ws.posterior(n)?)))
        .collect::<Result<_, InferError>>()?;
    Ok(PosteriorReport {
        posteriors,
        evidence: evidence.clone(),
        method: InferenceMethod::VariableElimination,
    })
}

/// Probability of the evidence itself.
pub fn evidence_probability(bn: &BayesianNetwork, evidence: &Evidence) -> Result<f64, InferError> {
    let ws = Workspace::new(bn, evidence)?;
    let f = ws.eliminate(None)?;
    Ok(f.get(0) * 2f64.powi(f.scale))
}

/// Posteriors by summing the joint over every assignment consistent with
/// the evidence. Branches whose partial product is already zero are skipped
/// since every completion contributes zero.
pub fn enumerate_all(bn: &BayesianNetwork, evidence: &Evidence) -> Result<PosteriorReport, InferError> {
    if bn.len() > ENUMERATION_NODE_CAP {
        return Err(InferError::EnumerationCap {
            nodes: bn.len(),
            cap: ENUMERATION_NODE_CAP,
        });
    }
    let mut walk = Enumeration {
        cpts: bn.nodes().values().collect(),
        parents: bn.parent_indices(),
        observed: index_evidence(bn, evidence)?.into_iter().collect(),
        state: vec![false; bn.len()],
        total: 0.0,
        true_mass: vec![0.0; bn.len()],
    };
    walk.visit(0, 1.0);
    let Enumeration { total, true_mass, .. } = walk;

    if total <= 0.0 {
        return Err(InferError::InconsistentEvidence);
    }
    Ok(PosteriorReport {
        posteriors: bn
            .nodes()
            .keys()
            .cloned()
            .zip(true_mass.into_iter().map(|m| m / total))
            .collect(),
        evidence: evidence.clone(),
        method: InferenceMethod::Enumeration,
    })
}

struct Enumeration<'a> {
    cpts: Vec<&'a crate::bn::Cpt>,
    parents: Vec<Vec<usize>>,
    observed: BTreeMap<usize, bool>,
    state: Vec<bool>,
    total: f64,
    true_mass: Vec<f64>,
}

impl Enumeration<'_> {
    /// Nodes are visited parents-first, so `weight` is the product of the
    /// CPT entries of nodes `0..depth`.
    fn visit(&mut self, depth: usize, weight: f64) {
        if depth == self.cpts.len() {
            self.total += weight;
            for (mass, &on) in self.true_mass.iter_mut().zip(&self.state) {
                if on {
                    *mass += weight;
                }
            }
            return;
        }
        let options: &[bool] = match self.observed.get(&depth) {
            Some(true) => &[true],
            Some(false) => &[false],
            None => &[false, true],
        };
        let parent_states: Vec<bool> = self.parents[depth].iter().map(|&p| self.state[p]).collect();
        let p = self.cpts[depth].prob_true(&parent_states);
        for &value in options {
            let w = weight * if value { p } else { 1.0 - p };
            if w == 0.0 {
                continue;
            }
            self.state[depth] = value;
            self.visit(depth + 1, w);
        }
        self.state[depth] = false;
    }
}

/// Reference P(node = true | evidence) by exhaustive summation.
pub fn enumerate_marginal(bn: &BayesianNetwork, node: &str, evidence: &Evidence) -> Result<f64, InferError> {
    if bn.index_of(node).is_none() {
        return Err(InferError::UnknownNode(node.to_string()));
    }
    Ok(enumerate_all(bn, evidence)?.posteriors[node])
}
