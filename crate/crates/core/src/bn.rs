//! Compilation of a quantified fault tree into a binary Bayesian network.
//!
//! Basic events become root nodes carrying their occurrence probability as
//! prior. Every intermediate and top event becomes a node whose CPT is the
//! deterministic truth table of its gate, with the gate inputs as parents.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate, EventId, EventKind, FaultTree, GateKind};
use crate::quant::ProbabilityMap;

pub type NodeId = EventId;

/// Largest CPT (in rows) that will be written out densely.
pub const MAX_MATERIALIZED_ROWS: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BnError {
    #[error("fault tree is not valid: {0}")]
    InvalidTree(String),
    #[error("no probability given for basic event {0}")]
    MissingBasic(EventId),
    #[error("node {node} lists parent {parent} before it is declared")]
    ParentOrder { node: NodeId, parent: NodeId },
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("query node {0} is not in the network")]
    UnknownQuery(NodeId),
    #[error("node {node} has {got} CPT rows, expected {expected}")]
    RowCount {
        node: NodeId,
        got: usize,
        expected: usize,
    },
    #[error("node {node}: CPT entry {value} outside [0, 1]")]
    RowValue { node: NodeId, value: f64 },
    #[error("CPT with {parents} parents exceeds the {cap}-row materialization cap")]
    RowCap { parents: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum CptTable {
    /// Explicit P(node = true) per parent-state row.
    Rows(Vec<f64>),
    /// Deterministic AND/OR truth table, evaluated on demand.
    Gate(GateKind),
}

/// Conditional probability table of a binary node.
///
/// Rows are indexed by the parent states read as a binary number, false = 0,
/// true = 1, first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub parents: Vec<NodeId>,
    pub table: CptTable,
}

impl Cpt {
    pub fn prior(p: f64) -> Self {
        Self {
            parents: Vec::new(),
            table: CptTable::Rows(vec![p]),
        }
    }

    pub fn row_count(&self) -> u128 {
        1u128 << self.parents.len()
    }

    pub fn is_deterministic(&self) -> bool {
        match &self.table {
            CptTable::Gate(_) => true,
            CptTable::Rows(rows) => rows.iter().all(|&p| p == 0.0 || p == 1.0),
        }
    }

    /// P(node = true | parents), parent states in `parents` order.
    pub fn prob_true(&self, parent_states: &[bool]) -> f64 {
        debug_assert_eq!(parent_states.len(), self.parents.len());
        match &self.table {
            CptTable::Gate(kind) => {
                if kind.eval(parent_states.iter().copied()) {
                    1.0
                } else {
                    0.0
                }
            }
            CptTable::Rows(rows) => {
                let index = parent_states
                    .iter()
                    .fold(0usize, |acc, &s| (acc << 1) | usize::from(s));
                rows[index]
            }
        }
    }

    /// Dense rows, refusing tables above [`MAX_MATERIALIZED_ROWS`].
    pub fn rows(&self) -> Result<Vec<f64>, BnError> {
        match &self.table {
            CptTable::Rows(rows) => Ok(rows.clone()),
            CptTable::Gate(kind) => {
                let k = self.parents.len();
                if k > 20 {
                    return Err(BnError::RowCap {
                        parents: k,
                        cap: MAX_MATERIALIZED_ROWS,
                    });
                }
                let full = (1usize << k) - 1;
                Ok((0..1usize << k)
                    .map(|i| {
                        let on = match kind {
                            GateKind::And => i == full,
                            GateKind::Or => i != 0,
                        };
                        if on {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect())
            }
        }
    }
}

/// Deterministic CPT of an AND/OR gate over `parents`.
pub fn cpt_for_gate(kind: GateKind, parents: &[NodeId]) -> Cpt {
    assert!(!parents.is_empty(), "gate CPT needs at least one parent");
    Cpt {
        parents: parents.to_vec(),
        table: CptTable::Gate(kind),
    }
}

/// Binary Bayesian network with nodes stored parents-first.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    nodes: IndexMap<NodeId, Cpt>,
    query: NodeId,
}

impl BayesianNetwork {
    pub fn new(nodes: IndexMap<NodeId, Cpt>, query: NodeId) -> Result<Self, BnError> {
        for (at, (id, cpt)) in nodes.iter().enumerate() {
            for parent in &cpt.parents {
                match nodes.get_index_of(parent) {
                    Some(p) if p < at => {}
                    _ => {
                        return Err(BnError::ParentOrder {
                            node: id.clone(),
                            parent: parent.clone(),
                        })
                    }
                }
            }
            if let CptTable::Rows(rows) = &cpt.table {
                let expected = 1usize
                    .checked_shl(cpt.parents.len() as u32)
                    .filter(|&n| n <= MAX_MATERIALIZED_ROWS)
                    .ok_or(BnError::RowCap {
                        parents: cpt.parents.len(),
                        cap: MAX_MATERIALIZED_ROWS,
                    })?;
                if rows.len() != expected {
                    return Err(BnError::RowCount {
                        node: id.clone(),
                        got: rows.len(),
                        expected,
                    });
                }
                if let Some(&value) = rows.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(BnError::RowValue {
                        node: id.clone(),
                        value,
                    });
                }
            }
        }
        if !nodes.contains_key(&query) {
            return Err(BnError::UnknownQuery(query));
        }
        Ok(Self { nodes, query })
    }

    pub fn nodes(&self) -> &IndexMap<NodeId, Cpt> {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&Cpt> {
        self.nodes.get(id)
    }

    /// The node compiled from the fault tree's top event.
    pub fn query(&self) -> &NodeId {
        &self.query
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.get_index_of(id)
    }

    /// Parent indices per node.
    pub(crate) fn parent_indices(&self) -> Vec<Vec<usize>> {
        self.nodes
            .values()
            .map(|cpt| {
                cpt.parents
                    .iter()
                    .map(|p| self.nodes.get_index_of(p).expect("checked at construction"))
                    .collect()
            })
            .collect()
    }

    /// Edges as (parent, child) pairs.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes
            .iter()
            .flat_map(|(id, cpt)| cpt.parents.iter().map(move |p| (p.clone(), id.clone())))
            .collect()
    }

    pub fn to_json(&self) -> Result<String, BnError> {
        let doc = NetworkDoc::from_network(self)?;
        Ok(serde_json::to_string_pretty(&doc).expect("network serializes"))
    }

    pub fn from_json(source: &str) -> Result<Self, String> {
        let doc: NetworkDoc = serde_json::from_str(source).map_err(|e| e.to_string())?;
        doc.into_network().map_err(|e| e.to_string())
    }
}

/// Wire form: `{query, nodes: [{id, parents, cpt_rows}]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub query: NodeId,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: NodeId,
    pub parents: Vec<NodeId>,
    pub cpt_rows: Vec<f64>,
}

impl NetworkDoc {
    pub fn from_network(bn: &BayesianNetwork) -> Result<Self, BnError> {
        let nodes = bn
            .nodes
            .iter()
            .map(|(id, cpt)| {
                Ok(NodeDoc {
                    id: id.clone(),
                    parents: cpt.parents.clone(),
                    cpt_rows: cpt.rows()?,
                })
            })
            .collect::<Result<_, BnError>>()?;
        Ok(Self {
            query: bn.query.clone(),
            nodes,
        })
    }

    pub fn into_network(self) -> Result<BayesianNetwork, BnError> {
        let mut nodes = IndexMap::new();
        for node in self.nodes {
            let cpt = Cpt {
                parents: node.parents,
                table: CptTable::Rows(node.cpt_rows),
            };
            if nodes.insert(node.id.clone(), cpt).is_some() {
                return Err(BnError::DuplicateNode(node.id));
            }
        }
        BayesianNetwork::new(nodes, self.query)
    }
}

/// One node per event, in children-first tree order so every BN parent
/// precedes its child. Gate input order becomes CPT parent order.
pub fn to_bayesian_network(
    tree: &FaultTree,
    basics: &ProbabilityMap,
) -> Result<BayesianNetwork, BnError> {
    let report = validate(tree);
    if !report.ok {
        let codes: Vec<String> = report.errors().map(|f| f.code.clone()).collect();
        return Err(BnError::InvalidTree(codes.join(", ")));
    }
    let order = tree
        .topological_order()
        .map_err(|e| BnError::InvalidTree(e.to_string()))?;
    let mut nodes = IndexMap::with_capacity(order.len());
    for id in order {
        let event = tree.event(id.as_str()).expect("ordered ids exist");
        let cpt = match event.kind {
            EventKind::Basic => {
                let p = basics
                    .get(&id)
                    .ok_or_else(|| BnError::MissingBasic(id.clone()))?;
                Cpt::prior(p.value())
            }
            _ => {
                let gate = tree.gate(id.as_str()).expect("validated");
                cpt_for_gate(gate.kind, &gate.inputs)
            }
        };
        nodes.insert(id, cpt);
    }
    BayesianNetwork::new(nodes, tree.top().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_fault_tree;
    use crate::quant::Probability;

    fn ids(names: &[&str]) -> Vec<NodeId> {
        names.iter().map(|n| EventId::new(*n).unwrap()).collect()
    }

    #[test]
    fn and_or_tables() {
        let and = cpt_for_gate(GateKind::And, &ids(&["A", "B"]));
        // Rows: (F,F), (F,T), (T,F), (T,T).
        assert_eq!(and.rows().unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        let or = cpt_for_gate(GateKind::Or, &ids(&["A", "B"]));
        assert_eq!(or.rows().unwrap(), vec![0.0, 1.0, 1.0, 1.0]);
        assert_eq!(or.prob_true(&[false, false]), 0.0);
        assert_eq!(or.prob_true(&[true, false]), 1.0);

        let and5 = cpt_for_gate(GateKind::And, &ids(&["A", "B", "C", "D", "E"]));
        let rows = and5.rows().unwrap();
        assert_eq!(rows.len(), 32);
        assert_eq!(rows.iter().filter(|&&r| r == 1.0).count(), 1);
        assert_eq!(rows[31], 1.0);
    }

    #[test]
    fn wide_gate_refuses_materialization() {
        let parents: Vec<NodeId> = (0..21).map(|i| EventId::new(format!("P{i}")).unwrap()).collect();
        let cpt = cpt_for_gate(GateKind::Or, &parents);
        assert!(matches!(cpt.rows(), Err(BnError::RowCap { parents: 21, .. })));
        assert_eq!(cpt.prob_true(&[false; 21]), 0.0);
    }

    #[test]
    fn compiles_one_node_per_event() {
        let tree = parse_fault_tree("top T \"t\"\nevent A basic \"a\"\nevent B basic \"b\"\ngate T = AND(A, B)\n").unwrap();
        let basics: ProbabilityMap = ids(&["A", "B"])
            .into_iter()
            .map(|id| (id, Probability::new(0.5).unwrap()))
            .collect();
        let bn = to_bayesian_network(&tree, &basics).unwrap();
        assert_eq!(bn.len(), 3);
        assert_eq!(bn.query().as_str(), "T");
        assert_eq!(bn.node("A").unwrap().rows().unwrap(), vec![0.5]);
        assert_eq!(bn.node("T").unwrap().parents, ids(&["A", "B"]));
        assert_eq!(
            bn.edges(),
            vec![(ids(&["A"])[0].clone(), ids(&["T"])[0].clone()), (ids(&["B"])[0].clone(), ids(&["T"])[0].clone())]
        );
        assert_eq!(bn, to_bayesian_network(&tree, &basics).unwrap());
    }

    #[test]
    fn json_wire_format() {
        let tree = parse_fault_tree("top T \"t\"\nevent A basic \"a\"\ngate T = OR(A)\n").unwrap();
        let basics: ProbabilityMap = [(EventId::new("A").unwrap(), Probability::new(0.2).unwrap())]
            .into_iter()
            .collect();
        let bn = to_bayesian_network(&tree, &basics).unwrap();
        let json = bn.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["query"], "T");
        assert_eq!(value["nodes"][0]["id"], "A");
        assert_eq!(value["nodes"][0]["cpt_rows"], serde_json::json!([0.2]));
        assert_eq!(value["nodes"][1]["parents"], serde_json::json!(["A"]));
        assert_eq!(value["nodes"][1]["cpt_rows"], serde_json::json!([0.0, 1.0]));
        let back = BayesianNetwork::from_json(&json).unwrap();
        assert_eq!(back.node("T").unwrap().rows().unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_misordered_or_malformed_networks() {
        let mut nodes = IndexMap::new();
        nodes.insert(ids(&["T"])[0].clone(), cpt_for_gate(GateKind::Or, &ids(&["A"])));
        nodes.insert(ids(&["A"])[0].clone(), Cpt::prior(0.1));
        assert!(matches!(
            BayesianNetwork::new(nodes, ids(&["T"])[0].clone()),
            Err(BnError::ParentOrder { .. })
        ));
        let mut nodes = IndexMap::new();
        nodes.insert(ids(&["A"])[0].clone(), Cpt::prior(1.2));
        assert!(matches!(
            BayesianNetwork::new(nodes, ids(&["A"])[0].clone()),
            Err(BnError::RowValue { .. })
        ));
    }
}
