//! Minimal cut sets by top-down gate substitution.
//!
//! Rows start as `{top}`. Each pass replaces one gate event per row: an AND
//! gate by all of its inputs, an OR gate by one new row per input. Rows are
//! sets, so repeated events collapse, and after every pass any row that is
//! a superset of another row is absorbed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate, EventId, FaultTree, GateKind};

pub const DEFAULT_ROW_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutSetError {
    #[error("fault tree is not valid: {0}")]
    InvalidTree(String),
    #[error("cut-set expansion exceeded the cap of {cap} intermediate rows")]
    RowLimit { cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CutSet {
    pub members: BTreeSet<EventId>,
}

impl CutSet {
    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.contains(id)
    }
}

impl fmt::Display for CutSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.members.iter().map(EventId::as_str).collect();
        write!(f, "{{{}}}", ids.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSetCollection {
    pub sets: Vec<CutSet>,
    pub tree_top: EventId,
}

impl CutSetCollection {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Member lists, each sorted, in collection order.
    pub fn as_id_lists(&self) -> Vec<Vec<String>> {
        self.sets
            .iter()
            .map(|s| s.members.iter().map(|m| m.to_string()).collect())
            .collect()
    }
}

pub fn minimal_cut_sets(tree: &FaultTree) -> Result<CutSetCollection, CutSetError> {
    minimal_cut_sets_with_cap(tree, DEFAULT_ROW_CAP)
}

pub fn minimal_cut_sets_with_cap(tree: &FaultTree, cap: usize) -> Result<CutSetCollection, CutSetError> {
    let report = validate(tree);
    if !report.ok {
        let codes: Vec<String> = report.errors().map(|f| f.code.clone()).collect();
        return Err(CutSetError::InvalidTree(codes.join(", ")));
    }
    let order = tree
        .topological_indices()
        .map_err(|_| CutSetError::InvalidTree("cycle-detected".into()))?;
    let mut rank = vec![0usize; tree.len()];
    for (r, &n) in order.iter().enumerate() {
        rank[n] = r;
    }
    let children = tree.child_indices();
    let gate_kind: Vec<Option<GateKind>> = (0..tree.len())
        .map(|i| tree.gate(tree.id_at(i).as_str()).map(|g| g.kind))
        .collect();

    let top = tree.index_of(tree.top().as_str()).expect("top declared");
    let mut rows: Vec<Vec<usize>> = vec![vec![top]];
    loop {
        let mut expanded = false;
        let mut next: Vec<Vec<usize>> = Vec::with_capacity(rows.len());
        for row in rows {
            // Expand the gate closest to the top first.
            let pick = row
                .iter()
                .copied()
                .filter(|&m| gate_kind[m].is_some())
                .max_by_key(|&m| rank[m]);
            let Some(gate) = pick else {
                next.push(row);
                continue;
            };
            expanded = true;
            let rest: Vec<usize> = row.into_iter().filter(|&m| m != gate).collect();
            match gate_kind[gate].unwrap() {
                GateKind::And => next.push(union(&rest, &children[gate])),
                GateKind::Or => {
                    for &input in &children[gate] {
                        next.push(union(&rest, &[input]));
                    }
                }
            }
            if next.len() > cap {
                return Err(CutSetError::RowLimit { cap });
            }
        }
        rows = absorb(next);
        if !expanded {
            break;
        }
    }

    let mut sets: Vec<CutSet> = rows
        .into_iter()
        .map(|row| CutSet {
            members: row.into_iter().map(|m| tree.id_at(m).clone()).collect(),
        })
        .collect();
    sets.sort_by(|a, b| a.order().cmp(&b.order()).then_with(|| a.members.iter().cmp(b.members.iter())));
    Ok(CutSetCollection {
        sets,
        tree_top: tree.top().clone(),
    })
}

fn union(row: &[usize], extra: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = row.iter().chain(extra).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn is_subset(small: &[usize], large: &[usize]) -> bool {
    let mut it = large.iter();
    small.iter().all(|s| it.any(|l| l == s))
}

/// Drops duplicate rows and rows that contain another row.
fn absorb(mut rows: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    rows.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    rows.dedup();
    let mut kept: Vec<Vec<usize>> = Vec::with_capacity(rows.len());
    for row in rows {
        if !kept.iter().any(|k| k.len() < row.len() && is_subset(k, &row)) {
            kept.push(row);
        }
    }
    kept
}

/// Members of order-1 cut sets, sorted by id.
pub fn single_points_of_failure(cutsets: &CutSetCollection) -> Vec<EventId> {
    let mut out: Vec<EventId> = cutsets
        .sets
        .iter()
        .filter(|s| s.order() == 1)
        .flat_map(|s| s.members.iter().cloned())
        .collect();
    out.sort();
    out
}

/// Number of cut sets per order.
pub fn order_histogram(cutsets: &CutSetCollection) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for set in &cutsets.sets {
        *hist.entry(set.order()).or_insert(0) += 1;
    }
    hist
}
