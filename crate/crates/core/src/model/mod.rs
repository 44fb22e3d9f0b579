//! Fault-tree domain types.
//!
//! A [`FaultTree`] is a DAG of events joined by AND/OR gates with a single
//! top event. Basic events may feed several gates. Construction only checks
//! that every reference resolves; the structural invariants (acyclicity,
//! gate arity, top placement) are reported by [`validate`].

mod parse;
mod validate;

pub use parse::{parse_fault_tree, parse_fault_tree_json, ParseError};
pub use validate::{validate, Finding, Severity, ValidationReport};

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quant::FailureRate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid event id {0:?}: expected letters, digits or underscore")]
    InvalidId(String),
    #[error("gate input {input} of {gate} references an undeclared event")]
    UnknownReference { gate: EventId, input: EventId },
    #[error("gate declared for undeclared event {0}")]
    GateWithoutEvent(EventId),
    #[error("top event {0} is not declared")]
    MissingTop(EventId),
    #[error("structure contains a cycle through {0:?}")]
    Cycle(Vec<EventId>),
}

/// Case-sensitive event token such as `PF5` or `COLLISION`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EventId(String);

impl EventId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if is_valid_token(&id) {
            Ok(Self(id))
        } else {
            Err(ModelError::InvalidId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_valid_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl TryFrom<String> for EventId {
    type Error = ModelError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl TryFrom<&str> for EventId {
    type Error = ModelError;
    fn try_from(value: &str) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EventId> for String {
    fn from(id: EventId) -> Self {
        id.0
    }
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for EventId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Basic,
    Intermediate,
    Top,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Basic => "basic",
            EventKind::Intermediate => "intermediate",
            EventKind::Top => "top",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
}

impl GateKind {
    /// Boolean value of the gate output for the given input states.
    pub fn eval(self, mut inputs: impl Iterator<Item = bool>) -> bool {
        match self {
            GateKind::And => inputs.all(|x| x),
            GateKind::Or => inputs.any(|x| x),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub label: String,
    /// Free-form grouping tag used only for roll-up reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsystem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<FailureRate>,
}

impl Event {
    pub fn basic(label: impl Into<String>) -> Self {
        Self {
            kind: EventKind::Basic,
            label: label.into(),
            subsystem: None,
            rate: None,
        }
    }

    pub fn intermediate(label: impl Into<String>) -> Self {
        Self {
            kind: EventKind::Intermediate,
            ..Self::basic(label)
        }
    }

    pub fn top(label: impl Into<String>) -> Self {
        Self {
            kind: EventKind::Top,
            ..Self::basic(label)
        }
    }

    pub fn with_subsystem(mut self, tag: impl Into<String>) -> Self {
        self.subsystem = Some(tag.into());
        self
    }

    pub fn with_rate(mut self, rate: FailureRate) -> Self {
        self.rate = Some(rate);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub inputs: Vec<EventId>,
}

impl Gate {
    pub fn new(kind: GateKind, inputs: Vec<EventId>) -> Self {
        Self { kind, inputs }
    }
}

/// Fault tree with events in declaration order.
///
/// Immutable after construction. Equality is structural: declaration order
/// does not matter, gate input order does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FaultTreeDoc")]
pub struct FaultTree {
    top: EventId,
    events: IndexMap<EventId, Event>,
    gates: IndexMap<EventId, Gate>,
}

#[derive(Deserialize)]
struct FaultTreeDoc {
    top: EventId,
    events: IndexMap<EventId, Event>,
    gates: IndexMap<EventId, Gate>,
}

impl TryFrom<FaultTreeDoc> for FaultTree {
    type Error = ModelError;
    fn try_from(doc: FaultTreeDoc) -> Result<Self, Self::Error> {
        FaultTree::new(doc.top, doc.events, doc.gates)
    }
}

impl FaultTree {
    /// Builds a tree, checking only that every id it references is declared.
    pub fn new(
        top: EventId,
        events: IndexMap<EventId, Event>,
        gates: IndexMap<EventId, Gate>,
    ) -> Result<Self, ModelError> {
        if !events.contains_key(&top) {
            return Err(ModelError::MissingTop(top));
        }
        for (id, gate) in &gates {
            if !events.contains_key(id) {
                return Err(ModelError::GateWithoutEvent(id.clone()));
            }
            if let Some(missing) = gate.inputs.iter().find(|i| !events.contains_key(*i)) {
                return Err(ModelError::UnknownReference {
                    gate: id.clone(),
                    input: missing.clone(),
                });
            }
        }
        Ok(Self { top, events, gates })
    }

    pub fn top(&self) -> &EventId {
        &self.top
    }

    pub fn events(&self) -> &IndexMap<EventId, Event> {
        &self.events
    }

    pub fn gates(&self) -> &IndexMap<EventId, Gate> {
        &self.gates
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.events.get(id)
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.get(id)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Basic events in declaration order.
    pub fn basic_events(&self) -> impl Iterator<Item = &EventId> {
        self.events
            .iter()
            .filter(|(_, e)| e.kind == EventKind::Basic)
            .map(|(id, _)| id)
    }

    pub(crate) fn index_of(&self, id: &str) -> Option<usize> {
        self.events.get_index_of(id)
    }

    pub(crate) fn id_at(&self, index: usize) -> &EventId {
        self.events.get_index(index).expect("index in range").0
    }

    /// Gate inputs resolved to event indices, one entry per event.
    pub(crate) fn child_indices(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.events.len()];
        for (id, gate) in &self.gates {
            let at = self.index_of(id.as_str()).expect("checked at construction");
            children[at] = gate
                .inputs
                .iter()
                .map(|i| self.index_of(i.as_str()).expect("checked at construction"))
                .collect();
        }
        children
    }

    /// Event indices ordered so every gate input precedes the gate output.
    pub(crate) fn topological_indices(&self) -> Result<Vec<usize>, Vec<EventId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let children = self.child_indices();
        let mut mark = vec![Mark::New; children.len()];
        let mut order = Vec::with_capacity(children.len());
        // Iterative DFS; the stack holds (node, next child position).
        for root in 0..children.len() {
            if mark[root] != Mark::New {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            mark[root] = Mark::Active;
            while let Some(&mut (node, ref mut pos)) = stack.last_mut() {
                if let Some(&child) = children[node].get(*pos) {
                    *pos += 1;
                    match mark[child] {
                        Mark::New => {
                            mark[child] = Mark::Active;
                            stack.push((child, 0));
                        }
                        Mark::Active => {
                            let start = stack.iter().position(|&(n, _)| n == child).unwrap();
                            return Err(stack[start..]
                                .iter()
                                .map(|&(n, _)| self.id_at(n).clone())
                                .collect());
                        }
                        Mark::Done => {}
                    }
                } else {
                    mark[node] = Mark::Done;
                    order.push(node);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    /// Events ordered children-first. Fails with the ids on a cycle.
    pub fn topological_order(&self) -> Result<Vec<EventId>, ModelError> {
        self.topological_indices()
            .map(|order| order.into_iter().map(|i| self.id_at(i).clone()).collect())
            .map_err(ModelError::Cycle)
    }

    /// Indices of events reachable from the top event (top included).
    pub(crate) fn reachable_from_top(&self) -> BTreeSet<usize> {
        let children = self.child_indices();
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.index_of(self.top.as_str()).expect("top declared")];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(children[n].iter().copied());
            }
        }
        seen
    }

    /// Events reachable from the top that feed more than one gate.
    pub fn shared_events(&self) -> Vec<EventId> {
        let children = self.child_indices();
        let reachable = self.reachable_from_top();
        let mut fan_out = vec![0usize; children.len()];
        for &n in &reachable {
            for &c in &children[n] {
                fan_out[c] += 1;
            }
        }
        fan_out
            .iter()
            .enumerate()
            .filter(|&(_, &count)| count > 1)
            .map(|(i, _)| self.id_at(i).clone())
            .collect()
    }

    /// Evaluates the structure function. `occurred` decides basic events;
    /// the returned vector is indexed like [`FaultTree::events`].
    pub fn evaluate(&self, occurred: impl Fn(&EventId) -> bool) -> Result<Vec<bool>, ModelError> {
        let order = self.topological_indices().map_err(ModelError::Cycle)?;
        let children = self.child_indices();
        let mut state = vec![false; self.events.len()];
        for n in order {
            let (id, event) = self.events.get_index(n).unwrap();
            state[n] = match (event.kind, self.gates.get(id)) {
                (EventKind::Basic, _) => occurred(id),
                (_, Some(gate)) => gate.kind.eval(children[n].iter().map(|&c| state[c])),
                (_, None) => false,
            };
        }
        Ok(state)
    }

    /// Renders the tree in the line-oriented text format.
    pub fn to_text(&self) -> String {
        parse::write_text(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EventId {
        EventId::new(s).unwrap()
    }

    #[test]
    fn event_id_rejects_bad_tokens() {
        assert!(EventId::new("PF5").is_ok());
        assert!(EventId::new("tracking_loss_2").is_ok());
        assert!(EventId::new("").is_err());
        assert!(EventId::new("PF-5").is_err());
        assert!(EventId::new("a b").is_err());
    }

    #[test]
    fn ids_are_case_sensitive() {
        assert_ne!(id("PF1"), id("pf1"));
    }

    #[test]
    fn construction_rejects_dangling_input() {
        let mut events = IndexMap::new();
        events.insert(id("T"), Event::top("top"));
        let mut gates = IndexMap::new();
        gates.insert(id("T"), Gate::new(GateKind::Or, vec![id("PF99")]));
        let err = FaultTree::new(id("T"), events, gates).unwrap_err();
        assert!(matches!(err, ModelError::UnknownReference { ref input, .. } if input.as_str() == "PF99"));
    }

    #[test]
    fn shared_basic_is_detected() {
        let tree = parse_fault_tree(
            "top T \"t\"\nevent A basic \"a\"\nevent B basic \"b\"\nevent C basic \"c\"\n\
             event X intermediate \"x\"\nevent Y intermediate \"y\"\n\
             gate T = OR(X, Y)\ngate X = AND(A, B)\ngate Y = AND(A, C)\n",
        )
        .unwrap();
        assert_eq!(tree.shared_events(), vec![id("A")]);
        let state = tree.evaluate(|e| e.as_str() == "A" || e.as_str() == "C").unwrap();
        assert!(state[tree.index_of("T").unwrap()]);
        assert!(!state[tree.index_of("X").unwrap()]);
    }

    #[test]
    fn topological_order_puts_inputs_first() {
        let tree = parse_fault_tree(
            "gate T = OR(X, A)\ngate X = AND(A, B)\ntop T \"t\"\nevent X intermediate \"x\"\n\
             event A basic \"a\"\nevent B basic \"b\"\n",
        )
        .unwrap();
        let order = tree.topological_order().unwrap();
        let pos = |s: &str| order.iter().position(|e| e.as_str() == s).unwrap();
        assert!(pos("A") < pos("X"));
        assert!(pos("B") < pos("X"));
        assert!(pos("X") < pos("T"));
    }
}
