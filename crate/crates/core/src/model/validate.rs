use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{EventId, EventKind, FaultTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub events: Vec<EventId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            let sev = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{sev}[{}]: {}", finding.code, finding.message)?;
        }
        Ok(())
    }
}

struct Findings(Vec<Finding>);

impl Findings {
    fn push(&mut self, severity: Severity, code: &str, message: String, events: Vec<EventId>) {
        self.0.push(Finding {
            severity,
            code: code.to_string(),
            message,
            events,
        });
    }
}

/// Checks every structural invariant of a fault tree. Never fails; problems
/// are reported as findings.
pub fn validate(tree: &FaultTree) -> ValidationReport {
    let mut out = Findings(Vec::new());
    let top = tree.top();

    match tree.event(top.as_str()).map(|e| e.kind) {
        Some(EventKind::Top) => {}
        _ => out.push(
            Severity::Error,
            "top-kind-mismatch",
            format!("designated top {top} is not declared as a top event"),
            vec![top.clone()],
        ),
    }
    let extra_tops: Vec<EventId> = tree
        .events()
        .iter()
        .filter(|(id, e)| e.kind == EventKind::Top && *id != top)
        .map(|(id, _)| id.clone())
        .collect();
    if !extra_tops.is_empty() {
        out.push(
            Severity::Error,
            "multiple-top",
            format!("more than one top event: {top}, {}", join(&extra_tops)),
            extra_tops,
        );
    }

    for (id, event) in tree.events() {
        match (event.kind, tree.gate(id.as_str())) {
            (EventKind::Basic, Some(_)) => out.push(
                Severity::Error,
                "basic-has-gate",
                format!("basic event {id} has a gate"),
                vec![id.clone()],
            ),
            (EventKind::Intermediate | EventKind::Top, None) => out.push(
                Severity::Error,
                "missing-gate",
                format!("{} event {id} has no gate", event.kind),
                vec![id.clone()],
            ),
            _ => {}
        }
    }

    for (id, gate) in tree.gates() {
        if gate.inputs.contains(top) {
            out.push(
                Severity::Error,
                "top-used-as-input",
                format!("top event {top} is an input of gate {id}"),
                vec![top.clone(), id.clone()],
            );
        }
        match gate.inputs.len() {
            0 => out.push(
                Severity::Error,
                "empty-gate",
                format!("gate {id} has no inputs"),
                vec![id.clone()],
            ),
            1 => out.push(
                Severity::Warning,
                "single-input-gate",
                format!("gate {id} has a single input and passes it through"),
                vec![id.clone(), gate.inputs[0].clone()],
            ),
            _ => {}
        }
        let mut seen = BTreeSet::new();
        let repeated: Vec<EventId> = gate
            .inputs
            .iter()
            .filter(|i| !seen.insert(*i))
            .cloned()
            .collect();
        if !repeated.is_empty() {
            out.push(
                Severity::Warning,
                "duplicate-input",
                format!("gate {id} lists {} more than once", join(&repeated)),
                repeated,
            );
        }
    }

    match tree.topological_indices() {
        Err(cycle) => out.push(
            Severity::Error,
            "cycle-detected",
            format!("cycle through {}", join(&cycle)),
            cycle,
        ),
        Ok(_) => {
            let reachable = tree.reachable_from_top();
            let orphans: Vec<EventId> = (0..tree.len())
                .filter(|i| !reachable.contains(i))
                .map(|i| tree.id_at(i).clone())
                .collect();
            if !orphans.is_empty() {
                out.push(
                    Severity::Warning,
                    "unreachable-event",
                    format!("not reachable from {top}: {}", join(&orphans)),
                    orphans,
                );
            }
        }
    }

    let ok = !out.0.iter().any(|f| f.severity == Severity::Error);
    ValidationReport { ok, findings: out.0 }
}

fn join(ids: &[EventId]) -> String {
    ids.iter().map(EventId::as_str).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_fault_tree;

    #[test]
    fn well_formed_tree_has_no_findings() {
        let tree =
            parse_fault_tree("top C \"c\"\nevent A basic \"a\"\nevent B basic \"b\"\ngate C = OR(A, B)\n").unwrap();
        let report = validate(&tree);
        assert!(report.ok);
        assert!(report.findings.is_empty());
    }

    #[test]
    fn top_as_input_is_an_error() {
        let tree = parse_fault_tree(
            "top COLLISION \"c\"\nevent A basic \"a\"\nevent X intermediate \"x\"\n\
             gate COLLISION = OR(A, X)\ngate X = AND(A, COLLISION)\n",
        )
        .unwrap();
        let report = validate(&tree);
        assert!(!report.ok);
        assert!(report.has_code("top-used-as-input"));
    }

    #[test]
    fn cycle_lists_both_ids() {
        let tree = parse_fault_tree(
            "top T \"t\"\nevent A intermediate \"a\"\nevent B intermediate \"b\"\nevent X basic \"x\"\n\
             gate T = OR(A, X)\ngate A = OR(B, X)\ngate B = AND(A, X)\n",
        )
        .unwrap();
        let report = validate(&tree);
        assert!(!report.ok);
        let cycle = report.findings.iter().find(|f| f.code == "cycle-detected").unwrap();
        let ids: Vec<&str> = cycle.events.iter().map(|e| e.as_str()).collect();
        assert!(ids.contains(&"A") && ids.contains(&"B"));
        assert!(tree.topological_order().is_err());
    }

    #[test]
    fn single_input_gate_is_only_a_warning() {
        let tree = parse_fault_tree("top T \"t\"\nevent A basic \"a\"\ngate T = AND(A)\n").unwrap();
        let report = validate(&tree);
        assert!(report.ok);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].severity, Severity::Warning);
        assert_eq!(report.findings[0].code, "single-input-gate");
    }

    #[test]
    fn structural_errors() {
        let tree = parse_fault_tree(
            "top T \"t\"\nevent A basic \"a\"\nevent M intermediate \"m\"\nevent O basic \"o\"\n\
             gate T = OR(A, M)\ngate A = OR(O, O)\n",
        )
        .unwrap();
        let report = validate(&tree);
        assert!(!report.ok);
        assert!(report.has_code("basic-has-gate"));
        assert!(report.has_code("missing-gate"));
        assert!(report.has_code("duplicate-input"));
    }

    #[test]
    fn orphan_events_are_warned() {
        let tree = parse_fault_tree(
            "top T \"t\"\nevent A basic \"a\"\nevent B basic \"b\"\nevent Z basic \"z\"\ngate T = OR(A, B)\n",
        )
        .unwrap();
        let report = validate(&tree);
        assert!(report.ok);
        assert!(report.has_code("unreachable-event"));
    }
}
