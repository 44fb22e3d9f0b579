//! Seeded random AND/OR fault trees for property tests and benchmarks.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Event, EventId, FaultTree, Gate, GateKind};
use crate::quant::FailureRate;

#[derive(Debug, Clone)]
pub struct TreeShape {
    /// Number of basic events, at least 1.
    pub basics: usize,
    /// Chance that a gate also picks up an already-used basic event, which
    /// turns the tree into a DAG.
    pub shared_probability: f64,
    /// Attach a random FIT rate to every basic event.
    pub with_rates: bool,
}

/// Builds a random coherent tree over `B1..Bn`.
///
/// Basics are grouped bottom-up into gates of two or three inputs until one
/// node remains, which becomes the input set of the top gate. A single basic
/// yields a one-input top gate.
pub fn random_tree<R: Rng>(rng: &mut R, shape: &TreeShape) -> FaultTree {
    assert!(shape.basics >= 1);
    let mut events = IndexMap::new();
    let mut gates = IndexMap::new();
    let top = EventId::new("TOP").unwrap();
    events.insert(top.clone(), Event::top("top event"));

    let basics: Vec<EventId> = (1..=shape.basics)
        .map(|i| EventId::new(format!("B{i}")).unwrap())
        .collect();
    for id in &basics {
        let mut event = Event::basic(format!("basic {id}"));
        if shape.with_rates {
            let fit = (rng.random_range(1.0..1000.0f64) * 100.0).round() / 100.0;
            event = event.with_rate(FailureRate::new(fit).unwrap());
        }
        events.insert(id.clone(), event);
    }

    let kind = |rng: &mut R| if rng.random_bool(0.5) { GateKind::And } else { GateKind::Or };
    let mut frontier = basics.clone();
    let mut next_gate = 1;
    while frontier.len() > 3 || (frontier.len() > 1 && rng.random_bool(0.3)) {
        frontier.shuffle(rng);
        let take = rng.random_range(2..=3).min(frontier.len());
        let mut inputs: Vec<EventId> = frontier.drain(..take).collect();
        if rng.random_bool(shape.shared_probability) {
            let extra = basics[rng.random_range(0..basics.len())].clone();
            if !inputs.contains(&extra) {
                inputs.push(extra);
            }
        }
        let id = EventId::new(format!("G{next_gate}")).unwrap();
        next_gate += 1;
        events.insert(id.clone(), Event::intermediate(format!("gate {id}")));
        gates.insert(id.clone(), Gate::new(kind(rng), inputs));
        frontier.push(id);
    }
    frontier.sort();
    gates.insert(top.clone(), Gate::new(kind(rng), frontier));
    FaultTree::new(top, events, gates).expect("generated references resolve")
}
