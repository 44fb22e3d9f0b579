//! Bundled autonomous-vehicle collision model and its published reference
//! values.
//!
//! Both ship as data files under `models/`; nothing here hardcodes the tree.

use serde::{Deserialize, Serialize};

use crate::model::{parse_fault_tree, EventId, FaultTree};

pub const AV_MODEL_SOURCE: &str = include_str!("../../../models/av_collision.ft");
pub const AV_TABLE1_CSV: &str = include_str!("../../../models/av_table1.csv");

pub const SUBSYSTEMS: [&str; 5] = [
    "sensors",
    "perception",
    "decision-making",
    "motion-control",
    "external",
];

/// One row of the reference table: published posterior rate of a basic
/// event, mean and 95% half-width in FIT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvCatalogEntry {
    pub id: EventId,
    pub name: String,
    pub subsystem: String,
    #[serde(rename = "mean_fit")]
    pub table1_mean: f64,
    #[serde(rename = "halfwidth_fit")]
    pub table1_halfwidth: f64,
}

pub fn builtin_av_tree() -> FaultTree {
    parse_fault_tree(AV_MODEL_SOURCE).expect("bundled model parses")
}

/// Published reference rows, for regression and comparison only.
pub fn table1_reference() -> Vec<AvCatalogEntry> {
    csv::Reader::from_reader(AV_TABLE1_CSV.as_bytes())
        .deserialize()
        .collect::<Result<_, _>>()
        .expect("bundled table parses")
}
