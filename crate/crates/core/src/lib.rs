//! Fault-tree analysis with Bayesian-network inference.
//!
//! - [`model`]: fault-tree types, text/JSON formats, validation
//! - [`cutsets`]: minimal cut sets and single points of failure
//! - [`quant`]: FIT/probability conversion, gate propagation, budget allocation
//! - [`bn`]: fault tree to Bayesian network compilation
//! - [`infer`]: exact inference (variable elimination, enumeration)
//! - [`experiment`]: repeated allocation/inference study with confidence intervals
//! - [`av`]: the bundled autonomous-vehicle collision model

pub mod av;
pub mod bn;
pub mod cutsets;
pub mod experiment;
pub mod infer;
pub mod model;
pub mod quant;
pub mod random;

pub use model::{EventId, EventKind, FaultTree, GateKind};
