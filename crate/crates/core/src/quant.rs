//! Quantitative fault-tree analysis: FIT/probability conversion under the
//! exponential life law, bottom-up gate propagation, and random allocation
//! of a FIT budget over the basic events.

use std::fmt;

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bn::to_bayesian_network;
use crate::infer::{posterior_all, Evidence};
use crate::model::{validate, EventId, EventKind, FaultTree, GateKind};

/// One FIT is one failure per 10^9 operating hours.
pub const FIT_PER_HOUR: f64 = 1e-9;

pub const DEFAULT_TIME_HOURS: f64 = 10_000.0;
pub const DEFAULT_BUDGET_FIT: f64 = 100.0;
pub const DEFAULT_CONCENTRATION: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("failure rate must be finite and non-negative, got {0}")]
    InvalidRate(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("time horizon must be finite and positive, got {0}")]
    InvalidTime(f64),
    #[error("concentration must be finite and positive, got {0}")]
    InvalidConcentration(f64),
    #[error("probability 1 has no finite failure rate")]
    UnrepresentableRate,
    #[error("no probability given for basic event {0}")]
    MissingBasic(EventId),
    #[error("tree has no basic events")]
    NoBasicEvents,
    #[error("fault tree is not valid: {0}")]
    InvalidTree(String),
    #[error("inference fallback failed: {0}")]
    Inference(String),
}

/// Failure rate in FIT.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FailureRate(f64);

impl FailureRate {
    pub fn new(fit: f64) -> Result<Self, QuantError> {
        if fit.is_finite() && fit >= 0.0 {
            Ok(Self(fit))
        } else {
            Err(QuantError::InvalidRate(fit))
        }
    }

    pub fn fit(self) -> f64 {
        self.0
    }

    pub fn per_hour(self) -> f64 {
        self.0 * FIT_PER_HOUR
    }
}

impl TryFrom<f64> for FailureRate {
    type Error = QuantError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FailureRate> for f64 {
    fn from(r: FailureRate) -> f64 {
        r.0
    }
}

impl fmt::Display for FailureRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} FIT", self.0)
    }
}

/// Mission time in operating hours.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TimeHorizon(f64);

impl TimeHorizon {
    pub fn new(hours: f64) -> Result<Self, QuantError> {
        if hours.is_finite() && hours > 0.0 {
            Ok(Self(hours))
        } else {
            Err(QuantError::InvalidTime(hours))
        }
    }

    pub fn hours(self) -> f64 {
        self.0
    }
}

impl Default for TimeHorizon {
    fn default() -> Self {
        Self(DEFAULT_TIME_HOURS)
    }
}

impl TryFrom<f64> for TimeHorizon {
    type Error = QuantError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<TimeHorizon> for f64 {
    fn from(t: TimeHorizon) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(p: f64) -> Result<Self, QuantError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(QuantError::InvalidProbability(p))
        }
    }

    /// Clamps rounding noise just outside [0, 1].
    pub(crate) fn clamped(p: f64) -> Self {
        Self(p.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = QuantError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

pub type ProbabilityMap = IndexMap<EventId, Probability>;

/// `P = 1 - exp(-λt)` with λ converted from FIT to per-hour.
pub fn rate_to_probability(rate: FailureRate, t: TimeHorizon) -> Probability {
    Probability::clamped(-(-rate.per_hour() * t.hours()).exp_m1())
}

/// Inverse of [`rate_to_probability`]: `λ = -ln(1 - P) / t`, in FIT.
pub fn probability_to_rate(p: Probability, t: TimeHorizon) -> Result<FailureRate, QuantError> {
    if p.value() >= 1.0 {
        return Err(QuantError::UnrepresentableRate);
    }
    let per_hour = -(-p.value()).ln_1p() / t.hours();
    FailureRate::new(per_hour / FIT_PER_HOUR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantMethod {
    /// Product and complement-product gate formulas.
    GateFormulas,
    /// Forward marginals of the compiled Bayesian network.
    BayesianNetwork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub method: QuantMethod,
    /// Events that feed more than one gate; non-empty exactly when the
    /// Bayesian-network route was taken.
    pub shared_events: Vec<EventId>,
    pub probabilities: ProbabilityMap,
}

impl Propagation {
    pub fn top(&self, tree: &FaultTree) -> Probability {
        self.probabilities[tree.top()]
    }
}

fn check_basics(tree: &FaultTree, basics: &ProbabilityMap) -> Result<(), QuantError> {
    let report = validate(tree);
    if !report.ok {
        let codes: Vec<String> = report.errors().map(|f| f.code.clone()).collect();
        return Err(QuantError::InvalidTree(codes.join(", ")));
    }
    match tree.basic_events().find(|id| !basics.contains_key(*id)) {
        Some(missing) => Err(QuantError::MissingBasic(missing.clone())),
        None => Ok(()),
    }
}

/// Applies the AND product and OR complement-product formulas bottom-up,
/// regardless of whether inputs are independent.
pub fn gate_formula_probabilities(
    tree: &FaultTree,
    basics: &ProbabilityMap,
) -> Result<ProbabilityMap, QuantError> {
    check_basics(tree, basics)?;
    let order = tree
        .topological_indices()
        .map_err(|_| QuantError::InvalidTree("cycle-detected".into()))?;
    let children = tree.child_indices();
    let mut value = vec![0.0f64; tree.len()];
    for n in order {
        let (id, event) = tree.events().get_index(n).unwrap();
        value[n] = match event.kind {
            EventKind::Basic => basics[id].value(),
            _ => {
                let inputs = children[n].iter().map(|&c| value[c]);
                match tree.gate(id.as_str()).expect("validated").kind {
                    GateKind::And => inputs.product(),
                    // 1 - Π(1 - p), accumulated as logs so tiny inputs keep
                    // their digits.
                    GateKind::Or => -inputs.map(|p| (-p).ln_1p()).sum::<f64>().exp_m1(),
                }
            }
        };
    }
    Ok(tree
        .events()
        .keys()
        .zip(value)
        .map(|(id, p)| (id.clone(), Probability::clamped(p)))
        .collect())
}

/// Probability of every event given basic-event probabilities.
///
/// Tree-shaped structures use the gate formulas. When an event feeds more
/// than one gate the formulas are no longer exact, so the query is routed
/// through Bayesian-network inference and the result says so.
pub fn propagate(tree: &FaultTree, basics: &ProbabilityMap) -> Result<Propagation, QuantError> {
    check_basics(tree, basics)?;
    let shared = tree.shared_events();
    if shared.is_empty() {
        return Ok(Propagation {
            method: QuantMethod::GateFormulas,
            shared_events: shared,
            probabilities: gate_formula_probabilities(tree, basics)?,
        });
    }
    let bn = to_bayesian_network(tree, basics).map_err(|e| QuantError::Inference(e.to_string()))?;
    let report =
        posterior_all(&bn, &Evidence::default()).map_err(|e| QuantError::Inference(e.to_string()))?;
    Ok(Propagation {
        method: QuantMethod::BayesianNetwork,
        shared_events: shared,
        probabilities: report
            .posteriors
            .into_iter()
            .map(|(id, p)| (id, Probability::clamped(p)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAssignment {
    pub rates: IndexMap<EventId, FailureRate>,
    pub budget: FailureRate,
    pub seed: u64,
    pub concentration: f64,
}

impl RateAssignment {
    pub fn total(&self) -> f64 {
        self.rates.values().map(|r| r.fit()).sum()
    }

    pub fn probabilities(&self, t: TimeHorizon) -> ProbabilityMap {
        self.rates
            .iter()
            .map(|(id, r)| (id.clone(), rate_to_probability(*r, t)))
            .collect()
    }
}

/// Draws basic-event rates from a symmetric Dirichlet and scales them to
/// sum to `budget`. The same seed always yields the same assignment.
pub fn allocate_budget(
    tree: &FaultTree,
    budget: FailureRate,
    seed: u64,
    concentration: f64,
) -> Result<RateAssignment, QuantError> {
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(QuantError::InvalidConcentration(concentration));
    }
    let ids: Vec<EventId> = tree.basic_events().cloned().collect();
    if ids.is_empty() {
        return Err(QuantError::NoBasicEvents);
    }
    let gamma = Gamma::new(concentration, 1.0).expect("shape checked above");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = ids
        .iter()
        .map(|_| gamma.sample(&mut rng).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = draws.iter().sum();
    let rates = ids
        .into_iter()
        .zip(draws)
        .map(|(id, g)| (id, FailureRate(budget.fit() * (g / total))))
        .collect();
    Ok(RateAssignment {
        rates,
        budget,
        seed,
        concentration,
    })
}

/// Basic-event rates declared in the model, if every basic event has one.
pub fn declared_rates(tree: &FaultTree) -> Option<IndexMap<EventId, FailureRate>> {
    tree.basic_events()
        .map(|id| tree.event(id.as_str()).and_then(|e| e.rate).map(|r| (id.clone(), r)))
        .collect()
}
