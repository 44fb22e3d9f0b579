//! Repeated budget allocation and backward inference.
//!
//! Each repetition draws basic-event rates under the FIT budget, converts
//! them to probabilities at the time horizon, compiles the Bayesian network,
//! conditions on the evidence (by default the top event occurring) and maps
//! every basic-event posterior back to FIT. Samples are then summarised as
//! Student-t confidence intervals and rolled up per subsystem.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::bn::{to_bayesian_network, BnError};
use crate::cutsets::{minimal_cut_sets, single_points_of_failure, CutSetCollection, CutSetError};
use crate::infer::{marginal, posterior_all, Evidence, InferError};
use crate::model::{EventId, FaultTree};
use crate::quant::{
    allocate_budget, probability_to_rate, FailureRate, Probability, QuantError, TimeHorizon,
    DEFAULT_BUDGET_FIT, DEFAULT_CONCENTRATION,
};

/// Tag used for events that carry no subsystem tag.
pub const UNTAGGED: &str = "untagged";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("confidence interval needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("event {0} has no subsystem grouping")]
    UnmappedEvent(EventId),
    #[error("single-points roll-up needs the tree's cut sets")]
    MissingCutSets,
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Network(#[from] BnError),
    #[error(transparent)]
    Inference(#[from] InferError),
    #[error(transparent)]
    CutSets(#[from] CutSetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RollupMode {
    /// Every event contributes to its subsystem.
    #[default]
    All,
    /// Only events forming order-1 cut sets contribute.
    SinglePoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub budget: FailureRate,
    pub time: TimeHorizon,
    pub repetitions: usize,
    pub confidence: f64,
    pub seed: u64,
    pub concentration: f64,
    /// `None` conditions on the top event having occurred.
    pub evidence: Option<Evidence>,
    pub rollup: RollupMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            budget: FailureRate::new(DEFAULT_BUDGET_FIT).unwrap(),
            time: TimeHorizon::default(),
            repetitions: 10,
            confidence: 0.95,
            seed: 0,
            concentration: DEFAULT_CONCENTRATION,
            evidence: None,
            rollup: RollupMode::All,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<(), ExperimentError> {
        if self.repetitions < 2 {
            return Err(ExperimentError::InvalidConfig(format!(
                "repetitions must be at least 2, got {}",
                self.repetitions
            )));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.budget.fit() <= 0.0 {
            return Err(ExperimentError::InvalidConfig("budget must be positive".into()));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "concentration must be positive, got {}",
                self.concentration
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStatistics {
    pub event: EventId,
    pub name: String,
    pub subsystem: Option<String>,
    pub mean_prior_rate: f64,
    pub mean_posterior_rate: f64,
    pub half_width: f64,
    pub sample_sd: f64,
    /// Posterior rates in FIT, one per repetition.
    pub samples: Vec<f64>,
    /// Prior rates in FIT, one per repetition.
    pub prior_samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub seed: u64,
    pub prior_total_fit: f64,
    pub top_prior_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub top: EventId,
    pub events: Vec<EventStatistics>,
    /// Mean posterior rate per subsystem under `config.rollup`.
    pub subsystem_totals: BTreeMap<String, f64>,
    /// Basic events that form order-1 cut sets.
    pub single_points: Vec<EventId>,
    /// Forward top-event probability, averaged over repetitions.
    pub top_event_prior_probability: f64,
    pub repetitions: Vec<RepetitionSummary>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(source: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(source)
    }

    /// Roll-up of the mean posterior rates in either mode.
    pub fn rollup(&self, mode: RollupMode) -> Result<BTreeMap<String, f64>, ExperimentError> {
        let rows: Vec<(EventId, f64)> = self
            .events
            .iter()
            .map(|e| (e.event.clone(), e.mean_posterior_rate))
            .collect();
        let grouping = self
            .events
            .iter()
            .map(|e| (e.event.clone(), e.subsystem.clone().unwrap_or_else(|| UNTAGGED.into())))
            .collect();
        let single = CutSetCollection {
            sets: self
                .single_points
                .iter()
                .map(|id| crate::cutsets::CutSet {
                    members: [id.clone()].into_iter().collect(),
                })
                .collect(),
            tree_top: self.top.clone(),
        };
        subsystem_rollup(&rows, &grouping, mode, Some(&single))
    }
}

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(samples: &[f64]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let m = mean(samples);
    let ss: f64 = samples.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (samples.len() - 1) as f64).sqrt()
}

/// Two-sided Student-t quantile for `confidence` with `df` degrees of freedom.
pub fn t_quantile(confidence: f64, df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    t.inverse_cdf((1.0 + confidence) / 2.0)
}

/// Mean and Student-t half-width `t(n-1) · sd / √n`.
pub fn confidence_interval(samples: &[f64], confidence: f64) -> Result<(f64, f64), ExperimentError> {
    if samples.len() < 2 {
        return Err(ExperimentError::TooFewSamples(samples.len()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(ExperimentError::InvalidConfig(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let n = samples.len() as f64;
    let sd = sample_sd(samples);
    let half_width = if sd == 0.0 {
        0.0
    } else {
        t_quantile(confidence, n - 1.0) * sd / n.sqrt()
    };
    Ok((mean(samples), half_width))
}

/// Sums rates per subsystem tag. In single-points mode only events that
/// form order-1 cut sets in `cutsets` contribute.
pub fn subsystem_rollup(
    rows: &[(EventId, f64)],
    grouping: &BTreeMap<EventId, String>,
    mode: RollupMode,
    cutsets: Option<&CutSetCollection>,
) -> Result<BTreeMap<String, f64>, ExperimentError> {
    let singles = match mode {
        RollupMode::All => None,
        RollupMode::SinglePoints => Some(single_points_of_failure(
            cutsets.ok_or(ExperimentError::MissingCutSets)?,
        )),
    };
    let mut totals = BTreeMap::new();
    for (id, rate) in rows {
        let tag = grouping
            .get(id)
            .ok_or_else(|| ExperimentError::UnmappedEvent(id.clone()))?;
        let counts = singles.as_ref().is_none_or(|s| s.binary_search(id).is_ok());
        let entry = totals.entry(tag.clone()).or_insert(0.0);
        if counts {
            *entry += rate;
        }
    }
    Ok(totals)
}

/// Evidence used when the configuration leaves it unset.
pub fn default_evidence(tree: &FaultTree) -> Evidence {
    let mut e = Evidence::new();
    e.observe(tree.top().clone(), true).expect("fresh evidence");
    e
}

pub fn run_experiment(tree: &FaultTree, config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    config.check()?;
    let evidence = config.evidence.clone().unwrap_or_else(|| default_evidence(tree));
    let basics: Vec<EventId> = tree.basic_events().cloned().collect();
    let cutsets = minimal_cut_sets(tree)?;

    let mut posterior_samples = vec![Vec::with_capacity(config.repetitions); basics.len()];
    let mut prior_samples = vec![Vec::with_capacity(config.repetitions); basics.len()];
    let mut repetitions = Vec::with_capacity(config.repetitions);
    for r in 0..config.repetitions {
        let seed = config.seed.wrapping_add(r as u64);
        let rates = allocate_budget(tree, config.budget, seed, config.concentration)?;
        let priors = rates.probabilities(config.time);
        let bn = to_bayesian_network(tree, &priors)?;
        let top_prior = marginal(&bn, tree.top().as_str(), &Evidence::new())?;
        let posterior = posterior_all(&bn, &evidence)?;
        for (i, id) in basics.iter().enumerate() {
            let p = Probability::new(posterior.posteriors[id]).map_err(ExperimentError::Quant)?;
            posterior_samples[i].push(probability_to_rate(p, config.time)?.fit());
            prior_samples[i].push(rates.rates[id].fit());
        }
        repetitions.push(RepetitionSummary {
            seed,
            prior_total_fit: rates.total(),
            top_prior_probability: top_prior,
        });
    }

    let mut events = Vec::with_capacity(basics.len());
    for (i, id) in basics.iter().enumerate() {
        let event = tree.event(id.as_str()).expect("basic ids come from the tree");
        let samples = std::mem::take(&mut posterior_samples[i]);
        let priors = std::mem::take(&mut prior_samples[i]);
        let (mean_posterior_rate, half_width) = confidence_interval(&samples, config.confidence)?;
        events.push(EventStatistics {
            event: id.clone(),
            name: event.label.clone(),
            subsystem: event.subsystem.clone(),
            mean_prior_rate: mean(&priors),
            mean_posterior_rate,
            half_width,
            sample_sd: sample_sd(&samples),
            samples,
            prior_samples: priors,
        });
    }

    let mut report = ExperimentReport {
        config: config.clone(),
        top: tree.top().clone(),
        events,
        subsystem_totals: BTreeMap::new(),
        single_points: single_points_of_failure(&cutsets),
        top_event_prior_probability: mean(
            &repetitions.iter().map(|r| r.top_prior_probability).collect::<Vec<_>>(),
        ),
        repetitions,
    };
    report.subsystem_totals = report.rollup(config.rollup)?;
    Ok(report)
}
