//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the console.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{ftbn, json_of};
use ftbn_core::av::{builtin_av_tree, table1_reference};
use ftbn_core::bn::to_bayesian_network;
use ftbn_core::cutsets::minimal_cut_sets;
use ftbn_core::experiment::{subsystem_rollup, RollupMode};
use ftbn_core::infer::{enumerate_all, posterior_all, Evidence, InferError};
use ftbn_core::quant::{
    allocate_budget, probability_to_rate, rate_to_probability, FailureRate, Probability,
    ProbabilityMap, TimeHorizon,
};
use ftbn_core::random::{random_tree, TreeShape};
use ftbn_core::{EventId, FaultTree, GateKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(why())
    }
}

fn within_time(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn tree(seed: u64, max_basics: usize) -> FaultTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basics = rng.random_range(1..=max_basics);
    random_tree(
        &mut rng,
        &TreeShape {
            basics,
            shared_probability: 0.3,
            with_rates: false,
        },
    )
}

fn priors(tree: &FaultTree, rng: &mut ChaCha8Rng) -> ProbabilityMap {
    tree.basic_events()
        .map(|id| (id.clone(), Probability::new(rng.random_range(0.001..0.999)).unwrap()))
        .collect()
}

fn criterion_1() -> Check {
    let started = Instant::now();
    let out = ftbn(&["cutsets", "--builtin", "av", "--format", "json"]);
    within_time(started, Duration::from_secs(1))?;
    ensure(out.status.success(), || "cutsets exited with failure".into())?;
    let got: BTreeSet<BTreeSet<String>> = serde_json::from_slice::<Vec<Vec<String>>>(&out.stdout)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|s| s.into_iter().collect())
        .collect();
    let mut expected: BTreeSet<BTreeSet<String>> = [
        vec!["PF1", "PF2"],
        vec!["PF7", "PF8"],
        vec!["PF9", "PF10"],
        vec!["SF1", "SF2", "SF3", "SF4", "SF5"],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();
    for single in [
        "PF3", "PF4", "PF5", "PF6", "PF11", "PF12", "PF13", "PF14", "DMF1", "DMF2", "DMF3", "MCF1", "MCF2",
        "MCF3", "E1", "E2", "E3", "E4",
    ] {
        expected.insert([single.to_string()].into());
    }
    ensure(got == expected, || format!("cut sets differ: {got:?}"))?;
    Ok(format!("{} cut sets match, {:?}", got.len(), started.elapsed()))
}

/// Model text with the 100-FIT budget spread over the order-1 cut sets in
/// proportion to the reference table, every other basic event at 0 FIT.
fn budgeted_av_model() -> String {
    let tree = builtin_av_tree();
    let cutsets = minimal_cut_sets(&tree).unwrap();
    let singles: BTreeSet<String> = ftbn_core::cutsets::single_points_of_failure(&cutsets)
        .iter()
        .map(EventId::to_string)
        .collect();
    let table = table1_reference();
    let weight: f64 = table.iter().filter(|e| singles.contains(e.id.as_str())).map(|e| e.table1_mean).sum();
    let mut text = ftbn_core::av::AV_MODEL_SOURCE.to_string();
    for entry in &table {
        let fit = if singles.contains(entry.id.as_str()) {
            100.0 * entry.table1_mean / weight
        } else {
            0.0
        };
        let marker = format!("event {} basic ", entry.id);
        let line = text.lines().find(|l| l.starts_with(&marker)).unwrap().to_string();
        text = text.replace(&line, &format!("{line} rate={fit}"));
    }
    text
}

fn criterion_2() -> Check {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("av_budgeted.ft");
    fs::write(&path, budgeted_av_model()).map_err(|e| e.to_string())?;
    let out = ftbn(&["quantify", path.to_str().unwrap(), "--time-hours", "10000"]);
    ensure(out.status.success(), || String::from_utf8_lossy(&out.stderr).into())?;
    let q = json_of(&out);
    let total = q["total_fit"].as_f64().unwrap();
    ensure((total - 100.0).abs() < 1e-9, || format!("rates sum to {total}"))?;
    ensure(q["rate_source"] == "declared", || "declared rates not used".into())?;
    let ft = q["gate_formula_top"].as_f64().unwrap();
    let bn = q["network_top"].as_f64().unwrap();
    let target = -(-1e-3f64).exp_m1();
    ensure((ft - target).abs() <= 1e-12, || format!("top {ft} is not 1-e^-0.001"))?;
    ensure((ft - bn).abs() <= 1e-9, || format!("FT {ft} vs BN {bn}"))?;
    for p in [ft, bn] {
        let rounded: f64 = format!("{p:.2e}").parse().unwrap();
        ensure(rounded == 0.001, || format!("{p} rounds to {rounded}"))?;
    }
    within_time(started, Duration::from_secs(5))?;
    Ok(format!("FT {ft:.12e}, BN {bn:.12e}, |diff| {:.1e}", (ft - bn).abs()))
}

fn criterion_3() -> Check {
    let tree = builtin_av_tree();
    let table = table1_reference();
    let rows: Vec<(EventId, f64)> = table.iter().map(|e| (e.id.clone(), e.table1_mean)).collect();
    let grouping: BTreeMap<EventId, String> = table.iter().map(|e| (e.id.clone(), e.subsystem.clone())).collect();
    let cutsets = minimal_cut_sets(&tree).map_err(|e| e.to_string())?;
    let all = subsystem_rollup(&rows, &grouping, RollupMode::All, None).map_err(|e| e.to_string())?;
    let single = subsystem_rollup(&rows, &grouping, RollupMode::SinglePoints, Some(&cutsets))
        .map_err(|e| e.to_string())?;
    let checks = [
        ("decision-making (all)", all["decision-making"], 18.85),
        ("motion-control (all)", all["motion-control"], 16.16),
        ("external (all)", all["external"], 18.93),
        ("perception (single-points)", single["perception"], 46.06),
    ];
    let mut parts = Vec::new();
    for (name, got, want) in checks {
        ensure((got - want).abs() <= 0.005, || format!("{name}: {got} vs {want}"))?;
        parts.push(format!("{name} {got:.2}"));
    }
    Ok(parts.join(", "))
}

fn criterion_4() -> Check {
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut impossible = 0;
    for seed in 0..200u64 {
        let tree = tree(seed, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9));
        let bn = to_bayesian_network(&tree, &priors(&tree, &mut rng)).map_err(|e| e.to_string())?;
        let nodes: Vec<EventId> = bn.nodes().keys().cloned().collect();
        let mut evidence = Evidence::new();
        for _ in 0..rng.random_range(0..=2) {
            let node = nodes[rng.random_range(0..nodes.len())].clone();
            let _ = evidence.observe(node, rng.random_bool(0.5));
        }
        match (posterior_all(&bn, &evidence), enumerate_all(&bn, &evidence)) {
            (Ok(ve), Ok(en)) => {
                for (node, p) in &ve.posteriors {
                    let diff = (p - en.posteriors[node]).abs();
                    worst = worst.max(diff);
                    ensure(diff <= 1e-12, || format!("seed {seed}, {node}: {p} vs {}", en.posteriors[node]))?;
                }
            }
            (Err(InferError::InconsistentEvidence), Err(InferError::InconsistentEvidence)) => impossible += 1,
            (a, b) => return Err(format!("seed {seed}: methods disagree: {:?} / {:?}", a.err(), b.err())),
        }
    }
    within_time(started, Duration::from_secs(60))?;
    Ok(format!(
        "200 trees, max |diff| {worst:.1e}, {impossible} with zero-probability evidence, {:?}",
        started.elapsed()
    ))
}

fn check_monotone(tree: &FaultTree, priors: &ProbabilityMap) -> Result<f64, String> {
    let bn = to_bayesian_network(tree, priors).map_err(|e| e.to_string())?;
    let evidence = Evidence::new().with(tree.top().as_str(), true).map_err(|e| e.to_string())?;
    let post = posterior_all(&bn, &evidence).map_err(|e| e.to_string())?;
    let mut least = f64::INFINITY;
    for basic in tree.basic_events() {
        let prior = priors[basic].value();
        let p = post.posteriors[basic];
        least = least.min(p - prior);
        ensure(p >= prior - 1e-12, || format!("{basic}: posterior {p} < prior {prior}"))?;
    }
    Ok(least)
}

fn criterion_5() -> Check {
    let av = builtin_av_tree();
    let mut least = f64::INFINITY;
    for seed in 0..10 {
        let rates = allocate_budget(&av, FailureRate::new(100.0).unwrap(), seed, 25.0).map_err(|e| e.to_string())?;
        least = least.min(check_monotone(&av, &rates.probabilities(TimeHorizon::default()))?);
    }
    for seed in 0..100u64 {
        let tree = tree(10_000 + seed, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        least = least.min(check_monotone(&tree, &priors(&tree, &mut rng))?);
    }
    Ok(format!("AV model (10 allocations) and 100 random trees, min(posterior - prior) {least:.1e}"))
}

fn criterion_6() -> Check {
    let started = Instant::now();
    let args = ["experiment", "--builtin", "av", "--seed", "2024"];
    let first = ftbn(&args);
    let second = ftbn(&args);
    within_time(started, Duration::from_secs(30))?;
    ensure(first.status.success(), || String::from_utf8_lossy(&first.stderr).into())?;
    ensure(first.stdout == second.stdout, || "reports differ between identical runs".into())?;
    let report = json_of(&first);
    let config = &report["config"];
    ensure(
        config["budget"] == 100.0 && config["repetitions"] == 10 && config["time"] == 10000.0 && config["confidence"] == 0.95,
        || format!("unexpected defaults {config}"),
    )?;
    let events = report["events"].as_array().unwrap();
    ensure(events.len() == 29, || format!("{} rows", events.len()))?;
    for rep in report["repetitions"].as_array().unwrap() {
        let total = rep["prior_total_fit"].as_f64().unwrap();
        ensure((total - 100.0).abs() <= 1e-7, || format!("priors sum to {total}"))?;
    }
    let mut least = f64::INFINITY;
    for e in events {
        let prior = e["mean_prior_rate"].as_f64().unwrap();
        let post = e["mean_posterior_rate"].as_f64().unwrap();
        least = least.min(post / prior - 1.0);
        ensure(post > prior, || format!("{}: posterior {post} <= prior {prior}", e["event"]))?;
    }
    Ok(format!(
        "29 rows, byte-identical, smallest relative lift {least:.1e}, two runs in {:?}",
        started.elapsed()
    ))
}

fn criterion_7() -> Check {
    let mut worst = 0.0f64;
    for t in [1.0, 1e4, 1e6] {
        let horizon = TimeHorizon::new(t).unwrap();
        for k in 0..=7000 {
            let fit = 10f64.powf(-3.0 + 7.0 * k as f64 / 7000.0);
            let back = probability_to_rate(rate_to_probability(FailureRate::new(fit).unwrap(), horizon), horizon)
                .map_err(|e| e.to_string())?
                .fit();
            let rel = (back - fit).abs() / fit;
            worst = worst.max(rel);
            ensure(rel <= 1e-9, || format!("{fit} FIT at {t} h came back as {back}"))?;
        }
    }
    Ok(format!("21003 points, max relative error {worst:.1e}"))
}

/// Structure function evaluated straight from the gate map.
fn phi(tree: &FaultTree, node: &str, on: &BTreeSet<&str>) -> bool {
    match tree.gates().get(node) {
        None => on.contains(node),
        Some(g) => {
            let mut v = g.inputs.iter().map(|i| phi(tree, i.as_str(), on));
            match g.kind {
                GateKind::And => v.all(|x| x),
                GateKind::Or => v.any(|x| x),
            }
        }
    }
}

fn criterion_8() -> Check {
    let mut assignments = 0u64;
    for seed in 0..50u64 {
        let tree = tree(20_000 + seed, 10);
        let half: ProbabilityMap = tree.basic_events().map(|b| (b.clone(), Probability::new(0.5).unwrap())).collect();
        let bn = to_bayesian_network(&tree, &half).map_err(|e| e.to_string())?;
        let basics: Vec<&str> = tree.basic_events().map(EventId::as_str).collect();
        for mask in 0..1u64 << basics.len() {
            let on: BTreeSet<&str> = basics.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, b)| *b).collect();
            let mut state: BTreeMap<&str, bool> = BTreeMap::new();
            for (node, cpt) in bn.nodes() {
                let value = if cpt.parents.is_empty() {
                    on.contains(node.as_str())
                } else {
                    let parents: Vec<bool> = cpt.parents.iter().map(|p| state[p.as_str()]).collect();
                    let p = cpt.prob_true(&parents);
                    ensure(p == 0.0 || p == 1.0, || format!("{node} is not deterministic"))?;
                    p == 1.0
                };
                ensure(value == phi(&tree, node.as_str(), &on), || format!("seed {seed}, {node}, mask {mask:b}"))?;
                state.insert(node.as_str(), value);
            }
            assignments += 1;
        }
    }
    Ok(format!("50 trees, {assignments} assignments, every node exact"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 cut-set reproduction", criterion_1),
        ("2 FT/BN consistency at 1-e^-0.001", criterion_2),
        ("3 roll-ups of published means", criterion_3),
        ("4 elimination vs enumeration", criterion_4),
        ("5 posterior monotonicity", criterion_5),
        ("6 experiment pipeline", criterion_6),
        ("7 conversion round trip", criterion_7),
        ("8 structure-function fidelity", criterion_8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
