use std::fs;
use std::path::{Path, PathBuf};

use ftbn_core::av::builtin_av_tree;
use ftbn_core::bn::{to_bayesian_network, BayesianNetwork};
use ftbn_core::cutsets::minimal_cut_sets;
use ftbn_core::experiment::{run_experiment, ExperimentConfig, ExperimentReport, RollupMode};
use ftbn_core::infer::{enumerate_all, posterior_all, Evidence};
use ftbn_core::model::{parse_fault_tree, parse_fault_tree_json, validate, Severity};
use ftbn_core::quant::{
    allocate_budget, declared_rates, gate_formula_probabilities, propagate, FailureRate,
    ProbabilityMap, TimeHorizon,
};
use ftbn_core::{EventId, EventKind, FaultTree};
use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use crate::report;
use crate::{Builtin, Cli, Command, ExperimentArgs, Failure, Format, Method, ModelArg, Outcome, RateArgs, Rollup};

/// Node name that always refers to the model's top event, unless the model
/// defines a node with that exact id.
pub const TOP_ALIAS: &str = "TOP";

fn analysis(e: impl std::fmt::Display) -> Failure {
    Failure::Analysis(e.to_string())
}

pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Validate(model) => run_validate(cli, &load_model(cli, model)?),
        Command::Cutsets(model) => run_cutsets(cli, &load_model(cli, model)?),
        Command::Quantify { model, rates } => run_quantify(cli, &load_model(cli, model)?, rates),
        Command::ToBn { model, rates } => run_to_bn(cli, &load_model(cli, model)?, rates),
        Command::Infer {
            model,
            rates,
            evidence,
            query,
            method,
        } => run_infer(cli, &load_model(cli, model)?, rates, evidence, query, *method),
        Command::Experiment { model, experiment, save } => {
            run_experiment_command(cli, &load_model(cli, model)?, experiment, save.as_deref())
        }
        Command::Report { model, experiment, load } => run_report(cli, model, experiment, load.as_deref()),
    }
}

fn format(cli: &Cli, default: Format) -> Format {
    cli.format.unwrap_or(default)
}

fn model_source(cli: &Cli, arg: &ModelArg) -> Result<Option<PathBuf>, Failure> {
    let mut paths = arg.path.iter().chain(cli.model.iter());
    let path = paths.next().cloned();
    if paths.next().is_some() {
        return Err(Failure::Usage("give the model either as an argument or with --model, not both".into()));
    }
    match (cli.builtin, &path) {
        (Some(_), Some(_)) => Err(Failure::Usage("--builtin and a model path are mutually exclusive".into())),
        (None, None) => Err(Failure::Usage("no model given; pass a path, --model or --builtin av".into())),
        _ => Ok(path),
    }
}

fn load_model(cli: &Cli, arg: &ModelArg) -> Result<FaultTree, Failure> {
    let Some(path) = model_source(cli, arg)? else {
        return Ok(match cli.builtin {
            Some(Builtin::Av) | None => builtin_av_tree(),
        });
    };
    let source = fs::read_to_string(&path)
        .map_err(|e| Failure::Analysis(format!("cannot read {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|x| x == "json") {
        parse_fault_tree_json(&source)
    } else {
        parse_fault_tree(&source)
    };
    parsed.map_err(|e| Failure::Analysis(format!("{}: {e}", path.display())))
}

/// Maps the `TOP` alias onto the model's top event.
fn resolve(tree: &FaultTree, name: &str) -> String {
    if name == TOP_ALIAS && tree.event(TOP_ALIAS).is_none() {
        tree.top().to_string()
    } else {
        name.to_string()
    }
}

fn parse_evidence(tree: &FaultTree, items: &[String]) -> Result<Evidence, Failure> {
    let mut evidence = Evidence::new();
    for item in items {
        let (node, state) = Evidence::parse_assignment(item).map_err(|e| Failure::Usage(e.to_string()))?;
        let node = EventId::new(resolve(tree, node.as_str())).map_err(analysis)?;
        if tree.event(node.as_str()).is_none() {
            return Err(Failure::Analysis(format!("unknown node {node}")));
        }
        evidence.observe(node, state).map_err(analysis)?;
    }
    Ok(evidence)
}

struct Rates {
    source: &'static str,
    rates: IndexMap<EventId, FailureRate>,
    probabilities: ProbabilityMap,
    time: TimeHorizon,
}

/// Declared model rates when every basic event has one, otherwise a seeded
/// split of the budget.
fn basic_rates(cli: &Cli, tree: &FaultTree, args: &RateArgs) -> Result<Rates, Failure> {
    let time = TimeHorizon::new(args.time_hours).map_err(|e| Failure::Usage(e.to_string()))?;
    let (source, rates) = match declared_rates(tree) {
        Some(rates) => ("declared", rates),
        None => {
            let budget = FailureRate::new(args.budget_fit).map_err(|e| Failure::Usage(e.to_string()))?;
            let assignment = allocate_budget(tree, budget, cli.seed, args.concentration).map_err(analysis)?;
            ("allocated", assignment.rates)
        }
    };
    let probabilities = rates
        .iter()
        .map(|(id, r)| (id.clone(), ftbn_core::quant::rate_to_probability(*r, time)))
        .collect();
    Ok(Rates {
        source,
        rates,
        probabilities,
        time,
    })
}

fn json_body(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("values serialize")
}

fn csv_body(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(analysis)?;
    for row in rows {
        writer.write_record(&row).map_err(analysis)?;
    }
    let bytes = writer.into_inner().map_err(analysis)?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Left-aligned plain-text table.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = vec![line(header.to_vec())];
    out.push(line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for row in rows {
        out.push(line(row.iter().map(String::as_str).collect()));
    }
    out.join("\n")
}

fn ok(body: String) -> Result<Outcome, Failure> {
    Ok(Outcome { body, code: 0 })
}

fn run_validate(cli: &Cli, tree: &FaultTree) -> Result<Outcome, Failure> {
    let report = validate(tree);
    let severity = |s: Severity| match s {
        Severity::Error => "error",
        Severity::Warning => "warning",
    };
    let rows: Vec<Vec<String>> = report
        .findings
        .iter()
        .map(|f| {
            let events: Vec<&str> = f.events.iter().map(EventId::as_str).collect();
            vec![severity(f.severity).into(), f.code.clone(), events.join(" "), f.message.clone()]
        })
        .collect();
    let header = ["severity", "code", "events", "message"];
    let body = match format(cli, Format::Json) {
        Format::Json => json_body(&serde_json::to_value(&report).map_err(analysis)?),
        Format::Csv => csv_body(&header, rows)?,
        Format::Table => {
            let status = if report.ok { "ok" } else { "invalid" };
            if rows.is_empty() {
                status.to_string()
            } else {
                format!("{status}\n\n{}", text_table(&header, &rows))
            }
        }
    };
    Ok(Outcome {
        body,
        code: if report.ok { 0 } else { 1 },
    })
}

fn run_cutsets(cli: &Cli, tree: &FaultTree) -> Result<Outcome, Failure> {
    let cutsets = minimal_cut_sets(tree).map_err(analysis)?;
    let lists = cutsets.as_id_lists();
    let rows: Vec<Vec<String>> = lists.iter().map(|l| vec![l.len().to_string(), l.join(" ")]).collect();
    ok(match format(cli, Format::Json) {
        Format::Json => json_body(&json!(lists)),
        Format::Csv => csv_body(&["order", "members"], rows)?,
        Format::Table => text_table(&["order", "members"], &rows),
    })
}

fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::Basic => "basic",
        EventKind::Intermediate => "intermediate",
        EventKind::Top => "top",
    }
}

fn run_quantify(cli: &Cli, tree: &FaultTree, args: &RateArgs) -> Result<Outcome, Failure> {
    let rates = basic_rates(cli, tree, args)?;
    let propagation = propagate(tree, &rates.probabilities).map_err(analysis)?;
    let formulas = gate_formula_probabilities(tree, &rates.probabilities).map_err(analysis)?;
    let bn = to_bayesian_network(tree, &rates.probabilities).map_err(analysis)?;
    let forward = posterior_all(&bn, &Evidence::new()).map_err(analysis)?;
    let top = tree.top();

    let events: Vec<(String, &'static str, Option<f64>, f64)> = tree
        .events()
        .iter()
        .map(|(id, event)| {
            (
                id.to_string(),
                kind_name(event.kind),
                rates.rates.get(id).map(|r| r.fit()),
                propagation.probabilities[id].value(),
            )
        })
        .collect();
    let body = match format(cli, Format::Json) {
        Format::Json => json_body(&json!({
            "top": top,
            "time_hours": rates.time.hours(),
            "rate_source": rates.source,
            "seed": (rates.source == "allocated").then_some(cli.seed),
            "total_fit": rates.rates.values().map(|r| r.fit()).sum::<f64>(),
            "method": propagation.method,
            "shared_events": propagation.shared_events,
            "top_probability": propagation.top(tree).value(),
            "gate_formula_top": formulas[top].value(),
            "network_top": forward.posteriors[top],
            "events": events.iter().map(|(id, kind, rate, p)| json!({
                "id": id,
                "kind": kind,
                "rate_fit": rate,
                "probability": p,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => csv_body(
            &["id", "kind", "rate_fit", "probability"],
            events.iter().map(|(id, kind, rate, p)| {
                vec![id.clone(), kind.to_string(), rate.map(|r| r.to_string()).unwrap_or_default(), p.to_string()]
            }),
        )?,
        Format::Table => {
            let rows: Vec<Vec<String>> = events
                .iter()
                .map(|(id, kind, rate, p)| {
                    vec![id.clone(), kind.to_string(), rate.map(|r| format!("{r:.4}")).unwrap_or_default(), format!("{p:.6e}")]
                })
                .collect();
            format!(
                "top {top}: {:.6e} ({} rates, t = {} h)\n\n{}",
                propagation.top(tree).value(),
                rates.source,
                rates.time.hours(),
                text_table(&["id", "kind", "rate_fit", "probability"], &rows)
            )
        }
    };
    ok(body)
}

fn run_to_bn(cli: &Cli, tree: &FaultTree, args: &RateArgs) -> Result<Outcome, Failure> {
    if format(cli, Format::Json) != Format::Json {
        return Err(Failure::Usage("to-bn only supports --format json".into()));
    }
    let rates = basic_rates(cli, tree, args)?;
    let bn = to_bayesian_network(tree, &rates.probabilities).map_err(analysis)?;
    ok(bn.to_json().map_err(analysis)?)
}

fn run_infer(
    cli: &Cli,
    tree: &FaultTree,
    args: &RateArgs,
    evidence: &[String],
    query: &[String],
    method: Method,
) -> Result<Outcome, Failure> {
    let evidence = parse_evidence(tree, evidence)?;
    let rates = basic_rates(cli, tree, args)?;
    let bn: BayesianNetwork = to_bayesian_network(tree, &rates.probabilities).map_err(analysis)?;
    let report = match method {
        Method::Ve => posterior_all(&bn, &evidence),
        Method::Enum => enumerate_all(&bn, &evidence),
    }
    .map_err(analysis)?;
    let mut selected: Vec<(String, f64)> = Vec::new();
    if query.is_empty() {
        selected.extend(report.posteriors.iter().map(|(k, v)| (k.to_string(), *v)));
    } else {
        for q in query {
            let id = resolve(tree, q);
            let p = report
                .posteriors
                .get(id.as_str())
                .ok_or_else(|| Failure::Analysis(format!("unknown node {q}")))?;
            selected.push((id, *p));
        }
    }
    ok(match format(cli, Format::Json) {
        Format::Json => {
            let map: Map<String, Value> = selected.into_iter().map(|(k, v)| (k, json!(v))).collect();
            json_body(&Value::Object(map))
        }
        Format::Csv => csv_body(&["node", "posterior"], selected.into_iter().map(|(k, v)| vec![k, v.to_string()]))?,
        Format::Table => {
            let rows: Vec<Vec<String>> = selected.into_iter().map(|(k, v)| vec![k, format!("{v:.9}")]).collect();
            text_table(&["node", "posterior"], &rows)
        }
    })
}

fn experiment_config(cli: &Cli, tree: &FaultTree, args: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let usage = |e: ftbn_core::quant::QuantError| Failure::Usage(e.to_string());
    let evidence = if args.evidence.is_empty() {
        None
    } else {
        Some(parse_evidence(tree, &args.evidence)?)
    };
    let config = ExperimentConfig {
        budget: FailureRate::new(args.rates.budget_fit).map_err(usage)?,
        time: TimeHorizon::new(args.rates.time_hours).map_err(usage)?,
        repetitions: args.reps,
        confidence: args.confidence,
        seed: cli.seed,
        concentration: args.rates.concentration,
        evidence,
        rollup: match args.rollup {
            Rollup::All => RollupMode::All,
            Rollup::SinglePoints => RollupMode::SinglePoints,
        },
    };
    config.check().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure::Analysis(format!("cannot write {}: {e}", path.display())))
}

fn run_experiment_command(
    cli: &Cli,
    tree: &FaultTree,
    args: &ExperimentArgs,
    save: Option<&Path>,
) -> Result<Outcome, Failure> {
    let config = experiment_config(cli, tree, args)?;
    let report = run_experiment(tree, &config).map_err(analysis)?;
    let json = report.to_json();
    if let Some(path) = save {
        write_file(path, &(json.clone() + "\n"))?;
    }
    let header = ["event", "name", "mean", "half_width"];
    let rows = report
        .events
        .iter()
        .map(|e| vec![e.event.to_string(), e.name.clone(), e.mean_posterior_rate.to_string(), e.half_width.to_string()]);
    ok(match format(cli, Format::Json) {
        Format::Json => json,
        Format::Csv => csv_body(&header, rows)?,
        Format::Table => {
            let rows: Vec<Vec<String>> = report
                .events
                .iter()
                .map(|e| {
                    vec![
                        e.event.to_string(),
                        e.name.clone(),
                        format!("{:.2}", e.mean_posterior_rate),
                        format!("{:.3}", e.half_width),
                    ]
                })
                .collect();
            text_table(&header, &rows)
        }
    })
}

fn run_report(
    cli: &Cli,
    model: &ModelArg,
    args: &ExperimentArgs,
    load: Option<&Path>,
) -> Result<Outcome, Failure> {
    let report = match load {
        Some(path) => {
            if model.path.is_some() || cli.model.is_some() || cli.builtin.is_some() {
                return Err(Failure::Usage("--load cannot be combined with a model".into()));
            }
            let source = fs::read_to_string(path)
                .map_err(|e| Failure::Analysis(format!("cannot read {}: {e}", path.display())))?;
            ExperimentReport::from_json(&source)
                .map_err(|e| Failure::Analysis(format!("{} is not a valid report: {e}", path.display())))?
        }
        None => {
            let tree = load_model(cli, model)?;
            let config = experiment_config(cli, &tree, args)?;
            run_experiment(&tree, &config).map_err(analysis)?
        }
    };
    let body = match format(cli, Format::Table) {
        Format::Table => report::markdown(&report).map_err(analysis)?,
        Format::Csv => csv_body(&["id", "mean_fit", "ci_low", "ci_high"], report::series(&report))?,
        Format::Json => json_body(&report::summary(&report).map_err(analysis)?),
    };
    ok(body)
}
