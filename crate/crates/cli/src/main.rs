mod commands;
mod report;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "ftbn", version, about = "Fault-tree and Bayesian-network risk analysis")]
pub struct Cli {
    /// Output format; `report` defaults to `table` (markdown), everything
    /// else to `json`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for rate allocation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Use a bundled model instead of a file.
    #[arg(long, global = true, value_enum)]
    pub builtin: Option<Builtin>,
    /// Model file (`.ft` text or `.json`).
    #[arg(long = "model", global = true, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// Write the data document here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    Av,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model for structural errors.
    Validate(ModelArg),
    /// List minimal cut sets.
    Cutsets(ModelArg),
    /// Event probabilities at a time horizon.
    Quantify {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        rates: RateArgs,
    },
    /// Compile the model into a Bayesian network.
    ToBn {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        rates: RateArgs,
    },
    /// Posterior probabilities given evidence.
    Infer {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        rates: RateArgs,
        /// Observation `NODE=true|false`; `TOP` names the top event.
        #[arg(long, value_name = "NODE=STATE")]
        evidence: Vec<String>,
        /// Node to report; all nodes when omitted.
        #[arg(long, value_name = "NODE")]
        query: Vec<String>,
        #[arg(long, value_enum, default_value_t = Method::Ve)]
        method: Method,
    },
    /// Repeated allocation and backward inference with confidence intervals.
    Experiment {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Also write the full JSON report here.
        #[arg(long, value_name = "PATH")]
        save: Option<PathBuf>,
    },
    /// Render an experiment report.
    Report {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Render a saved report instead of running one.
        #[arg(long, value_name = "PATH")]
        load: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model file; same as `--model`.
    #[arg(value_name = "MODEL")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RateArgs {
    #[arg(long, default_value_t = ftbn_core::quant::DEFAULT_TIME_HOURS)]
    pub time_hours: f64,
    /// Total FIT shared among basic events without a declared rate.
    #[arg(long, default_value_t = ftbn_core::quant::DEFAULT_BUDGET_FIT)]
    pub budget_fit: f64,
    /// Dirichlet concentration for the budget split.
    #[arg(long, default_value_t = ftbn_core::quant::DEFAULT_CONCENTRATION)]
    pub concentration: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub rates: RateArgs,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Observation `NODE=true|false`; defaults to `TOP=true`.
    #[arg(long, value_name = "NODE=STATE")]
    pub evidence: Vec<String>,
    #[arg(long, value_enum, default_value_t = Rollup::All)]
    pub rollup: Rollup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ve,
    Enum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rollup {
    All,
    SinglePoints,
}

/// Failure categories, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or flag combinations.
    Usage(String),
    /// Invalid model, failed analysis or I/O trouble.
    Analysis(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Analysis(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Analysis(_) => "analysis",
            Failure::Usage(_) => "usage",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Analysis(m) | Failure::Usage(m) => m,
        }
    }
}

/// Data produced by a command, plus the exit status it implies.
pub struct Outcome {
    pub body: String,
    pub code: u8,
}

fn wants_json(args: &[String]) -> bool {
    args.windows(2).any(|w| w[0] == "--format" && w[1] == "json") || args.iter().any(|a| a == "--format=json")
}

fn report_failure(failure: &Failure, json: bool) {
    if json {
        let doc = json!({
            "error": {
                "kind": failure.kind(),
                "code": failure.code(),
                "message": failure.message(),
            }
        });
        eprintln!("{doc}");
    } else {
        eprintln!("error: {}", failure.message());
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let json_errors = wants_json(&args);
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json_errors {
                report_failure(&Failure::Usage(e.render().to_string().trim().to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    let json_errors = json_errors || cli.format == Some(Format::Json);
    match commands::run(&cli).and_then(|outcome| emit(&cli, outcome)) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            report_failure(&failure, json_errors);
            ExitCode::from(failure.code())
        }
    }
}

fn emit(cli: &Cli, outcome: Outcome) -> Result<u8, Failure> {
    let mut body = outcome.body;
    if !body.ends_with('\n') {
        body.push('\n');
    }
    match &cli.out {
        Some(path) => fs::write(path, body)
            .map_err(|e| Failure::Analysis(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Analysis(format!("cannot write output: {e}")))?;
        }
    }
    Ok(outcome.code)
}
