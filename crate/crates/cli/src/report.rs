//! Markdown, CSV and JSON renderings of an experiment report.

use std::fmt::Write;

use ftbn_core::experiment::{EventStatistics, ExperimentError, ExperimentReport, RollupMode};
use serde_json::{json, Value};

/// Events by mean posterior rate, largest first, ties by id.
pub fn ranked(report: &ExperimentReport) -> Vec<&EventStatistics> {
    let mut rows: Vec<&EventStatistics> = report.events.iter().collect();
    rows.sort_by(|a, b| {
        b.mean_posterior_rate
            .total_cmp(&a.mean_posterior_rate)
            .then_with(|| a.event.cmp(&b.event))
    });
    rows
}

fn evidence_text(report: &ExperimentReport) -> String {
    match &report.config.evidence {
        None => format!("{}=true", report.top),
        Some(e) => {
            let items: Vec<String> = e.iter().map(|(k, v)| format!("{k}={v}")).collect();
            if items.is_empty() {
                "none".into()
            } else {
                items.join(", ")
            }
        }
    }
}

pub fn markdown(report: &ExperimentReport) -> Result<String, ExperimentError> {
    let c = &report.config;
    let mut out = String::new();
    let _ = writeln!(out, "# Posterior failure rates\n");
    let _ = writeln!(out, "- Top event: {}", report.top);
    let _ = writeln!(out, "- Evidence: {}", evidence_text(report));
    let _ = writeln!(
        out,
        "- Repetitions: {} (seed {}), budget {} FIT, horizon {} h",
        c.repetitions,
        c.seed,
        c.budget.fit(),
        c.time.hours()
    );
    let _ = writeln!(out, "- Confidence level: {}%", c.confidence * 100.0);
    let _ = writeln!(
        out,
        "- Mean forward top-event probability: {:.6e}\n",
        report.top_event_prior_probability
    );

    let _ = writeln!(out, "## Basic events\n");
    let _ = writeln!(
        out,
        "| Rank | Event | Name | Subsystem | Prior mean (FIT) | Posterior mean (FIT) | Half-width (FIT) |"
    );
    let _ = writeln!(out, "|---:|---|---|---|---:|---:|---:|");
    for (i, e) in ranked(report).into_iter().enumerate() {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.2} | {:.2} | {:.3} |",
            i + 1,
            e.event,
            e.name.replace('|', "\\|"),
            e.subsystem.as_deref().unwrap_or("-"),
            e.mean_prior_rate,
            e.mean_posterior_rate,
            e.half_width
        );
    }

    let all = report.rollup(RollupMode::All)?;
    let single = report.rollup(RollupMode::SinglePoints)?;
    let _ = writeln!(out, "\n## Subsystem roll-ups (FIT)\n");
    let _ = writeln!(out, "| Subsystem | all | single-points |");
    let _ = writeln!(out, "|---|---:|---:|");
    for (tag, total) in &all {
        let _ = writeln!(out, "| {tag} | {total:.2} | {:.2} |", single.get(tag).copied().unwrap_or(0.0));
    }
    Ok(out)
}

/// Plot-ready rows: id, mean, lower and upper interval bound.
pub fn series(report: &ExperimentReport) -> Vec<Vec<String>> {
    ranked(report)
        .into_iter()
        .map(|e| {
            vec![
                e.event.to_string(),
                e.mean_posterior_rate.to_string(),
                (e.mean_posterior_rate - e.half_width).to_string(),
                (e.mean_posterior_rate + e.half_width).to_string(),
            ]
        })
        .collect()
}

pub fn summary(report: &ExperimentReport) -> Result<Value, ExperimentError> {
    let events: Vec<Value> = ranked(report)
        .into_iter()
        .map(|e| {
            json!({
                "id": e.event,
                "name": e.name,
                "subsystem": e.subsystem,
                "mean_prior_fit": e.mean_prior_rate,
                "mean_fit": e.mean_posterior_rate,
                "half_width": e.half_width,
                "ci_low": e.mean_posterior_rate - e.half_width,
                "ci_high": e.mean_posterior_rate + e.half_width,
            })
        })
        .collect();
    Ok(json!({
        "top": report.top,
        "evidence": evidence_text(report),
        "confidence": report.config.confidence,
        "events": events,
        "rollups": {
            "all": report.rollup(RollupMode::All)?,
            "single-points": report.rollup(RollupMode::SinglePoints)?,
        },
    }))
}
