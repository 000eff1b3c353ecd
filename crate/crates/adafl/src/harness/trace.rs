//! Trace and summary file output.
//!
//! The trace is plot-ready CSV with a fixed column order; floats use
//! Rust's shortest round-trip formatting, so re-parsing reproduces the
//! exact values and two runs with the same seed write byte-identical
//! files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::federation::RoundRecord;
use crate::harness::config::RunConfig;
use crate::harness::ExperimentSummary;

/// Fixed trace header. `selected_ids` is semicolon-joined ascending
/// indices; `test_accuracy` is empty on rounds that were not evaluated.
pub const TRACE_HEADER: &str = "round,gamma,K,cost_round,cost_cumulative,test_accuracy,selected_ids,attention_min,attention_max,attention_entropy";

/// Render the trace rows as CSV text.
pub fn render_trace_csv(records: &[RoundRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 64 + TRACE_HEADER.len());
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let accuracy = r
            .test_accuracy
            .map(|a| a.to_string())
            .unwrap_or_default();
        let ids = r
            .selected
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.round,
            r.gamma,
            r.cohort,
            r.cost_round,
            r.cost_cumulative,
            accuracy,
            ids,
            r.attention_min,
            r.attention_max,
            r.attention_entropy,
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, records: &[RoundRecord]) -> Result<()> {
    std::fs::write(path, render_trace_csv(records))?;
    Ok(())
}

/// Parse the `test_accuracy` column back out of trace CSV text.
pub fn read_accuracy_column(csv: &str) -> Result<Vec<f64>> {
    let mut lines = csv.lines();
    match lines.next() {
        Some(header) if header == TRACE_HEADER => {}
        other => {
            return Err(Error::InvalidData(format!(
                "unexpected trace header: {other:?}"
            )))
        }
    }
    let mut accuracies = Vec::new();
    for (i, line) in lines.enumerate() {
        let field = line.split(',').nth(5).ok_or_else(|| {
            Error::InvalidData(format!("trace row {} has too few columns", i + 1))
        })?;
        if field.is_empty() {
            continue;
        }
        accuracies.push(field.parse::<f64>().map_err(|e| {
            Error::InvalidData(format!("trace row {}: bad accuracy: {e}", i + 1))
        })?);
    }
    Ok(accuracies)
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    config: &'a RunConfig,
    seed: u64,
    summary: &'a ExperimentSummary,
}

/// Render the run summary (config echo, seed, metrics, per-target
/// stopping results) as pretty JSON.
pub fn render_summary_json(config: &RunConfig, summary: &ExperimentSummary) -> Result<String> {
    let doc = SummaryDocument {
        config,
        seed: config.experiment.seed,
        summary,
    };
    serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::InvalidData(format!("summary serialization: {e}")))
}

pub fn write_summary_json(
    path: &Path,
    config: &RunConfig,
    summary: &ExperimentSummary,
) -> Result<()> {
    let mut text = render_summary_json(config, summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
