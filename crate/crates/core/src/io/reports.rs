use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::evaluation::ExperimentReport;

/// Per-trial records as CSV and the summary (configuration, quartiles,
/// failures) as JSON.
pub fn write_report(report: &ExperimentReport, csv_path: impl AsRef<Path>, json_path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(csv_path)?;
    for r in &report.records {
        w.serialize(r)?;
    }
    w.flush()?;
    let summary = serde_json::json!({
        "name": report.name,
        "config": report.config,
        "trials": report.trials,
        "summaries": report.summaries,
        "failures": report.failures,
    });
    fs::write(json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}
