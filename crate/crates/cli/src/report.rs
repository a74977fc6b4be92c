//! Deterministic CSV and markdown emission.

use std::fs;
use std::path::Path;

use dse_core::governor::SolverTrace;

use crate::experiment::{aggregate_rows, MetricsRow, RunOutcome};
use crate::formats::{CliError, Result};

pub const METRICS_HEADER: &str = "method,mode,iter,eps1,eps2,cb_seconds,ot_seconds,ov";
pub const TRACE_HEADER: &str = "iteration,max_delta,frozen_count,floats_sent,cumulative_cb_seconds";

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v}")
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method,
            r.mode,
            r.iter,
            fmt(r.eps1),
            fmt(r.eps2),
            fmt(r.cb_seconds),
            fmt(r.ot_seconds),
            fmt(r.ov)
        ));
    }
    out
}

pub fn metrics_markdown(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str("| method | mode | iter | eps1 | eps2 | cb_seconds | ot_seconds | ov |\n");
    out.push_str("|---|---|---|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.method,
            r.mode,
            r.iter,
            fmt(r.eps1),
            fmt(r.eps2),
            fmt(r.cb_seconds),
            fmt(r.ot_seconds),
            fmt(r.ov)
        ));
    }
    out.push_str(
        "\nTiming columns (cb_seconds, ot_seconds) are wall-clock dependent and not \
         reproducible across machines; all other columns are seed-deterministic.\n",
    );
    out
}

pub fn trace_csv(trace: &SolverTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for rec in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.iteration,
            fmt(rec.max_delta),
            rec.frozen_count,
            rec.floats_sent,
            fmt(rec.cumulative_cb_seconds)
        ));
    }
    out
}

/// Writes metrics.csv (seed-aggregated), metrics_runs.csv (per seed, with
/// error column), metrics.md, and one trace CSV per successful run.
pub fn emit_report(outcomes: &[RunOutcome], outdir: &Path) -> Result<()> {
    if outcomes.is_empty() {
        return Err(CliError::Invalid("no rows to report".into()));
    }
    fs::create_dir_all(outdir).map_err(|source| CliError::Io {
        path: outdir.display().to_string(),
        source,
    })?;
    let rows: Vec<MetricsRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let aggregated = aggregate_rows(&rows);
    write_file(&outdir.join("metrics.csv"), &metrics_csv(&aggregated))?;
    write_file(&outdir.join("metrics.md"), &metrics_markdown(&aggregated))?;

    let mut runs = String::from("method,mode,seed,iter,eps1,eps2,cb_seconds,ot_seconds,ov,error");
    runs.push('\n');
    for r in &rows {
        runs.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.mode,
            r.seed,
            r.iter,
            fmt(r.eps1),
            fmt(r.eps2),
            fmt(r.cb_seconds),
            fmt(r.ot_seconds),
            fmt(r.ov),
            r.error.clone().unwrap_or_default()
        ));
    }
    write_file(&outdir.join("metrics_runs.csv"), &runs)?;

    for o in outcomes {
        if let Some(trace) = &o.trace {
            let name = format!("trace_{}_{}_{}.csv", o.row.method, o.row.mode, o.row.seed);
            write_file(&outdir.join(name), &trace_csv(trace))?;
        }
    }
    Ok(())
}
