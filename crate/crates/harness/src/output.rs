//! CSV rows and the JSON metadata sidecar.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::{hex, ExperimentConfig};
use crate::experiment::{SweepTable, TrialResult};
use crate::error::{HarnessError, Result};

pub const ARTIFACT_VERSION: &str = env!("SEQANM_ARTIFACT_VERSION");

pub const CSV_COLUMNS: &[&str] = &[
    "sweep_value",
    "trial",
    "estimator",
    "mse",
    "bound_universal",
    "bound_seq_detailed",
    "bound_seq_approx",
    "separation",
    "converged",
    "wall_ms",
    "bound_crlb",
    "seed",
    "artifact_version",
    "config_hash",
];

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_header<W: Write>(out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{}", CSV_COLUMNS.join(","))
}

pub fn write_trial_rows<W: Write>(out: &mut W, t: &TrialResult, cfg_hash: &str) -> std::io::Result<()> {
    let seed = hex(&t.seed);
    for o in &t.outcomes {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.sweep_value,
            t.trial,
            o.estimator,
            fmt_f64(o.mse),
            fmt_f64(t.bounds.universal),
            fmt_f64(t.bounds.sequential_detailed),
            fmt_f64(t.bounds.sequential_approx),
            opt(t.separation),
            o.converged,
            fmt_f64(o.wall_ms),
            opt(t.bounds.exact_crlb),
            seed,
            ARTIFACT_VERSION,
            cfg_hash,
        )?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(out: &mut W, trials: &[&TrialResult], cfg: &ExperimentConfig) -> std::io::Result<()> {
    let hash = cfg.hash();
    write_header(out)?;
    for t in trials {
        write_trial_rows(out, t, &hash)?;
    }
    Ok(())
}

fn num(x: f64) -> Value {
    // JSON has no NaN
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn metadata(cfg: &ExperimentConfig, table: Option<&SweepTable>, trials: &[&TrialResult]) -> Value {
    let config: serde_json::Map<String, Value> = cfg
        .resolved()
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect();
    let errors: Vec<Value> = trials
        .iter()
        .flat_map(|t| {
            t.outcomes.iter().filter_map(move |o| {
                o.error.as_ref().map(|e| {
                    json!({"sweep_value": t.sweep_value, "trial": t.trial, "estimator": o.estimator, "error": e})
                })
            })
        })
        .collect();
    let mut meta = json!({
        "artifact_version": ARTIFACT_VERSION,
        "config_hash": cfg.hash(),
        "config": config,
        "columns": CSV_COLUMNS,
        "rows": trials.iter().map(|t| t.outcomes.len()).sum::<usize>(),
        "errors": errors,
    });
    if let Some(table) = table {
        let points: Vec<Value> = table
            .points
            .iter()
            .map(|p| {
                json!({
                    "value": p.value,
                    "M": p.config.system.m,
                    "N": p.config.system.n,
                    "Mp": p.config.system.mp,
                    "Np": p.config.system.np,
                    "L": p.config.l,
                    "bound_universal": num(p.bounds.universal),
                    "bound_seq_detailed": num(p.bounds.sequential_detailed),
                    "bound_seq_approx": num(p.bounds.sequential_approx),
                    "summaries": p.summaries.iter().map(|s| json!({
                        "estimator": s.estimator,
                        "mean_mse": num(s.mean),
                        "median_mse": num(s.median),
                        "failures": s.failures,
                        "not_converged": s.not_converged,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        meta["sweep"] = json!(table.axis);
        meta["partial"] = json!(table.partial);
        meta["points"] = Value::Array(points);
    }
    meta
}

/// Writes `csv_path` and a `.json` sidecar next to it.
pub fn write_outputs(
    csv_path: &Path,
    cfg: &ExperimentConfig,
    table: Option<&SweepTable>,
    trials: &[&TrialResult],
) -> Result<()> {
    let io_err = |p: &Path| {
        let path = p.display().to_string();
        move |e| HarnessError::Io { path, source: e }
    };
    let mut buf = Vec::new();
    write_csv(&mut buf, trials, cfg).map_err(io_err(csv_path))?;
    std::fs::write(csv_path, buf).map_err(io_err(csv_path))?;
    let side = csv_path.with_extension("json");
    let text = serde_json::to_string_pretty(&metadata(cfg, table, trials))?;
    std::fs::write(&side, text + "\n").map_err(io_err(&side))?;
    Ok(())
}
