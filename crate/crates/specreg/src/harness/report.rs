//! Report emission: per-replicate CSV tables, per-k selection traces,
//! plot-data CSVs, and JSON summaries. Every CSV byte is determined by the
//! configuration and seeds; wall-clock timestamps appear only in the JSON
//! summary metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selector::SelectionTrace;

use super::config::{ExperimentConfig, OutputFormat};
use super::rates::RateStudyReport;
use super::replicate::{
    monte_carlo_in, run_replicate_traced, MonteCarloReport, ProblemContext, ReplicateResult,
};

/// JSON summary of a `simulate` run: config echo with all defaults
/// materialized, one report per sample size, and the emission timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub timestamp_unix: u64,
    pub config: ExperimentConfig,
    pub reports: Vec<MonteCarloReport>,
}

/// JSON summary of a single-dataset selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub timestamp_unix: u64,
    pub config: ExperimentConfig,
    pub n: usize,
    pub d_m: usize,
    pub seed: u64,
    pub result: ReplicateResult,
    pub flagged_eigenvalues: Vec<usize>,
}

/// JSON summary of a rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub timestamp_unix: u64,
    pub config: ExperimentConfig,
    pub report: RateStudyReport,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish_csv(mut wtr: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    wtr.flush().map_err(|e| Error::io(path, std::io::Error::other(e)))
}

/// Per-replicate rows. Columns (8): replicate, seed, k_hat, loss_khat,
/// loss_khat_full, oracle_k, loss_oracle, objective_at_khat.
pub fn write_replicates_csv(report: &MonteCarloReport, path: &Path) -> Result<()> {
    let mut wtr = csv_writer(path)?;
    wtr.write_record([
        "replicate",
        "seed",
        "k_hat",
        "loss_khat",
        "loss_khat_full",
        "oracle_k",
        "loss_oracle",
        "objective_at_khat",
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for row in &report.rows {
        wtr.write_record([
            row.index.to_string(),
            row.seed.to_string(),
            row.k_hat.to_string(),
            row.loss_khat.to_string(),
            row.loss_khat_full.to_string(),
            row.oracle_k.to_string(),
            row.loss_oracle.to_string(),
            row.objective_at_khat.to_string(),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish_csv(wtr, path)
}

/// Per-k selection trace. Columns (6): k, filtered_residual_sq, trace_term,
/// radius_term, penalty, objective.
pub fn write_trace_csv(trace: &SelectionTrace, path: &Path) -> Result<()> {
    let mut wtr = csv_writer(path)?;
    wtr.write_record([
        "k",
        "filtered_residual_sq",
        "trace_term",
        "radius_term",
        "penalty",
        "objective",
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for rec in &trace.records {
        wtr.write_record([
            rec.k.to_string(),
            rec.filtered_residual_sq.to_string(),
            rec.trace_term.to_string(),
            rec.radius_term.to_string(),
            rec.penalty.to_string(),
            rec.objective.to_string(),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish_csv(wtr, path)
}

/// Plot data: the selection objective against k. Columns (2): k, objective.
pub fn write_objective_csv(trace: &SelectionTrace, path: &Path) -> Result<()> {
    let mut wtr = csv_writer(path)?;
    wtr.write_record(["k", "objective"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for rec in &trace.records {
        wtr.write_record([rec.k.to_string(), rec.objective.to_string()])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish_csv(wtr, path)
}

/// Plot data: mean losses against n. Columns (6): n, d_m,
/// mean_oracle_loss, se_oracle_loss, mean_adaptive_loss, se_adaptive_loss.
pub fn write_rate_csv(report: &RateStudyReport, path: &Path) -> Result<()> {
    let mut wtr = csv_writer(path)?;
    wtr.write_record([
        "n",
        "d_m",
        "mean_oracle_loss",
        "se_oracle_loss",
        "mean_adaptive_loss",
        "se_adaptive_loss",
    ])
    .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for p in &report.points {
        wtr.write_record([
            p.n.to_string(),
            p.d_m.to_string(),
            p.mean_oracle_loss.to_string(),
            p.se_oracle_loss.to_string(),
            p.mean_adaptive_loss.to_string(),
            p.se_adaptive_loss.to_string(),
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    finish_csv(wtr, path)
}

/// Runs `simulate` for every configured sample size and writes artifacts
/// into the output directory. Returns the paths written.
pub fn emit_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    ensure_dir(&out_dir)?;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for &n in &cfg.problem.n_list {
        let ctx = ProblemContext::build(cfg, n)?;
        let report = monte_carlo_in(&ctx, cfg)?;

        if cfg.run.format == OutputFormat::Csv {
            let rep_path = out_dir.join(format!("replicates_n{n}.csv"));
            write_replicates_csv(&report, &rep_path)?;
            files.push(rep_path);

            let (_, first_trace) = run_replicate_traced(&ctx, 0, cfg.run.base_seed)?;
            let obj_path = out_dir.join(format!("objective_n{n}.csv"));
            write_objective_csv(&first_trace, &obj_path)?;
            files.push(obj_path);

            if cfg.run.dump_traces {
                for i in 0..cfg.run.replicates {
                    let seed = cfg.run.base_seed.wrapping_add(i as u64);
                    let (_, trace) = run_replicate_traced(&ctx, i, seed)?;
                    let path = out_dir.join(format!("trace_n{n}_rep{i}.csv"));
                    write_trace_csv(&trace, &path)?;
                    files.push(path);
                }
            }
        }
        reports.push(report);
    }
    let summary = SimulateSummary {
        timestamp_unix: now_unix(),
        config: cfg.clone(),
        reports,
    };
    let path = out_dir.join("summary.json");
    write_text(
        &path,
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    files.push(path);
    Ok(files)
}

/// Runs a single-dataset selection (first configured sample size, given
/// noise seed) and writes the trace dump plus a JSON summary.
pub fn emit_select(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    ensure_dir(&out_dir)?;
    let n = cfg.problem.n_list[0];
    let ctx = ProblemContext::build(cfg, n)?;
    let (result, trace) = run_replicate_traced(&ctx, 0, seed)?;

    let mut files = Vec::new();
    let trace_path = out_dir.join("selection_trace.csv");
    write_trace_csv(&trace, &trace_path)?;
    files.push(trace_path);

    let summary = SelectionSummary {
        timestamp_unix: now_unix(),
        config: cfg.clone(),
        n,
        d_m: ctx.d_m,
        seed,
        result,
        flagged_eigenvalues: trace.flagged_eigenvalues.clone(),
    };
    let path = out_dir.join("selection.json");
    write_text(
        &path,
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    files.push(path);
    Ok(files)
}

/// Runs the rate study and writes the points CSV plus a JSON summary.
pub fn emit_rates(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let report = super::rates::rate_study(cfg)?;
    let out_dir = PathBuf::from(&cfg.run.out_dir);
    ensure_dir(&out_dir)?;
    let mut files = Vec::new();
    if cfg.run.format == OutputFormat::Csv {
        let csv_path = out_dir.join("rate_points.csv");
        write_rate_csv(&report, &csv_path)?;
        files.push(csv_path);
    }
    let summary = RateSummary {
        timestamp_unix: now_unix(),
        config: cfg.clone(),
        report,
    };
    let path = out_dir.join("rates.json");
    write_text(
        &path,
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    files.push(path);
    Ok(files)
}
