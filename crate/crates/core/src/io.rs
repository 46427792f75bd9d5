//! Output files: per-round records and per-group summaries, as CSV or JSON.
//!
//! `rounds.csv` columns, in order:
//! `run_id, seed, model, env, intervention, t, loss, cum_regret,
//! tracking_error, trace_A, cond_A, cos_state, cos_update`.
//! Spectral columns are empty for OGD and `cos_update` is empty on rounds where
//! either twin skipped its update. Floats use the shortest representation that
//! parses back to the same value, so a summary recomputed from `rounds.csv`
//! matches the one written at sweep time byte for byte.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;
use crate::error::{Error, Result};
use crate::harness::{outcome_from_records, summarize_inputs, RunResult, SummaryInput};
use crate::metrics::{MetricParams, RoundRecord, SummaryRecord};
use crate::stream::csv_err;

pub const ROUNDS_COLUMNS: [&str; 13] = [
    "run_id",
    "seed",
    "model",
    "env",
    "intervention",
    "t",
    "loss",
    "cum_regret",
    "tracking_error",
    "trace_A",
    "cond_A",
    "cos_state",
    "cos_update",
];

pub const SUMMARY_COLUMNS: [&str; 13] = [
    "model",
    "env",
    "intervention",
    "n_seeds",
    "recovery_time_mean",
    "recovery_time_std",
    "overshoot_mean",
    "overshoot_std",
    "param_shock_mean",
    "param_shock_std",
    "final_regret_mean",
    "final_regret_std",
    "censored_runs",
];

/// One line of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub run_id: usize,
    pub seed: u64,
    pub model: String,
    pub env: String,
    pub intervention: String,
    pub t: usize,
    pub loss: f64,
    pub cum_regret: f64,
    pub tracking_error: f64,
    #[serde(rename = "trace_A")]
    pub trace_a: Option<f64>,
    #[serde(rename = "cond_A")]
    pub cond_a: Option<f64>,
    pub cos_state: Option<f64>,
    pub cos_update: Option<f64>,
}

impl RoundRow {
    fn record(&self) -> RoundRecord {
        RoundRecord {
            t: self.t,
            loss: self.loss,
            cum_regret: self.cum_regret,
            tracking_error: self.tracking_error,
            trace_a: self.trace_a,
            cond_a: self.cond_a,
            cos_state: self.cos_state,
            cos_update: self.cos_update,
        }
    }
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub env: String,
    pub intervention: String,
    pub n_seeds: usize,
    pub recovery_time_mean: f64,
    pub recovery_time_std: f64,
    pub overshoot_mean: f64,
    pub overshoot_std: f64,
    pub param_shock_mean: f64,
    pub param_shock_std: f64,
    pub final_regret_mean: f64,
    pub final_regret_std: f64,
    pub censored_runs: usize,
}

impl From<&SummaryRecord> for SummaryRow {
    fn from(s: &SummaryRecord) -> Self {
        SummaryRow {
            model: s.model.clone(),
            env: s.environment.clone(),
            intervention: s.intervention.clone(),
            n_seeds: s.n_seeds,
            recovery_time_mean: s.recovery_time.mean,
            recovery_time_std: s.recovery_time.std,
            overshoot_mean: s.overshoot.mean,
            overshoot_std: s.overshoot.std,
            param_shock_mean: s.param_shock.mean,
            param_shock_std: s.param_shock.std,
            final_regret_mean: s.final_regret.mean,
            final_regret_std: s.final_regret.std,
            censored_runs: s.censored_runs,
        }
    }
}

/// Rows of every run, numbered by position in `runs`.
pub fn round_rows(runs: &[RunResult]) -> Vec<RoundRow> {
    runs.iter()
        .enumerate()
        .flat_map(|(run_id, run)| {
            let (model, env, intervention) =
                (run.model().label().to_string(), run.environment().label().to_string(), run.intervention_label());
            run.records.iter().map(move |r| RoundRow {
                run_id,
                seed: run.seed,
                model: model.clone(),
                env: env.clone(),
                intervention: intervention.clone(),
                t: r.t,
                loss: r.loss,
                cum_regret: r.cum_regret,
                tracking_error: r.tracking_error,
                trace_a: r.trace_a,
                cond_a: r.cond_a,
                cos_state: r.cos_state,
                cos_update: r.cos_update,
            })
        })
        .collect()
}

fn write_csv<W: Write, T: Serialize>(rows: &[T], header: &[&str], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wtr.serialize(row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_rounds_csv<W: Write>(rows: &[RoundRow], writer: W) -> Result<()> {
    write_csv(rows, &ROUNDS_COLUMNS, writer)
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRecord], writer: W) -> Result<()> {
    let rows: Vec<SummaryRow> = summary.iter().map(SummaryRow::from).collect();
    write_csv(&rows, &SUMMARY_COLUMNS, writer)
}

fn write_json<W: Write, T: Serialize>(value: &T, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value).map_err(|e| Error::Io(e.into()))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

/// Reads `rounds.csv`, naming the offending column on any schema problem.
pub fn read_rounds_csv<R: Read>(reader: R) -> Result<Vec<RoundRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Schema("rounds file is empty".into()));
    }
    for (i, expected) in ROUNDS_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(got) if got == *expected => {}
            Some(got) => {
                return Err(Error::Schema(format!("column {} is `{got}`, expected `{expected}`", i + 1)));
            }
            None => return Err(Error::Schema(format!("missing column `{expected}`"))),
        }
    }
    if header.len() > ROUNDS_COLUMNS.len() {
        return Err(Error::Schema(format!("unexpected extra column `{}`", &header[ROUNDS_COLUMNS.len()])));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.deserialize::<RoundRow>().enumerate() {
        rows.push(rec.map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.field().map(|f| ROUNDS_COLUMNS[f as usize]),
                _ => None,
            };
            match column {
                Some(c) => Error::Schema(format!("data row {}: bad value in column `{c}`", line + 1)),
                None => csv_err(e),
            }
        })?);
    }
    if rows.is_empty() {
        return Err(Error::Schema("rounds file has a header but no rows".into()));
    }
    Ok(rows)
}

pub fn read_rounds_json<R: Read>(reader: R) -> Result<Vec<RoundRow>> {
    let rows: Vec<RoundRow> = serde_json::from_reader(reader).map_err(|e| Error::Schema(e.to_string()))?;
    if rows.is_empty() {
        return Err(Error::Schema("rounds file has no rows".into()));
    }
    Ok(rows)
}

/// Regenerates the summary from raw rows. Runs are grouped by `run_id`;
/// groups are ordered by first appearance, as at sweep time.
pub fn summary_from_rows(rows: &[RoundRow], tau: usize, params: &MetricParams) -> Result<Vec<SummaryRecord>> {
    let mut order: Vec<usize> = Vec::new();
    let mut runs: HashMap<usize, Vec<&RoundRow>> = HashMap::new();
    for row in rows {
        runs.entry(row.run_id)
            .or_insert_with(|| {
                order.push(row.run_id);
                Vec::new()
            })
            .push(row);
    }
    let mut inputs = Vec::with_capacity(order.len());
    for id in order {
        let run = &runs[&id];
        let first = run[0];
        if let Some(bad) = run.iter().find(|r| {
            r.seed != first.seed || r.model != first.model || r.env != first.env || r.intervention != first.intervention
        }) {
            return Err(Error::Schema(format!("run_id {id} mixes labels at t = {}", bad.t)));
        }
        let mut records: Vec<RoundRecord> = run.iter().map(|r| r.record()).collect();
        records.sort_by_key(|r| r.t);
        if records.iter().enumerate().any(|(i, r)| r.t != i + 1) {
            return Err(Error::Schema(format!("run_id {id}: column `t` is not 1..T without gaps")));
        }
        let outcome = outcome_from_records(&records, tau, params).map_err(|e| e.with_context(format!("run_id {id}")))?;
        inputs.push(SummaryInput {
            model: first.model.clone(),
            environment: first.env.clone(),
            intervention: first.intervention.clone(),
            outcome,
            final_regret: records.last().map_or(0.0, |r| r.cum_regret),
        });
    }
    Ok(summarize_inputs(&inputs))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(BufWriter::new(file))
}

/// Writes `rounds.{csv,json}` and `summary.{csv,json}` into `dir`.
pub fn write_outputs(
    dir: &Path,
    format: OutputFormat,
    runs: &[RunResult],
    summary: &[SummaryRecord],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let rows = round_rows(runs);
    let (rounds, summ) = match format {
        OutputFormat::Csv => (dir.join("rounds.csv"), dir.join("summary.csv")),
        OutputFormat::Json => (dir.join("rounds.json"), dir.join("summary.json")),
    };
    match format {
        OutputFormat::Csv => {
            write_rounds_csv(&rows, create(&rounds)?)?;
            write_summary_csv(summary, create(&summ)?)?;
        }
        OutputFormat::Json => {
            write_json(&rows, create(&rounds)?)?;
            let srows: Vec<SummaryRow> = summary.iter().map(SummaryRow::from).collect();
            write_json(&srows, create(&summ)?)?;
        }
    }
    Ok(vec![rounds, summ])
}

pub fn write_summary<W: Write>(summary: &[SummaryRecord], format: OutputFormat, writer: W) -> Result<()> {
    match format {
        OutputFormat::Csv => write_summary_csv(summary, writer),
        OutputFormat::Json => {
            let rows: Vec<SummaryRow> = summary.iter().map(SummaryRow::from).collect();
            write_json(&rows, writer)
        }
    }
}

/// Reads rows from a `.json` file or, otherwise, CSV.
pub fn read_rounds_path(path: &Path) -> Result<Vec<RoundRow>> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_rounds_json(std::io::BufReader::new(file))
    } else {
        read_rounds_csv(std::io::BufReader::new(file))
    }
}
