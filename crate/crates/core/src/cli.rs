//! `ons-unlearn` command line: `run`, `validate`, `summarize`, `stream`.
//!
//! Exit status: 0 on success, 2 for configuration or schema problems,
//! 3 for numeric failures, 1 for I/O errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{OutputFormat, Overrides, RunConfig};
use crate::error::{Error, Result};
use crate::harness::{run_sweep, summarize, RunResult};
use crate::io;
use crate::optim::ModelKind;
use crate::stream::{gen_stream, write_stream_csv, Environment};

pub const OUT_DIR_ENV: &str = "UNLEARN_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "results";

#[derive(Debug, Parser)]
#[command(name = "ons-unlearn", version, about = "Deletion experiments on online learners with optimizer state")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the sweep and write rounds and summary files.
    Run(RunArgs),
    /// Check a config without running it and print the effective settings.
    Validate(RunArgs),
    /// Recompute the summary from a rounds file.
    Summarize(SummarizeArgs),
    /// Write one generated stream as CSV.
    Stream(StreamArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (falls back to the config, then $UNLEARN_OUT_DIR, then ./results).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seeds 0..N.
    #[arg(long, conflicts_with = "seed_list")]
    pub seeds: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Restrict to these models (ogd, ons).
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<ModelKind>>,
    /// Environments for every selected model (stationary, drifting).
    #[arg(long, value_delimiter = ',')]
    pub env: Option<Vec<Environment>>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub beta_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub format: Option<OutputFormat>,
    /// Worker threads for the sweep.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seeds: self.seeds,
            seed_list: self.seed_list.clone(),
            models: self.model.clone(),
            environments: self.env.clone(),
            alpha_grid: self.alpha_grid.clone(),
            beta_grid: self.beta_grid.clone(),
            format: self.format,
            parallelism: self.parallelism,
            output_dir: self.out.clone(),
        }
    }

    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// rounds.csv (or rounds.json) written by `run`.
    pub rounds: PathBuf,
    /// Config that produced the rounds; supplies tau and the metric settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Summary destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "stationary")]
    pub env: Environment,
    /// Destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl clap::ValueEnum for OutputFormat {
    fn value_variants<'a>() -> &'a [Self] {
        &[OutputFormat::Csv, OutputFormat::Json]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(match self {
            OutputFormat::Csv => clap::builder::PossibleValue::new("csv"),
            OutputFormat::Json => clap::builder::PossibleValue::new("json"),
        })
    }
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.run
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn cmd_validate(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let violations = cfg.violations();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("invalid: {v}");
        }
        return Err(Error::Config(format!("{} violation(s)", violations.len())));
    }
    let plan = cfg.plan();
    print!("{}", cfg.to_toml_string());
    println!(
        "# T={}, tau={}, |U|={}, {} seeds, {} cells",
        plan.stream.horizon,
        plan.deletion.tau,
        plan.deletion.rounds.as_ref().map_or(plan.deletion.count, Vec::len),
        plan.seeds.len(),
        plan.cells.len()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let plan = cfg.validate()?;
    log::info!("running {} cells x {} seeds", plan.cells.len(), plan.seeds.len());
    let units = run_sweep(&plan, cfg.run.parallelism)?;

    let mut runs: Vec<RunResult> = Vec::with_capacity(units.len());
    let mut failures = Vec::new();
    for unit in units {
        match unit.result {
            Ok(r) => runs.push(r),
            Err(e) => failures.push(e),
        }
    }
    let summary = summarize(&runs);
    let dir = output_dir(&cfg);
    for path in io::write_outputs(&dir, cfg.run.format, &runs, &summary)? {
        println!("wrote {}", path.display());
    }
    match failures.len() {
        0 => Ok(()),
        n => {
            for e in &failures {
                eprintln!("failed: {e}");
            }
            log::error!("{n} of {} runs failed", n + runs.len());
            Err(failures.swap_remove(0))
        }
    }
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let rows = io::read_rounds_path(&args.rounds)?;
    let summary = io::summary_from_rows(&rows, cfg.deletion.tau, &cfg.metrics)?;
    write_to(args.out.as_deref(), |w| io::write_summary(&summary, args.format, w))
}

fn cmd_stream(args: &StreamArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    let stream_cfg = crate::stream::StreamConfig { environment: args.env, seed: args.seed, ..cfg.plan().stream };
    let stream = gen_stream(&stream_cfg)?;
    write_to(args.out.as_deref(), |w| write_stream_csv(&stream, w))
}

fn write_to(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            let mut file = std::io::BufWriter::new(std::fs::File::create(p)?);
            f(&mut file)
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Stream(a) => cmd_stream(a),
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
