//! Command-line surface.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pkf_core::bench::{comparison_specs, run_benchmark_with};
use pkf_core::synth::{simulate_birth_death, simulate_gene_panel};
use pkf_core::TimeSeriesData;

use crate::batch::{batch_run, pool};
use crate::config::{AlgorithmName, ModelName, RunConfig};
use crate::error::{CliError, Result};
use crate::io::{
    read_labels_csv, read_series_csv, write_benchmark_csv, write_json, write_labels_csv, write_series_csv,
    write_truth_csv, Ingested,
};
use crate::report::BatchSummary;

#[derive(Debug, Parser)]
#[command(
    name = "pkf",
    version,
    about = "Pathspace Kalman filter runs, baselines and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario as series CSV plus ground truth.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Ground-truth CSV; defaults to `<output>.truth.csv`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Gene labels CSV (const-reg only); defaults to `<output>.labels.csv`.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Run one algorithm on every series of an input CSV.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the twelve comparison configurations on the birth–death scenario
    /// and write an `algorithm,parameters,mse` table.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        /// Full report with trajectories and per-timepoint errors, as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Gene-panel workflow: run every series and summarise log(Q / V(Z)) by
    /// label and data-variance decile. Without `--input` a synthetic panel is
    /// simulated and the model defaults to const-reg.
    Batch {
        #[command(flatten)]
        common: CommonArgs,
        /// `series_id,label` CSV used to group the summary.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// PKF with every iteration retained, for convergence plots. Without
    /// `--input` the birth–death scenario is simulated.
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmName>,
    #[arg(long, value_enum)]
    pub model: Option<ModelName>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub retain_history: bool,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(a) = self.algorithm {
            c.algorithm = a;
        }
        if let Some(m) = self.model {
            c.model = m;
        }
        if let Some(n) = self.iterations {
            c.iterations = n;
        }
        if let Some(q) = self.q {
            c.q = q;
        }
        if let Some(p) = &self.input {
            c.input = Some(p.clone());
        }
        if let Some(p) = &self.output {
            c.output = Some(p.clone());
        }
        if let Some(s) = self.seed {
            c.seed = Some(s);
        }
        if let Some(j) = self.jobs {
            c.jobs = j;
        }
        c.retain_history |= self.retain_history;
        c.validate()?;
        Ok(c)
    }
}

/// How a command ended; `failed` counts series that errored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub failed: usize,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 {
            1
        } else {
            0
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("--{what} is required")))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(Default::default, |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn ingest(config: &RunConfig) -> Result<Ingested> {
    let path = required(&config.input, "input")?;
    let ingested = read_series_csv(path)?;
    log::info!(
        "{}: {} rows, {} series, {} skipped",
        path.display(),
        ingested.rows,
        ingested.series.len(),
        ingested.skipped.len()
    );
    Ok(ingested)
}

fn finish_batch(config: &RunConfig, mut summary: BatchSummary, ingested: Option<Ingested>) -> Result<Outcome> {
    if let Some(i) = ingested {
        summary.skipped = i.skipped;
    }
    write_json(required(&config.output, "output")?, &summary)?;
    Ok(Outcome { failed: summary.failed })
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Simulate { common, truth, labels } => {
            let config = common.resolve()?;
            let output = required(&config.output, "output")?;
            let truth = truth.clone().unwrap_or_else(|| sibling(output, "truth"));
            match config.model {
                ModelName::BirthDeath => {
                    let (t, data) = simulate_birth_death(&config.birth_death())?;
                    write_series_csv(output, std::slice::from_ref(&data))?;
                    write_truth_csv(&truth, &[(data.series_id(), &t)])?;
                }
                ModelName::ConstReg => {
                    let panel = simulate_gene_panel(&config.gene_panel())?;
                    let data: Vec<TimeSeriesData> = panel.iter().map(|g| g.data.clone()).collect();
                    write_series_csv(output, &data)?;
                    let truths: Vec<_> = panel.iter().map(|g| (g.data.series_id(), &g.truth)).collect();
                    write_truth_csv(&truth, &truths)?;
                    let names: Vec<_> = panel.iter().map(|g| (g.data.series_id(), g.label.name())).collect();
                    write_labels_csv(&labels.clone().unwrap_or_else(|| sibling(output, "labels")), &names)?;
                }
            }
            Ok(Outcome::default())
        }
        Command::Run { common } => {
            let config = common.resolve()?;
            let ingested = ingest(&config)?;
            let summary = batch_run(&config, &ingested.series, None)?;
            finish_batch(&config, summary, Some(ingested))
        }
        Command::Bench { common, report } => {
            let config = common.resolve()?;
            let output = required(&config.output, "output")?;
            let result = pool(config.jobs)?
                .install(|| run_benchmark_with(&config.birth_death(), &comparison_specs(), &config.ut))?;
            write_benchmark_csv(output, Some(&result))?;
            if let Some(path) = report {
                write_json(path, &result)?;
            }
            Ok(Outcome {
                failed: result.rows.iter().filter(|r| r.error.is_some()).count(),
            })
        }
        Command::Batch { common, labels } => {
            let mut config = common.resolve()?;
            let (series, mut names, ingested) = if config.input.is_some() {
                let ingested = ingest(&config)?;
                (ingested.series.clone(), None, Some(ingested))
            } else {
                if common.model.is_none() && common.config.is_none() {
                    config.model = ModelName::ConstReg;
                }
                let panel = simulate_gene_panel(&config.gene_panel())?;
                let names: Vec<String> = panel.iter().map(|g| g.label.name().to_string()).collect();
                (panel.into_iter().map(|g| g.data).collect::<Vec<_>>(), Some(names), None)
            };
            if let Some(path) = labels {
                let table: HashMap<String, String> = read_labels_csv(path)?;
                names = Some(
                    series
                        .iter()
                        .map(|s| table.get(s.series_id()).cloned().unwrap_or_else(|| "unlabelled".into()))
                        .collect(),
                );
            }
            let summary = batch_run(&config, &series, names.as_deref())?;
            finish_batch(&config, summary, ingested)
        }
        Command::Convergence { common } => {
            let mut config = common.resolve()?;
            config.algorithm = AlgorithmName::Pkf;
            config.retain_history = true;
            let (series, ingested) = if config.input.is_some() {
                let ingested = ingest(&config)?;
                (ingested.series.clone(), Some(ingested))
            } else {
                (vec![simulate_birth_death(&config.birth_death())?.1], None)
            };
            let summary = batch_run(&config, &series, None)?;
            finish_batch(&config, summary, ingested)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            if outcome.failed > 0 {
                eprintln!("{} series failed", outcome.failed);
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
