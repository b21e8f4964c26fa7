//! Command-line front end for `pkf-core`: CSV ingestion, JSON run
//! configuration, parallel batch runs across series and result files.

pub mod app;
pub mod batch;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use app::{execute, run, Cli, Command, Outcome};
pub use batch::batch_run;
pub use config::{AlgorithmName, ModelName, RunConfig};
pub use error::{CliError, Result};
pub use io::{read_series_csv, write_benchmark_csv, write_json, write_series_csv, write_truth_csv, Ingested};
pub use report::BatchSummary;
