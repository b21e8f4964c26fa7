use pkf_core::bench::{q_ratio_summary, run_algorithm, AlgorithmOutput};
use pkf_core::{PkfResult, TimeSeriesData};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::{BatchSummary, SeriesReport};

pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))
}

/// Runs the configured algorithm on every series over `config.jobs` workers.
/// Each series is computed sequentially and results keep input order, so the
/// summary does not depend on the worker count. A failing series is recorded
/// in its report and counted in `failed`.
///
/// `labels`, if given, pairs with `series` and groups the process-uncertainty
/// summary; otherwise every series is labelled "all".
pub fn batch_run(config: &RunConfig, series: &[TimeSeriesData], labels: Option<&[String]>) -> Result<BatchSummary> {
    config.validate()?;
    if series.is_empty() {
        return Err(CliError::Config("no series to run".into()));
    }
    if labels.is_some_and(|l| l.len() != series.len()) {
        return Err(CliError::Config("one label per series required".into()));
    }
    let spec = config.spec();
    let kind = config.kind();
    let outputs: Vec<_> = pool(config.jobs)?.install(|| {
        series
            .par_iter()
            .map(|data| run_algorithm(&spec, data, kind, &config.ut, config.retain_history))
            .collect()
    });
    let label_of = |i: usize| labels.map_or("all", |l| l[i].as_str()).to_string();

    let pkf: Vec<(String, &PkfResult, &TimeSeriesData)> = outputs
        .iter()
        .enumerate()
        .filter_map(|(i, out)| match out {
            Ok(AlgorithmOutput::Pkf(r)) => Some((label_of(i), r.as_ref(), &series[i])),
            _ => None,
        })
        .collect();
    let q_ratio = if pkf.is_empty() {
        None
    } else {
        Some(q_ratio_summary(&pkf)?)
    };

    let reports: Vec<SeriesReport> = outputs
        .iter()
        .zip(series)
        .enumerate()
        .map(|(i, (out, data))| {
            if let Err(e) = out {
                log::warn!("series {} failed: {e}", data.series_id());
            }
            SeriesReport {
                series_id: data.series_id().to_string(),
                label: labels.map(|_| label_of(i)),
                error: out.as_ref().err().map(|e| e.to_string()),
                result: out.as_ref().ok().map(Into::into),
            }
        })
        .collect();
    Ok(BatchSummary {
        spec,
        model: config.model,
        failed: reports.iter().filter(|r| r.error.is_some()).count(),
        series: reports,
        skipped: Vec::new(),
        q_ratio,
    })
}
