//! CSV ingestion and JSON/CSV result files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pkf_core::bench::BenchmarkReport;
use pkf_core::{GroundTruth, TimeGrid, TimeSeriesData};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A series dropped at ingestion: too few timepoints, or samples whose
/// summary is unusable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedSeries {
    pub series_id: String,
    pub timepoints: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    /// In order of first appearance in the file.
    pub series: Vec<TimeSeriesData>,
    pub skipped: Vec<SkippedSeries>,
    pub rows: usize,
}

const SERIES_HEADER: [&str; 3] = ["series_id", "time", "value"];
const MIN_TIMEPOINTS: usize = 3;

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

fn parse_number(path: &Path, line: u64, field: &str, name: &str) -> Result<f64> {
    let x: f64 = field
        .parse()
        .map_err(|_| parse_error(path, line, format!("{name} {field:?} is not a number")))?;
    if !x.is_finite() {
        return Err(parse_error(path, line, format!("{name} {field:?} is not finite")));
    }
    Ok(x)
}

/// Reads long-format `series_id,time,value` rows. Rows of one series may be
/// interleaved with others and in any time order; repeated times are
/// replicates, kept in file order.
pub fn read_series_csv(path: &Path) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(SERIES_HEADER) {
        return Err(parse_error(
            path,
            1,
            format!("expected header {}", SERIES_HEADER.join(",")),
        ));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows_by_id: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = &record[0];
        if id.is_empty() {
            return Err(parse_error(path, line, "empty series_id"));
        }
        let time = parse_number(path, line, &record[1], "time")?;
        let value = parse_number(path, line, &record[2], "value")?;
        rows_by_id
            .entry(id.to_string())
            .or_insert_with(|| {
                order.push(id.to_string());
                Vec::new()
            })
            .push((time, value));
        rows += 1;
    }

    let mut series = Vec::new();
    let mut skipped = Vec::new();
    for id in order {
        let mut points = rows_by_id.remove(&id).expect("recorded on first sight");
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut times: Vec<f64> = Vec::new();
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for (t, v) in points {
            if times.last() == Some(&t) {
                samples.last_mut().expect("paired with times").push(v);
            } else {
                times.push(t);
                samples.push(vec![v]);
            }
        }
        let timepoints = times.len();
        let built = if timepoints < MIN_TIMEPOINTS {
            Err(format!("{timepoints} timepoints, need {MIN_TIMEPOINTS}"))
        } else {
            TimeGrid::new(times)
                .and_then(|grid| TimeSeriesData::new(id.clone(), grid, samples))
                .map_err(|e| e.to_string())
        };
        match built {
            Ok(s) => series.push(s),
            Err(reason) => {
                log::warn!("skipping series {id}: {reason}");
                skipped.push(SkippedSeries {
                    series_id: id,
                    timepoints,
                    reason,
                });
            }
        }
    }
    Ok(Ingested { series, skipped, rows })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn finish<W: Write>(path: &Path, writer: csv::Writer<W>) -> Result<()> {
    writer
        .into_inner()
        .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?
        .flush()
        .map_err(|e| CliError::io(path, e))
}

// `f64` Display prints the shortest decimal that parses back to the same
// bits, so every value survives a write/read cycle exactly.
pub fn write_series_csv(path: &Path, series: &[TimeSeriesData]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SERIES_HEADER).map_err(|e| csv_error(path, e))?;
    for s in series {
        for (t, replicates) in s.grid().times().iter().zip(s.samples()) {
            for v in replicates {
                w.write_record([s.series_id(), &t.to_string(), &v.to_string()])
                    .map_err(|e| csv_error(path, e))?;
            }
        }
    }
    finish(path, w)
}

pub fn write_truth_csv(path: &Path, truths: &[(&str, &GroundTruth)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["series_id", "time", "true_value"])
        .map_err(|e| csv_error(path, e))?;
    for (id, truth) in truths {
        for (t, y) in truth.grid().times().iter().zip(truth.values()) {
            w.write_record([*id, &t.to_string(), &y.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

pub fn write_labels_csv(path: &Path, labels: &[(&str, &str)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["series_id", "label"]).map_err(|e| csv_error(path, e))?;
    for (id, label) in labels {
        w.write_record([*id, *label]).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `series_id,label` pairs.
pub fn read_labels_csv(path: &Path) -> Result<HashMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().ne(["series_id", "label"]) {
        return Err(parse_error(path, 1, "expected header series_id,label"));
    }
    let mut out = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        out.insert(record[0].to_string(), record[1].to_string());
    }
    Ok(out)
}

/// `algorithm,parameters,mse`, one line per row; failed rows leave `mse`
/// empty.
pub fn write_benchmark_csv(path: &Path, report: Option<&BenchmarkReport>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["algorithm", "parameters", "mse"])
        .map_err(|e| csv_error(path, e))?;
    for row in report.map_or(&[][..], |r| &r.rows) {
        let mse = row.mse.map(|m| m.to_string()).unwrap_or_default();
        w.write_record([row.spec.family(), &row.spec.parameters(), &mse])
            .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::io(path, e.into()))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line() as u64, e.to_string()))
}
