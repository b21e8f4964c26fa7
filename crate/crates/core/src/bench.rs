//! MSE metric, the multi-algorithm benchmark runner and the per-series
//! `log(Q / V(Z))` summary.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_adaptive_kf, run_ipls, run_ukf, run_urts, UtParams};
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::pkf::{run_pkf, PkfOptions, PkfResult};
use crate::series::{GroundTruth, TimeGrid, TimeSeriesData, Trajectory, VARIANCE_FLOOR};
use crate::synth::{simulate_birth_death, BirthDeathScenario};

fn check_grids(a: &TimeGrid, b: &TimeGrid) -> Result<()> {
    if a.times() != b.times() {
        return Err(Error::InvalidData(format!(
            "grid mismatch: {} vs {} timepoints",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Per-timepoint `(E(F_t) - N(t))^2`.
pub fn squared_errors(filter: &Trajectory, truth: &GroundTruth) -> Result<Vec<f64>> {
    check_grids(filter.grid(), truth.grid())?;
    Ok(filter
        .estimates()
        .iter()
        .zip(truth.values())
        .map(|(e, n)| (e.mean - n) * (e.mean - n))
        .collect())
}

pub fn mse(filter: &Trajectory, truth: &GroundTruth) -> Result<f64> {
    let se = squared_errors(filter, truth)?;
    Ok(se.iter().sum::<f64>() / se.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    Pkf { iterations: usize },
    Kf { q: f64 },
    Ukf { q: f64 },
    Urts { q: f64 },
    Ipls { q: f64, iterations: usize },
}

impl AlgorithmSpec {
    pub fn family(&self) -> &'static str {
        match self {
            AlgorithmSpec::Pkf { .. } => "PKF",
            AlgorithmSpec::Kf { .. } => "Adaptive Non-linear KF",
            AlgorithmSpec::Ukf { .. } => "UKF",
            AlgorithmSpec::Urts { .. } => "Unscented RTS",
            AlgorithmSpec::Ipls { .. } => "IPLS",
        }
    }

    pub fn parameters(&self) -> String {
        match *self {
            AlgorithmSpec::Pkf { iterations } => format!("iterations={iterations}"),
            AlgorithmSpec::Kf { q } | AlgorithmSpec::Ukf { q } | AlgorithmSpec::Urts { q } => format!("q={q}"),
            AlgorithmSpec::Ipls { q, iterations } => format!("q={q};iterations={iterations}"),
        }
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.family(), self.parameters())
    }
}

/// The twelve published comparison configurations.
pub fn comparison_specs() -> Vec<AlgorithmSpec> {
    use AlgorithmSpec::*;
    vec![
        Kf { q: 1.0 },
        Kf { q: 10.0 },
        Ukf { q: 1.0 },
        Ukf { q: 10.0 },
        Urts { q: 1.0 },
        Urts { q: 10.0 },
        Ipls { q: 1.0, iterations: 1 },
        Ipls { q: 1.0, iterations: 10 },
        Ipls { q: 10.0, iterations: 1 },
        Ipls {
            q: 10.0,
            iterations: 10,
        },
        Pkf { iterations: 1 },
        Pkf { iterations: 10 },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmOutput {
    Pkf(Box<PkfResult>),
    Trajectory(Trajectory),
}

impl AlgorithmOutput {
    pub fn trajectory(&self) -> &Trajectory {
        match self {
            AlgorithmOutput::Pkf(r) => &r.final_state.filter,
            AlgorithmOutput::Trajectory(t) => t,
        }
    }
}

pub fn run_algorithm(
    spec: &AlgorithmSpec,
    data: &TimeSeriesData,
    kind: ModelKind,
    ut: &UtParams,
    retain_history: bool,
) -> Result<AlgorithmOutput> {
    Ok(match *spec {
        AlgorithmSpec::Pkf { iterations } => {
            let options = PkfOptions {
                iterations,
                retain_history,
                early_stop: None,
            };
            AlgorithmOutput::Pkf(Box::new(run_pkf(data, kind, &options)?))
        }
        AlgorithmSpec::Kf { q } => AlgorithmOutput::Trajectory(run_adaptive_kf(data, kind, q)?),
        AlgorithmSpec::Ukf { q } => AlgorithmOutput::Trajectory(run_ukf(data, kind, q, ut)?),
        AlgorithmSpec::Urts { q } => AlgorithmOutput::Trajectory(run_urts(data, kind, q, ut)?),
        AlgorithmSpec::Ipls { q, iterations } => AlgorithmOutput::Trajectory(run_ipls(data, kind, q, iterations, ut)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub spec: AlgorithmSpec,
    /// `None` when the algorithm failed; see `error`.
    pub mse: Option<f64>,
    pub error: Option<String>,
    pub squared_errors: Vec<f64>,
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub scenario: BirthDeathScenario,
    pub seed: u64,
    pub truth: GroundTruth,
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    pub fn row(&self, spec: &AlgorithmSpec) -> Option<&BenchmarkRow> {
        self.rows.iter().find(|r| &r.spec == spec)
    }
}

/// Simulates the scenario once and runs every spec on the same data with the
/// birth–death model. A failing spec yields a row with `error` set.
pub fn run_benchmark(scenario: &BirthDeathScenario, specs: &[AlgorithmSpec]) -> Result<BenchmarkReport> {
    run_benchmark_with(scenario, specs, &UtParams::default())
}

pub fn run_benchmark_with(
    scenario: &BirthDeathScenario,
    specs: &[AlgorithmSpec],
    ut: &UtParams,
) -> Result<BenchmarkReport> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no algorithm specs given".into()));
    }
    let (truth, data) = simulate_birth_death(scenario)?;
    let rows = specs
        .par_iter()
        .map(|spec| {
            let outcome = run_algorithm(spec, &data, ModelKind::BirthDeath, ut, false).and_then(|out| {
                let traj = out.trajectory().clone();
                let se = squared_errors(&traj, &truth)?;
                Ok((traj, se))
            });
            match outcome {
                Ok((traj, se)) => BenchmarkRow {
                    spec: *spec,
                    mse: Some(se.iter().sum::<f64>() / se.len() as f64),
                    error: None,
                    squared_errors: se,
                    trajectory: Some(traj),
                },
                Err(e) => {
                    log::warn!("{spec} failed: {e}");
                    BenchmarkRow {
                        spec: *spec,
                        mse: None,
                        error: Some(e.to_string()),
                        squared_errors: Vec::new(),
                        trajectory: None,
                    }
                }
            }
        })
        .collect();
    Ok(BenchmarkReport {
        scenario: scenario.clone(),
        seed: scenario.seed,
        truth,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRatio {
    pub series_id: String,
    pub label: String,
    pub mean_log_ratio: f64,
    pub mean_data_variance: f64,
    /// 1..=10, ascending in `mean_data_variance`.
    pub variance_decile: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRatio {
    pub label: String,
    /// `None` for label-only groups.
    pub variance_decile: Option<usize>,
    pub count: usize,
    pub mean_log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QRatioSummary {
    pub series: Vec<SeriesRatio>,
    pub by_label: Vec<GroupRatio>,
    pub by_label_and_decile: Vec<GroupRatio>,
}

impl QRatioSummary {
    pub fn label_mean(&self, label: &str) -> Option<f64> {
        self.by_label
            .iter()
            .find(|g| g.label == label)
            .map(|g| g.mean_log_ratio)
    }
}

/// Mean over t of `ln(max(Q_t, floor) / max(V(Z_t), floor))`.
pub fn mean_log_ratio(q: &[f64], data: &TimeSeriesData) -> f64 {
    let z = data.summaries();
    q.iter()
        .zip(&z)
        .map(|(q, z)| (q.max(VARIANCE_FLOOR) / z.variance.max(VARIANCE_FLOOR)).ln())
        .sum::<f64>()
        / z.len() as f64
}

fn group(label: &str, decile: Option<usize>, members: &[&SeriesRatio]) -> GroupRatio {
    GroupRatio {
        label: label.to_string(),
        variance_decile: decile,
        count: members.len(),
        mean_log_ratio: members.iter().map(|s| s.mean_log_ratio).sum::<f64>() / members.len() as f64,
    }
}

pub fn q_ratio_summary(results: &[(String, &PkfResult, &TimeSeriesData)]) -> Result<QRatioSummary> {
    if results.is_empty() {
        return Err(Error::InvalidData("no results to summarise".into()));
    }
    let mut series: Vec<SeriesRatio> = results
        .iter()
        .map(|(label, result, data)| {
            let z = data.summaries();
            SeriesRatio {
                series_id: data.series_id().to_string(),
                label: label.clone(),
                mean_log_ratio: mean_log_ratio(&result.final_state.process_uncertainty, data),
                mean_data_variance: z.iter().map(|e| e.variance).sum::<f64>() / z.len() as f64,
                variance_decile: 0,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series[a].mean_data_variance.total_cmp(&series[b].mean_data_variance));
    let n = series.len();
    for (rank, &i) in order.iter().enumerate() {
        series[i].variance_decile = rank * 10 / n + 1;
    }

    let mut labels: Vec<&str> = Vec::new();
    for s in &series {
        if !labels.contains(&s.label.as_str()) {
            labels.push(&s.label);
        }
    }
    let mut by_label = Vec::new();
    let mut by_label_and_decile = Vec::new();
    for label in &labels {
        let members: Vec<&SeriesRatio> = series.iter().filter(|s| s.label == *label).collect();
        by_label.push(group(label, None, &members));
        for decile in 1..=10 {
            let bin: Vec<&SeriesRatio> = members
                .iter()
                .copied()
                .filter(|s| s.variance_decile == decile)
                .collect();
            if !bin.is_empty() {
                by_label_and_decile.push(group(label, Some(decile), &bin));
            }
        }
    }
    Ok(QRatioSummary {
        series,
        by_label,
        by_label_and_decile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::GaussianEstimate;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::uniform(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn mse_examples() {
        let truth = GroundTruth::new(grid(4), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let exact = Trajectory::new(
            grid(4),
            truth.values().iter().map(|&v| GaussianEstimate::point(v)).collect(),
        )
        .unwrap();
        assert_eq!(mse(&exact, &truth).unwrap(), 0.0);
        let shifted = Trajectory::new(
            grid(4),
            truth
                .values()
                .iter()
                .map(|&v| GaussianEstimate::point(v + 2.0))
                .collect(),
        )
        .unwrap();
        assert_eq!(mse(&shifted, &truth).unwrap(), 4.0);
        let other = GroundTruth::new(grid(5), vec![0.0; 5]).unwrap();
        assert!(matches!(mse(&exact, &other), Err(Error::InvalidData(_))));
    }

    #[test]
    fn twelve_specs() {
        let specs = comparison_specs();
        assert_eq!(specs.len(), 12);
        assert!(specs.contains(&AlgorithmSpec::Pkf { iterations: 10 }));
    }

    #[test]
    fn empty_specs_rejected() {
        assert!(run_benchmark(&BirthDeathScenario::default(), &[]).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let s = serde_json::to_string(&AlgorithmSpec::Ipls { q: 1.0, iterations: 10 }).unwrap();
        assert_eq!(s, r#"{"algorithm":"ipls","q":1.0,"iterations":10}"#);
    }
}
