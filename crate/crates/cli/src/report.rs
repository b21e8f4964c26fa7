//! Column-oriented result documents: every table is an object of equally
//! long arrays keyed by field name.

use pkf_core::bench::{AlgorithmOutput, AlgorithmSpec, QRatioSummary};
use pkf_core::pkf::ConvergenceRecord;
use pkf_core::{PkfResult, PkfState, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::ModelName;
use crate::io::SkippedSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkfTable {
    pub iteration: usize,
    pub time: Vec<f64>,
    pub filter_mean: Vec<f64>,
    pub filter_variance: Vec<f64>,
    pub process_uncertainty: Vec<f64>,
    pub w_data: Vec<f64>,
    pub w_model: Vec<f64>,
    pub w_filter: Vec<f64>,
    pub model_mean: Vec<f64>,
    pub model_variance: Vec<f64>,
}

impl From<&PkfState> for PkfTable {
    fn from(s: &PkfState) -> Self {
        Self {
            iteration: s.iteration,
            time: s.filter.grid().times().to_vec(),
            filter_mean: s.filter.means(),
            filter_variance: s.filter.variances(),
            process_uncertainty: s.process_uncertainty.clone(),
            w_data: s.weights.iter().map(|w| w.w_data).collect(),
            w_model: s.weights.iter().map(|w| w.w_model).collect(),
            w_filter: s.weights.iter().map(|w| w.w_filter).collect(),
            model_mean: s.model.iter().map(|m| m.mean()).collect(),
            model_variance: s.model.iter().map(|m| m.variance()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTable {
    pub time: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl From<&Trajectory> for TrajectoryTable {
    fn from(t: &Trajectory) -> Self {
        Self {
            time: t.grid().times().to_vec(),
            mean: t.means(),
            variance: t.variances(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeriesResult {
    Pkf {
        #[serde(rename = "final")]
        final_state: PkfTable,
        /// One block per iteration, when retained.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        history: Option<Vec<PkfTable>>,
        convergence: Vec<ConvergenceRecord>,
    },
    Trajectory(TrajectoryTable),
}

impl From<&PkfResult> for SeriesResult {
    fn from(r: &PkfResult) -> Self {
        SeriesResult::Pkf {
            final_state: (&r.final_state).into(),
            history: r.history.as_ref().map(|h| h.iter().map(PkfTable::from).collect()),
            convergence: r.convergence.clone(),
        }
    }
}

impl From<&AlgorithmOutput> for SeriesResult {
    fn from(out: &AlgorithmOutput) -> Self {
        match out {
            AlgorithmOutput::Pkf(r) => r.as_ref().into(),
            AlgorithmOutput::Trajectory(t) => SeriesResult::Trajectory(t.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub series_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SeriesResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub spec: AlgorithmSpec,
    pub model: ModelName,
    pub series: Vec<SeriesReport>,
    pub skipped: Vec<SkippedSeries>,
    pub failed: usize,
    /// Present for PKF runs with at least one successful series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ratio: Option<QRatioSummary>,
}
