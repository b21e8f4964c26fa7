//! Pathspace Kalman filter.
//!
//! Every iteration re-filters the whole trajectory. At each timepoint the new
//! estimate is a convex combination of three Gaussians: the data summary, the
//! internal model's prediction (fitted to the previous iteration's path), and
//! the previous iteration's estimate. The three weights minimise the combined
//! variance and have a closed form. The process uncertainty `Q_t` is
//! relaxed toward the model/data discrepancy with gain `w_data + w_model`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{InternalModel, ModelKind, ModelPrediction, SplineModel};
use crate::series::{median, GaussianEstimate, TimeSeriesData, Trajectory, VARIANCE_FLOOR};

pub const DEFAULT_ITERATIONS: usize = 10;

/// Data, model and previous-filter weights; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkfWeights {
    pub w_data: f64,
    pub w_model: f64,
    pub w_filter: f64,
}

impl PkfWeights {
    pub const UNIFORM: PkfWeights = PkfWeights {
        w_data: 1.0 / 3.0,
        w_model: 1.0 / 3.0,
        w_filter: 1.0 / 3.0,
    };

    /// All weight on the data, used for the initial state.
    pub const DATA_ONLY: PkfWeights = PkfWeights {
        w_data: 1.0,
        w_model: 0.0,
        w_filter: 0.0,
    };

    pub fn sum(&self) -> f64 {
        self.w_data + self.w_model + self.w_filter
    }
}

/// Closed-form minimiser of
/// `w^2 C + w_m^2 B + (1 - w - w_m)^2 A`
/// with `A` the previous filter variance, `B` model variance plus process
/// uncertainty and `C` the data variance.
pub fn pkf_weights(v_filter_prev: f64, v_model_plus_q: f64, v_data: f64) -> Result<PkfWeights> {
    let (a, b, c) = (v_filter_prev, v_model_plus_q, v_data);
    for (name, v) in [("filter", a), ("model", b), ("data", c)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} variance must be finite and >= 0, got {v}"
            )));
        }
    }
    let scale = a.max(b).max(c);
    if scale == 0.0 {
        return Ok(PkfWeights::UNIFORM);
    }
    let (a, b, c) = (a / scale, b / scale, c / scale);
    let denom = a * b + b * c + c * a;
    if denom == 0.0 {
        return Ok(PkfWeights::UNIFORM);
    }
    Ok(PkfWeights {
        w_data: a * b / denom,
        w_model: a * c / denom,
        w_filter: b * c / denom,
    })
}

/// `q_prev + (w_data + w_model) * (loss - q_prev)`.
pub fn update_process_uncertainty(q_prev: f64, w_data: f64, w_model: f64, loss: f64) -> Result<f64> {
    let gain = w_data + w_model;
    if !(-1e-12..=1.0 + 1e-12).contains(&gain) {
        return Err(Error::InvalidParameter(format!(
            "process-uncertainty gain {gain} outside [0, 1]"
        )));
    }
    if !(q_prev >= 0.0) || !(loss >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "process uncertainty ({q_prev}) and loss ({loss}) must be >= 0"
        )));
    }
    Ok((q_prev + gain * (loss - q_prev)).max(0.0))
}

/// Discrepancy between model and data driving the process uncertainty.
pub fn model_data_loss(model: &ModelPrediction, data: &GaussianEstimate) -> f64 {
    (model.mean() - data.mean).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub estimate: GaussianEstimate,
    pub weights: PkfWeights,
    pub process_uncertainty: f64,
}

/// One timepoint of one iteration.
pub fn pkf_step(
    prev_filter: &GaussianEstimate,
    q_prev: f64,
    data: &GaussianEstimate,
    model: &ModelPrediction,
) -> Result<StepOutput> {
    let a = prev_filter.variance;
    let b = model.variance() + q_prev;
    let c = data.variance;
    let weights = pkf_weights(a, b, c)?;
    let PkfWeights {
        w_data,
        w_model,
        w_filter,
    } = weights;
    let mean = w_data * data.mean + w_model * model.mean() + w_filter * prev_filter.mean;
    let variance = w_data * w_data * c + w_model * w_model * b + w_filter * w_filter * a;
    let q = update_process_uncertainty(q_prev, w_data, w_model, model_data_loss(model, data))?;
    Ok(StepOutput {
        estimate: GaussianEstimate::new(mean, variance)?,
        weights,
        process_uncertainty: q,
    })
}

/// Filter trajectory, process uncertainty and weights after one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PkfState {
    pub iteration: usize,
    pub filter: Trajectory,
    pub process_uncertainty: Vec<f64>,
    pub weights: Vec<PkfWeights>,
    /// Internal-model predictions used in this iteration (the data summaries
    /// at iteration 0).
    pub model: Vec<ModelPrediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub max_delta_q: f64,
    pub max_q: f64,
    pub max_filter_variance: f64,
}

impl ConvergenceRecord {
    /// `max |dQ| / (max Q + floor)`.
    pub fn relative_delta_q(&self) -> f64 {
        self.max_delta_q / (self.max_q + VARIANCE_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PkfResult {
    pub final_state: PkfState,
    /// States of iterations `1..=n` when retained.
    pub history: Option<Vec<PkfState>>,
    pub convergence: Vec<ConvergenceRecord>,
}

impl PkfResult {
    pub fn iterations(&self) -> usize {
        self.final_state.iteration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkfOptions {
    pub iterations: usize,
    pub retain_history: bool,
    /// Stop once `max |dQ| / (max Q + floor)` drops below this value.
    pub early_stop: Option<f64>,
}

impl Default for PkfOptions {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            retain_history: false,
            early_stop: None,
        }
    }
}

impl PkfOptions {
    pub fn with_iterations(iterations: usize) -> Self {
        Self {
            iterations,
            ..Self::default()
        }
    }
}

/// Runs the filter with the ODE-spline model of the given kind.
pub fn run_pkf(data: &TimeSeriesData, kind: ModelKind, options: &PkfOptions) -> Result<PkfResult> {
    run_pkf_with_model(data, &SplineModel::new(kind), options)
}

pub fn run_pkf_with_model<M: InternalModel + ?Sized>(
    data: &TimeSeriesData,
    model: &M,
    options: &PkfOptions,
) -> Result<PkfResult> {
    if options.iterations < 1 {
        return Err(Error::InvalidConfig("PKF needs at least one iteration".into()));
    }
    let summaries = data.summaries();
    let grid = data.grid().clone();
    let mut state = PkfState {
        iteration: 0,
        filter: Trajectory::new(grid.clone(), summaries.clone())?,
        process_uncertainty: summaries.iter().map(|z| z.variance).collect(),
        weights: vec![PkfWeights::DATA_ONLY; summaries.len()],
        model: summaries.iter().map(|&estimate| ModelPrediction { estimate }).collect(),
    };
    let mut history = options.retain_history.then(Vec::new);
    let mut convergence = Vec::with_capacity(options.iterations);

    for iteration in 1..=options.iterations {
        let predictions = (0..summaries.len())
            .map(|t| model.predict(&state.filter, t))
            .collect::<Result<Vec<_>>>()?;
        let mut estimates = Vec::with_capacity(summaries.len());
        let mut q = Vec::with_capacity(summaries.len());
        let mut weights = Vec::with_capacity(summaries.len());
        for (t, (z, m)) in summaries.iter().zip(&predictions).enumerate() {
            let prev = state.filter.estimates()[t];
            let out = pkf_step(&prev, state.process_uncertainty[t], z, m).map_err(|e| Error::at(t, e))?;
            estimates.push(out.estimate);
            q.push(out.process_uncertainty);
            weights.push(out.weights);
        }
        let record = ConvergenceRecord {
            iteration,
            max_delta_q: q
                .iter()
                .zip(&state.process_uncertainty)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
            max_q: q.iter().copied().fold(0.0, f64::max),
            max_filter_variance: estimates.iter().map(|e| e.variance).fold(0.0, f64::max),
        };
        convergence.push(record);
        state = PkfState {
            iteration,
            filter: Trajectory::new(grid.clone(), estimates)?,
            process_uncertainty: q,
            weights,
            model: predictions,
        };
        if let Some(h) = history.as_mut() {
            h.push(state.clone());
        }
        if options.early_stop.is_some_and(|tol| record.relative_delta_q() < tol) {
            break;
        }
    }

    Ok(PkfResult {
        final_state: state,
        history,
        convergence,
    })
}

/// Quadrants of (process uncertainty, data variance).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    AccurateModelReliableData,
    InaccurateModelReliableData,
    AccurateModelNoisyData,
    InaccurateModelNoisyData,
}

/// Values at or above a threshold count as high.
pub fn classify_regime(q: f64, v_data: f64, q_threshold: f64, v_threshold: f64) -> RegimeLabel {
    debug_assert!(q_threshold > 0.0 && v_threshold > 0.0);
    match (q >= q_threshold, v_data >= v_threshold) {
        (false, false) => RegimeLabel::AccurateModelReliableData,
        (true, false) => RegimeLabel::InaccurateModelReliableData,
        (false, true) => RegimeLabel::AccurateModelNoisyData,
        (true, true) => RegimeLabel::InaccurateModelNoisyData,
    }
}

/// Per-timepoint regimes of a finished run. Thresholds default to the series
/// medians of `Q_t` and `V(Z_t)`.
pub fn classify_regimes(result: &PkfResult, data: &TimeSeriesData, thresholds: Option<(f64, f64)>) -> Vec<RegimeLabel> {
    let q = &result.final_state.process_uncertainty;
    let v: Vec<f64> = data.summaries().iter().map(|z| z.variance).collect();
    let (q_thr, v_thr) = thresholds.unwrap_or_else(|| {
        (
            median(q).unwrap_or(VARIANCE_FLOOR).max(VARIANCE_FLOOR),
            median(&v).unwrap_or(VARIANCE_FLOOR).max(VARIANCE_FLOOR),
        )
    });
    q.iter()
        .zip(&v)
        .map(|(&q, &v)| classify_regime(q, v, q_thr, v_thr))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeGrid;
    use approx::assert_relative_eq;

    fn pred(mean: f64, variance: f64) -> ModelPrediction {
        ModelPrediction {
            estimate: GaussianEstimate::new(mean, variance).unwrap(),
        }
    }

    #[test]
    fn weights_examples() {
        let w = pkf_weights(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(w.w_data, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(w.w_model, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(w.w_filter, 1.0 / 3.0, max_relative = 1e-15);

        let w = pkf_weights(0.0, 2.0, 3.0).unwrap();
        assert_eq!((w.w_data, w.w_model, w.w_filter), (0.0, 0.0, 1.0));

        assert_eq!(pkf_weights(0.0, 0.0, 0.0).unwrap(), PkfWeights::UNIFORM);
        assert!(matches!(pkf_weights(-1.0, 1.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(pkf_weights(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn weights_survive_huge_variances() {
        let w = pkf_weights(1e300, 1e300, 1e300).unwrap();
        assert_relative_eq!(w.w_data, 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn q_update_examples() {
        assert_eq!(update_process_uncertainty(2.0, 0.0, 0.0, 7.0).unwrap(), 2.0);
        assert_eq!(update_process_uncertainty(2.0, 0.6, 0.4, 7.0).unwrap(), 7.0);
        assert_eq!(update_process_uncertainty(2.0, 0.25, 0.25, 4.0).unwrap(), 3.0);
        assert!(update_process_uncertainty(2.0, 0.8, 0.4, 4.0).is_err());
        assert!(update_process_uncertainty(-1.0, 0.1, 0.1, 4.0).is_err());
    }

    #[test]
    fn step_with_equal_variances() {
        let out = pkf_step(
            &GaussianEstimate::new(0.0, 1.0).unwrap(),
            0.0,
            &GaussianEstimate::new(3.0, 1.0).unwrap(),
            &pred(6.0, 1.0),
        )
        .unwrap();
        assert_relative_eq!(out.estimate.mean, 3.0, max_relative = 1e-15);
        assert_relative_eq!(out.estimate.variance, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(out.estimate.variance, out.weights.w_filter * 1.0, max_relative = 1e-15);
        // loss (6-3)^2 = 9, gain 2/3
        assert_relative_eq!(out.process_uncertainty, 6.0, max_relative = 1e-15);
    }

    #[test]
    fn step_with_locked_filter() {
        let prev = GaussianEstimate::new(4.25, 0.0).unwrap();
        let out = pkf_step(&prev, 1.0, &GaussianEstimate::new(3.0, 2.0).unwrap(), &pred(9.0, 1.0)).unwrap();
        assert_eq!(out.estimate, prev);
        assert_eq!(out.process_uncertainty, 1.0);
    }

    #[test]
    fn regime_quadrants() {
        use RegimeLabel::*;
        assert_eq!(classify_regime(0.1, 0.1, 1.0, 1.0), AccurateModelReliableData);
        assert_eq!(classify_regime(2.0, 0.1, 1.0, 1.0), InaccurateModelReliableData);
        assert_eq!(classify_regime(0.1, 2.0, 1.0, 1.0), AccurateModelNoisyData);
        assert_eq!(classify_regime(2.0, 2.0, 1.0, 1.0), InaccurateModelNoisyData);
        assert_eq!(classify_regime(1.0, 1.0, 1.0, 1.0), InaccurateModelNoisyData);
    }

    fn small_series() -> TimeSeriesData {
        let grid = TimeGrid::uniform(0.0, 1.0, 6).unwrap();
        let samples = (0..6)
            .map(|i| {
                let base = 10.0 * (0.1 * i as f64).exp();
                vec![base - 0.5, base + 0.3, base + 0.2]
            })
            .collect();
        TimeSeriesData::new("s", grid, samples).unwrap()
    }

    #[test]
    fn run_structure() {
        let data = small_series();
        let opts = PkfOptions {
            iterations: 4,
            retain_history: true,
            early_stop: None,
        };
        let res = run_pkf(&data, ModelKind::BirthDeath, &opts).unwrap();
        assert_eq!(res.iterations(), 4);
        assert_eq!(res.history.as_ref().unwrap().len(), 4);
        assert_eq!(res.convergence.len(), 4);
        let s = &res.final_state;
        assert_eq!(s.filter.len(), 6);
        assert_eq!(s.process_uncertainty.len(), 6);
        for w in &s.weights {
            assert!((w.sum() - 1.0).abs() < 1e-12);
        }
        assert!(s.process_uncertainty.iter().all(|q| *q >= 0.0));
    }

    #[test]
    fn early_stop_only_truncates() {
        let data = small_series();
        let full = run_pkf(
            &data,
            ModelKind::BirthDeath,
            &PkfOptions {
                iterations: 200,
                retain_history: true,
                early_stop: None,
            },
        )
        .unwrap();
        let early = run_pkf(
            &data,
            ModelKind::BirthDeath,
            &PkfOptions {
                iterations: 200,
                retain_history: false,
                early_stop: Some(1e-3),
            },
        )
        .unwrap();
        let n = early.iterations();
        assert!(n < 200);
        assert!(early.convergence.last().unwrap().relative_delta_q() < 1e-3);
        assert_eq!(full.history.unwrap()[n - 1], early.final_state);
    }

    #[test]
    fn zero_iterations_rejected() {
        let data = small_series();
        assert!(run_pkf(&data, ModelKind::BirthDeath, &PkfOptions::with_iterations(0)).is_err());
    }

    #[test]
    fn regimes_use_medians() {
        let data = small_series();
        let res = run_pkf(&data, ModelKind::BirthDeath, &PkfOptions::default()).unwrap();
        let labels = classify_regimes(&res, &data, None);
        assert_eq!(labels.len(), 6);
        let high_q = labels
            .iter()
            .filter(|l| {
                matches!(
                    l,
                    RegimeLabel::InaccurateModelReliableData | RegimeLabel::InaccurateModelNoisyData
                )
            })
            .count();
        assert!(high_q >= 3);
    }
}
