//! Comparison filters and smoothers sharing the ODE-spline internal model:
//! an adaptive non-linear KF, an unscented KF, an unscented RTS smoother and
//! an iterated posterior-linearisation smoother (IPLS).
//!
//! All of them are forward recursions over time that only see a constant
//! process uncertainty `q`. Transition parameters for the step into `t` are
//! fitted from a right-endpoint window (`t-2`, `t-1`) of a reference path.

mod smoother;
mod unscented;

use serde::{Deserialize, Serialize};

pub use smoother::{
    ipls_passes, run_ipls, run_ipls_with, run_ukf, run_ukf_with, run_urts, run_urts_with, SmootherPass,
};
pub use unscented::{unscented_transform, Propagated, SigmaPoints, UtParams};

use crate::error::{Error, Result};
use crate::models::{posterior_moments, ModelKind, ModelPrediction, SplineModel, Window};
use crate::series::{GaussianEstimate, TimeSeriesData, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineAlgorithm {
    AdaptiveKf,
    UnscentedKf,
    UnscentedRts,
    Ipls,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algorithm: BaselineAlgorithm,
    pub q: f64,
    /// Only read by IPLS.
    pub iterations: usize,
    pub ut: UtParams,
}

impl BaselineConfig {
    pub fn new(algorithm: BaselineAlgorithm, q: f64) -> Self {
        Self {
            algorithm,
            q,
            iterations: 1,
            ut: UtParams::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "q must be finite and >= 0, got {}",
                self.q
            )));
        }
        if self.iterations < 1 {
            return Err(Error::InvalidConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn run_baseline(data: &TimeSeriesData, kind: ModelKind, config: &BaselineConfig) -> Result<Trajectory> {
    config.validate()?;
    match config.algorithm {
        BaselineAlgorithm::AdaptiveKf => run_adaptive_kf(data, kind, config.q),
        BaselineAlgorithm::UnscentedKf => run_ukf(data, kind, config.q, &config.ut),
        BaselineAlgorithm::UnscentedRts => run_urts(data, kind, config.q, &config.ut),
        BaselineAlgorithm::Ipls => run_ipls(data, kind, config.q, config.iterations, &config.ut),
    }
}

/// Point dynamics for one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMap {
    Affine { slope: f64, intercept: f64 },
    BirthDeath { growth: f64, dt: f64 },
    ConstantRegulation { k_exp: f64, k_deg: f64, dt: f64 },
}

impl StepMap {
    pub const IDENTITY: StepMap = StepMap::Affine {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            StepMap::Affine { slope, intercept } => slope * x + intercept,
            StepMap::BirthDeath { growth, dt } => x * (growth * dt).exp(),
            StepMap::ConstantRegulation { k_exp, k_deg, dt } => {
                x * (-k_deg * dt).exp() + (k_exp / k_deg) * -(-k_deg * dt).exp_m1()
            }
        }
    }
}

/// Dynamics into one timepoint together with the model's own prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFit {
    pub map: StepMap,
    /// Spread of the spline family, added to the predicted variance.
    pub model_variance: f64,
    /// Model prediction at the new timepoint from the reference path.
    pub prediction: ModelPrediction,
}

/// Source of per-step transition dynamics.
pub trait StepModel: Send + Sync {
    /// Dynamics from `t - 1` to `t` (`t >= 1`). `reference` holds path means
    /// for at least timepoints `0..t`; `data` is the summary at `t`.
    fn step(&self, times: &[f64], reference: &[f64], t: usize, data: &GaussianEstimate) -> Result<StepFit>;
}

/// Right-endpoint ODE-spline fit. The step into `t = 1` has a single
/// anchor and uses identity dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineStep {
    pub model: SplineModel,
}

impl SplineStep {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            model: SplineModel::new(kind),
        }
    }
}

impl StepModel for SplineStep {
    fn step(&self, times: &[f64], reference: &[f64], t: usize, data: &GaussianEstimate) -> Result<StepFit> {
        if t == 0 || t >= times.len() || reference.len() < t {
            return Err(Error::InvalidParameter(format!("no transition into timepoint {t}")));
        }
        if t == 1 {
            return Ok(StepFit {
                map: StepMap::IDENTITY,
                model_variance: 0.0,
                prediction: ModelPrediction {
                    estimate: GaussianEstimate::point(reference[0]),
                },
            });
        }
        let window = Window::new(
            (times[t - 2], reference[t - 2]),
            (times[t - 1], reference[t - 1]),
            times[t],
            *data,
        )?;
        let posterior = self.model.posterior(&window)?;
        let prediction = posterior_moments(&posterior)?;
        let best = posterior.argmax();
        let (k1, k2) = (posterior.k1[best], posterior.k2[best]);
        let dt = times[t] - times[t - 1];
        let map = match self.model.kind {
            ModelKind::BirthDeath => StepMap::BirthDeath { growth: k2 - k1, dt },
            ModelKind::ConstantRegulation => StepMap::ConstantRegulation {
                k_exp: k2,
                k_deg: k1,
                dt,
            },
        };
        Ok(StepFit {
            map,
            model_variance: prediction.variance(),
            prediction,
        })
    }
}

/// Fixed affine dynamics; `steps[t - 1]` maps `t - 1` to `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineStep {
    pub steps: Vec<(f64, f64)>,
}

impl StepModel for AffineStep {
    fn step(&self, _times: &[f64], reference: &[f64], t: usize, _data: &GaussianEstimate) -> Result<StepFit> {
        let (slope, intercept) = *t
            .checked_sub(1)
            .and_then(|i| self.steps.get(i))
            .ok_or_else(|| Error::InvalidParameter(format!("no affine step into timepoint {t}")))?;
        let map = StepMap::Affine { slope, intercept };
        Ok(StepFit {
            map,
            model_variance: 0.0,
            prediction: ModelPrediction {
                estimate: GaussianEstimate::point(map.apply(reference[t - 1])),
            },
        })
    }
}

/// Adaptive non-linear KF with the ODE-spline model.
pub fn run_adaptive_kf(data: &TimeSeriesData, kind: ModelKind, q: f64) -> Result<Trajectory> {
    run_adaptive_kf_with(data, &SplineStep::new(kind), q)
}

/// Two-way KF: the model predicts `t` from a right-endpoint window on the
/// data means at `t-2`, `t-1`, the gain `(V(M)+q) / (V(M)+q+V(Z))` minimises
/// the combined variance, and the estimate is never fed back into the model.
/// The first timepoint is the data summary; the model for the second is
/// persistence of the first with its variance.
pub fn run_adaptive_kf_with<S: StepModel + ?Sized>(data: &TimeSeriesData, steps: &S, q: f64) -> Result<Trajectory> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::InvalidConfig(format!("q must be finite and >= 0, got {q}")));
    }
    let z = data.summaries();
    let times = data.grid().times();
    let mut out: Vec<GaussianEstimate> = Vec::with_capacity(z.len());
    let data_means: Vec<f64> = z.iter().map(|e| e.mean).collect();
    out.push(z[0]);
    for t in 1..z.len() {
        let (m_mean, m_var) = if t == 1 {
            (out[0].mean, out[0].variance)
        } else {
            let fit = steps.step(times, &data_means, t, &z[t]).map_err(|e| Error::at(t, e))?;
            (fit.prediction.mean(), fit.prediction.variance())
        };
        let model_total = m_var + q;
        let w = model_total / (model_total + z[t].variance);
        let mean = w * z[t].mean + (1.0 - w) * m_mean;
        let variance = w * w * z[t].variance + (1.0 - w) * (1.0 - w) * model_total;
        let est = GaussianEstimate::floored(mean, variance).map_err(|e| Error::at(t, e))?;
        out.push(est);
    }
    Trajectory::new(data.grid().clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeGrid;
    use approx::assert_relative_eq;

    fn series(values: &[[f64; 2]]) -> TimeSeriesData {
        let grid = TimeGrid::uniform(0.0, 1.0, values.len()).unwrap();
        TimeSeriesData::new("s", grid, values.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    #[test]
    fn kf_gain_half_when_variances_match() {
        // V(Z) = 2 at every t; the birth–death model variance is the floor, so
        // q = 2 - floor makes the model and data variances equal.
        let data = series(&[[9.0, 11.0], [9.0, 11.0], [10.0, 12.0], [14.0, 16.0]]);
        let q = 2.0 - crate::series::VARIANCE_FLOOR;
        let traj = run_adaptive_kf(&data, ModelKind::BirthDeath, q).unwrap();
        let f = traj.estimates();
        let z: Vec<f64> = data.summaries().iter().map(|e| e.mean).collect();
        let model = z[1] * (z[1] / z[0]);
        assert_relative_eq!(f[2].mean, 0.5 * 11.0 + 0.5 * model, max_relative = 1e-12);
    }

    #[test]
    fn kf_huge_q_follows_data() {
        let data = series(&[[9.0, 11.0], [12.0, 14.0], [10.0, 12.0], [20.0, 22.0]]);
        let traj = run_adaptive_kf(&data, ModelKind::BirthDeath, 1e12).unwrap();
        for (est, z) in traj.estimates().iter().zip(data.summaries()) {
            assert!((est.mean - z.mean).abs() < 1e-9);
        }
    }

    #[test]
    fn kf_rejects_bad_q() {
        let data = series(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]);
        assert!(run_adaptive_kf(&data, ModelKind::BirthDeath, -1.0).is_err());
        assert!(run_adaptive_kf(&data, ModelKind::BirthDeath, f64::NAN).is_err());
    }

    #[test]
    fn step_maps() {
        assert_eq!(StepMap::IDENTITY.apply(3.0), 3.0);
        assert_relative_eq!(
            StepMap::BirthDeath { growth: 0.5, dt: 2.0 }.apply(2.0),
            2.0 * std::f64::consts::E
        );
        let cr = StepMap::ConstantRegulation {
            k_exp: 1.0,
            k_deg: 1.0,
            dt: 2f64.ln(),
        };
        assert_relative_eq!(cr.apply(0.0), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn spline_step_passes_through_last_anchor() {
        let step = SplineStep::new(ModelKind::ConstantRegulation);
        let times = [0.0, 1.0, 2.0];
        let reference = [4.0, 6.0];
        let fit = step
            .step(&times, &reference, 2, &GaussianEstimate::new(7.0, 1.0).unwrap())
            .unwrap();
        // Mapping the anchor at t-1 over dt yields the MAP spline's value at t;
        // mapping the anchor at t-2 over two steps hits the anchor at t-1.
        if let StepMap::ConstantRegulation { k_exp, k_deg, .. } = fit.map {
            let back = StepMap::ConstantRegulation { k_exp, k_deg, dt: 1.0 }.apply(4.0);
            assert_relative_eq!(back, 6.0, max_relative = 1e-9);
        } else {
            panic!("expected constant-regulation map");
        }
        assert!(step.step(&times, &reference, 0, &GaussianEstimate::point(0.0)).is_err());
    }

    #[test]
    fn baseline_config_validation() {
        let mut c = BaselineConfig::new(BaselineAlgorithm::Ipls, 1.0);
        assert!(c.validate().is_ok());
        c.iterations = 0;
        assert!(c.validate().is_err());
        c = BaselineConfig::new(BaselineAlgorithm::AdaptiveKf, -2.0);
        assert!(c.validate().is_err());
    }
}
