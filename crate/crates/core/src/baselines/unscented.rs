//! Scaled sigma points for a scalar state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::GaussianEstimate;

/// Merwe scaling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UtParams {
    /// `alpha = 1` keeps the outer points at one standard deviation.
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaPoints {
    pub points: [f64; 3],
    pub mean_weights: [f64; 3],
    pub cov_weights: [f64; 3],
}

impl SigmaPoints {
    pub fn merwe(input: &GaussianEstimate, params: &UtParams) -> Result<Self> {
        const N: f64 = 1.0;
        let UtParams { alpha, beta, kappa } = *params;
        let lambda = alpha * alpha * (N + kappa) - N;
        let scale = N + lambda;
        if !(scale > 0.0) || !scale.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("unusable UT parameters {params:?}")));
        }
        if !(input.variance >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative variance {}", input.variance)));
        }
        let spread = (scale * input.variance).sqrt();
        let m = input.mean;
        let w0 = lambda / scale;
        let wi = 0.5 / scale;
        Ok(Self {
            points: [m, m + spread, m - spread],
            mean_weights: [w0, wi, wi],
            cov_weights: [w0 + 1.0 - alpha * alpha + beta, wi, wi],
        })
    }

    /// Moments of `f` applied to the points, plus the input/output
    /// cross-covariance.
    pub fn propagate<F: Fn(f64) -> f64>(&self, f: F) -> Propagated {
        let x_mean: f64 = self.points.iter().zip(&self.mean_weights).map(|(x, w)| w * x).sum();
        let y = self.points.map(&f);
        let mean: f64 = y.iter().zip(&self.mean_weights).map(|(y, w)| w * y).sum();
        let mut variance = 0.0;
        let mut cross = 0.0;
        for i in 0..3 {
            let dy = y[i] - mean;
            variance += self.cov_weights[i] * dy * dy;
            cross += self.cov_weights[i] * (self.points[i] - x_mean) * dy;
        }
        Propagated {
            mean,
            variance: variance.max(0.0),
            cross_covariance: cross,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagated {
    pub mean: f64,
    pub variance: f64,
    pub cross_covariance: f64,
}

/// Gaussian approximation of `f(X)` for `X ~ input`; variance floored.
pub fn unscented_transform<F: Fn(f64) -> f64>(
    input: &GaussianEstimate,
    f: F,
    params: &UtParams,
) -> Result<GaussianEstimate> {
    let p = SigmaPoints::merwe(input, params)?.propagate(f);
    GaussianEstimate::floored(p.mean, p.variance)
}
