//! ODE-spline internal models.
//!
//! Each model is a two-parameter ODE with a closed-form flow. Through any two
//! anchor points there is a one-parameter family of exact solutions: scanning
//! the free rate `k1` and solving analytically for the second rate `k2` pins
//! every member of the family to both anchors. The family is then weighted by
//! how well each member predicts a third point (the target), which gives a
//! discrete posterior whose moments are the model prediction.
//!
//! * Birth–death: `dN/dt = (k_birth - k_death) N`, scanned over `k_death`.
//! * Constant regulation: `dX/dt = k_exp - k_deg X`, scanned over `k_deg`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{GaussianEstimate, Trajectory, VARIANCE_FLOOR};

/// Anchor values of birth–death windows are clamped below at this value
/// before taking log-ratios.
pub const POSITIVITY_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BirthDeath,
    #[serde(rename = "const-reg")]
    ConstantRegulation,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::BirthDeath => "birth-death",
            ModelKind::ConstantRegulation => "const-reg",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "birth-death" => Ok(ModelKind::BirthDeath),
            "const-reg" => Ok(ModelKind::ConstantRegulation),
            other => Err(Error::InvalidConfig(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Where the predicted point sits relative to the two anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitPosition {
    Center,
    RightEndpoint,
    LeftEndpoint,
}

/// `n0 * exp((k_birth - k_death) * dt)`.
pub fn flow_birth_death(n0: f64, k_birth: f64, k_death: f64, dt: f64) -> Result<f64> {
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "birth-death flow needs a positive initial value, got {n0}"
        )));
    }
    if !k_birth.is_finite() || !k_death.is_finite() || !dt.is_finite() {
        return Err(Error::InvalidParameter("non-finite birth-death flow input".into()));
    }
    let n = n0 * ((k_birth - k_death) * dt).exp();
    if !n.is_finite() {
        return Err(Error::NumericalOverflow(format!(
            "birth-death flow from {n0} with growth {} over {dt}",
            k_birth - k_death
        )));
    }
    Ok(n)
}

/// Exact solution of `dX/dt = k_exp - k_deg X`:
/// `k_exp/k_deg + (x0 - k_exp/k_deg) * exp(-k_deg * dt)`.
///
/// Negative `dt` integrates backward in time, which left-endpoint fits use.
pub fn flow_const_reg(x0: f64, k_exp: f64, k_deg: f64, dt: f64) -> Result<f64> {
    if !(k_deg > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "degradation rate must be positive, got {k_deg}"
        )));
    }
    if !x0.is_finite() || !k_exp.is_finite() || !k_deg.is_finite() || !dt.is_finite() {
        return Err(Error::InvalidParameter("non-finite constant-regulation input".into()));
    }
    // x0*e + ss*(1 - e), with 1 - e from expm1 so small k_deg*dt keeps precision.
    let decay = (-k_deg * dt).exp();
    let x = x0 * decay + (k_exp / k_deg) * -(-k_deg * dt).exp_m1();
    if !x.is_finite() {
        return Err(Error::NumericalOverflow(format!(
            "constant-regulation flow with k_deg={k_deg} over {dt}"
        )));
    }
    Ok(x)
}

/// Two anchor points and the target being predicted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    anchor_a: (f64, f64),
    anchor_b: (f64, f64),
    target_time: f64,
    target: GaussianEstimate,
}

impl Window {
    /// Anchors are reordered so that `anchor_a` is the earlier one.
    pub fn new(anchor_a: (f64, f64), anchor_b: (f64, f64), target_time: f64, target: GaussianEstimate) -> Result<Self> {
        let all = [anchor_a.0, anchor_a.1, anchor_b.0, anchor_b.1, target_time];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite window coordinate".into()));
        }
        if anchor_a.0 == anchor_b.0 || target_time == anchor_a.0 || target_time == anchor_b.0 {
            return Err(Error::InvalidData(format!(
                "window times must be distinct ({}, {}, {target_time})",
                anchor_a.0, anchor_b.0
            )));
        }
        let (anchor_a, anchor_b) = if anchor_a.0 < anchor_b.0 {
            (anchor_a, anchor_b)
        } else {
            (anchor_b, anchor_a)
        };
        Ok(Self {
            anchor_a,
            anchor_b,
            target_time,
            target,
        })
    }

    pub fn anchor_a(&self) -> (f64, f64) {
        self.anchor_a
    }

    pub fn anchor_b(&self) -> (f64, f64) {
        self.anchor_b
    }

    pub fn target_time(&self) -> f64 {
        self.target_time
    }

    pub fn target(&self) -> GaussianEstimate {
        self.target
    }

    pub fn position(&self) -> FitPosition {
        if self.target_time > self.anchor_b.0 {
            FitPosition::RightEndpoint
        } else if self.target_time < self.anchor_a.0 {
            FitPosition::LeftEndpoint
        } else {
            FitPosition::Center
        }
    }

    /// Time between the anchors.
    pub fn anchor_gap(&self) -> f64 {
        self.anchor_b.0 - self.anchor_a.0
    }

    /// Extent of all three points.
    pub fn span(&self) -> f64 {
        let lo = self.anchor_a.0.min(self.target_time);
        let hi = self.anchor_b.0.max(self.target_time);
        hi - lo
    }

    /// Anchor values raised to [`POSITIVITY_CLAMP`].
    fn clamped_positive(&self) -> Self {
        let mut w = *self;
        w.anchor_a.1 = w.anchor_a.1.max(POSITIVITY_CLAMP);
        w.anchor_b.1 = w.anchor_b.1.max(POSITIVITY_CLAMP);
        w
    }
}

/// Birth rate that makes the birth–death flow pass through both anchors for a
/// given death rate.
pub fn solve_k_birth(k_death: f64, window: &Window) -> Result<f64> {
    let (ta, va) = window.anchor_a;
    let (tb, vb) = window.anchor_b;
    if !(va > 0.0) || !(vb > 0.0) {
        return Err(Error::InvalidData(format!(
            "birth-death anchors must be positive, got {va} and {vb}"
        )));
    }
    Ok(k_death + (vb / va).ln() / (tb - ta))
}

/// Expression rate that makes the constant-regulation flow pass through both
/// anchors for a given degradation rate.
pub fn solve_k_exp(k_deg: f64, window: &Window) -> Result<f64> {
    if !(k_deg > 0.0) || !k_deg.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degradation rate must be positive, got {k_deg}"
        )));
    }
    let (ta, xa) = window.anchor_a;
    let (tb, xb) = window.anchor_b;
    let dt = tb - ta;
    let decay = (-k_deg * dt).exp();
    let one_minus_decay = -(-k_deg * dt).exp_m1();
    // Subnormal 1 - e^{-k dt} has lost its precision.
    if !(one_minus_decay >= f64::MIN_POSITIVE) {
        return Err(Error::InvalidParameter(format!(
            "degradation rate {k_deg} too small for anchor gap {dt}"
        )));
    }
    let k_exp = k_deg * (xb - xa * decay) / one_minus_decay;
    if !k_exp.is_finite() {
        return Err(Error::NumericalOverflow(format!("expression rate for k_deg={k_deg}")));
    }
    Ok(k_exp)
}

/// Second rate of the family member selected by `k1`.
pub fn solve_second_rate(kind: ModelKind, k1: f64, window: &Window) -> Result<f64> {
    match kind {
        ModelKind::BirthDeath => solve_k_birth(k1, window),
        ModelKind::ConstantRegulation => solve_k_exp(k1, window),
    }
}

/// Value at time `t` of the spline anchored at `window.anchor_a()` with
/// scanned rate `k1` and derived rate `k2`.
pub fn spline_value(kind: ModelKind, window: &Window, k1: f64, k2: f64, t: f64) -> Result<f64> {
    let (ta, va) = window.anchor_a;
    match kind {
        ModelKind::BirthDeath => flow_birth_death(va, k2, k1, t - ta),
        ModelKind::ConstantRegulation => flow_const_reg(va, k2, k1, t - ta),
    }
}

/// Log-spaced scan over the free rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub points: usize,
    pub lower: f64,
    /// Upper rate is `upper_factor / window span`.
    pub upper_factor: f64,
    /// A posterior whose weights, or whose contributions to the prediction
    /// variance, spread over fewer effective points than this is rescanned
    /// with ten times finer spacing where it holds mass.
    pub min_effective_points: f64,
    pub max_refinements: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            points: 200,
            lower: 1e-4,
            upper_factor: 10.0,
            min_effective_points: 50.0,
            max_refinements: 4,
        }
    }
}

impl ScanGrid {
    /// Same range with `factor` times as many points.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            points: (self.points - 1) * factor + 1,
            ..*self
        }
    }

    pub fn rates(&self, span: f64) -> Result<Vec<f64>> {
        if self.points < 1 || !(self.lower > 0.0) || !(self.upper_factor > 0.0) {
            return Err(Error::InvalidConfig(format!("bad scan grid {self:?}")));
        }
        if !(span > 0.0) || !span.is_finite() {
            return Err(Error::InvalidData(format!("bad window span {span}")));
        }
        let upper = self.upper_factor / span;
        // Very long windows: keep five decades below the upper rate.
        let lower = if upper > self.lower { self.lower } else { upper * 1e-5 };
        if self.points == 1 {
            return Ok(vec![lower]);
        }
        let (lo, hi) = (lower.ln(), upper.ln());
        let step = (hi - lo) / (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    upper
                } else {
                    (lo + step * i as f64).exp()
                }
            })
            .collect())
    }
}

/// Discrete posterior over a one-parameter spline family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplinePosterior {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub predictions: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SplinePosterior {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best
    }
}

/// Variance-scaled squared error of a spline prediction against the target.
pub fn spline_loss(prediction: f64, target: &GaussianEstimate) -> f64 {
    (prediction - target.mean).powi(2) / (2.0 * target.variance.max(VARIANCE_FLOOR))
}

/// Trapezoid weights in `ln(k1)` for a sorted, possibly uneven rate grid.
fn log_quadrature(k1: &[f64]) -> Vec<f64> {
    let n = k1.len();
    if n == 1 {
        return vec![1.0];
    }
    let u: Vec<f64> = k1.iter().map(|k| k.ln()).collect();
    (0..n)
        .map(|i| 0.5 * (u[(i + 1).min(n - 1)] - u[i.saturating_sub(1)]))
        .collect()
}

/// `(sum v)^2 / sum(v^2)`; infinite when everything is zero.
fn effective_points(values: &[f64], total: f64) -> f64 {
    let squares: f64 = values.iter().map(|v| v * v).sum();
    if squares > 0.0 {
        total * total / squares
    } else {
        f64::INFINITY
    }
}

fn normalized_weights(losses: &[f64], prior: &[f64], window: &Window) -> Result<Vec<f64>> {
    let best = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let mut weights: Vec<f64> = losses.iter().zip(prior).map(|(l, p)| p * (-(l - best)).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegeneratePosterior(format!(
            "no spline carries weight at t={}",
            window.target_time
        )));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Scans the free rate, anchors each spline analytically, and weights it by
/// `exp(-loss)` under a prior uniform in `ln(k1)` over the scan range.
///
/// Posteriors narrower than the grid spacing are rescanned locally until
/// they are resolved or the refinement budget runs out.
pub fn fit_spline_posterior(window: &Window, kind: ModelKind, grid: &ScanGrid) -> Result<SplinePosterior> {
    let (window, mut k1, mut k2, mut predictions) = scan_family(window, kind, grid)?;
    let target = window.target;
    let mut refinements = 0;
    loop {
        let losses: Vec<f64> = predictions.iter().map(|&p| spline_loss(p, &target)).collect();
        let weights = normalized_weights(&losses, &log_quadrature(&k1), &window)?;
        // Resolution of both the weights and their variance contributions.
        let mean: f64 = weights.iter().zip(&predictions).map(|(w, p)| w * p).sum();
        let spread: Vec<f64> = weights
            .iter()
            .zip(&predictions)
            .map(|(w, p)| w * (p - mean).powi(2))
            .collect();
        let spread_total: f64 = spread.iter().sum();
        let ess = effective_points(&weights, 1.0).min(effective_points(&spread, spread_total));
        if ess >= grid.min_effective_points || refinements == grid.max_refinements || grid.points < 2 {
            return Ok(SplinePosterior {
                k1,
                k2,
                predictions,
                weights,
            });
        }
        refinements += 1;
        // Split every cell that touches significant mass into ten.
        let peak = weights.iter().copied().fold(0.0, f64::max);
        let spread_peak = spread.iter().copied().fold(0.0, f64::max);
        let significant = |i: usize| weights[i] >= 1e-10 * peak || spread[i] >= 1e-10 * spread_peak;
        let mut rates = Vec::with_capacity(k1.len() * 2);
        for i in 0..k1.len() {
            rates.push(k1[i]);
            if i + 1 < k1.len() && (significant(i) || significant(i + 1)) {
                let (a, b) = (k1[i].ln(), k1[i + 1].ln());
                rates.extend((1..10).map(|j| (a + (b - a) * j as f64 / 10.0).exp()));
            }
        }
        let (new_k2, new_pred) = family_members(&window, kind, &rates)?;
        k1 = rates;
        k2 = new_k2;
        predictions = new_pred;
    }
}

/// Posterior mean and variance of an internal-model prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrediction {
    pub estimate: GaussianEstimate,
}

impl ModelPrediction {
    pub fn mean(&self) -> f64 {
        self.estimate.mean
    }

    pub fn variance(&self) -> f64 {
        self.estimate.variance
    }
}

/// Weighted mean and variance of the spline predictions, variance floored.
pub fn posterior_moments(posterior: &SplinePosterior) -> Result<ModelPrediction> {
    let mean: f64 = posterior
        .weights
        .iter()
        .zip(&posterior.predictions)
        .map(|(w, p)| w * p)
        .sum();
    let variance: f64 = posterior
        .weights
        .iter()
        .zip(&posterior.predictions)
        .map(|(w, p)| w * (p - mean).powi(2))
        .sum();
    Ok(ModelPrediction {
        estimate: GaussianEstimate::floored(mean, variance)?,
    })
}

/// Three-point window of `path` used to predict timepoint `t`.
///
/// Interior points are predicted from their two neighbours; the first point
/// from the next two (left endpoint) and the last from the previous two
/// (right endpoint).
pub fn path_window(path: &Trajectory, t: usize) -> Result<Window> {
    let n = path.len();
    if n < 3 {
        return Err(Error::InvalidData(format!("path of length {n} has no 3-point windows")));
    }
    if t >= n {
        return Err(Error::InvalidParameter(format!(
            "timepoint {t} outside path of length {n}"
        )));
    }
    let (a, b) = if t == 0 {
        (1, 2)
    } else if t == n - 1 {
        (n - 3, n - 2)
    } else {
        (t - 1, t + 1)
    };
    let times = path.grid().times();
    let est = path.estimates();
    Window::new((times[a], est[a].mean), (times[b], est[b].mean), times[t], est[t])
}

/// Predicts the distribution of timepoint `t` from a whole trajectory.
pub trait InternalModel: Send + Sync {
    fn predict(&self, path: &Trajectory, t: usize) -> Result<ModelPrediction>;
}

/// ODE-spline posterior over three-point windows of the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineModel {
    pub kind: ModelKind,
    pub grid: ScanGrid,
}

impl SplineModel {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            grid: ScanGrid::default(),
        }
    }

    /// Posterior for an arbitrary window, falling back to uniform weights
    /// when every spline's weight underflows.
    pub fn posterior(&self, window: &Window) -> Result<SplinePosterior> {
        match fit_spline_posterior(window, self.kind, &self.grid) {
            Err(Error::DegeneratePosterior(msg)) => {
                warn!("{msg}; using uniform spline weights");
                let (_, k1, k2, predictions) = scan_family(window, self.kind, &self.grid)?;
                if predictions.iter().any(|p| !p.is_finite()) {
                    return Err(Error::DegeneratePosterior(msg));
                }
                let weights = vec![1.0 / k1.len() as f64; k1.len()];
                Ok(SplinePosterior {
                    k1,
                    k2,
                    predictions,
                    weights,
                })
            }
            other => other,
        }
    }

    pub fn predict_window(&self, window: &Window) -> Result<ModelPrediction> {
        posterior_moments(&self.posterior(window)?)
    }
}

/// The window actually fitted, then `k1`, `k2` and predictions per member.
type Family = (Window, Vec<f64>, Vec<f64>, Vec<f64>);

/// Anchored family members and their predictions at the target time.
fn scan_family(window: &Window, kind: ModelKind, grid: &ScanGrid) -> Result<Family> {
    let window = match kind {
        ModelKind::BirthDeath => window.clamped_positive(),
        ModelKind::ConstantRegulation => *window,
    };
    let k1 = grid.rates(window.span())?;
    let (k2, predictions) = family_members(&window, kind, &k1)?;
    Ok((window, k1, k2, predictions))
}

fn family_members(window: &Window, kind: ModelKind, k1: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut k2 = Vec::with_capacity(k1.len());
    let mut predictions = Vec::with_capacity(k1.len());
    for &rate in k1 {
        let second = solve_second_rate(kind, rate, window)?;
        k2.push(second);
        predictions.push(spline_value(kind, window, rate, second, window.target_time)?);
    }
    Ok((k2, predictions))
}

impl InternalModel for SplineModel {
    fn predict(&self, path: &Trajectory, t: usize) -> Result<ModelPrediction> {
        path_window(path, t)
            .and_then(|w| self.predict_window(&w))
            .map_err(|e| Error::at(t, e))
    }
}

/// Known linear dynamics `x_t = a_{t-1} x_{t-1} + b_{t-1}`.
///
/// Timepoint 0 is predicted by inverting the first step from `x_1`. The
/// prediction variance is the propagated path variance.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    steps: Vec<(f64, f64)>,
}

impl LinearModel {
    /// `steps[t - 1]` maps timepoint `t - 1` to `t`.
    pub fn new(steps: Vec<(f64, f64)>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("linear model needs at least one step".into()));
        }
        if steps[0].0 == 0.0 {
            return Err(Error::InvalidParameter("first step slope must be non-zero".into()));
        }
        if steps.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidParameter("non-finite linear step".into()));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(f64, f64)] {
        &self.steps
    }
}

impl InternalModel for LinearModel {
    fn predict(&self, path: &Trajectory, t: usize) -> Result<ModelPrediction> {
        let est = path.estimates();
        if est.len() != self.steps.len() + 1 {
            return Err(Error::InvalidData(format!(
                "linear model has {} steps for a path of length {}",
                self.steps.len(),
                est.len()
            )));
        }
        let (mean, variance) = if t == 0 {
            let (a, b) = self.steps[0];
            ((est[1].mean - b) / a, est[1].variance / (a * a))
        } else {
            let (a, b) = self.steps[t - 1];
            (a * est[t - 1].mean + b, a * a * est[t - 1].variance)
        };
        Ok(ModelPrediction {
            estimate: GaussianEstimate::floored(mean, variance).map_err(|e| Error::at(t, e))?,
        })
    }
}
