use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::series::{GaussianEstimate, TimeSeriesData, Trajectory, VARIANCE_FLOOR};

use super::unscented::{SigmaPoints, UtParams};
use super::{SplineStep, StepMap, StepModel};

/// Moments of one forward/backward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherPass {
    pub filtered: Vec<GaussianEstimate>,
    /// One-step predictions; entry 0 repeats the initial estimate.
    pub predicted: Vec<GaussianEstimate>,
    /// `cov(x_{t-1}, x_t)` under the prediction; entry 0 is unused.
    pub cross: Vec<f64>,
    pub smoothed: Vec<GaussianEstimate>,
}

fn check_q(q: f64) -> Result<()> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::InvalidConfig(format!("q must be finite and >= 0, got {q}")));
    }
    Ok(())
}

/// Unscented predict/update recursion. `transition(t, filtered_means)` returns
/// the dynamics into `t` and any variance to add on top of `q`.
fn forward<F>(
    z: &[GaussianEstimate],
    q: f64,
    ut: &UtParams,
    mut transition: F,
) -> Result<(Vec<GaussianEstimate>, Vec<GaussianEstimate>, Vec<f64>)>
where
    F: FnMut(usize, &[f64]) -> Result<(StepMap, f64)>,
{
    let mut filtered = Vec::with_capacity(z.len());
    let mut predicted = Vec::with_capacity(z.len());
    let mut cross = Vec::with_capacity(z.len());
    let mut means = Vec::with_capacity(z.len());
    filtered.push(z[0]);
    predicted.push(z[0]);
    cross.push(0.0);
    means.push(z[0].mean);
    for t in 1..z.len() {
        let step = (|| {
            let (map, extra) = transition(t, &means)?;
            let p = SigmaPoints::merwe(&filtered[t - 1], ut)?.propagate(|x| map.apply(x));
            let prior = GaussianEstimate::floored(p.mean, p.variance + extra + q)?;
            let gain = prior.variance / (prior.variance + z[t].variance);
            let post = GaussianEstimate::floored(
                prior.mean + gain * (z[t].mean - prior.mean),
                (1.0 - gain) * prior.variance,
            )?;
            Ok::<_, Error>((prior, post, p.cross_covariance))
        })()
        .map_err(|e| Error::at(t, e))?;
        predicted.push(step.0);
        filtered.push(step.1);
        cross.push(step.2);
        means.push(step.1.mean);
    }
    Ok((filtered, predicted, cross))
}

/// Rauch–Tung–Striebel backward recursion.
fn backward(
    filtered: &[GaussianEstimate],
    predicted: &[GaussianEstimate],
    cross: &[f64],
) -> Result<Vec<GaussianEstimate>> {
    let n = filtered.len();
    let mut smoothed = filtered.to_vec();
    for t in (0..n.saturating_sub(1)).rev() {
        let gain = cross[t + 1] / predicted[t + 1].variance;
        let mean = filtered[t].mean + gain * (smoothed[t + 1].mean - predicted[t + 1].mean);
        let variance = filtered[t].variance + gain * gain * (smoothed[t + 1].variance - predicted[t + 1].variance);
        smoothed[t] = GaussianEstimate::floored(mean, variance.max(VARIANCE_FLOOR)).map_err(|e| Error::at(t, e))?;
    }
    Ok(smoothed)
}

fn first_pass<S: StepModel + ?Sized>(data: &TimeSeriesData, steps: &S, q: f64, ut: &UtParams) -> Result<SmootherPass> {
    check_q(q)?;
    let z = data.summaries();
    let times = data.grid().times();
    let (filtered, predicted, cross) = forward(&z, q, ut, |t, means| {
        let fit = steps.step(times, means, t, &z[t])?;
        Ok((fit.map, fit.model_variance))
    })?;
    let smoothed = backward(&filtered, &predicted, &cross)?;
    Ok(SmootherPass {
        filtered,
        predicted,
        cross,
        smoothed,
    })
}

/// Full IPLS sweep sequence; one iteration is the unscented RTS smoother.
///
/// Later iterations refit the dynamics on the previous smoothed means and
/// replace them by their sigma-point linear regression around the previous
/// smoothed posterior: slope `cov(x, f(x)) / var(x)`, intercept matching the
/// means, residual variance added to the process noise.
pub fn ipls_passes<S: StepModel + ?Sized>(
    data: &TimeSeriesData,
    steps: &S,
    q: f64,
    iterations: usize,
    ut: &UtParams,
) -> Result<Vec<SmootherPass>> {
    if iterations < 1 {
        return Err(Error::InvalidConfig("IPLS needs at least one iteration".into()));
    }
    let z = data.summaries();
    let times = data.grid().times();
    let mut passes = vec![first_pass(data, steps, q, ut)?];
    for _ in 1..iterations {
        let prev = &passes.last().expect("non-empty").smoothed;
        let means: Vec<f64> = prev.iter().map(|e| e.mean).collect();
        let mut linear = Vec::with_capacity(z.len());
        linear.push((StepMap::IDENTITY, 0.0));
        for t in 1..z.len() {
            let fit = steps.step(times, &means, t, &z[t]).map_err(|e| Error::at(t, e))?;
            let around = prev[t - 1];
            let p = SigmaPoints::merwe(&around, ut)?.propagate(|x| fit.map.apply(x));
            let slope = p.cross_covariance / around.variance;
            let intercept = p.mean - slope * around.mean;
            let residual = (p.variance - slope * slope * around.variance).max(0.0);
            linear.push((StepMap::Affine { slope, intercept }, residual + fit.model_variance));
        }
        let (filtered, predicted, cross) = forward(&z, q, ut, |t, _| Ok(linear[t]))?;
        let smoothed = backward(&filtered, &predicted, &cross)?;
        passes.push(SmootherPass {
            filtered,
            predicted,
            cross,
            smoothed,
        });
    }
    Ok(passes)
}

pub fn run_ukf(data: &TimeSeriesData, kind: ModelKind, q: f64, ut: &UtParams) -> Result<Trajectory> {
    run_ukf_with(data, &SplineStep::new(kind), q, ut)
}

pub fn run_ukf_with<S: StepModel + ?Sized>(
    data: &TimeSeriesData,
    steps: &S,
    q: f64,
    ut: &UtParams,
) -> Result<Trajectory> {
    Trajectory::new(data.grid().clone(), first_pass(data, steps, q, ut)?.filtered)
}

pub fn run_urts(data: &TimeSeriesData, kind: ModelKind, q: f64, ut: &UtParams) -> Result<Trajectory> {
    run_urts_with(data, &SplineStep::new(kind), q, ut)
}

pub fn run_urts_with<S: StepModel + ?Sized>(
    data: &TimeSeriesData,
    steps: &S,
    q: f64,
    ut: &UtParams,
) -> Result<Trajectory> {
    Trajectory::new(data.grid().clone(), first_pass(data, steps, q, ut)?.smoothed)
}

pub fn run_ipls(
    data: &TimeSeriesData,
    kind: ModelKind,
    q: f64,
    iterations: usize,
    ut: &UtParams,
) -> Result<Trajectory> {
    run_ipls_with(data, &SplineStep::new(kind), q, iterations, ut)
}

pub fn run_ipls_with<S: StepModel + ?Sized>(
    data: &TimeSeriesData,
    steps: &S,
    q: f64,
    iterations: usize,
    ut: &UtParams,
) -> Result<Trajectory> {
    let mut passes = ipls_passes(data, steps, q, iterations, ut)?;
    let last = passes.pop().expect("at least one pass");
    Trajectory::new(data.grid().clone(), last.smoothed)
}
