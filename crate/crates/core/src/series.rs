//! Shared value types: time grids, replicate data, Gaussian estimates and
//! trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every data and model variance, in the data's
/// squared units.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Strictly increasing, finite timestamps with at least three entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 3 {
            return Err(Error::InvalidData(format!(
                "time grid needs at least 3 points, got {}",
                times.len()
            )));
        }
        if let Some(t) = times.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite time {t}")));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidData(format!(
                "times must be strictly increasing ({} then {})",
                times[i],
                times[i + 1]
            )));
        }
        Ok(Self { times })
    }

    /// `n` points starting at `start` spaced `dt` apart.
    pub fn uniform(start: f64, dt: f64, n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| start + dt * i as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.times[index]
    }

    /// Index of the grid point closest to `t` (first one on ties).
    pub fn nearest_index(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &x) in self.times.iter().enumerate() {
            if (x - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

impl<'de> Deserialize<'de> for TimeGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            times: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        TimeGrid::new(raw.times).map_err(serde::de::Error::custom)
    }
}

/// A (mean, variance) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEstimate {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianEstimate {
    /// Validates finiteness and non-negativity. No floor is applied, so filter
    /// variances may legitimately decay toward zero.
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() {
            return Err(Error::InvalidData(format!("non-finite estimate ({mean}, {variance})")));
        }
        if variance < 0.0 {
            return Err(Error::InvalidData(format!("negative variance {variance}")));
        }
        Ok(Self { mean, variance })
    }

    /// Like [`GaussianEstimate::new`] but clamps the variance at [`VARIANCE_FLOOR`].
    pub fn floored(mean: f64, variance: f64) -> Result<Self> {
        Self::new(mean, variance.max(VARIANCE_FLOOR))
    }

    /// A point value carrying the floor variance.
    pub fn point(mean: f64) -> Self {
        Self {
            mean,
            variance: VARIANCE_FLOOR,
        }
    }
}

/// Replicate measurements of one series on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesData {
    series_id: String,
    grid: TimeGrid,
    samples: Vec<Vec<f64>>,
}

impl TimeSeriesData {
    pub fn new(series_id: impl Into<String>, grid: TimeGrid, samples: Vec<Vec<f64>>) -> Result<Self> {
        let series_id = series_id.into();
        if samples.len() != grid.len() {
            return Err(Error::InvalidData(format!(
                "series {series_id}: {} sample groups for {} timepoints",
                samples.len(),
                grid.len()
            )));
        }
        for (i, group) in samples.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::InvalidData(format!(
                    "series {series_id}: no samples at t={}",
                    grid.get(i)
                )));
            }
            if group.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "series {series_id}: non-finite sample at t={}",
                    grid.get(i)
                )));
            }
            // Finite samples can still overflow the variance.
            summarize_samples(group)
                .map_err(|e| Error::InvalidData(format!("series {series_id} at t={}: {}", grid.get(i), e.root())))?;
        }
        Ok(Self {
            series_id,
            grid,
            samples,
        })
    }

    pub fn series_id(&self) -> &str {
        &self.series_id
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Per-timepoint Gaussian summaries of the replicates.
    pub fn summaries(&self) -> Vec<GaussianEstimate> {
        self.samples
            .iter()
            .map(|s| summarize_samples(s).expect("validated on construction"))
            .collect()
    }
}

/// Arithmetic mean and Bessel-corrected variance, floored at
/// [`VARIANCE_FLOOR`]. A single sample gets the floor variance.
pub fn summarize_samples(samples: &[f64]) -> Result<GaussianEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidData("cannot summarize zero samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidData("non-finite sample".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = if samples.len() < 2 {
        VARIANCE_FLOOR
    } else {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    GaussianEstimate::floored(mean, variance)
}

/// A path of Gaussian estimates over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    grid: TimeGrid,
    estimates: Vec<GaussianEstimate>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, estimates: Vec<GaussianEstimate>) -> Result<Self> {
        if grid.len() != estimates.len() {
            return Err(Error::InvalidData(format!(
                "trajectory has {} estimates for {} timepoints",
                estimates.len(),
                grid.len()
            )));
        }
        for e in &estimates {
            GaussianEstimate::new(e.mean, e.variance)?;
        }
        Ok(Self { grid, estimates })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn estimates(&self) -> &[GaussianEstimate] {
        &self.estimates
    }

    pub fn len(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    pub fn means(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.mean).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.variance).collect()
    }
}

/// True state values on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl GroundTruth {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::InvalidData(format!(
                "ground truth has {} values for {} timepoints",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite ground truth value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Median of a slice, `None` when empty. NaNs sort last.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
