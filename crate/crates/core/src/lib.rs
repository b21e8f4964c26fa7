//! Pathspace Kalman Filter: a univariate filter that re-estimates its process
//! uncertainty at every timepoint from how far an internal ODE-spline model
//! strays from the data, iterating over whole paths.

// `!(x > 0.0)` is used on purpose so NaN lands in the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod bench;
pub mod error;
pub mod models;
pub mod pkf;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use models::{InternalModel, ModelKind, ModelPrediction};
pub use pkf::{run_pkf, PkfOptions, PkfResult, PkfState};
pub use series::{GaussianEstimate, GroundTruth, TimeGrid, TimeSeriesData, Trajectory, VARIANCE_FLOOR};
