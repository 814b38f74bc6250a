//! Split conformal prediction sets for multi-class classifier outputs.
//!
//! The crate turns raw logits into prediction sets with a finite-sample
//! marginal coverage guarantee and ships the pieces needed to study how that
//! coverage is distributed across set sizes:
//!
//! - [`data`]: logit CSV ingestion, seeded splitting, prediction-set output.
//! - [`scoring`]: softmax, rank bookkeeping, APS/RAPS/LAC scores, temperature fitting.
//! - [`conformal`]: quantile calibration and set construction for every method.
//! - [`strata`]: set-size strata used for stratified coverage.
//! - [`tuning`]: the size criterion and the stratified minimax (adaptive) criterion for λ.
//! - [`metrics`]: coverage, set size, singleton/empty rates, worst-case stratum coverage.
//! - [`attention`]: spatial entropy of saliency maps and its rank/point-biserial correlation
//!   with set size.
//! - [`synthetic`]: seeded Gaussian-logit generator and Monte Carlo coverage trials.
//! - [`cli`]: the `acp` command-line front end.

pub mod attention;
pub mod cli;
pub mod conformal;
pub mod data;
mod error;
pub mod metrics;
pub mod rng;
pub mod scoring;
pub mod strata;
pub mod synthetic;
pub mod tuning;
mod util;

pub use conformal::{
    calibrate, conformal_quantile, predict_all, predict_set, CalibrationArtifact, Method,
    MethodParams,
};
pub use data::{load_logit_csv, split_dataset, LogitDataset, PredictionSet, SplitSpec};
pub use error::{Error, Result};
pub use metrics::{evaluate, MetricsReport};
pub use strata::StrataSpec;
pub use tuning::{LambdaGrid, TuningReport};
