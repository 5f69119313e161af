//! Belief calibration for Bayesian linear credit models.
//!
//! A belief is a hyperparameter cell `(σ, λ·D, β)`. Each cell is scored on
//! predictive fit (capped negative log-probability) and on the cost of
//! counterfactual recourse for denied applicants; the non-dominated cells form
//! the calibrated set.
//!
//! The crate is organised bottom-up:
//!
//! - [`data`]: CSV ingestion, label encoding, standardization, subsampling
//! - [`posterior`]: exact Gaussian posterior, predictive scores, decisions
//! - [`recourse`]: halfspace, weighted and leniency-policy recourse
//! - [`metrics`]: per-cell objective values in each context
//! - [`calibrate`] and [`pareto`]: the grid sweep and frontier extraction
//!
//! Data-parallel loops go through [`exec::Execution`]; disabling the default
//! `parallel` feature gives a purely sequential build with identical output.

pub mod calibrate;
pub mod data;
pub mod exec;
pub mod metrics;
pub mod normal;
pub mod pareto;
pub mod posterior;
pub mod recourse;
pub mod sum;
pub mod synthetic;

pub use calibrate::{
    calibrate_run, frontier_from_cells, parse_objectives, sweep, BeliefGrid, CalibrateError,
    CalibrationRun, Filters, Objective,
};
pub use data::{load_csv, subsample, DataError, Dataset, Preprocessing, RawTable, SubsampleSpec};
pub use exec::Execution;
pub use metrics::{evaluate_cell, ContextKind, ContextSpec, CostAveraging, GridCellMetrics};
pub use pareto::{pareto_front, ObjectiveVector, ParetoSet};
pub use posterior::{fit_posterior, Belief, Decision, Posterior, PredictiveScore};
pub use recourse::{
    linear_recourse, policy_recourse, weighted_recourse, CostWeights, RecourseError, RecourseResult,
};
