//! Belief-grid sweep and Pareto calibration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::exec::Execution;
use crate::metrics::{
    apply_tn_floor, evaluate_cell_with, ContextKind, ContextSpec, GridCellMetrics, MetricsError,
};
use crate::pareto::{pareto_front, ObjectiveVector, ParetoError, ParetoSet};
use crate::posterior::{Belief, GramSummary, PosteriorError};

/// Noise and prior-strength values used by the reference credit sweep.
pub const DEFAULT_SCALES: [f64; 5] = [0.001, 0.01, 0.1, 1.0, 10.0];
/// Leniency values of the reference policy sweep.
pub const DEFAULT_BETAS: [f64; 3] = [0.1, 1.0, 10.0];
/// True-negative cost floor of the reference FN/TN calibration.
pub const DEFAULT_TN_FLOOR: f64 = 0.0188;

#[derive(Debug, Error, PartialEq)]
pub enum CalibrateError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown objective `{0}`")]
    UnknownObjective(String),
    #[error("at least one objective is required")]
    NoObjectives,
    #[error("cell sigma={sigma} lambda={lambda} beta={beta}: {source}")]
    Cell {
        sigma: f64,
        lambda: f64,
        beta: f64,
        #[source]
        source: MetricsError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Pareto(#[from] ParetoError),
}

/// Cross product of σ, λ and β values, each strictly ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefGrid {
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    #[serde(default = "zero_betas")]
    pub betas: Vec<f64>,
}

fn zero_betas() -> Vec<f64> {
    vec![0.0]
}

impl BeliefGrid {
    pub fn new(
        sigmas: Vec<f64>,
        lambdas: Vec<f64>,
        betas: Vec<f64>,
    ) -> Result<Self, CalibrateError> {
        let g = BeliefGrid {
            sigmas,
            lambdas,
            betas,
        };
        g.validate()?;
        Ok(g)
    }

    /// 5 × 5 grid over σ and λ with β = 0.
    pub fn reference() -> Self {
        BeliefGrid {
            sigmas: DEFAULT_SCALES.to_vec(),
            lambdas: DEFAULT_SCALES.to_vec(),
            betas: zero_betas(),
        }
    }

    /// Reference grid crossed with the leniency values.
    pub fn reference_policy() -> Self {
        BeliefGrid {
            betas: DEFAULT_BETAS.to_vec(),
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<(), CalibrateError> {
        let check = |name: &str, v: &[f64], allow_zero: bool| -> Result<(), CalibrateError> {
            if v.is_empty() {
                return Err(CalibrateError::InvalidGrid(format!("{name} is empty")));
            }
            if v.iter()
                .any(|x| !x.is_finite() || *x < 0.0 || (!allow_zero && *x == 0.0))
            {
                return Err(CalibrateError::InvalidGrid(format!(
                    "{name} must be {}",
                    if allow_zero {
                        "non-negative"
                    } else {
                        "positive"
                    }
                )));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(CalibrateError::InvalidGrid(format!(
                    "{name} must be strictly ascending"
                )));
            }
            Ok(())
        };
        check("sigmas", &self.sigmas, false)?;
        check("lambdas", &self.lambdas, false)?;
        check("betas", &self.betas, true)
    }

    pub fn len(&self) -> usize {
        self.sigmas.len() * self.lambdas.len() * self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (σ, λ, β) of cell `index` in row-major order.
    pub fn cell(&self, index: usize) -> (f64, f64, f64) {
        let nb = self.betas.len();
        let nl = self.lambdas.len();
        let b = index % nb;
        let l = (index / nb) % nl;
        let s = index / (nb * nl);
        (self.sigmas[s], self.lambdas[l], self.betas[b])
    }
}

/// Cells of `grid` for `ds` under `ctx`, in row-major (σ, λ, β) order.
pub fn sweep(
    ds: &Dataset,
    grid: &BeliefGrid,
    ctx: &ContextSpec,
) -> Result<Vec<GridCellMetrics>, CalibrateError> {
    sweep_with(ds, grid, ctx, Execution::default())
}

pub fn sweep_with(
    ds: &Dataset,
    grid: &BeliefGrid,
    ctx: &ContextSpec,
    exec: Execution,
) -> Result<Vec<GridCellMetrics>, CalibrateError> {
    grid.validate()?;
    ctx.validate(ds.d())?;
    if ctx.kind != ContextKind::Policy && grid.betas != [0.0] {
        return Err(CalibrateError::InvalidGrid(
            "non-zero betas require the policy context".into(),
        ));
    }
    let gram = GramSummary::from_dataset(ds);
    let profile = ctx.prior_profile(ds);
    exec.try_map_indexed(grid.len(), |i| {
        let (sigma, lambda, beta) = grid.cell(i);
        let annotate = |source: MetricsError| CalibrateError::Cell {
            sigma,
            lambda,
            beta,
            source,
        };
        let belief =
            Belief::new(sigma, lambda, profile.clone(), beta).map_err(|e| annotate(e.into()))?;
        evaluate_cell_with(ds, &gram, &belief, ctx, exec).map_err(annotate)
    })
}

/// A column of [`GridCellMetrics`] usable as a minimized objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    AvgCost,
    NegLogProb,
    FnCost,
    TnCost,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::AvgCost,
        Objective::NegLogProb,
        Objective::FnCost,
        Objective::TnCost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::AvgCost => "avg_cost",
            Objective::NegLogProb => "neg_log_prob",
            Objective::FnCost => "fn_cost",
            Objective::TnCost => "tn_cost",
        }
    }

    pub fn value(self, m: &GridCellMetrics) -> f64 {
        match self {
            Objective::AvgCost => m.avg_cost,
            Objective::NegLogProb => m.neg_log_prob,
            Objective::FnCost => m.fn_cost,
            Objective::TnCost => m.tn_cost,
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = CalibrateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| CalibrateError::UnknownObjective(s.to_owned()))
    }
}

pub fn parse_objectives<S: AsRef<str>>(names: &[S]) -> Result<Vec<Objective>, CalibrateError> {
    if names.is_empty() {
        return Err(CalibrateError::NoObjectives);
    }
    names.iter().map(|n| n.as_ref().parse()).collect()
}

/// Cell filters applied before frontier extraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Filters {
    pub tn_floor: Option<f64>,
}

impl Filters {
    pub fn from_context(ctx: &ContextSpec) -> Self {
        Filters {
            tn_floor: ctx.tn_floor,
        }
    }
}

/// Full cell table plus the frontier over the requested objectives.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationRun {
    pub cells: Vec<GridCellMetrics>,
    pub objectives: Vec<Objective>,
    /// Cells left after filtering.
    pub retained: usize,
    pub frontier: ParetoSet<Belief>,
    /// Set when the filters removed every cell.
    pub empty_after_filter: bool,
}

/// Filter → project → Pareto front over an existing cell table.
pub fn frontier_from_cells(
    cells: &[GridCellMetrics],
    objectives: &[Objective],
    filters: &Filters,
) -> Result<(ParetoSet<Belief>, usize), CalibrateError> {
    if objectives.is_empty() {
        return Err(CalibrateError::NoObjectives);
    }
    let kept = match filters.tn_floor {
        Some(floor) => apply_tn_floor(cells, floor),
        None => cells.to_vec(),
    };
    let projected: Vec<(Belief, ObjectiveVector)> = kept
        .iter()
        .map(|m| {
            (
                m.belief.clone(),
                ObjectiveVector::new(objectives.iter().map(|o| o.value(m)).collect()),
            )
        })
        .collect();
    Ok((pareto_front(&projected)?, kept.len()))
}

pub fn calibrate_run(
    ds: &Dataset,
    grid: &BeliefGrid,
    ctx: &ContextSpec,
    objectives: &[Objective],
    filters: &Filters,
) -> Result<CalibrationRun, CalibrateError> {
    calibrate_run_with(ds, grid, ctx, objectives, filters, Execution::default())
}

pub fn calibrate_run_with(
    ds: &Dataset,
    grid: &BeliefGrid,
    ctx: &ContextSpec,
    objectives: &[Objective],
    filters: &Filters,
    exec: Execution,
) -> Result<CalibrationRun, CalibrateError> {
    if objectives.is_empty() {
        return Err(CalibrateError::NoObjectives);
    }
    let cells = sweep_with(ds, grid, ctx, exec)?;
    let (frontier, retained) = frontier_from_cells(&cells, objectives, filters)?;
    Ok(CalibrationRun {
        cells,
        objectives: objectives.to_vec(),
        retained,
        empty_after_filter: retained == 0,
        frontier,
    })
}
