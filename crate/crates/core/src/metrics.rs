//! Per-cell objective values: capped negative log-probability and the
//! contextual recourse costs, with the false/true-negative split.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::exec::Execution;
use crate::posterior::{
    capped_row_log_prob, decide, fit_posterior_from_gram, positive_probability, predictive_score,
    Belief, Decision, GramSummary, Posterior, PosteriorError, INTERCEPT_PROFILE,
};
use crate::recourse::{
    halfspace_recourse, CostWeights, PolicyRecourse, RecourseError, RecourseResult,
};
use crate::sum;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: RecourseError,
    },
    #[error("row {row}: {source}")]
    Score {
        row: usize,
        #[source]
        source: PosteriorError,
    },
    #[error(transparent)]
    Recourse(#[from] RecourseError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    /// Euclidean recourse over every feature.
    Plain,
    /// Weighted recourse `‖Dc‖`, with the prior profile set to D as well.
    Actionable,
    /// Recourse split into false-negative and true-negative denials.
    FnTnSplit,
    /// Leniency policy `μ + β·sd ≥ 0` with its quadratic recourse.
    Policy,
}

/// Denominator of the cost means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostAveraging {
    /// Divide by n; accepted rows contribute zeros.
    #[default]
    AllRows,
    /// Divide by the number of denials.
    DeniedRows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextSpec {
    pub kind: ContextKind,
    #[serde(default)]
    pub weights: Option<CostWeights>,
    #[serde(default)]
    pub tn_floor: Option<f64>,
    #[serde(default)]
    pub averaging: CostAveraging,
}

impl ContextSpec {
    pub fn plain() -> Self {
        Self::of_kind(ContextKind::Plain)
    }

    pub fn actionable(weights: CostWeights) -> Self {
        ContextSpec {
            weights: Some(weights),
            ..Self::of_kind(ContextKind::Actionable)
        }
    }

    pub fn fn_tn_split(tn_floor: Option<f64>) -> Self {
        ContextSpec {
            tn_floor,
            ..Self::of_kind(ContextKind::FnTnSplit)
        }
    }

    pub fn policy() -> Self {
        Self::of_kind(ContextKind::Policy)
    }

    fn of_kind(kind: ContextKind) -> Self {
        ContextSpec {
            kind,
            weights: None,
            tn_floor: None,
            averaging: CostAveraging::AllRows,
        }
    }

    pub fn validate(&self, d: usize) -> Result<(), MetricsError> {
        let bad = |m: String| Err(MetricsError::InvalidContext(m));
        match (self.kind, &self.weights) {
            (ContextKind::Actionable, None) => {
                return bad("actionable context requires weights".into())
            }
            (ContextKind::Policy, Some(_)) => {
                return bad("policy context uses the unweighted norm; drop the weights".into())
            }
            _ => {}
        }
        if let Some(w) = &self.weights {
            if w.len() != d {
                return bad(format!("{} cost weights for {d} columns", w.len()));
            }
        }
        if let Some(f) = self.tn_floor {
            if !(f >= 0.0 && f.is_finite()) {
                return bad(format!("tn_floor must be non-negative, got {f}"));
            }
        }
        Ok(())
    }

    /// Prior precision profile for `ds` under this context: the cost weights
    /// for the actionable context, ones otherwise; the intercept always gets
    /// [`INTERCEPT_PROFILE`].
    pub fn prior_profile(&self, ds: &Dataset) -> Vec<f64> {
        (0..ds.d())
            .map(|j| {
                if Some(j) == ds.intercept {
                    INTERCEPT_PROFILE
                } else {
                    match (self.kind, &self.weights) {
                        (ContextKind::Actionable, Some(w)) => w.diag()[j],
                        _ => 1.0,
                    }
                }
            })
            .collect()
    }

    fn check_beta(&self, beta: f64) -> Result<(), MetricsError> {
        if self.kind != ContextKind::Policy && beta != 0.0 {
            return Err(MetricsError::InvalidContext(format!(
                "leniency β = {beta} requires the policy context"
            )));
        }
        Ok(())
    }
}

/// Metrics of one belief cell; every mean is over all rows unless the
/// context asks for the denied-row denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCellMetrics {
    pub belief: Belief,
    pub neg_log_prob: f64,
    pub avg_cost: f64,
    pub fn_cost: f64,
    pub tn_cost: f64,
    pub denial_count: usize,
}

/// A fitted cell ready to score and explain individuals.
pub struct CellModel<'a> {
    pub posterior: &'a Posterior,
    pub beta: f64,
    weights: Option<&'a CostWeights>,
    frozen: Option<usize>,
    policy: Option<PolicyRecourse<'a>>,
}

impl<'a> CellModel<'a> {
    pub fn new(
        posterior: &'a Posterior,
        beta: f64,
        weights: Option<&'a CostWeights>,
        frozen: Option<usize>,
    ) -> Result<Self, MetricsError> {
        let policy = if beta > 0.0 {
            Some(PolicyRecourse::new(posterior, beta, frozen)?)
        } else {
            None
        };
        Ok(CellModel {
            posterior,
            beta,
            weights,
            frozen,
            policy,
        })
    }

    /// Recourse under this cell's policy: the quadratic constraint when
    /// β > 0, the (weighted) halfspace otherwise.
    pub fn recourse(&self, x: &DVector<f64>) -> Result<RecourseResult, RecourseError> {
        match &self.policy {
            Some(solver) => solver.solve(x),
            None => halfspace_recourse(&self.posterior.w_post, x, self.weights, self.frozen),
        }
    }

    pub fn explain(&self, x: &DVector<f64>, label: f64) -> Result<RowOutcome, MetricsError> {
        self.explain_row(x, label, true).map_err(|e| match e {
            RowFailure::Score(e) => MetricsError::Posterior(e),
            RowFailure::Recourse(e) => MetricsError::Recourse(e),
        })
    }

    fn explain_row(
        &self,
        x: &DVector<f64>,
        label: f64,
        keep_action: bool,
    ) -> Result<RowOutcome, RowFailure> {
        let score = predictive_score(self.posterior, x).map_err(RowFailure::Score)?;
        let decision = decide(&score, self.beta);
        let (cost, action) = match decision {
            Decision::Approve => (0.0, None),
            Decision::Deny => {
                let r = self.recourse(x).map_err(RowFailure::Recourse)?;
                (r.cost, keep_action.then_some(r))
            }
        };
        Ok(RowOutcome {
            label,
            decision,
            probability: positive_probability(&score, self.beta),
            log_prob: capped_row_log_prob(label, score.z, self.beta),
            cost,
            recourse: action,
        })
    }
}

enum RowFailure {
    Score(PosteriorError),
    Recourse(RecourseError),
}

/// Everything computed for one individual at one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RowOutcome {
    pub label: f64,
    pub decision: Decision,
    pub probability: f64,
    pub log_prob: f64,
    /// Context recourse cost; 0 for approved rows.
    pub cost: f64,
    pub recourse: Option<RecourseResult>,
}

/// Mean false-negative and true-negative recourse costs.
pub fn fn_tn_costs(rows: &[(f64, Decision, f64)], averaging: CostAveraging) -> (f64, f64) {
    let split = |want: f64| -> Vec<f64> {
        rows.iter()
            .map(|&(y, dec, c)| {
                if dec == Decision::Deny && y == want {
                    c
                } else {
                    0.0
                }
            })
            .collect()
    };
    let denom = match averaging {
        CostAveraging::AllRows => rows.len(),
        CostAveraging::DeniedRows => rows.iter().filter(|r| r.1 == Decision::Deny).count(),
    };
    if denom == 0 {
        return (0.0, 0.0);
    }
    let fnc = sum::compensated_sum(&split(1.0)) / denom as f64;
    let tnc = sum::compensated_sum(&split(-1.0)) / denom as f64;
    (fnc, tnc)
}

/// Cells whose true-negative cost reaches `floor`, in input order.
pub fn apply_tn_floor(cells: &[GridCellMetrics], floor: f64) -> Vec<GridCellMetrics> {
    cells
        .iter()
        .filter(|c| c.tn_cost >= floor)
        .cloned()
        .collect()
}

pub fn evaluate_cell(
    ds: &Dataset,
    b: &Belief,
    ctx: &ContextSpec,
) -> Result<GridCellMetrics, MetricsError> {
    evaluate_cell_with(
        ds,
        &GramSummary::from_dataset(ds),
        b,
        ctx,
        Execution::default(),
    )
}

/// [`evaluate_cell`] with precomputed sufficient statistics and an explicit
/// row execution strategy.
pub fn evaluate_cell_with(
    ds: &Dataset,
    gram: &GramSummary,
    b: &Belief,
    ctx: &ContextSpec,
    exec: Execution,
) -> Result<GridCellMetrics, MetricsError> {
    ctx.validate(ds.d())?;
    ctx.check_beta(b.beta)?;
    let posterior = fit_posterior_from_gram(gram, b)?;
    let model = CellModel::new(&posterior, b.beta, ctx.weights.as_ref(), ds.intercept)?;
    let rows = exec.try_map_indexed(ds.n(), |i| {
        model
            .explain_row(&ds.row(i), ds.y[i], false)
            .map_err(|e| match e {
                RowFailure::Score(source) => MetricsError::Score { row: i, source },
                RowFailure::Recourse(source) => MetricsError::Row { row: i, source },
            })
    })?;
    Ok(aggregate(b, &rows, ctx.averaging))
}

fn aggregate(b: &Belief, rows: &[RowOutcome], averaging: CostAveraging) -> GridCellMetrics {
    let logs: Vec<f64> = rows.iter().map(|r| r.log_prob).collect();
    let costs: Vec<f64> = rows.iter().map(|r| r.cost).collect();
    let denial_count = rows.iter().filter(|r| r.decision == Decision::Deny).count();
    let triples: Vec<(f64, Decision, f64)> =
        rows.iter().map(|r| (r.label, r.decision, r.cost)).collect();
    let (fn_cost, tn_cost) = fn_tn_costs(&triples, averaging);
    let denom = match averaging {
        CostAveraging::AllRows => rows.len(),
        CostAveraging::DeniedRows => denial_count,
    };
    let avg_cost = if denom == 0 {
        0.0
    } else {
        sum::compensated_sum(&costs) / denom as f64
    };
    GridCellMetrics {
        belief: b.clone(),
        neg_log_prob: -sum::mean(&logs),
        avg_cost,
        fn_cost,
        tn_cost,
        denial_count,
    }
}
