//! Exact Gaussian posterior of Bayesian linear regression, predictive scores
//! and the capped log-probability metric.
//!
//! The prior is `N(0, Λ⁻¹)` with precision `Λ = λ·diag(profile)`, so the
//! posterior precision is `A = σ⁻² XᵀX + Λ` and the mean solves
//! `A w = σ⁻² Xᵀy`. Larger λ or profile entries mean stronger shrinkage.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::exec::Execution;
use crate::normal::{log_normal_cdf, normal_cdf};
use crate::sum;

/// Floor applied to each per-row log-probability.
pub const LOG_PROB_FLOOR: f64 = -5.0;
/// Prior precision multiplier of the bias column (effectively unpenalized).
pub const INTERCEPT_PROFILE: f64 = 1e-6;
pub const INTERCEPT_NAME: &str = "(intercept)";

#[derive(Debug, Error, PartialEq)]
pub enum PosteriorError {
    #[error("invalid belief: {0}")]
    InvalidBelief(String),
    #[error("weight profile has {profile} entries, dataset has {d} columns")]
    ProfileArity { profile: usize, d: usize },
    #[error("non-finite input to posterior fit")]
    NonFinite,
    #[error("posterior precision is not positive definite (internal error)")]
    NotPositiveDefinite,
    #[error("feature vector has {got} entries, posterior has {d}")]
    DimensionMismatch { got: usize, d: usize },
    #[error("predictive standard deviation numerically zero for nonzero input")]
    DegenerateScore,
}

/// One hyperparameter cell: noise scale, prior strength, per-feature prior
/// precision multipliers and decision leniency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub sigma: f64,
    pub lambda: f64,
    pub weight_profile: Vec<f64>,
    pub beta: f64,
}

impl Belief {
    pub fn new(
        sigma: f64,
        lambda: f64,
        weight_profile: Vec<f64>,
        beta: f64,
    ) -> Result<Self, PosteriorError> {
        let b = Belief {
            sigma,
            lambda,
            weight_profile,
            beta,
        };
        b.validate()?;
        Ok(b)
    }

    /// Unit profile over `d` columns.
    pub fn uniform(sigma: f64, lambda: f64, d: usize, beta: f64) -> Result<Self, PosteriorError> {
        Self::new(sigma, lambda, vec![1.0; d], beta)
    }

    pub fn validate(&self) -> Result<(), PosteriorError> {
        let bad = |m: &str| Err(PosteriorError::InvalidBelief(m.to_owned()));
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive and finite");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive and finite");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative and finite");
        }
        if self
            .weight_profile
            .iter()
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return bad("weight profile entries must be positive and finite");
        }
        Ok(())
    }

    /// Diagonal of the prior precision `λ·profile`.
    pub fn prior_precision(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.weight_profile.len(),
            self.weight_profile.iter().map(|v| self.lambda * v),
        )
    }
}

/// Append a constant bias column, non-actionable, as the last feature.
pub fn add_intercept(ds: &Dataset) -> Dataset {
    if ds.intercept.is_some() {
        return ds.clone();
    }
    let d = ds.d();
    let x = ds.x.clone().insert_column(d, 1.0);
    let mut names = ds.feature_names.clone();
    names.push(INTERCEPT_NAME.to_owned());
    let mut actionable = ds.actionable.clone();
    actionable.push(false);
    Dataset {
        x,
        y: ds.y.clone(),
        feature_names: names,
        actionable,
        standardization: ds.standardization.clone(),
        intercept: Some(d),
    }
}

/// Sufficient statistics `XᵀX` and `Xᵀy`, shared by every belief cell.
#[derive(Clone, Debug)]
pub struct GramSummary {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
}

impl GramSummary {
    pub fn from_dataset(ds: &Dataset) -> Self {
        GramSummary {
            gram: ds.x.tr_mul(&ds.x),
            xty: ds.x.tr_mul(&ds.y),
        }
    }

    pub fn d(&self) -> usize {
        self.xty.len()
    }
}

/// Posterior `N(w_post, A⁻¹)` with the factorizations of `A` that later
/// stages reuse.
#[derive(Clone, Debug)]
pub struct Posterior {
    pub w_post: DVector<f64>,
    pub precision: DMatrix<f64>,
    /// Lower Cholesky factor L with L·Lᵀ = A.
    pub chol: DMatrix<f64>,
    /// Eigenvalues of A, ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors of A, column k paired with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

pub fn fit_posterior(ds: &Dataset, b: &Belief) -> Result<Posterior, PosteriorError> {
    fit_posterior_from_gram(&GramSummary::from_dataset(ds), b)
}

pub fn fit_posterior_from_gram(g: &GramSummary, b: &Belief) -> Result<Posterior, PosteriorError> {
    b.validate()?;
    let d = g.d();
    if b.weight_profile.len() != d {
        return Err(PosteriorError::ProfileArity {
            profile: b.weight_profile.len(),
            d,
        });
    }
    if g.gram.iter().chain(g.xty.iter()).any(|v| !v.is_finite()) {
        return Err(PosteriorError::NonFinite);
    }
    let inv_var = 1.0 / (b.sigma * b.sigma);
    let mut a = &g.gram * inv_var + DMatrix::from_diagonal(&b.prior_precision());
    a = (&a + a.transpose()) * 0.5;
    let chol = nalgebra::Cholesky::new(a.clone()).ok_or(PosteriorError::NotPositiveDefinite)?;
    let w_post = chol.solve(&(&g.xty * inv_var));
    let l = chol.l();

    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = eig.eigenvectors.select_columns(&order);
    if eigenvalues[0].is_nan() || eigenvalues[0] <= 0.0 {
        return Err(PosteriorError::NotPositiveDefinite);
    }
    Ok(Posterior {
        w_post,
        precision: a,
        chol: l,
        eigenvalues,
        eigenvectors,
    })
}

impl Posterior {
    pub fn d(&self) -> usize {
        self.w_post.len()
    }

    /// `L⁻¹ v` by forward substitution.
    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `A⁻¹ v` through the Cholesky factor.
    pub fn covariance_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let half = self.whiten(v);
        self.chol
            .tr_solve_lower_triangular(&half)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// Dense `A⁻¹` assembled from the eigendecomposition.
    pub fn covariance(&self) -> DMatrix<f64> {
        let inv = self.eigenvalues.map(|e| 1.0 / e);
        &self.eigenvectors * DMatrix::from_diagonal(&inv) * self.eigenvectors.transpose()
    }
}

/// Predictive mean, standard deviation and standardized score of `wᵀx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictiveScore {
    pub mu: f64,
    pub sd: f64,
    pub z: f64,
}

pub fn predictive_score(
    p: &Posterior,
    x: &DVector<f64>,
) -> Result<PredictiveScore, PosteriorError> {
    if x.len() != p.d() {
        return Err(PosteriorError::DimensionMismatch {
            got: x.len(),
            d: p.d(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PosteriorError::NonFinite);
    }
    let mu = p.w_post.dot(x);
    if x.iter().all(|&v| v == 0.0) {
        return Ok(PredictiveScore {
            mu: 0.0,
            sd: 0.0,
            z: 0.0,
        });
    }
    let sd = p.whiten(x).norm();
    if sd < 1e-300 {
        return Err(PosteriorError::DegenerateScore);
    }
    Ok(PredictiveScore { mu, sd, z: mu / sd })
}

/// Scores of every row of `ds`, in row order.
pub fn score_rows(
    ds: &Dataset,
    p: &Posterior,
    exec: Execution,
) -> Result<Vec<PredictiveScore>, PosteriorError> {
    exec.try_map_indexed(ds.n(), |i| predictive_score(p, &ds.row(i)))
}

/// Φ(z + β): probability that the lenient threshold rule approves.
pub fn positive_probability(s: &PredictiveScore, beta: f64) -> f64 {
    normal_cdf(s.z + beta)
}

/// Credit decision under the leniency policy `μ + β·sd ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Approve,
    Deny,
}

impl Decision {
    pub fn sign(self) -> i8 {
        match self {
            Decision::Approve => 1,
            Decision::Deny => -1,
        }
    }
}

pub fn decide(s: &PredictiveScore, beta: f64) -> Decision {
    if s.mu + beta * s.sd >= 0.0 {
        Decision::Approve
    } else {
        Decision::Deny
    }
}

/// `log Φ(y·(z + β))` floored at [`LOG_PROB_FLOOR`].
pub fn capped_row_log_prob(y: f64, z: f64, beta: f64) -> f64 {
    log_normal_cdf(y * (z + beta)).max(LOG_PROB_FLOOR)
}

/// Mean negative capped log-probability of the observed labels.
pub fn capped_log_prob(ds: &Dataset, p: &Posterior, beta: f64) -> Result<f64, PosteriorError> {
    let scores = score_rows(ds, p, Execution::default())?;
    let logs: Vec<f64> = scores
        .iter()
        .zip(ds.y.iter())
        .map(|(s, &y)| capped_row_log_prob(y, s.z, beta))
        .collect();
    Ok(-sum::mean(&logs))
}
