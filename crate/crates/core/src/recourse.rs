//! Minimum-norm counterfactual actions.
//!
//! Two constraint families are handled:
//!
//! * the halfspace `wᵀ(x + c) ≥ 0`, optionally with a diagonal cost weighting
//!   `‖Dc‖`, solved in closed form by projecting onto the boundary;
//! * the leniency policy `g(z) = wᵀz + β·zᵀA⁻¹z ≥ 0` at `z = x + c`.
//!
//! For the policy constraint `g` is convex, so the denied region `{g < 0}` is
//! an open convex set and the nearest approved point lies on its boundary.
//! Stationarity gives `c(μ) = (μ/2)(I − μβA⁻¹)⁻¹ ∇g(x)`; in the eigenbasis of
//! `A⁻¹` every component is a scalar ratio, and `h(μ) = g(x + c(μ))` is
//! non-decreasing on `(0, 1/(β·γ_max))` (it is minus the derivative of the
//! concave dual function). The unique root there satisfies the KKT conditions
//! with zero duality gap, so it is the global minimizer; it is found by
//! bisection.
//!
//! A coordinate may be frozen (the intercept): it is held at its current
//! value and removed from the action space and the norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posterior::{Posterior, PosteriorError};

/// Cost weight assigned to the intercept coordinate.
pub const FROZEN_WEIGHT: f64 = 1e9;
pub const MAX_BISECTION_STEPS: usize = 200;
/// Threshold below which the pole component of the gradient counts as zero.
const HARD_CASE_TOL: f64 = 1e-12;
const HARD_CASE_NUDGE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RecourseError {
    #[error("no recourse exists under null model")]
    NoRecourse,
    #[error("vector of length {got} where {expected} was expected")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("leniency must be positive and finite, got {0}")]
    InvalidLeniency(f64),
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("frozen coordinate {0} out of range")]
    InvalidFrozen(usize),
    #[error(
        "hard-case failure: pole component {pole_component:.3e}, boundary value at pole {boundary_value:.3e}"
    )]
    HardCase {
        pole_component: f64,
        boundary_value: f64,
    },
    #[error("no convergence after {iterations} bisection steps (|h| = {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
}

/// A recourse action with its cost and solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct RecourseResult {
    pub cost: f64,
    pub action: DVector<f64>,
    /// KKT multiplier of the policy constraint; `None` for halfspace recourse.
    pub multiplier: Option<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl RecourseResult {
    fn already_approved(d: usize, multiplier: Option<f64>) -> Self {
        RecourseResult {
            cost: 0.0,
            action: DVector::zeros(d),
            multiplier,
            kkt_residual: 0.0,
            iterations: 0,
        }
    }
}

/// Positive diagonal of the weighting matrix D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    diag: Vec<f64>,
}

impl CostWeights {
    pub fn new(diag: Vec<f64>) -> Result<Self, RecourseError> {
        if let Some(v) = diag.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(RecourseError::InvalidWeights(format!(
                "entries must be positive and finite, got {v}"
            )));
        }
        Ok(CostWeights { diag })
    }

    pub fn identity(d: usize) -> Self {
        CostWeights { diag: vec![1.0; d] }
    }

    /// `actionable_weight` on actionable columns, `immutable_weight` on the
    /// rest and [`FROZEN_WEIGHT`] on the intercept.
    pub fn from_actionability(
        actionable: &[bool],
        intercept: Option<usize>,
        actionable_weight: f64,
        immutable_weight: f64,
    ) -> Result<Self, RecourseError> {
        let diag = actionable
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if Some(i) == intercept {
                    FROZEN_WEIGHT
                } else if a {
                    actionable_weight
                } else {
                    immutable_weight
                }
            })
            .collect();
        Self::new(diag)
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, RecourseError> {
        Self::new(self.diag.iter().map(|v| v * factor).collect())
    }
}

fn check_len(v: &DVector<f64>, expected: usize) -> Result<(), RecourseError> {
    if v.len() != expected {
        return Err(RecourseError::DimensionMismatch {
            got: v.len(),
            expected,
        });
    }
    Ok(())
}

/// `min ‖c‖₂ s.t. wᵀ(x + c) ≥ 0`.
pub fn linear_recourse(
    w: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<RecourseResult, RecourseError> {
    halfspace_recourse(w, x, None, None)
}

/// `min ‖Dc‖₂ s.t. wᵀ(x + c) ≥ 0`.
pub fn weighted_recourse(
    w: &DVector<f64>,
    x: &DVector<f64>,
    weights: &CostWeights,
) -> Result<RecourseResult, RecourseError> {
    halfspace_recourse(w, x, Some(weights), None)
}

/// Halfspace recourse with optional weighting and one frozen coordinate.
///
/// With `u = Dc` the problem is a Euclidean projection in u-space onto
/// `wᵀx + (D⁻¹w)ᵀu ≥ 0`, so `cost = max(0, −wᵀx)/‖D⁻¹w‖₂`.
pub fn halfspace_recourse(
    w: &DVector<f64>,
    x: &DVector<f64>,
    weights: Option<&CostWeights>,
    frozen: Option<usize>,
) -> Result<RecourseResult, RecourseError> {
    let d = w.len();
    check_len(x, d)?;
    if let Some(cw) = weights {
        if cw.len() != d {
            return Err(RecourseError::DimensionMismatch {
                got: cw.len(),
                expected: d,
            });
        }
    }
    if let Some(f) = frozen {
        if f >= d {
            return Err(RecourseError::InvalidFrozen(f));
        }
    }
    let score = w.dot(x);
    if score >= 0.0 {
        return Ok(RecourseResult::already_approved(d, None));
    }
    let weight = |i: usize| weights.map_or(1.0, |cw| cw.diag[i]);
    let v = DVector::from_fn(d, |i, _| {
        if Some(i) == frozen {
            0.0
        } else {
            w[i] / weight(i)
        }
    });
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return Err(RecourseError::NoRecourse);
    }
    let step = -score / (v_norm * v_norm);
    let action = DVector::from_fn(d, |i, _| step * v[i] / weight(i));
    let slack = w.dot(&(x + &action));
    Ok(RecourseResult {
        cost: -score / v_norm,
        action,
        multiplier: None,
        kkt_residual: slack.abs(),
        iterations: 0,
    })
}

/// Prepared solver for the policy constraint at one (posterior, β) cell.
///
/// Construction diagonalizes `β·A⁻¹` restricted to the free coordinates once;
/// [`PolicyRecourse::solve`] is then cheap per individual.
#[derive(Clone, Debug)]
pub struct PolicyRecourse<'a> {
    posterior: &'a Posterior,
    beta: f64,
    frozen: Option<usize>,
    free: Vec<usize>,
    /// `A⁻¹[free, frozen]` and `A⁻¹[frozen, frozen]`.
    cross: DVector<f64>,
    corner: f64,
    /// Eigenvalues of `β·A⁻¹[free, free]`, descending.
    curvature: DVector<f64>,
    basis: DMatrix<f64>,
}

/// Constraint data in the eigenbasis for a single point.
struct Secular<'s> {
    curvature: &'s DVector<f64>,
    /// `∇q(x)` in the eigenbasis.
    grad: DVector<f64>,
    q0: f64,
}

impl Secular<'_> {
    fn action(&self, mu: f64) -> DVector<f64> {
        DVector::from_fn(self.grad.len(), |k, _| {
            let a = self.grad[k];
            if a == 0.0 {
                0.0
            } else {
                0.5 * mu * a / (1.0 - mu * self.curvature[k])
            }
        })
    }

    /// `q(x + c(μ)) = q(x) + ∇q(x)ᵀc + cᵀPc`.
    fn boundary(&self, mu: f64) -> f64 {
        let c = self.action(mu);
        let mut acc = self.q0;
        for k in 0..c.len() {
            acc += c[k] * (self.grad[k] + self.curvature[k] * c[k]);
        }
        acc
    }
}

impl<'a> PolicyRecourse<'a> {
    pub fn new(
        posterior: &'a Posterior,
        beta: f64,
        frozen: Option<usize>,
    ) -> Result<Self, RecourseError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(RecourseError::InvalidLeniency(beta));
        }
        let d = posterior.d();
        let free: Vec<usize> = (0..d).filter(|&i| Some(i) != frozen).collect();
        let (curvature, basis, cross, corner) = match frozen {
            None => {
                // A⁻¹ shares A's eigenvectors; ascending eig(A) is descending γ.
                let curvature = posterior.eigenvalues.map(|e| beta / e);
                (
                    curvature,
                    posterior.eigenvectors.clone(),
                    DVector::zeros(d),
                    0.0,
                )
            }
            Some(f) => {
                if f >= d {
                    return Err(RecourseError::InvalidFrozen(f));
                }
                let cov = posterior.covariance();
                let sub = cov.select_rows(&free).select_columns(&free);
                let sub = (&sub + sub.transpose()) * 0.5;
                let eig = SymmetricEigen::new(sub);
                let mut order: Vec<usize> = (0..free.len()).collect();
                order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
                let curvature = DVector::from_iterator(
                    order.len(),
                    order.iter().map(|&k| beta * eig.eigenvalues[k].max(0.0)),
                );
                let basis = eig.eigenvectors.select_columns(&order);
                let cross = DVector::from_iterator(free.len(), free.iter().map(|&i| cov[(i, f)]));
                (curvature, basis, cross, cov[(f, f)])
            }
        };
        Ok(PolicyRecourse {
            posterior,
            beta,
            frozen,
            free,
            cross,
            corner,
            curvature,
            basis,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `g(z) = wᵀz + β·zᵀA⁻¹z`, evaluated through the Cholesky factor.
    pub fn constraint_value(&self, z: &DVector<f64>) -> f64 {
        policy_constraint(self.posterior, z, self.beta)
    }

    pub fn solve(&self, x: &DVector<f64>) -> Result<RecourseResult, RecourseError> {
        check_len(x, self.posterior.d())?;
        if self.constraint_value(x) >= 0.0 {
            return Ok(RecourseResult::already_approved(x.len(), Some(0.0)));
        }
        match self.solve_reduced(x) {
            Err(RecourseError::HardCase { .. }) => {
                // nudge along the top curvature direction and retry once
                let dir = self.basis.column(0);
                let mut nudged = x.clone();
                for (k, &i) in self.free.iter().enumerate() {
                    nudged[i] += HARD_CASE_NUDGE * dir[k];
                }
                let mut r = self.solve_reduced(&nudged)?;
                r.action += &nudged - x;
                r.cost = r.action.norm();
                r.kkt_residual = verify_kkt_masked(self.posterior, x, self.beta, self.frozen, &r);
                Ok(r)
            }
            other => other,
        }
    }

    fn secular(&self, x: &DVector<f64>) -> Secular<'_> {
        let w = &self.posterior.w_post;
        let xr = DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| x[i]));
        let wr = DVector::from_iterator(self.free.len(), self.free.iter().map(|&i| w[i]));
        let (lin, constant) = match self.frozen {
            None => (wr, 0.0),
            Some(f) => {
                let xf = x[f];
                (
                    wr + &self.cross * (2.0 * self.beta * xf),
                    w[f] * xf + self.beta * self.corner * xf * xf,
                )
            }
        };
        let xt = self.basis.tr_mul(&xr);
        let bt = self.basis.tr_mul(&lin);
        let mut q0 = constant;
        for k in 0..xt.len() {
            q0 += xt[k] * (self.curvature[k] * xt[k] + bt[k]);
        }
        let grad = DVector::from_fn(xt.len(), |k, _| bt[k] + 2.0 * self.curvature[k] * xt[k]);
        Secular {
            curvature: &self.curvature,
            grad,
            q0,
        }
    }

    fn solve_reduced(&self, x: &DVector<f64>) -> Result<RecourseResult, RecourseError> {
        let mut sec = self.secular(x);
        let q0 = sec.q0;
        if q0 >= 0.0 {
            // approved up to rounding in the eigenbasis
            return Ok(RecourseResult::already_approved(x.len(), Some(0.0)));
        }
        let p_max = self.curvature[0];
        let pole = 1.0 / p_max;
        let top: Vec<usize> = (0..self.curvature.len())
            .filter(|&k| self.curvature[k] >= p_max * (1.0 - 1e-10))
            .collect();
        let pole_component = top.iter().map(|&k| sec.grad[k].powi(2)).sum::<f64>().sqrt();
        let mut h_hi = f64::INFINITY;
        if pole_component <= HARD_CASE_TOL {
            for &k in &top {
                sec.grad[k] = 0.0;
            }
            let at_pole = sec.boundary(pole);
            if at_pole.is_nan() || at_pole < 0.0 {
                return Err(RecourseError::HardCase {
                    pole_component,
                    boundary_value: at_pole,
                });
            }
            h_hi = at_pole;
        }

        // h(μ) ≥ q0 + μ‖∇q‖²/2 on the bracket, which bounds the root
        let grad_sq = sec.grad.norm_squared();
        let mut lo = 0.0;
        let mut hi = pole;
        let bound = 2.0 * (-q0) / grad_sq * (1.0 + 1e-9);
        if bound < pole {
            let hb = sec.boundary(bound);
            if hb >= 0.0 {
                hi = bound;
                h_hi = hb;
            }
        }

        let tol = 1e-10 * (1.0 + q0.abs());
        let mut iterations = 0;
        let mut converged = h_hi <= tol;
        while !converged && iterations < MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            iterations += 1;
            let hm = sec.boundary(mid);
            if hm >= 0.0 {
                hi = mid;
                h_hi = hm;
                converged = hm <= tol;
            } else {
                lo = mid;
            }
        }
        if !h_hi.is_finite() {
            return Err(RecourseError::NonConvergence {
                iterations,
                residual: f64::INFINITY,
            });
        }

        let mu = hi;
        let ct = sec.action(mu);
        let cr = &self.basis * ct;
        let mut action = DVector::zeros(x.len());
        for (k, &i) in self.free.iter().enumerate() {
            action[i] = cr[k];
        }
        let mut result = RecourseResult {
            cost: action.norm(),
            action,
            multiplier: Some(mu),
            kkt_residual: 0.0,
            iterations,
        };
        result.kkt_residual = verify_kkt_masked(self.posterior, x, self.beta, self.frozen, &result);
        if !converged && result.kkt_residual > 1e-8 {
            return Err(RecourseError::NonConvergence {
                iterations,
                residual: h_hi,
            });
        }
        Ok(result)
    }
}

/// `g(z) = wᵀz + β·zᵀA⁻¹z`.
pub fn policy_constraint(p: &Posterior, z: &DVector<f64>, beta: f64) -> f64 {
    p.w_post.dot(z) + beta * p.whiten(z).norm_squared()
}

/// `min ‖c‖₂ s.t. w_postᵀ(x+c) + β(x+c)ᵀA⁻¹(x+c) ≥ 0` over all coordinates.
pub fn policy_recourse(
    p: &Posterior,
    x: &DVector<f64>,
    beta: f64,
) -> Result<RecourseResult, RecourseError> {
    PolicyRecourse::new(p, beta, None)?.solve(x)
}

/// Stationarity plus boundary residual of a policy recourse result,
/// recomputed from the Cholesky factor.
pub fn verify_kkt(p: &Posterior, x: &DVector<f64>, beta: f64, r: &RecourseResult) -> f64 {
    verify_kkt_masked(p, x, beta, None, r)
}

/// As [`verify_kkt`], with stationarity checked only on free coordinates.
pub fn verify_kkt_masked(
    p: &Posterior,
    x: &DVector<f64>,
    beta: f64,
    frozen: Option<usize>,
    r: &RecourseResult,
) -> f64 {
    if r.cost == 0.0 {
        return 0.0;
    }
    let z = x + &r.action;
    let mz = p.covariance_apply(&z);
    let g = p.w_post.dot(&z) + beta * z.dot(&mz);
    let grad = &p.w_post + &mz * (2.0 * beta);
    let mu = r.multiplier.unwrap_or(0.0);
    let stationarity = (0..z.len())
        .filter(|&i| Some(i) != frozen)
        .map(|i| (2.0 * r.action[i] - mu * grad[i]).abs())
        .fold(0.0, f64::max);
    stationarity + g.abs()
}
