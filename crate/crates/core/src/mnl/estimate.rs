use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::design::{Column, MnlProblem};
use crate::error::{Error, Result};
use crate::linalg::{dependent_columns, SpdFactor};
use crate::math::two_sided_p_value;
use crate::matrix::Matrix;

/// Damped Newton settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Stop once the gradient infinity-norm drops below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    /// Step halvings allowed per iteration before giving up.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-6,
            max_iterations: 200,
            max_halvings: 50,
        }
    }
}

/// Goodness of fit on one data split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFit {
    pub n_obs: usize,
    pub n_params: usize,
    pub log_likelihood: f64,
    /// Log-likelihood of the availability-aware uniform model on the same split.
    pub null_log_likelihood: f64,
    pub rho_squared: f64,
    pub rho_bar_squared: f64,
    pub aic: f64,
}

/// Pseudo R², adjusted pseudo R² and AIC for a log-likelihood `ll` with `k`
/// parameters against the null log-likelihood `ll0`.
pub fn fit_metrics(ll: f64, ll0: f64, k: usize, n_obs: usize) -> Result<SplitFit> {
    if ll0 == 0.0 {
        return Err(Error::InvalidArgument(
            "null log-likelihood is zero; pseudo R² undefined".into(),
        ));
    }
    let kf = k as f64;
    Ok(SplitFit {
        n_obs,
        n_params: k,
        log_likelihood: ll,
        null_log_likelihood: ll0,
        rho_squared: 1.0 - ll / ll0,
        rho_bar_squared: 1.0 - (ll - kf) / ll0,
        aic: 2.0 * kf - 2.0 * ll,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub gradient_inf_norm: f64,
    /// An iteration ran out of step halvings without improving the likelihood.
    pub stalled: bool,
    /// Euclidean norm of the coefficients after each accepted step.
    pub coefficient_norms: Vec<f64>,
    /// Observations whose fitted probability of the chosen alternative
    /// exceeds `1 - 1e-6`.
    pub near_certain_observations: usize,
    /// Near-certain fits together with a coefficient above 10 in absolute
    /// value: the likelihood is probably unbounded along some direction.
    pub separation_suspected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub columns: Vec<Column>,
    pub coefficients: Vec<f64>,
    /// Inverse of the negative Hessian at the optimum.
    pub covariance: Matrix,
    pub std_errors: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub p_values: Vec<f64>,
    pub fit: SplitFit,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.label.as_str())
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.columns
            .iter()
            .position(|c| c.label == label)
            .map(|i| self.coefficients[i])
    }

    /// Fit of the estimated coefficients on another split with the same design
    /// columns. Pseudo R² uses that split's own null log-likelihood.
    pub fn evaluate(&self, problem: &MnlProblem) -> Result<SplitFit> {
        self.check_columns(problem)?;
        fit_metrics(
            problem.log_likelihood(&self.coefficients),
            problem.null_log_likelihood(),
            self.n_params(),
            problem.n_obs(),
        )
    }

    fn check_columns(&self, problem: &MnlProblem) -> Result<()> {
        if problem.design.columns() != self.columns.as_slice() {
            return Err(Error::Shape(
                "design columns differ from the estimated model".into(),
            ));
        }
        Ok(())
    }
}

/// Design columns that are linear combinations of earlier ones once each
/// observation is centred over its available alternatives (such columns are
/// not identified in a logit model).
pub fn dependent_design_columns(problem: &MnlProblem) -> Vec<usize> {
    let p = problem.design.n_params();
    let (_, _, mut hess) = problem.derivatives(&vec![0.0; p]);
    for x in hess.as_mut_slice() {
        *x = -*x;
    }
    dependent_columns(&hess, 1e-10)
}

/// Maximum-likelihood estimate by damped Newton iterations from zero.
///
/// The MNL log-likelihood is concave, so each step is halved until the
/// likelihood does not decrease. Rank-deficient designs are rejected up
/// front with the offending column labels.
pub fn estimate(problem: &MnlProblem, options: &NewtonOptions) -> Result<EstimationResult> {
    let dependent = dependent_design_columns(problem);
    if !dependent.is_empty() {
        let labels: Vec<String> = dependent
            .iter()
            .map(|&i| problem.design.columns()[i].label.clone())
            .collect();
        return Err(Error::RankDeficient(labels));
    }

    let p = problem.design.n_params();
    let mut beta = vec![0.0; p];
    let mut iterations = 0;
    let mut stalled = false;
    let mut norms = Vec::new();
    let (mut ll, mut grad, mut hess) = problem.derivatives(&beta);

    while inf_norm(&grad) >= options.gradient_tolerance && iterations < options.max_iterations {
        let neg_hess = negate(&hess);
        let factor = SpdFactor::new(&neg_hess).ok_or(Error::SingularHessian { iterations })?;
        let step = factor.solve(&grad);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=options.max_halvings {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_ll = problem.log_likelihood(&candidate);
            if cand_ll.is_finite() && cand_ll >= ll {
                accepted = Some(candidate);
                break;
            }
            scale *= 0.5;
        }
        let Some(next) = accepted else {
            stalled = true;
            break;
        };
        beta = next;
        iterations += 1;
        norms.push(libm::sqrt(beta.iter().map(|b| b * b).sum()));
        (ll, grad, hess) = problem.derivatives(&beta);
    }

    let gradient_inf_norm = inf_norm(&grad);
    let factor = SpdFactor::new(&negate(&hess)).ok_or(Error::SingularHessian { iterations })?;
    let covariance = factor.inverse();
    let std_errors: Vec<f64> = (0..p).map(|i| libm::sqrt(covariance[(i, i)].max(0.0))).collect();
    let z_scores: Vec<f64> = beta.iter().zip(&std_errors).map(|(b, s)| b / s).collect();
    let p_values = z_scores.iter().map(|&z| two_sided_p_value(z)).collect();

    let probs = problem.probabilities(&beta);
    let near_certain = (0..problem.n_obs())
        .filter(|&n| probs[(n, problem.choices[n])] > 1.0 - 1e-6)
        .count();
    let max_abs = beta.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let fit = fit_metrics(ll, problem.null_log_likelihood(), p, problem.n_obs())?;
    if gradient_inf_norm >= options.gradient_tolerance {
        log::warn!(
            "Newton stopped after {iterations} iterations with gradient norm {gradient_inf_norm:e}"
        );
    }

    Ok(EstimationResult {
        columns: problem.design.columns().to_vec(),
        coefficients: beta,
        covariance,
        std_errors,
        z_scores,
        p_values,
        fit,
        diagnostics: Diagnostics {
            iterations,
            converged: gradient_inf_norm < options.gradient_tolerance,
            gradient_inf_norm,
            stalled,
            coefficient_norms: norms,
            near_certain_observations: near_certain,
            separation_suspected: near_certain > 0 && max_abs > 10.0,
        },
    })
}

/// Estimates after dropping dependent columns; returns the result and the
/// labels that were dropped.
pub fn estimate_dropping_dependent(
    problem: &MnlProblem,
    options: &NewtonOptions,
) -> Result<(EstimationResult, MnlProblem, Vec<String>)> {
    let dependent = dependent_design_columns(problem);
    let dropped: Vec<String> = dependent
        .iter()
        .map(|&i| problem.design.columns()[i].label.clone())
        .collect();
    if !dropped.is_empty() {
        log::warn!("dropping {} dependent columns: {}", dropped.len(), dropped.join(", "));
    }
    let reduced = problem.drop_columns(&dependent);
    let result = estimate(&reduced, options)?;
    Ok((result, reduced, dropped))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
}

fn negate(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for x in out.as_mut_slice() {
        *x = -*x;
    }
    out
}
