//! Back-projection of encoded-variable coefficients into per-category
//! (dummy-space) coefficients with propagated standard errors.
//!
//! For a category with encoding row `w` and block coefficients `beta` with
//! covariance `S`, the projected coefficient is `w · beta` and its variance
//! `wᵀ S w`. With `independent = true` the off-diagonal covariances are
//! ignored, giving `sum_k w_k² S_kk`.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::ChoiceDataset;
use crate::encoders::{translate, EncoderModel};
use crate::error::{Error, Result};
use crate::math::{masked_softmax_into, two_sided_p_value};
use crate::matrix::Matrix;
use crate::mnl::{ColumnOrigin, EstimationResult, MnlProblem};

/// Significance level for [`ProjectedCoefficient::significant`].
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedCoefficient {
    pub variable: String,
    pub category: String,
    pub alternative: usize,
    pub coefficient: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Projects one variable's coefficient block for one alternative.
pub fn project(
    encoder: &EncoderModel,
    beta: &[f64],
    covariance: &Matrix,
    alternative: usize,
    independent: bool,
) -> Result<Vec<ProjectedCoefficient>> {
    let k = encoder.k();
    if beta.len() != k || covariance.rows() != k || covariance.cols() != k {
        return Err(Error::Shape(format!(
            "`{}` has K = {k} but got {} coefficients and a {}x{} covariance",
            encoder.variable,
            beta.len(),
            covariance.rows(),
            covariance.cols()
        )));
    }
    let mut out = Vec::with_capacity(encoder.dim());
    for (d, category) in encoder.categories.iter().enumerate() {
        let w = encoder.row(d);
        let coefficient: f64 = w.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mut variance = 0.0;
        for a in 0..k {
            if independent {
                variance += w[a] * covariance[(a, a)] * w[a];
            } else {
                for b in 0..k {
                    variance += w[a] * covariance[(a, b)] * w[b];
                }
            }
        }
        if variance < -1e-12 {
            return Err(Error::NegativeVariance(variance));
        }
        let std_error = libm::sqrt(variance.max(0.0));
        let z = if std_error > 0.0 {
            coefficient / std_error
        } else if coefficient == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(coefficient)
        };
        let p_value = two_sided_p_value(z);
        out.push(ProjectedCoefficient {
            variable: encoder.variable.clone(),
            category: category.clone(),
            alternative,
            coefficient,
            std_error,
            z,
            p_value,
            significant: p_value < SIGNIFICANCE,
        });
    }
    Ok(out)
}

/// Column indices of each (variable, alternative) block, ordered by component.
fn encoded_blocks(result: &EstimationResult) -> BTreeMap<(String, usize), Vec<(usize, usize)>> {
    let mut blocks: BTreeMap<(String, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (i, c) in result.columns.iter().enumerate() {
        if let ColumnOrigin::Encoded {
            variable,
            component,
            alternative,
        } = &c.origin
        {
            blocks
                .entry((variable.clone(), *alternative))
                .or_default()
                .push((*component, i));
        }
    }
    for cols in blocks.values_mut() {
        cols.sort_unstable();
    }
    blocks
}

/// Projects every encoded block of `result`: one row per
/// (variable, category, alternative).
pub fn project_all(
    result: &EstimationResult,
    encoders: &[EncoderModel],
    independent: bool,
) -> Result<Vec<ProjectedCoefficient>> {
    let mut out = Vec::new();
    for ((variable, alternative), cols) in encoded_blocks(result) {
        let encoder = encoders
            .iter()
            .find(|e| e.variable == variable)
            .ok_or_else(|| Error::MissingEncoder(variable.clone()))?;
        if cols.len() != encoder.k() || cols.iter().enumerate().any(|(i, (c, _))| *c != i) {
            return Err(Error::Shape(format!(
                "coefficient block of `{variable}` is incomplete ({} of {} components)",
                cols.len(),
                encoder.k()
            )));
        }
        let beta: Vec<f64> = cols.iter().map(|&(_, i)| result.coefficients[i]).collect();
        let mut cov = Matrix::zeros(cols.len(), cols.len());
        for (a, &(_, ia)) in cols.iter().enumerate() {
            for (b, &(_, ib)) in cols.iter().enumerate() {
                cov[(a, b)] = result.covariance[(ia, ib)];
            }
        }
        out.extend(project(encoder, &beta, &cov, alternative, independent)?);
    }
    Ok(out)
}

/// Rows with `|coefficient| > min_abs` and `p < alpha`, sorted by variable
/// then category (stable, so alternatives keep their order).
pub fn filter_report(table: &[ProjectedCoefficient], min_abs: f64, alpha: f64) -> Vec<ProjectedCoefficient> {
    let mut rows: Vec<ProjectedCoefficient> = table
        .iter()
        .filter(|r| r.coefficient.abs() > min_abs && r.p_value < alpha)
        .cloned()
        .collect();
    rows.sort_by(|a, b| (&a.variable, &a.category).cmp(&(&b.variable, &b.category)));
    rows
}

/// Choice probabilities rebuilt from dummy-space coefficients: plain columns
/// use their estimated coefficients, each encoded block contributes the
/// projected coefficient of the observation's category.
pub fn projected_probabilities(
    result: &EstimationResult,
    problem: &MnlProblem,
    data: &ChoiceDataset,
    table: &[ProjectedCoefficient],
) -> Result<Matrix> {
    let c = problem.design.n_alts();
    let n_obs = problem.n_obs();
    if data.len() != n_obs {
        return Err(Error::Shape("dataset and problem sizes differ".into()));
    }
    if problem.design.columns() != result.columns.as_slice() {
        return Err(Error::Shape("design columns differ from the estimated model".into()));
    }
    let mut lookup: BTreeMap<(&str, &str, usize), f64> = BTreeMap::new();
    for row in table {
        lookup.insert((&row.variable, &row.category, row.alternative), row.coefficient);
    }
    let plain: Vec<usize> = result
        .columns
        .iter()
        .enumerate()
        .filter(|(_, col)| matches!(col.origin, ColumnOrigin::Term { .. }))
        .map(|(i, _)| i)
        .collect();
    let blocks: Vec<(String, usize)> = encoded_blocks(result).into_keys().collect();

    let mut out = Matrix::zeros(n_obs, c);
    let mut u = vec![0.0; c];
    for n in 0..n_obs {
        for (j, uj) in u.iter_mut().enumerate() {
            *uj = plain
                .iter()
                .map(|&p| problem.design.value(n, j, p) * result.coefficients[p])
                .sum();
        }
        for (variable, alt) in &blocks {
            let label = data.categorical(variable)?.label_of(n);
            let coef = lookup
                .get(&(variable.as_str(), label, *alt))
                .ok_or_else(|| Error::UnknownCategory {
                    variable: variable.clone(),
                    label: label.to_owned(),
                })?;
            u[*alt] += coef;
        }
        masked_softmax_into(&u, problem.available(n), out.row_mut(n))?;
    }
    Ok(out)
}

/// Number of rows flagged significant.
pub fn count_significant(table: &[ProjectedCoefficient]) -> usize {
    table.iter().filter(|r| r.significant).count()
}

/// Maps a dataset category to the encoder row used for it (for callers that
/// need the same lookup as [`crate::encoders::encode`]).
pub fn encoder_rows(encoder: &EncoderModel, data: &ChoiceDataset) -> Result<Vec<Option<usize>>> {
    Ok(translate(encoder, &data.categorical(&encoder.variable)?.map))
}
