//! Weighted, lasso-penalised Cox regression.
//!
//! The fitted objective is `l_w(beta) / W - lambda * sum_j |beta_j|`, with
//! `l_w` the weighted Breslow partial log-likelihood and `W` the total weight.
//! Covariates are standardised internally with the observation weights; the
//! penalty applies on that scale and coefficients are reported on the
//! original scale.

mod cv;
mod likelihood;
mod path;

pub use cv::{cv_select_lambda, fit_cox_lasso_cv, CvDeviance};
pub use likelihood::{weighted_cox_gradient, weighted_cox_loglik};
pub use path::{fit_cox_lasso_path, lambda_max, PathConfig};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::RiskScoreVector;

/// Non-negative per-observation likelihood weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationWeights(Vec<f64>);

impl ObservationWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "weight {w} at observation {i} is not a finite non-negative number"
            )));
        }
        Ok(Self(weights))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Copy with the listed rows set to zero weight.
    pub fn with_zeroed(&self, rows: impl IntoIterator<Item = usize>) -> Self {
        let mut w = self.0.clone();
        for i in rows {
            w[i] = 0.0;
        }
        Self(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxCoefficients {
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl CoxCoefficients {
    pub fn zeros(p: usize, lambda: f64) -> Self {
        Self {
            beta: vec![0.0; p],
            lambda,
        }
    }

    /// Indices of non-zero coefficients.
    pub fn support(&self) -> Vec<usize> {
        self.beta
            .iter()
            .enumerate()
            .filter(|(_, b)| **b != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Solutions along a decreasing penalty grid, optionally with CV results.
#[derive(Debug, Clone, PartialEq)]
pub struct CoxFitPath {
    pub lambdas: Vec<f64>,
    pub coefficients: Vec<CoxCoefficients>,
    pub lambda_max: f64,
    pub cv: Option<CvDeviance>,
    pub selected: Option<usize>,
    pub config: PathConfig,
}

impl CoxFitPath {
    pub fn selected_lambda(&self) -> Option<f64> {
        self.selected.map(|i| self.lambdas[i])
    }

    pub fn selected_coefficients(&self) -> Option<&CoxCoefficients> {
        self.selected.map(|i| &self.coefficients[i])
    }
}

/// Linear risk scores `x'beta` (no baseline hazard).
pub fn predict_risk(coefficients: &CoxCoefficients, covariates: ArrayView2<'_, f64>) -> Result<RiskScoreVector> {
    if covariates.ncols() != coefficients.beta.len() {
        return Err(Error::Dimension(format!(
            "{} covariate columns for {} coefficients",
            covariates.ncols(),
            coefficients.beta.len()
        )));
    }
    Ok(RiskScoreVector(
        covariates
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&coefficients.beta).map(|(x, b)| x * b).sum())
            .collect(),
    ))
}
