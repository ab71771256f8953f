//! Penalty selection by K-fold cross-validated partial likelihood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::stratified_folds;
use crate::survival::SurvivalDataset;

use super::likelihood::{linear_predictor, RiskSetIndex};
use super::path::{fit_cox_lasso_path, PathConfig};
use super::{CoxFitPath, ObservationWeights};

/// Per-lambda mean cross-validated deviance and its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvDeviance {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Selects lambda by minimum mean cross-validated deviance.
///
/// Folds are stratified by subgroup and event status over the positively
/// weighted rows. For fold `k` the path is refitted with the fold's rows set
/// to zero weight, and the fold deviance is
/// `-2 (l_full(beta_-k) - l_-k(beta_-k))`.
pub fn cv_select_lambda(
    data: &SurvivalDataset,
    weights: &ObservationWeights,
    path: &CoxFitPath,
    k: usize,
    seed: u64,
) -> Result<CoxFitPath> {
    let folds = cox_folds(data, weights, k, seed)?;
    let w = weights.as_slice();
    let events = data.events();
    let fold_config = path.config.clone().with_lambdas(path.lambdas.clone());
    let index = RiskSetIndex::new(data.times());
    let deviances: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|fold| -> Result<Vec<f64>> {
            let train = weights.with_zeroed((0..data.len()).filter(|&i| folds[i] == Some(fold)));
            let fold_path = fit_cox_lasso_path(data, &train, &fold_config)?;
            // a fold path that ended early keeps its last solution
            let last = fold_path.coefficients.len() - 1;
            (0..path.lambdas.len())
                .map(|l| &fold_path.coefficients[l.min(last)])
                .map(|c| {
                    let eta = linear_predictor(data, &c.beta)?;
                    let full = index.loglik(events, w, &eta);
                    let part = index.loglik(events, train.as_slice(), &eta);
                    let dev = -2.0 * (full - part);
                    if dev.is_finite() {
                        Ok(dev)
                    } else {
                        Err(Error::NonFinite(format!("cross-validated deviance in fold {fold}")))
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let n_lambda = path.lambdas.len();
    let kf = k as f64;
    let mut mean = vec![0.0; n_lambda];
    let mut se = vec![0.0; n_lambda];
    for l in 0..n_lambda {
        let m = deviances.iter().map(|d| d[l]).sum::<f64>() / kf;
        let var = deviances.iter().map(|d| (d[l] - m).powi(2)).sum::<f64>() / (kf - 1.0);
        mean[l] = m;
        se[l] = (var / kf).sqrt();
    }
    let selected = mean
        .iter()
        .enumerate()
        .fold(0, |best, (i, &m)| if m < mean[best] { i } else { best });

    let mut out = path.clone();
    out.cv = Some(CvDeviance { mean, se });
    out.selected = Some(selected);
    Ok(out)
}

/// Fold labels stratified by subgroup and event status over the positively
/// weighted rows; zero-weight rows get `None`.
fn cox_folds(data: &SurvivalDataset, weights: &ObservationWeights, k: usize, seed: u64) -> Result<Vec<Option<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    let w = weights.as_slice();
    let n_positive = w.iter().filter(|&&v| v > 0.0).count();
    if k > n_positive {
        return Err(Error::InvalidInput(format!(
            "{k} folds for {n_positive} positively weighted observations"
        )));
    }
    let events = data.events();
    let strata: Vec<Option<usize>> = (0..data.len())
        .map(|i| (w[i] > 0.0).then(|| 2 * data.subgroups()[i] + usize::from(events[i])))
        .collect();
    let folds = stratified_folds(&strata, k, seed);
    for fold in 0..k {
        if !(0..data.len()).any(|i| folds[i] == Some(fold) && events[i]) {
            return Err(Error::EmptyFold { fold });
        }
    }
    Ok(folds)
}

/// Path fit followed by cross-validated lambda selection.
pub fn fit_cox_lasso_cv(
    data: &SurvivalDataset,
    weights: &ObservationWeights,
    config: &PathConfig,
    k: usize,
    seed: u64,
) -> Result<CoxFitPath> {
    cox_folds(data, weights, k, seed)?;
    let path = fit_cox_lasso_path(data, weights, config)?;
    cv_select_lambda(data, weights, &path, k, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn exp_data(n: usize, p: usize, beta: &[f64], seed: u64, all_events: bool) -> SurvivalDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let mut times = Vec::with_capacity(n);
        let mut events = Vec::with_capacity(n);
        for i in 0..n {
            let eta: f64 = beta.iter().enumerate().map(|(j, b)| b * x[[i, j]]).sum();
            let t = -(1.0 - rng.random::<f64>()).ln() / eta.exp();
            let c = if all_events {
                f64::INFINITY
            } else {
                -(1.0 - rng.random::<f64>()).ln() / eta.exp()
            };
            times.push(t.min(c));
            events.push(t <= c);
        }
        SurvivalDataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            times,
            events,
            vec![0; n],
            vec!["all".into()],
            x,
            (0..p).map(|j| format!("x{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn leave_one_out_runs() {
        let data = exp_data(12, 3, &[1.0, 0.0, 0.0], 1, true);
        let cfg = PathConfig {
            n_lambda: 20,
            ..PathConfig::default()
        };
        let fit = fit_cox_lasso_cv(&data, &ObservationWeights::ones(12), &cfg, 12, 3).unwrap();
        let sel = fit.selected.unwrap();
        assert!(sel < fit.lambdas.len());
        assert_eq!(fit.cv.as_ref().unwrap().mean.len(), fit.lambdas.len());
    }

    #[test]
    fn fold_without_events_is_reported() {
        // 2 events among 12 rows; 10 folds cannot all hold an event
        let mut data = exp_data(12, 2, &[0.5, 0.0], 2, false);
        let events: Vec<bool> = (0..12).map(|i| i < 2).collect();
        data = SurvivalDataset::new(
            data.ids().to_vec(),
            data.times().to_vec(),
            events,
            data.subgroups().to_vec(),
            data.subgroup_labels().to_vec(),
            data.covariates().to_owned(),
            data.feature_names().to_vec(),
        )
        .unwrap();
        let r = fit_cox_lasso_cv(&data, &ObservationWeights::ones(12), &PathConfig::default(), 10, 1);
        assert!(matches!(r, Err(Error::EmptyFold { .. })), "{r:?}");
    }

    #[test]
    fn pure_noise_selects_few_covariates() {
        let mut sparse = 0;
        for rep in 0..20 {
            let data = exp_data(100, 10, &[0.0; 10], 100 + rep, false);
            let fit = fit_cox_lasso_cv(&data, &ObservationWeights::ones(100), &PathConfig::default(), 10, rep).unwrap();
            if fit.selected_coefficients().unwrap().support().len() <= 2 {
                sparse += 1;
            }
        }
        assert!(sparse >= 16, "only {sparse} of 20 replications kept <= 2 covariates");
    }

    #[test]
    fn strong_covariate_is_selected() {
        let mut hits = 0;
        for rep in 0..20 {
            let data = exp_data(200, 5, &[1.0, 0.0, 0.0, 0.0, 0.0], 500 + rep, false);
            let fit = fit_cox_lasso_cv(&data, &ObservationWeights::ones(200), &PathConfig::default(), 10, rep).unwrap();
            if fit.selected_coefficients().unwrap().beta[0] != 0.0 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "strong covariate kept in {hits} of 20 replications");
    }
}
