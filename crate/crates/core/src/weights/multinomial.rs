//! Penalised multinomial logistic regression.
//!
//! Features are standardised with their plain mean and SD. Each class is
//! updated in turn by a partial Newton step solved with coordinate descent,
//! and the penalty is chosen by K-fold cross-validated multinomial deviance.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::{derive_seed, stratified_folds};

use super::classifier::{check_classes, ProbabilityModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Lasso,
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultinomialConfig {
    pub n_lambda: usize,
    /// Defaults to 0.01 when rows < columns, otherwise 1e-4.
    pub lambda_min_ratio: Option<f64>,
    /// Folds of the inner CV that picks the penalty.
    pub inner_folds: usize,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for MultinomialConfig {
    fn default() -> Self {
        Self {
            n_lambda: 50,
            lambda_min_ratio: None,
            inner_folds: 10,
            tolerance: 1e-7,
            max_iter: 100,
        }
    }
}

/// Softmax model on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialModel {
    pub intercepts: Vec<f64>,
    /// `features x classes`.
    pub coefficients: Array2<f64>,
    pub lambda: f64,
    pub penalty: Penalty,
}

impl MultinomialModel {
    pub fn n_classes(&self) -> usize {
        self.intercepts.len()
    }
}

impl ProbabilityModel for MultinomialModel {
    fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut eta = features.dot(&self.coefficients);
        for mut row in eta.rows_mut() {
            for (e, b) in row.iter_mut().zip(&self.intercepts) {
                *e += b;
            }
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|e| (e - m).exp());
            let s = row.sum();
            row.mapv_inplace(|e| e / s);
        }
        eta
    }
}

/// Column-major standardised design.
struct Design {
    x: Vec<f64>,
    n: usize,
    d: usize,
    mean: Vec<f64>,
    sd: Vec<f64>,
    eligible: Vec<usize>,
}

impl Design {
    fn new(features: ArrayView2<'_, f64>, rows: &[usize]) -> Self {
        let n = rows.len();
        let d = features.ncols();
        let mut x = vec![0.0; n * d];
        let mut mean = vec![0.0; d];
        let mut sd = vec![1.0; d];
        let mut eligible = Vec::new();
        for j in 0..d {
            let col = &mut x[j * n..(j + 1) * n];
            for (c, &i) in col.iter_mut().zip(rows) {
                *c = features[[i, j]];
            }
            let m = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
            let s = var.sqrt();
            mean[j] = m;
            if s > 1e-10 * m.abs().max(1.0) {
                sd[j] = s;
                eligible.push(j);
                col.iter_mut().for_each(|v| *v = (*v - m) / s);
            } else {
                col.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        Self {
            x,
            n,
            d,
            mean,
            sd,
            eligible,
        }
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }
}

/// Standardised-scale parameters; `beta[j * k + c]`.
#[derive(Debug, Clone)]
struct Params {
    b0: Vec<f64>,
    beta: Vec<f64>,
}

struct Solver<'a> {
    design: &'a Design,
    labels: Vec<usize>,
    k: usize,
    penalty: Penalty,
    tolerance: f64,
    max_iter: usize,
}

fn softmax_rows(eta: &[f64], k: usize, p: &mut [f64]) {
    for (e, q) in eta.chunks_exact(k).zip(p.chunks_exact_mut(k)) {
        let m = e.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut s = 0.0;
        for (qi, ei) in q.iter_mut().zip(e) {
            *qi = (ei - m).exp();
            s += *qi;
        }
        q.iter_mut().for_each(|v| *v /= s);
    }
}

/// `-2 sum log p(label)` over the given rows of a linear predictor.
fn deviance(eta: &[f64], k: usize, labels: &[usize]) -> f64 {
    eta.chunks_exact(k)
        .zip(labels)
        .map(|(e, &y)| {
            let m = e.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + e.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            -2.0 * (e[y] - lse)
        })
        .sum()
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

impl<'a> Solver<'a> {
    fn null_params(&self) -> Params {
        let mut counts = vec![0.0; self.k];
        for &y in &self.labels {
            counts[y] += 1.0;
        }
        let mut b0: Vec<f64> = counts.iter().map(|c| (c / self.design.n as f64).ln()).collect();
        let m = b0.iter().sum::<f64>() / self.k as f64;
        b0.iter_mut().for_each(|b| *b -= m);
        Params {
            b0,
            beta: vec![0.0; self.design.d * self.k],
        }
    }

    fn eta(&self, params: &Params) -> Vec<f64> {
        let (n, k) = (self.design.n, self.k);
        let mut eta = vec![0.0; n * k];
        for i in 0..n {
            eta[i * k..(i + 1) * k].copy_from_slice(&params.b0);
        }
        for &j in &self.design.eligible {
            let xj = self.design.col(j);
            for c in 0..k {
                let b = params.beta[j * k + c];
                if b != 0.0 {
                    for (i, x) in xj.iter().enumerate() {
                        eta[i * k + c] += x * b;
                    }
                }
            }
        }
        eta
    }

    /// Largest lasso penalty with an all-zero solution.
    fn lambda_max(&self) -> f64 {
        let (n, k) = (self.design.n, self.k);
        let null = self.null_params();
        let mut p0 = vec![0.0; k];
        softmax_rows(&null.b0, k, &mut p0);
        let mut best: f64 = 0.0;
        for &j in &self.design.eligible {
            let xj = self.design.col(j);
            for (c, pc) in p0.iter().enumerate() {
                let g: f64 = xj
                    .iter()
                    .zip(&self.labels)
                    .map(|(x, &y)| x * (f64::from(u8::from(y == c)) - pc))
                    .sum();
                best = best.max(g.abs() / n as f64);
            }
        }
        best
    }

    /// Minimises mean negative log-likelihood plus penalty from a warm start.
    fn solve(&self, lambda: f64, params: &mut Params) {
        let (n, k, d) = (self.design.n, self.k, self.design.d);
        let nf = n as f64;
        let mut eta = self.eta(params);
        let mut p = vec![0.0; n * k];
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut v = vec![0.0; d];
        let tol = self.tolerance;
        for _ in 0..self.max_iter {
            let mut outer_change: f64 = 0.0;
            for c in 0..k {
                softmax_rows(&eta, k, &mut p);
                for i in 0..n {
                    let pi = p[i * k + c];
                    w[i] = (pi * (1.0 - pi)).max(1e-5);
                    r[i] = f64::from(u8::from(self.labels[i] == c)) - pi;
                }
                let r_start = r.clone();
                let wsum: f64 = w.iter().sum();
                for &j in &self.design.eligible {
                    v[j] = self.design.col(j).iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / nf;
                }
                let start: Vec<f64> = (0..d).map(|j| params.beta[j * k + c]).collect();
                let b0_start = params.b0[c];
                let sweep = |js: &[usize], params: &mut Params, r: &mut [f64]| -> f64 {
                    let mut ch: f64 = 0.0;
                    for &j in js {
                        let xj = self.design.col(j);
                        let b = params.beta[j * k + c];
                        let g = xj.iter().zip(r.iter()).map(|(x, ri)| x * ri).sum::<f64>() / nf;
                        let u = g + v[j] * b;
                        let nb = match self.penalty {
                            Penalty::Lasso => soft_threshold(u, lambda) / v[j],
                            Penalty::Ridge => u / (v[j] + lambda),
                        };
                        let delta = nb - b;
                        if delta != 0.0 {
                            for ((ri, x), wi) in r.iter_mut().zip(xj).zip(&w) {
                                *ri -= wi * x * delta;
                            }
                            params.beta[j * k + c] = nb;
                            ch = ch.max(v[j] * delta * delta);
                        }
                    }
                    let db = r.iter().sum::<f64>() / wsum;
                    if db != 0.0 {
                        for (ri, wi) in r.iter_mut().zip(&w) {
                            *ri -= wi * db;
                        }
                        params.b0[c] += db;
                        ch = ch.max(wsum / nf * db * db);
                    }
                    ch
                };
                let all = &self.design.eligible;
                for _ in 0..self.max_iter {
                    if sweep(all, params, &mut r) < tol {
                        break;
                    }
                    let active: Vec<usize> = all.iter().copied().filter(|&j| params.beta[j * k + c] != 0.0).collect();
                    for _ in 0..1000 {
                        if sweep(&active, params, &mut r) < tol {
                            break;
                        }
                    }
                }
                for i in 0..n {
                    eta[i * k + c] += (r_start[i] - r[i]) / w[i];
                }
                let mut change = (params.b0[c] - b0_start).powi(2) * wsum / nf;
                for &j in all {
                    change = change.max(v[j] * (params.beta[j * k + c] - start[j]).powi(2));
                }
                outer_change = outer_change.max(change);
            }
            if outer_change < tol {
                break;
            }
        }
        self.center(params);
    }

    /// Resolves the shift invariance across classes: intercepts and ridge
    /// coefficients sum to zero; lasso rows are shifted by a median, which
    /// keeps the penalty minimal.
    fn center(&self, params: &mut Params) {
        let k = self.k;
        let m = params.b0.iter().sum::<f64>() / k as f64;
        params.b0.iter_mut().for_each(|b| *b -= m);
        for j in 0..self.design.d {
            let row = &mut params.beta[j * k..(j + 1) * k];
            let shift = match self.penalty {
                Penalty::Ridge => row.iter().sum::<f64>() / k as f64,
                Penalty::Lasso => {
                    let mut s = row.to_vec();
                    s.sort_by(f64::total_cmp);
                    let (lo, hi) = (s[(k - 1) / 2], s[k / 2]);
                    0.0f64.clamp(lo, hi)
                }
            };
            if shift != 0.0 {
                row.iter_mut().for_each(|b| *b -= shift);
            }
        }
    }

    /// Warm-started path; stops once the training deviance ratio saturates.
    fn path(&self, lambdas: &[f64]) -> Vec<Params> {
        let mut state = PathState::new(self);
        let mut out = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            state.step(self, lambda);
            out.push(state.params.clone());
            if state.saturated {
                break;
            }
        }
        out
    }

    fn model(&self, params: &Params, lambda: f64) -> MultinomialModel {
        let (k, d) = (self.k, self.design.d);
        let mut coefficients = Array2::zeros((d, k));
        let mut intercepts = params.b0.clone();
        for &j in &self.design.eligible {
            for c in 0..k {
                let b = params.beta[j * k + c] / self.design.sd[j];
                coefficients[[j, c]] = b;
                intercepts[c] -= b * self.design.mean[j];
            }
        }
        MultinomialModel {
            intercepts,
            coefficients,
            lambda,
            penalty: self.penalty,
        }
    }
}

/// Warm-start state along a path. Once the training deviance ratio exceeds
/// 0.999 or stops moving (relative change below 1e-5) the state is frozen.
struct PathState {
    params: Params,
    null_dev: f64,
    prev_ratio: Option<f64>,
    saturated: bool,
}

impl PathState {
    fn new(s: &Solver<'_>) -> Self {
        let params = s.null_params();
        let null_dev = deviance(&s.eta(&params), s.k, &s.labels);
        Self {
            params,
            null_dev,
            prev_ratio: None,
            saturated: null_dev <= 0.0,
        }
    }

    fn step(&mut self, s: &Solver<'_>, lambda: f64) {
        if self.saturated {
            return;
        }
        s.solve(lambda, &mut self.params);
        let ratio = 1.0 - deviance(&s.eta(&self.params), s.k, &s.labels) / self.null_dev;
        self.saturated = ratio > 0.999 || self.prev_ratio.is_some_and(|p| ratio - p < 1e-5 * ratio);
        self.prev_ratio = Some(ratio);
    }
}

fn check_input(features: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    if features.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if n_classes < 2 {
        return Err(Error::InvalidInput("need at least two classes".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classification features".into()));
    }
    check_classes(labels, n_classes)
}

fn solver<'a>(
    design: &'a Design,
    labels: Vec<usize>,
    k: usize,
    penalty: Penalty,
    cfg: &MultinomialConfig,
) -> Solver<'a> {
    Solver {
        design,
        labels,
        k,
        penalty,
        tolerance: cfg.tolerance,
        max_iter: cfg.max_iter,
    }
}

/// Fits a single penalty value from the intercept-only start.
pub fn fit_multinomial_at(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    penalty: Penalty,
    lambda: f64,
    config: &MultinomialConfig,
) -> Result<MultinomialModel> {
    check_input(features, labels, n_classes)?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "penalty {lambda} must be finite and non-negative"
        )));
    }
    let rows: Vec<usize> = (0..labels.len()).collect();
    let design = Design::new(features, &rows);
    let s = solver(&design, labels.to_vec(), n_classes, penalty, config);
    let mut params = s.null_params();
    s.solve(lambda, &mut params);
    Ok(s.model(&params, lambda))
}

/// Penalty grid for the given data: geometric from the lasso `lambda_max`
/// (times 1000 for ridge) down to `lambda_min_ratio` of it.
fn grid(s: &Solver<'_>, cfg: &MultinomialConfig) -> Vec<f64> {
    let lmax = s.lambda_max();
    if lmax <= 0.0 || s.design.eligible.is_empty() {
        return vec![0.0];
    }
    let top = match s.penalty {
        Penalty::Lasso => lmax,
        Penalty::Ridge => lmax * 1e3,
    };
    let ratio = cfg
        .lambda_min_ratio
        .unwrap_or(if s.design.n < s.design.d { 1e-2 } else { 1e-4 });
    let m = cfg.n_lambda.max(1);
    if m == 1 {
        return vec![top];
    }
    (0..m).map(|i| top * ratio.powf(i as f64 / (m - 1) as f64)).collect()
}

/// CV deviance that has not improved for this many grid points ends the
/// search.
const CV_PATIENCE: usize = 10;

/// Fits a penalised multinomial model, choosing the penalty by
/// `config.inner_folds`-fold CV (stratified by class) on multinomial deviance.
///
/// Fold paths advance together along the grid and stop once the summed
/// held-out deviance has gone `CV_PATIENCE` grid points without a new
/// minimum; the full-data path is then fitted down to the selected penalty.
pub fn fit_multinomial(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    penalty: Penalty,
    config: &MultinomialConfig,
    seed: u64,
) -> Result<MultinomialModel> {
    let counts = check_input(features, labels, n_classes)?;
    let rows: Vec<usize> = (0..labels.len()).collect();
    let design = Design::new(features, &rows);
    let full = solver(&design, labels.to_vec(), n_classes, penalty, config);
    let lambdas = grid(&full, config);
    if lambdas.len() == 1 {
        let path = full.path(&lambdas);
        return Ok(full.model(&path[0], lambdas[0]));
    }

    let min_count = counts.iter().copied().min().unwrap_or(0);
    let k_folds = config.inner_folds.min(min_count);
    if k_folds < 2 {
        return Err(Error::InvalidInput(format!(
            "a class with {min_count} members leaves too few rows for penalty selection"
        )));
    }
    let strata: Vec<Option<usize>> = labels.iter().map(|&y| Some(y)).collect();
    let folds = stratified_folds(&strata, k_folds, derive_seed(seed, "multinomial-cv", &[]));
    let split: Vec<(Vec<usize>, Vec<usize>)> = (0..k_folds)
        .map(|fold| rows.iter().partition(|&&i| folds[i] != Some(fold)))
        .collect();
    let designs: Vec<Design> = split.iter().map(|(train, _)| Design::new(features, train)).collect();
    let solvers: Vec<Solver<'_>> = designs
        .iter()
        .zip(&split)
        .map(|(d, (train, _))| {
            solver(
                d,
                train.iter().map(|&i| labels[i]).collect(),
                n_classes,
                penalty,
                config,
            )
        })
        .collect();
    let held_out: Vec<(Array2<f64>, Vec<usize>)> = split
        .iter()
        .map(|(_, test)| {
            (
                features.select(ndarray::Axis(0), test),
                test.iter().map(|&i| labels[i]).collect(),
            )
        })
        .collect();
    let mut states: Vec<PathState> = solvers.iter().map(PathState::new).collect();
    let mut best = 0;
    let mut best_dev = f64::INFINITY;
    for (l, &lambda) in lambdas.iter().enumerate() {
        let mut dev = 0.0;
        for ((s, state), (x, y)) in solvers.iter().zip(&mut states).zip(&held_out) {
            state.step(s, lambda);
            let eta = linear(&s.model(&state.params, lambda), x.view());
            dev += deviance(&eta, n_classes, y);
        }
        if dev < best_dev {
            best_dev = dev;
            best = l;
        } else if l - best >= CV_PATIENCE {
            break;
        }
    }
    let path = full.path(&lambdas[..=best]);
    let last = path.len() - 1;
    Ok(full.model(&path[last], lambdas[last]))
}

fn linear(model: &MultinomialModel, features: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut eta = features.dot(&model.coefficients);
    for mut row in eta.rows_mut() {
        for (e, b) in row.iter_mut().zip(&model.intercepts) {
            *e += b;
        }
    }
    eta.into_iter().collect()
}
