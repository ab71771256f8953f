//! Regularisation path by IRLS with inner cyclic coordinate descent.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::SurvivalDataset;

use super::likelihood::{check_weighted_events, EtaDerivatives, RiskSetIndex};
use super::{CoxCoefficients, CoxFitPath, ObservationWeights};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathConfig {
    /// Grid length when the grid is generated.
    pub n_lambda: usize,
    /// Smallest lambda as a fraction of lambda_max; `None` picks 0.01 when
    /// there are fewer positively weighted observations than covariates and
    /// 1e-4 otherwise.
    pub lambda_min_ratio: Option<f64>,
    /// Explicit decreasing grid, overriding the generated one.
    pub lambdas: Option<Vec<f64>>,
    /// Convergence threshold on the largest standardised coefficient change.
    pub tolerance: f64,
    pub max_irls: usize,
    /// Coordinate-descent sweep budget per IRLS step.
    pub max_sweeps: usize,
    /// The path ends early once the fraction of deviance explained exceeds
    /// this value ...
    pub max_dev_ratio: f64,
    /// ... or grows by less than this between consecutive lambdas (checked
    /// from the fifth lambda on).
    pub min_dev_change: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            lambda_min_ratio: None,
            lambdas: None,
            tolerance: 1e-7,
            max_irls: 100,
            max_sweeps: 10_000,
            max_dev_ratio: 0.999,
            min_dev_change: 1e-5,
        }
    }
}

impl PathConfig {
    pub fn with_lambdas(mut self, lambdas: Vec<f64>) -> Self {
        self.lambdas = Some(lambdas);
        self
    }
}

/// Weighted-standardised design over the positive-weight rows, sorted by
/// time, plus the risk-set bookkeeping.
pub(crate) struct Problem {
    /// Standardised columns in row order; empty for constant covariates.
    cols: Vec<Vec<f64>>,
    scale: Vec<f64>,
    eligible: Vec<bool>,
    events: Vec<bool>,
    w: Vec<f64>,
    total_w: f64,
    index: RiskSetIndex,
}

struct State {
    beta: Vec<f64>,
    eta: Vec<f64>,
    deriv: EtaDerivatives,
    /// Full standardised gradient of `l / W` at `beta`.
    grad: Vec<f64>,
    trace: Option<Vec<f64>>,
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

impl Problem {
    pub fn new(data: &SurvivalDataset, weights: &ObservationWeights) -> Result<Self> {
        if weights.len() != data.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} observations",
                weights.len(),
                data.len()
            )));
        }
        let all_w = weights.as_slice();
        check_weighted_events(data.events(), all_w)?;
        let all_t = data.times();
        let mut rows: Vec<usize> = (0..data.len()).filter(|&i| all_w[i] > 0.0).collect();
        rows.sort_by(|&a, &b| all_t[a].total_cmp(&all_t[b]));
        let times: Vec<f64> = rows.iter().map(|&i| all_t[i]).collect();
        let events: Vec<bool> = rows.iter().map(|&i| data.events()[i]).collect();
        let w: Vec<f64> = rows.iter().map(|&i| all_w[i]).collect();
        let total_w: f64 = w.iter().sum();
        let x = data.covariates();
        let p = x.ncols();
        let mut cols = Vec::with_capacity(p);
        let mut scale = vec![1.0; p];
        let mut eligible = vec![false; p];
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|&i| x[[i, j]]).collect();
            let mean = col.iter().zip(&w).map(|(v, wi)| v * wi).sum::<f64>() / total_w;
            let var = col.iter().zip(&w).map(|(v, wi)| wi * (v - mean).powi(2)).sum::<f64>() / total_w;
            let sd = var.sqrt();
            if sd > 1e-10 * mean.abs().max(1.0) {
                scale[j] = sd;
                eligible[j] = true;
                cols.push(col.iter().map(|v| (v - mean) / sd).collect());
            } else {
                cols.push(Vec::new());
            }
        }
        let index = RiskSetIndex::new(&times);
        Ok(Self {
            cols,
            scale,
            eligible,
            events,
            w,
            total_w,
            index,
        })
    }

    fn n_positive(&self) -> usize {
        self.w.len()
    }

    fn derivatives(&self, eta: &[f64]) -> EtaDerivatives {
        self.index.derivatives(&self.events, &self.w, eta)
    }

    fn full_gradient(&self, d: &EtaDerivatives) -> Vec<f64> {
        self.cols
            .iter()
            .zip(&self.eligible)
            .map(|(col, &ok)| {
                if ok {
                    col.iter().zip(&d.grad).map(|(x, g)| x * g).sum::<f64>() / self.total_w
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn lambda_max(&self) -> f64 {
        let d = self.derivatives(&vec![0.0; self.w.len()]);
        self.full_gradient(&d).iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Supremum of the weighted partial likelihood: every tie group of
    /// events takes its whole risk set, `-sum_g E_g ln E_g`.
    fn saturated_loglik(&self) -> f64 {
        let mut ll = 0.0;
        for &(start, end) in &self.index.groups {
            let mass: f64 = self.index.order[start..end]
                .iter()
                .filter(|&&i| self.events[i])
                .map(|&i| self.w[i])
                .sum();
            if mass > 0.0 {
                ll -= mass * mass.ln();
            }
        }
        ll
    }

    fn objective(&self, loglik: f64, beta: &[f64], lambda: f64) -> f64 {
        loglik / self.total_w - lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    fn initial_state(&self) -> State {
        let eta = vec![0.0; self.w.len()];
        let deriv = self.derivatives(&eta);
        let grad = self.full_gradient(&deriv);
        State {
            beta: vec![0.0; self.cols.len()],
            eta,
            deriv,
            grad,
            trace: None,
        }
    }

    /// Solves at `lambda`, warm-started from `state`; sequential strong rules
    /// pick the working set and a KKT check on the remaining covariates
    /// decides when the working set is complete.
    fn solve(&self, lambda: f64, lambda_prev: f64, state: &mut State, config: &PathConfig, index: usize) -> Result<()> {
        let cutoff = 2.0 * lambda - lambda_prev;
        let mut working: Vec<bool> = (0..self.cols.len())
            .map(|j| self.eligible[j] && (state.beta[j] != 0.0 || state.grad[j].abs() >= cutoff))
            .collect();
        loop {
            self.irls(lambda, &working, state, config, index)?;
            state.grad = self.full_gradient(&state.deriv);
            let mut added = false;
            for (j, member) in working.iter_mut().enumerate() {
                if self.eligible[j] && !*member && state.grad[j].abs() > lambda {
                    *member = true;
                    added = true;
                }
            }
            if !added {
                return Ok(());
            }
        }
    }

    /// Negated Hessian of `l / W` in the working-set coefficients.
    fn hessian(&self, xs: &Array2<f64>, eta: &[f64]) -> Array2<f64> {
        let terms = self.index.hessian_terms(&self.events, &self.w, eta);
        let (n, m) = xs.dim();
        let b = Array2::from_shape_fn((n, m), |(k, j)| xs[[k, j]] * terms.row[k].max(0.0).sqrt());
        let mut h = b.t().dot(&b);
        let n_groups = terms.group.iter().filter(|&&g| g > 0.0).count();
        let mut sums = Array2::<f64>::zeros((n_groups, m));
        let mut acc = Array1::<f64>::zeros(m);
        let mut at = n_groups;
        for (g, &(start, end)) in self.index.groups.iter().enumerate().rev() {
            for &k in &self.index.order[start..end] {
                acc.scaled_add(terms.risks[k], &xs.row(k));
            }
            if terms.group[g] > 0.0 {
                at -= 1;
                sums.row_mut(at).assign(&(&acc * terms.group[g].sqrt()));
            }
        }
        h -= &sums.t().dot(&sums);
        h / self.total_w
    }

    /// Proximal Newton on the working set: each step minimises the exact
    /// quadratic model by coordinate descent, then a step-halving search
    /// keeps the penalised objective non-decreasing.
    fn irls(&self, lambda: f64, working: &[bool], state: &mut State, config: &PathConfig, index: usize) -> Result<()> {
        let set: Vec<usize> = (0..working.len()).filter(|&j| working[j]).collect();
        if set.is_empty() {
            return Ok(());
        }
        let n = self.w.len();
        let m = set.len();
        let xs = Array2::from_shape_fn((n, m), |(k, s)| self.cols[set[s]][k]);
        let inner_tol = config.tolerance * 0.1;
        let mut f_old = self.objective(state.deriv.loglik, &state.beta, lambda);
        if let Some(t) = state.trace.as_mut() {
            t.push(f_old);
        }

        for _ in 0..config.max_irls {
            let h = self.hessian(&xs, &state.eta);
            let grad = Array1::from(state.deriv.grad.clone());
            let start: Vec<f64> = set.iter().map(|&j| state.beta[j]).collect();
            let mut b = start.clone();
            // gradient of the quadratic model at `b`
            let mut c = xs.t().dot(&grad) / self.total_w;

            let r = &c + &h.dot(&Array1::from(b.clone()));
            if !feature_sign(&h, &r, &mut b, lambda) {
                b.copy_from_slice(&start);
                let mut sweeps = 0;
                loop {
                    sweeps += 1;
                    if sweep(&h, &mut c, &mut b, 0..m, lambda) < inner_tol {
                        break;
                    }
                    loop {
                        let active: Vec<usize> = (0..m).filter(|&s| b[s] != 0.0).collect();
                        sweeps += 1;
                        if sweep(&h, &mut c, &mut b, active.into_iter(), lambda) < inner_tol
                            || sweeps > config.max_sweeps
                        {
                            break;
                        }
                    }
                    if sweeps > config.max_sweeps {
                        return Err(Error::NonConvergence { index, lambda });
                    }
                }
            }
            let delta = Array1::from_iter(b.iter().zip(&start).map(|(x, y)| x - y));
            let d_eta = xs.dot(&delta);

            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut beta_try = state.beta.clone();
                for (s, &j) in set.iter().enumerate() {
                    beta_try[j] = start[s] + step * delta[s];
                }
                let eta_try: Vec<f64> = state.eta.iter().zip(&d_eta).map(|(e, d)| e + step * d).collect();
                let deriv = self.derivatives(&eta_try);
                let f_try = self.objective(deriv.loglik, &beta_try, lambda);
                if f_try.is_finite() && f_try >= f_old - 1e-13 * f_old.abs().max(1.0) {
                    accepted = Some((beta_try, eta_try, deriv, f_try));
                    break;
                }
                step *= 0.5;
            }
            let Some((beta_new, eta_new, deriv, f_new)) = accepted else {
                if state.eta.iter().any(|e| !e.is_finite()) {
                    return Err(Error::NonFinite("linear predictor".into()));
                }
                return Ok(());
            };
            let change = beta_new
                .iter()
                .zip(&state.beta)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            state.beta = beta_new;
            state.eta = eta_new;
            state.deriv = deriv;
            f_old = f_new;
            if let Some(t) = state.trace.as_mut() {
                t.push(f_new);
            }
            if change < config.tolerance {
                return Ok(());
            }
        }
        Err(Error::NonConvergence { index, lambda })
    }

    fn original_scale(&self, beta: &[f64], lambda: f64) -> CoxCoefficients {
        CoxCoefficients {
            beta: beta
                .iter()
                .zip(&self.scale)
                .zip(&self.eligible)
                .map(|((b, s), &ok)| if ok { b / s } else { 0.0 })
                .collect(),
            lambda,
        }
    }
}

/// One coordinate-descent pass over `members` for the quadratic model with
/// curvature `h` and gradient `c` at `b`; returns the largest change.
fn sweep(
    h: &Array2<f64>,
    c: &mut Array1<f64>,
    b: &mut [f64],
    members: impl Iterator<Item = usize>,
    lambda: f64,
) -> f64 {
    let mut max_change: f64 = 0.0;
    for s in members {
        let hss = h[[s, s]];
        if hss <= 1e-14 {
            continue;
        }
        let new = soft_threshold(c[s] + hss * b[s], lambda) / hss;
        let diff = new - b[s];
        if diff != 0.0 {
            c.scaled_add(-diff, &h.row(s));
            b[s] = new;
            max_change = max_change.max(diff.abs());
        }
    }
    max_change
}

/// Feature-sign search for `max r'b - b'Hb/2 - lambda |b|_1`, started from
/// `b`. Returns `false`, leaving `b` unspecified, when a support system is
/// not positive definite or the iteration budget runs out.
fn feature_sign(h: &Array2<f64>, r: &Array1<f64>, b: &mut [f64], lambda: f64) -> bool {
    let m = b.len();
    let objective =
        |x: &Array1<f64>| r.dot(x) - 0.5 * x.dot(&h.dot(x)) - lambda * x.iter().map(|v| v.abs()).sum::<f64>();
    let tol = 1e-9 * lambda.max(1e-3);
    let mut x = Array1::from(b.to_vec());
    let mut solved = false;
    for _ in 0..(4 * m + 20) {
        let grad = r - &h.dot(&x);
        let mut signs: Vec<f64> = x.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        let settled = solved || (0..m).all(|s| signs[s] == 0.0 || (grad[s] - lambda * signs[s]).abs() <= tol);
        if settled {
            let entering = (0..m)
                .filter(|&s| signs[s] == 0.0 && h[[s, s]] > 1e-14 && grad[s].abs() > lambda + tol)
                .max_by(|&u, &v| grad[u].abs().total_cmp(&grad[v].abs()));
            let Some(s) = entering else {
                b.copy_from_slice(x.as_slice().expect("contiguous"));
                return true;
            };
            signs[s] = grad[s].signum();
        }
        let support: Vec<usize> = (0..m).filter(|&s| signs[s] != 0.0).collect();
        let k = support.len();
        let sub = Array2::from_shape_fn((k, k), |(u, v)| h[[support[u], support[v]]]);
        let rhs: Vec<f64> = support.iter().map(|&s| r[s] - lambda * signs[s]).collect();
        let Some(sol) = cholesky_solve(sub, rhs) else {
            return false;
        };
        let mut target = Array1::zeros(m);
        for (&s, v) in support.iter().zip(&sol) {
            target[s] = *v;
        }
        // best of the target and the points where a coordinate crosses zero
        let mut best = target.clone();
        let mut best_f = objective(&target);
        solved = support
            .iter()
            .all(|&s| target[s].signum() == signs[s] && target[s] != 0.0);
        for &s in &support {
            let (from, to) = (x[s], target[s]);
            if from != 0.0 && from.signum() != to.signum() {
                let t = from / (from - to);
                let mut point = &x + &((&target - &x) * t);
                point[s] = 0.0;
                let f = objective(&point);
                if f > best_f {
                    best_f = f;
                    best = point;
                    solved = false;
                }
            }
        }
        x = best;
    }
    false
}

/// Solves `a x = rhs` for symmetric positive definite `a`; `None` when a
/// pivot is not safely positive.
fn cholesky_solve(mut a: Array2<f64>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for j in 0..n {
        let mut d = a[[j, j]];
        for q in 0..j {
            d -= a[[j, q]] * a[[j, q]];
        }
        if d.is_nan() || d <= 1e-12 * a[[j, j]].abs().max(1e-300) {
            return None;
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for q in 0..j {
                v -= a[[i, q]] * a[[j, q]];
            }
            a[[i, j]] = v / d;
        }
    }
    for i in 0..n {
        for q in 0..i {
            rhs[i] -= a[[i, q]] * rhs[q];
        }
        rhs[i] /= a[[i, i]];
    }
    for i in (0..n).rev() {
        for q in i + 1..n {
            rhs[i] -= a[[q, i]] * rhs[q];
        }
        rhs[i] /= a[[i, i]];
    }
    Some(rhs)
}

fn geometric_grid(lambda_max: f64, ratio: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![lambda_max];
    }
    (0..len)
        .map(|i| lambda_max * ratio.powf(i as f64 / (len - 1) as f64))
        .collect()
}

/// Smallest penalty at which the all-zero vector is optimal:
/// `max_j |g_j(0)| / W` on the standardised covariates.
pub fn lambda_max(data: &SurvivalDataset, weights: &ObservationWeights) -> Result<f64> {
    let lm = Problem::new(data, weights)?.lambda_max();
    if lm == 0.0 {
        log::warn!("lambda_max is zero: the score vanishes at beta = 0, the path is degenerate");
    }
    Ok(lm)
}

fn resolve_grid(problem: &Problem, lmax: f64, p: usize, config: &PathConfig) -> Result<Vec<f64>> {
    if let Some(grid) = &config.lambdas {
        if grid.is_empty() {
            return Err(Error::InvalidInput("explicit lambda grid is empty".into()));
        }
        if grid.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidInput(
                "lambda values must be finite and non-negative".into(),
            ));
        }
        if grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("lambda grid must be strictly decreasing".into()));
        }
        return Ok(grid.clone());
    }
    if config.n_lambda == 0 {
        return Err(Error::InvalidInput("grid length must be positive".into()));
    }
    if lmax == 0.0 {
        log::warn!("lambda_max is zero: returning the single all-zero solution");
        return Ok(vec![0.0]);
    }
    let ratio = config
        .lambda_min_ratio
        .unwrap_or(if problem.n_positive() < p { 0.01 } else { 1e-4 });
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!(
            "lambda_min_ratio {ratio} must lie in (0, 1)"
        )));
    }
    Ok(geometric_grid(lmax, ratio, config.n_lambda))
}

fn run_path(
    data: &SurvivalDataset,
    weights: &ObservationWeights,
    config: &PathConfig,
    trace: bool,
) -> Result<(CoxFitPath, Option<Vec<f64>>)> {
    let p = data.n_features();
    if p == 0 {
        return Err(Error::InvalidInput("at least one covariate is required".into()));
    }
    let problem = Problem::new(data, weights)?;
    let lmax = problem.lambda_max();
    let lambdas = resolve_grid(&problem, lmax, p, config)?;

    let mut state = problem.initial_state();
    if trace {
        state.trace = Some(Vec::new());
    }
    let null_ll = state.deriv.loglik;
    let explainable = problem.saturated_loglik() - null_ll;
    let mut coefficients = Vec::with_capacity(lambdas.len());
    let mut lambda_prev = lmax.max(lambdas[0]);
    let mut prev_ratio = 0.0;
    for (i, &lambda) in lambdas.iter().enumerate() {
        if lambda >= lmax && state.beta.iter().all(|&b| b == 0.0) {
            // zero is optimal by the KKT conditions
            coefficients.push(CoxCoefficients::zeros(p, lambda));
            continue;
        }
        problem.solve(lambda, lambda_prev, &mut state, config, i)?;
        if state.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite(format!("coefficients at lambda index {i}")));
        }
        coefficients.push(problem.original_scale(&state.beta, lambda));
        lambda_prev = lambda;

        if explainable > 0.0 {
            let ratio = (state.deriv.loglik - null_ll) / explainable;
            if ratio > config.max_dev_ratio || (i >= 4 && ratio - prev_ratio < config.min_dev_change) {
                break;
            }
            prev_ratio = ratio;
        }
    }
    let mut lambdas = lambdas;
    lambdas.truncate(coefficients.len());
    Ok((
        CoxFitPath {
            lambdas,
            coefficients,
            lambda_max: lmax,
            cv: None,
            selected: None,
            config: config.clone(),
        },
        state.trace,
    ))
}

/// Lasso path from lambda_max down the grid, with warm starts.
pub fn fit_cox_lasso_path(
    data: &SurvivalDataset,
    weights: &ObservationWeights,
    config: &PathConfig,
) -> Result<CoxFitPath> {
    run_path(data, weights, config, false).map(|(path, _)| path)
}

/// Path plus the penalised objective after every accepted IRLS step.
#[cfg(test)]
pub(crate) fn fit_with_trace(
    data: &SurvivalDataset,
    weights: &ObservationWeights,
    config: &PathConfig,
) -> Result<(CoxFitPath, Vec<f64>)> {
    run_path(data, weights, config, true).map(|(path, t)| (path, t.unwrap_or_default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_data(seed: u64, n: usize, p: usize) -> SurvivalDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, p), |_| rng.random_range(-2.0..2.0));
        let times: Vec<f64> = (0..n)
            .map(|i| {
                let eta: f64 = 0.8 * x[[i, 0]] - 0.5 * x[[i, 1.min(p - 1)]];
                -rng.random::<f64>().max(1e-12).ln() / eta.exp()
            })
            .collect();
        let events: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.75).collect();
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
    fn constant_covariates_give_zero_lambda_max() {
        let mut data = random_data(1, 20, 2);
        data = data
            .with_covariates(Array2::from_elem((20, 2), 3.5), vec!["a".into(), "b".into()])
            .unwrap();
        assert_eq!(lambda_max(&data, &ObservationWeights::ones(20)).unwrap(), 0.0);
        let path = fit_cox_lasso_path(&data, &ObservationWeights::ones(20), &PathConfig::default()).unwrap();
        assert_eq!(path.coefficients[0].beta, vec![0.0, 0.0]);
    }

    #[test]
    fn path_starts_at_zero() {
        let data = random_data(2, 40, 8);
        let path = fit_cox_lasso_path(&data, &ObservationWeights::ones(40), &PathConfig::default()).unwrap();
        assert_eq!(path.lambdas[0], path.lambda_max);
        assert!(path.coefficients[0].support().is_empty());
        assert!(!path.coefficients.last().unwrap().support().is_empty());
        assert!(path.lambdas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn objective_never_decreases_across_irls_steps() {
        for seed in 0..5 {
            let data = random_data(10 + seed, 60, 6);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
            let w = ObservationWeights::new(w).unwrap();
            let lmax = lambda_max(&data, &w).unwrap();
            for frac in [0.5, 0.1, 0.01] {
                let cfg = PathConfig::default().with_lambdas(vec![lmax * frac]);
                let (_, trace) = fit_with_trace(&data, &w, &cfg).unwrap();
                assert!(trace.len() >= 2);
                for pair in trace.windows(2) {
                    assert!(pair[1] >= pair[0] - 1e-10, "{pair:?}");
                }
            }
        }
    }

    #[test]
    fn weight_rescaling_leaves_path_unchanged() {
        let data = random_data(3, 50, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let scaled: Vec<f64> = w.iter().map(|v| v * 3.7).collect();
        let cfg = PathConfig::default();
        let a = fit_cox_lasso_path(&data, &ObservationWeights::new(w).unwrap(), &cfg).unwrap();
        let b = fit_cox_lasso_path(&data, &ObservationWeights::new(scaled).unwrap(), &cfg).unwrap();
        for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
            for (u, v) in x.beta.iter().zip(&y.beta) {
                assert!((u - v).abs() <= 1e-9, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn feature_sign_meets_optimality_conditions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let m = 6;
            let a = ndarray::Array2::from_shape_fn((10, m), |_| rng.random_range(-1.0..1.0));
            let h = a.t().dot(&a);
            let r = ndarray::Array1::from_shape_fn(m, |_| rng.random_range(-2.0..2.0));
            let lambda = rng.random_range(0.05..1.0);
            let mut b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(feature_sign(&h, &r, &mut b, lambda));
            let grad = &r - &h.dot(&ndarray::Array1::from(b.clone()));
            for s in 0..m {
                if b[s] == 0.0 {
                    assert!(grad[s].abs() <= lambda + 1e-8, "{} {lambda}", grad[s]);
                } else {
                    assert!(
                        (grad[s] - lambda * b[s].signum()).abs() <= 1e-8,
                        "{} {lambda} {}",
                        grad[s],
                        b[s]
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_increasing_grid() {
        let data = random_data(4, 20, 2);
        let cfg = PathConfig::default().with_lambdas(vec![0.1, 0.2]);
        assert!(fit_cox_lasso_path(&data, &ObservationWeights::ones(20), &cfg).is_err());
    }
}
