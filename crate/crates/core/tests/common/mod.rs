//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use subcox::survival::SurvivalDataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Exponential survival times driven by `beta`, about 30% random censoring,
/// times rounded to two decimals so ties occur, two subgroups.
pub fn random_dataset(n: usize, beta: &[f64], seed: u64) -> SurvivalDataset {
    let p = beta.len();
    let mut r = rng(seed);
    let x = Array2::from_shape_fn((n, p), |_| r.sample::<f64, _>(StandardNormal));
    let times: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = (0..p).map(|j| x[[i, j]] * beta[j]).sum();
            let t = -r.random::<f64>().max(1e-12).ln() / eta.exp();
            ((t * 100.0).round() / 100.0).max(0.01)
        })
        .collect();
    let events: Vec<bool> = (0..n).map(|_| r.random::<f64>() < 0.7).collect();
    let subgroups: Vec<usize> = (0..n).map(|i| i % 2).collect();
    SurvivalDataset::new(
        (0..n).map(|i| format!("r{i}")).collect(),
        times,
        events,
        subgroups,
        vec!["A".into(), "B".into()],
        x,
        (0..p).map(|j| format!("x{}", j + 1)).collect(),
    )
    .unwrap()
}

pub fn random_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random::<f64>()).collect()
}

fn linear(x: ArrayView2<'_, f64>, beta: &[f64]) -> Vec<f64> {
    x.rows()
        .into_iter()
        .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Breslow partial log-likelihood by explicit risk-set enumeration, O(n^2).
pub fn brute_loglik(data: &SurvivalDataset, w: &[f64], beta: &[f64]) -> f64 {
    let eta = linear(data.covariates(), beta);
    let t = data.times();
    let mut total = 0.0;
    for i in 0..data.len() {
        if !data.events()[i] || w[i] == 0.0 {
            continue;
        }
        let denom: f64 = (0..data.len())
            .filter(|&k| t[k] >= t[i])
            .map(|k| w[k] * eta[k].exp())
            .sum();
        total += w[i] * (eta[i] - denom.ln());
    }
    total
}

/// Breslow log-likelihood in O(n log n): one backward sweep over distinct times.
pub fn sorted_loglik(data: &SurvivalDataset, w: &[f64], beta: &[f64]) -> f64 {
    let eta = linear(data.covariates(), beta);
    let t = data.times();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
    let mut risk = 0.0;
    let mut total = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && t[order[end]] == t[order[start]] {
            risk += w[order[end]] * eta[order[end]].exp();
            end += 1;
        }
        for &i in &order[start..end] {
            if data.events()[i] && w[i] > 0.0 {
                total += w[i] * (eta[i] - risk.ln());
            }
        }
        start = end;
    }
    total
}

/// Weighted population standard deviation of each covariate.
pub fn weighted_sd(data: &SurvivalDataset, w: &[f64]) -> Vec<f64> {
    let x = data.covariates();
    let total: f64 = w.iter().sum();
    (0..x.ncols())
        .map(|j| {
            let mean = (0..x.nrows()).map(|i| w[i] * x[[i, j]]).sum::<f64>() / total;
            ((0..x.nrows()).map(|i| w[i] * (x[[i, j]] - mean).powi(2)).sum::<f64>() / total).sqrt()
        })
        .collect()
}

/// `l_w(beta) / W - lambda * sum_j sd_j |beta_j|`: the lasso penalty acts on
/// standardised covariates.
pub fn penalized_objective(data: &SurvivalDataset, w: &[f64], sd: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let total: f64 = w.iter().sum();
    let penalty: f64 = beta.iter().zip(sd).map(|(b, s)| (b * s).abs()).sum();
    sorted_loglik(data, w, beta) / total - lambda * penalty
}

/// Maximiser of a concave function on a square by successively refined
/// dense grids.
pub fn grid_search_2d(f: impl Fn([f64; 2]) -> f64, half_width: f64) -> [f64; 2] {
    let mut center = [0.0, 0.0];
    let mut radius = half_width;
    let points = 80;
    while radius > 1e-6 {
        let step = 2.0 * radius / points as f64;
        let mut best = (f64::NEG_INFINITY, center);
        for a in 0..=points {
            for b in 0..=points {
                let x = [
                    center[0] - radius + a as f64 * step,
                    center[1] - radius + b as f64 * step,
                ];
                let v = f(x);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
        center = best.1;
        radius = 3.0 * step;
    }
    center
}

/// BFGS with backtracking line search, minimising `f`.
pub fn bfgs(f: impl Fn(&[f64]) -> f64, grad: impl Fn(&[f64]) -> Vec<f64>, x0: Vec<f64>) -> Vec<f64> {
    let p = x0.len();
    let mut x = x0;
    let mut g = grad(&x);
    let mut h = Array2::<f64>::eye(p);
    for _ in 0..500 {
        if g.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-10 {
            break;
        }
        let d: Vec<f64> = (0..p).map(|i| -(0..p).map(|j| h[[i, j]] * g[j]).sum::<f64>()).collect();
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        let fx = f(&x);
        let mut step = 1.0;
        let mut next: Vec<f64>;
        loop {
            next = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            if f(&next) <= fx + 1e-4 * step * slope || step < 1e-12 {
                break;
            }
            step *= 0.5;
        }
        let g_next = grad(&next);
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-16 {
            let hy: Vec<f64> = (0..p).map(|i| (0..p).map(|j| h[[i, j]] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..p {
                for j in 0..p {
                    h[[i, j]] += (sy + yhy) * s[i] * s[j] / (sy * sy) - (hy[i] * s[j] + s[i] * hy[j]) / sy;
                }
            }
        }
        x = next;
        g = g_next;
    }
    x
}

/// Central finite-difference gradient.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Harrell's C by enumerating ordered pairs. A censored patient tied with an
/// event counts as the longer survivor.
pub fn brute_concordance(times: &[f64], events: &[bool], scores: &[f64]) -> Option<f64> {
    let (mut usable, mut credit) = (0usize, 0.0);
    for i in 0..times.len() {
        for k in 0..times.len() {
            if events[i] && (times[k] > times[i] || (times[k] == times[i] && !events[k])) {
                usable += 1;
                credit += if scores[k] < scores[i] {
                    1.0
                } else if scores[k] == scores[i] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    (usable > 0).then(|| credit / usable as f64)
}

/// Mann-Whitney AUC by enumerating positive/negative pairs.
pub fn brute_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let (mut pairs, mut credit) = (0usize, 0.0);
    for i in 0..scores.len() {
        for k in 0..scores.len() {
            if positive[i] && !positive[k] {
                pairs += 1;
                credit += if scores[i] > scores[k] {
                    1.0
                } else if scores[i] == scores[k] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    credit / pairs as f64
}
