mod common;

use common::*;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use subcox::simulate::{generate_scenario, SimulationScenario};
use subcox::weights::{
    build_classification_features, compute_weights, cross_validated_probabilities, fit_multinomial_at,
    fit_random_forest, group_auc, group_scores, ClassifierParams, ClassifierRegistry, ForestConfig, MultinomialConfig,
    Penalty, ProbabilityMatrix, ProbabilityModel,
};

/// Unpenalised binary logistic regression with intercept by Newton-Raphson.
fn binary_logistic(x: &Array2<f64>, y: &[usize]) -> Vec<f64> {
    let (n, p) = x.dim();
    let design = Array2::from_shape_fn((n, p + 1), |(i, j)| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let mut theta = Array1::<f64>::zeros(p + 1);
    for _ in 0..100 {
        let prob = design.dot(&theta).mapv(|e| 1.0 / (1.0 + (-e).exp()));
        let resid = Array1::from_iter(y.iter().zip(&prob).map(|(&t, q)| t as f64 - q));
        let grad = design.t().dot(&resid);
        let mut info = Array2::<f64>::zeros((p + 1, p + 1));
        for i in 0..n {
            let v = prob[i] * (1.0 - prob[i]);
            for a in 0..=p {
                for b in 0..=p {
                    info[[a, b]] += v * design[[i, a]] * design[[i, b]];
                }
            }
        }
        let step = gauss_solve(info, grad.to_vec());
        theta = &theta + &Array1::from(step.clone());
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-12 {
            break;
        }
    }
    design.dot(&theta).mapv(|e| 1.0 / (1.0 + (-e).exp())).to_vec()
}

fn gauss_solve(mut a: Array2<f64>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&u, &v| a[[u, c]].abs().total_cmp(&a[[v, c]].abs()))
            .unwrap();
        for k in 0..n {
            a.swap([c, k], [pivot, k]);
        }
        b.swap(c, pivot);
        for r in c + 1..n {
            let f = a[[r, c]] / a[[c, c]];
            for k in c..n {
                a[[r, k]] -= f * a[[c, k]];
            }
            b[r] -= f * b[c];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[[r, k]] * b[k]).sum();
        b[r] = (b[r] - s) / a[[r, r]];
    }
    b
}

#[test]
fn two_class_softmax_is_binary_logistic() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let n = 120;
        let labels: Vec<usize> = (0..n).map(|_| usize::from(r.random::<f64>() < 0.4)).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            let z: f64 = r.sample(StandardNormal);
            z + if j == 0 { 0.8 * labels[i] as f64 } else { 0.0 }
        });
        let want = binary_logistic(&x, &labels);
        for penalty in [Penalty::Lasso, Penalty::Ridge] {
            let m = fit_multinomial_at(x.view(), &labels, 2, penalty, 0.0, &MultinomialConfig::default()).unwrap();
            let got = m.predict_proba(x.view());
            for i in 0..n {
                assert!((got[[i, 1]] - want[i]).abs() <= 1e-4, "seed {seed} row {i}");
            }
        }
    }
}

#[test]
fn forest_separates_gaussian_classes_out_of_bag() {
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let n = 100;
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 2), |(i, _)| {
            3.0 * labels[i] as f64 + r.sample::<f64, _>(StandardNormal)
        });
        let forest = fit_random_forest(x.view(), &labels, 2, &ForestConfig::default(), seed).unwrap();
        let oob = forest.oob_proba();
        let scores: Vec<f64> = (0..n).map(|i| oob[[i, 1]]).collect();
        let positive: Vec<bool> = labels.iter().map(|&y| y == 1).collect();
        let auc = group_auc(&scores, &positive).unwrap();
        assert!(auc >= 0.95, "seed {seed}: {auc}");
    }
}

#[test]
fn simulated_features_have_time_status_and_genes() {
    let data = generate_scenario(&SimulationScenario::new(15, 20, 0.5, 3).unwrap()).unwrap();
    let (x, labels) = build_classification_features(&data);
    assert_eq!(x.ncols(), 22);
    let mut hist = [0usize; 4];
    for &s in &labels {
        hist[s] += 1;
    }
    assert_eq!(hist.to_vec(), data.subgroup_sizes());
    assert_eq!(x[[7, 0]], data.times()[7]);
    assert_eq!(x[[7, 1]], f64::from(u8::from(data.events()[7])));
    assert_eq!(x[[7, 5]], data.covariates()[[7, 3]]);
}

fn cv_group_auc(epsilon: f64, classifier: &str, seed: u64) -> f64 {
    let data = generate_scenario(&SimulationScenario::new(50, 50, epsilon, seed).unwrap()).unwrap();
    let model = ClassifierRegistry::with_builtins()
        .create(classifier, &ClassifierParams::default())
        .unwrap();
    let cv = cross_validated_probabilities(&data, model.as_ref(), 10, seed).unwrap();
    let positive: Vec<bool> = data.subgroups().iter().map(|&s| s < 2).collect();
    group_auc(&group_scores(cv.probs.probs(), &[0, 1]), &positive).unwrap()
}

#[test]
fn indistinguishable_subgroups_give_chance_auc() {
    let auc = cv_group_auc(0.0, "lasso", 21);
    assert!((auc - 0.5).abs() <= 0.1, "{auc}");
}

#[test]
fn shifted_subgroups_are_separated() {
    let auc = cv_group_auc(0.5, "lasso", 22);
    assert!(auc >= 0.95, "{auc}");
}

proptest! {
    #[test]
    fn weights_satisfy_row_sum_identity(seed in 0u64..10_000, n in 4usize..40, k in 2usize..5) {
        let mut r = rng(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let mut probs = Array2::from_shape_fn((n, k), |_| r.random::<f64>() + 1e-3);
        for mut row in probs.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        let w = compute_weights(&ProbabilityMatrix::new(probs).unwrap(), &labels).unwrap();
        for row in w.weights.rows() {
            let total: f64 = row.iter().zip(&w.prior).map(|(a, b)| a * b).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn auc_matches_pair_counting(seed in 0u64..10_000, n in 2usize..100) {
        let mut r = rng(seed);
        let positive: Vec<bool> = (0..n).map(|i| i == 0 || (i != 1 && r.random::<bool>())).collect();
        let scores: Vec<f64> = (0..n).map(|_| (r.random::<f64>() * 10.0).round()).collect();
        prop_assert_eq!(group_auc(&scores, &positive).unwrap(), brute_auc(&scores, &positive));
    }
}
