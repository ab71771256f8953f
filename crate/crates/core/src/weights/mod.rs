//! Subgroup membership probabilities and the likelihood weights built from
//! them.
//!
//! For target subgroup `s` a patient with outcome `(t, d)` and covariates `x`
//! gets weight `p(s | t, d, x) / p(s)`. The conditional probabilities come
//! from a classifier evaluated out of fold; `p(s)` is the subgroup frequency.

mod classifier;
mod forest;
mod multinomial;

pub use classifier::{
    Classifier, ClassifierParams, ClassifierRegistry, ClassifierSpec, PriorClassifier, ProbabilityModel,
};
pub use forest::{fit_random_forest, ForestConfig, RandomForest};
pub use multinomial::{fit_multinomial, fit_multinomial_at, MultinomialConfig, MultinomialModel, Penalty};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::folds::{derive_seed, stratified_folds};
use crate::survival::SurvivalDataset;

/// Classifier inputs `[t, d, x_1 .. x_p]` and 0-based subgroup labels.
pub fn build_classification_features(dataset: &SurvivalDataset) -> (Array2<f64>, Vec<usize>) {
    let x = dataset.covariates();
    let p = x.ncols();
    let mut f = Array2::zeros((dataset.len(), p + 2));
    for i in 0..dataset.len() {
        f[[i, 0]] = dataset.times()[i];
        f[[i, 1]] = f64::from(u8::from(dataset.events()[i]));
        for j in 0..p {
            f[[i, j + 2]] = x[[i, j]];
        }
    }
    (f, dataset.subgroups().to_vec())
}

/// `n x S` matrix of class probabilities; each row is a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix(Array2<f64>);

impl ProbabilityMatrix {
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (i, row) in probs.rows().into_iter().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "probability row {i} is not a distribution"
                )));
            }
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Out-of-fold probabilities with the fold bookkeeping that produced them.
#[derive(Debug, Clone)]
pub struct CvProbabilities {
    pub probs: ProbabilityMatrix,
    /// Fold holding out each row.
    pub fold_of: Vec<usize>,
    /// Training rows of each fold's model.
    pub training_rows: Vec<Vec<usize>>,
}

/// Out-of-fold class probabilities: folds are stratified by subgroup and
/// each row is predicted by the model fitted without its fold.
pub fn cross_validated_probabilities(
    dataset: &SurvivalDataset,
    classifier: &dyn Classifier,
    folds: usize,
    seed: u64,
) -> Result<CvProbabilities> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    let sizes = dataset.subgroup_sizes();
    if let Some((s, &size)) = sizes.iter().enumerate().find(|(_, &m)| m < folds) {
        return Err(Error::SmallSubgroup {
            label: dataset.subgroup_labels()[s].clone(),
            size,
            folds,
        });
    }
    let (features, labels) = build_classification_features(dataset);
    let k = dataset.subgroup_count();
    let strata: Vec<Option<usize>> = labels.iter().map(|&s| Some(s)).collect();
    let fold_of: Vec<usize> = stratified_folds(&strata, folds, derive_seed(seed, "classifier-folds", &[]))
        .into_iter()
        .map(|f| f.expect("every row has a stratum"))
        .collect();
    let n = labels.len();
    let training_rows: Vec<Vec<usize>> = (0..folds)
        .map(|f| (0..n).filter(|&i| fold_of[i] != f).collect())
        .collect();
    let predictions: Vec<(Vec<usize>, Array2<f64>)> = (0..folds)
        .into_par_iter()
        .map(|f| -> Result<_> {
            let train = &training_rows[f];
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            let x = features.select(ndarray::Axis(0), train);
            let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = classifier.fit(x.view(), &y, k, derive_seed(seed, "classifier-fit", &[f as u64]))?;
            let p = model.predict_proba(features.select(ndarray::Axis(0), &test).view());
            Ok((test, p))
        })
        .collect::<Result<_>>()?;
    let mut probs = Array2::zeros((n, k));
    for (test, p) in predictions {
        for (r, &i) in test.iter().enumerate() {
            probs.row_mut(i).assign(&p.row(r));
        }
    }
    Ok(CvProbabilities {
        probs: ProbabilityMatrix::new(probs)?,
        fold_of,
        training_rows,
    })
}

/// `w[i, s] = p(s | row i) / p(s)` with `p(s)` the empirical frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub weights: Array2<f64>,
    pub prior: Vec<f64>,
}

impl WeightMatrix {
    /// Weights of every patient for target subgroup `s` (0-based).
    pub fn column(&self, s: usize) -> Vec<f64> {
        self.weights.column(s).to_vec()
    }
}

pub fn compute_weights(probs: &ProbabilityMatrix, labels: &[usize]) -> Result<WeightMatrix> {
    let k = probs.n_classes();
    if labels.len() != probs.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probs.len()
        )));
    }
    let mut counts = vec![0usize; k];
    for &s in labels {
        if s >= k {
            return Err(Error::InvalidInput(format!("label {s} out of range for {k} subgroups")));
        }
        counts[s] += 1;
    }
    if let Some(s) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass(s));
    }
    let n = labels.len() as f64;
    let prior: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mut weights = probs.probs().clone();
    for mut row in weights.rows_mut() {
        for (w, p) in row.iter_mut().zip(&prior) {
            *w /= p;
        }
    }
    Ok(WeightMatrix { weights, prior })
}

/// 1 for members of `target` (0-based), `w` for everyone else.
pub fn fixed_weights(labels: &[usize], target: usize, w: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::InvalidInput(format!("fixed weight {w} outside [0, 1]")));
    }
    Ok(labels.iter().map(|&s| if s == target { 1.0 } else { w }).collect())
}

/// Summed probability of the subgroups in `group` for each row.
pub fn group_scores(probs: &Array2<f64>, group: &[usize]) -> Vec<f64> {
    probs
        .rows()
        .into_iter()
        .map(|r| group.iter().map(|&s| r[s]).sum())
        .collect()
}

/// Mann-Whitney AUC of `scores` for `positive` against the rest, ties
/// counting one half.
pub fn group_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("AUC scores".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidInput("AUC needs both groups present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // positives-beat-negatives count, scanning tie blocks in ascending order
    let mut twice_wins: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let block = &order[start..end];
        let pos = block.iter().filter(|&&i| positive[i]).count() as u128;
        let neg = block.len() as u128 - pos;
        twice_wins += pos * (2 * neg_below + neg);
        neg_below += neg;
        start = end;
    }
    Ok(twice_wins as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::survival::SurvivalObservation;
    use proptest::prelude::*;

    fn brute_auc(scores: &[f64], positive: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if positive[i] && !positive[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    fn toy(n_per: usize, groups: usize) -> SurvivalDataset {
        let obs: Vec<SurvivalObservation> = (0..n_per * groups)
            .map(|i| SurvivalObservation {
                time: 1.0 + (i % 7) as f64,
                event: i % 3 != 0,
                subgroup: i % groups,
                covariates: vec![(i % 5) as f64, (i % 2) as f64],
            })
            .collect();
        SurvivalDataset::from_observations(&obs, groups).unwrap()
    }

    #[test]
    fn features_are_time_status_covariates() {
        let d = toy(1, 3);
        let (f, labels) = build_classification_features(&d);
        assert_eq!(f.ncols(), 4);
        for i in 0..3 {
            assert_eq!(f[[i, 0]], d.times()[i]);
            assert_eq!(f[[i, 1]], if d.events()[i] { 1.0 } else { 0.0 });
            assert_eq!(
                f.row(i).slice(ndarray::s![2..]).to_vec(),
                d.covariates().row(i).to_vec()
            );
        }
        assert_eq!(labels, vec![0, 1, 2]);
    }

    #[test]
    fn no_covariates_gives_two_columns() {
        let obs = vec![
            SurvivalObservation {
                time: 1.0,
                event: true,
                subgroup: 0,
                covariates: vec![],
            },
            SurvivalObservation {
                time: 2.0,
                event: false,
                subgroup: 1,
                covariates: vec![],
            },
        ];
        let d = SurvivalDataset::from_observations(&obs, 2).unwrap();
        assert_eq!(build_classification_features(&d).0.ncols(), 2);
    }

    #[test]
    fn prior_row_gives_unit_weights() {
        let labels = vec![0, 0, 1, 2];
        let prior = [0.5, 0.25, 0.25];
        let p = Array2::from_shape_fn((4, 3), |(_, k)| prior[k]);
        let w = compute_weights(&ProbabilityMatrix::new(p).unwrap(), &labels).unwrap();
        assert!(w.weights.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn certain_row_in_four_equal_groups() {
        let labels = vec![0, 1, 2, 3];
        let mut p = Array2::from_elem((4, 4), 0.25);
        p.row_mut(0).assign(&ndarray::arr1(&[1.0, 0.0, 0.0, 0.0]));
        let w = compute_weights(&ProbabilityMatrix::new(p).unwrap(), &labels).unwrap();
        assert_eq!(w.weights.row(0).to_vec(), vec![4.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_subgroup_rejected() {
        let p = Array2::from_elem((2, 3), 1.0 / 3.0);
        assert!(compute_weights(&ProbabilityMatrix::new(p).unwrap(), &[0, 1]).is_err());
    }

    #[test]
    fn fixed_weight_examples() {
        assert_eq!(fixed_weights(&[0, 1, 0], 0, 0.3).unwrap(), vec![1.0, 0.3, 1.0]);
        assert_eq!(fixed_weights(&[0, 1, 2], 1, 0.0).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(fixed_weights(&[0, 1, 2], 1, 1.0).unwrap(), vec![1.0; 3]);
        assert!(fixed_weights(&[0], 0, 1.5).is_err());
    }

    #[test]
    fn auc_edge_cases() {
        assert_eq!(
            group_auc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(),
            1.0
        );
        assert_eq!(group_auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert!(group_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn out_of_fold_bookkeeping() {
        let d = toy(10, 4);
        let cv = cross_validated_probabilities(&d, &PriorClassifier, 10, 3).unwrap();
        for i in 0..d.len() {
            assert!(!cv.training_rows[cv.fold_of[i]].contains(&i));
        }
        for f in 0..10 {
            let held: Vec<usize> = (0..d.len()).filter(|&i| cv.fold_of[i] == f).collect();
            let held_groups: std::collections::BTreeSet<usize> = held.iter().map(|&i| d.subgroups()[i]).collect();
            assert_eq!(held_groups.len(), 4);
        }
    }

    #[test]
    fn small_subgroup_suggests_fewer_folds() {
        let d = toy(3, 2);
        let r = cross_validated_probabilities(&d, &PriorClassifier, 5, 0);
        assert!(matches!(r, Err(Error::SmallSubgroup { size: 3, folds: 5, .. })));
    }

    proptest! {
        #[test]
        fn auc_matches_pair_counting(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..100)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| f64::from(d.0) / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&b| b) && labels.iter().any(|&b| !b));
            prop_assert_eq!(group_auc(&scores, &labels).unwrap(), brute_auc(&scores, &labels));
        }

        #[test]
        fn weighted_rows_sum_to_one(raw in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 3..30)) {
            let n = raw.len();
            let p = Array2::from_shape_fn((n, 3), |(i, k)| raw[i][k] / raw[i].iter().sum::<f64>());
            let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let w = compute_weights(&ProbabilityMatrix::new(p).unwrap(), &labels).unwrap();
            for row in w.weights.rows() {
                let s: f64 = row.iter().zip(&w.prior).map(|(a, b)| a * b).sum();
                prop_assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}
