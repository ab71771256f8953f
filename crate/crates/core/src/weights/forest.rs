//! Probability forest: bootstrap Gini trees whose leaves store class
//! frequencies, averaged across trees.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::{derive_seed, rng_from_seed};

use super::classifier::{check_classes, ProbabilityModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    /// Nodes of at most this many rows are not split.
    pub min_node_size: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, row: ndarray::ArrayView1<'_, f64>) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf(p) => return p,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    n_classes: usize,
    /// Out-of-bag class probabilities for the training rows; rows never left
    /// out of a bootstrap sample hold NaN.
    oob: Array2<f64>,
}

impl RandomForest {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn oob_proba(&self) -> &Array2<f64> {
        &self.oob
    }
}

impl ProbabilityModel for RandomForest {
    fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((features.nrows(), self.n_classes));
        let scale = 1.0 / self.trees.len() as f64;
        for (row, mut o) in features.rows().into_iter().zip(out.rows_mut()) {
            for tree in &self.trees {
                for (v, p) in o.iter_mut().zip(tree.leaf(row)) {
                    *v += p;
                }
            }
            o.mapv_inplace(|v| v * scale);
        }
        out
    }
}

struct Grower<'a> {
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
    k: usize,
    mtry: usize,
    min_node_size: usize,
}

impl Grower<'_> {
    fn grow<R: Rng>(&self, rows: &mut [usize], rng: &mut R) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        self.node(rows, rng, &mut tree);
        tree
    }

    fn frequencies(&self, rows: &[usize]) -> Vec<f64> {
        let mut f = vec![0.0; self.k];
        for &i in rows {
            f[self.labels[i]] += 1.0;
        }
        let n = rows.len() as f64;
        f.iter_mut().for_each(|v| *v /= n);
        f
    }

    fn node<R: Rng>(&self, rows: &mut [usize], rng: &mut R, tree: &mut Tree) -> usize {
        let id = tree.nodes.len();
        let freq = self.frequencies(rows);
        let pure = freq.contains(&1.0);
        if pure || rows.len() <= self.min_node_size {
            tree.nodes.push(Node::Leaf(freq));
            return id;
        }
        match self.best_split(rows, rng) {
            None => {
                tree.nodes.push(Node::Leaf(freq));
                id
            }
            Some((feature, threshold)) => {
                tree.nodes.push(Node::Leaf(Vec::new()));
                let mut split = 0;
                for i in 0..rows.len() {
                    if self.features[[rows[i], feature]] <= threshold {
                        rows.swap(i, split);
                        split += 1;
                    }
                }
                let (l, r) = rows.split_at_mut(split);
                let left = self.node(l, rng, tree);
                let right = self.node(r, rng, tree);
                tree.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                id
            }
        }
    }

    /// Best Gini split among `mtry` random features, if any separates rows.
    fn best_split<R: Rng>(&self, rows: &[usize], rng: &mut R) -> Option<(usize, f64)> {
        let d = self.features.ncols();
        let n = rows.len();
        let mut total = vec![0.0; self.k];
        for &i in rows {
            total[self.labels[i]] += 1.0;
        }
        let parent: f64 = total.iter().map(|c| c * c).sum::<f64>() / n as f64;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = parent + 1e-12;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut left = vec![0.0; self.k];
        for feature in sample(rng, d, self.mtry.min(d)) {
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (self.features[[i, feature]], self.labels[i])));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[n - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|v| *v = 0.0);
            let mut sq_left = 0.0;
            let mut sq_right: f64 = total.iter().map(|c| c * c).sum();
            for s in 0..n - 1 {
                let y = pairs[s].1;
                let (l, r) = (left[y], total[y] - left[y]);
                sq_left += 2.0 * l + 1.0;
                sq_right -= 2.0 * r - 1.0;
                left[y] += 1.0;
                if pairs[s].0 == pairs[s + 1].0 {
                    continue;
                }
                let nl = (s + 1) as f64;
                let score = sq_left / nl + sq_right / (n as f64 - nl);
                if score > best_score {
                    best_score = score;
                    let (a, b) = (pairs[s].0, pairs[s + 1].0);
                    let mid = 0.5 * (a + b);
                    best = Some((feature, if mid < b { mid } else { a }));
                }
            }
        }
        best
    }
}

/// Grows `config.n_trees` trees on bootstrap samples. Tree `t` draws from its
/// own stream derived from `seed` and `t`.
pub fn fit_random_forest(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    n_classes: usize,
    config: &ForestConfig,
    seed: u64,
) -> Result<RandomForest> {
    if features.nrows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    if config.n_trees == 0 {
        return Err(Error::InvalidInput("a forest needs at least one tree".into()));
    }
    if features.ncols() == 0 {
        return Err(Error::InvalidInput("a forest needs at least one feature".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classification features".into()));
    }
    check_classes(labels, n_classes)?;
    let d = features.ncols();
    let mtry = config
        .mtry
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d);
    let grower = Grower {
        features,
        labels,
        k: n_classes,
        mtry,
        min_node_size: config.min_node_size,
    };
    let n = labels.len();
    let grown: Vec<(Tree, Vec<bool>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(derive_seed(seed, "tree", &[t as u64]));
            let mut in_bag = vec![false; n];
            let mut rows: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            (grower.grow(&mut rows, &mut rng), in_bag)
        })
        .collect();

    let mut oob = Array2::zeros((n, n_classes));
    let mut votes = vec![0usize; n];
    for (tree, in_bag) in &grown {
        for i in (0..n).filter(|&i| !in_bag[i]) {
            for (o, p) in oob.row_mut(i).iter_mut().zip(tree.leaf(features.row(i))) {
                *o += p;
            }
            votes[i] += 1;
        }
    }
    for (mut row, &v) in oob.rows_mut().into_iter().zip(&votes) {
        if v == 0 {
            row.fill(f64::NAN);
        } else {
            row.mapv_inplace(|x| x / v as f64);
        }
    }
    Ok(RandomForest {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        n_classes,
        oob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::StandardNormal;

    #[test]
    fn identical_rows_give_class_frequencies() {
        let x = Array2::from_elem((40, 3), 2.0);
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i < 10)).collect();
        let f = fit_random_forest(x.view(), &labels, 2, &ForestConfig::default(), 4).unwrap();
        let p = f.predict_proba(x.view());
        assert!((p[[0, 1]] - 0.25).abs() < 0.05, "{}", p[[0, 1]]);
        assert!((p.row(0).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tree_fits_training_set() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let n = 200;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let x = Array2::from_shape_fn((n, 4), |(i, j)| {
            let z: f64 = rng.sample(StandardNormal);
            if j == 0 {
                3.0 * labels[i] as f64 + z
            } else {
                z
            }
        });
        let cfg = ForestConfig {
            n_trees: 1,
            mtry: Some(4),
            min_node_size: 1,
        };
        let f = fit_random_forest(x.view(), &labels, 3, &cfg, 1).unwrap();
        let p = f.predict_proba(x.view());
        let correct = p
            .rows()
            .into_iter()
            .zip(&labels)
            .filter(|(row, &y)| (0..3).all(|c| c == y || row[c] < row[y]))
            .count();
        assert!(correct as f64 >= 0.9 * n as f64, "{correct}/{n}");
    }

    #[test]
    fn deterministic_given_seed() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let cfg = ForestConfig {
            n_trees: 20,
            ..ForestConfig::default()
        };
        let a = fit_random_forest(x.view(), &labels, 2, &cfg, 5).unwrap();
        let b = fit_random_forest(x.view(), &labels, 2, &cfg, 5).unwrap();
        assert_eq!(a.trees, b.trees);
        assert_eq!(a.predict_proba(x.view()), b.predict_proba(x.view()));
    }

    #[test]
    fn zero_trees_rejected() {
        let x = Array2::<f64>::zeros((4, 1));
        let cfg = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(fit_random_forest(x.view(), &[0, 1, 0, 1], 2, &cfg, 0).is_err());
    }
}
