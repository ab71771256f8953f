//! Subgroup classifiers behind a common trait, looked up by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::forest::{fit_random_forest, ForestConfig};
use super::multinomial::{fit_multinomial, MultinomialConfig, Penalty};

/// A fitted model returning one probability row per input row.
pub trait ProbabilityModel: Send + Sync {
    fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Array2<f64>;
}

/// A method for estimating `p(s | features)`.
pub trait Classifier: Send + Sync {
    fn name(&self) -> &str;

    fn fit(
        &self,
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn ProbabilityModel>>;
}

/// Hyperparameters for every built-in classifier; each one reads its own part.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierParams {
    pub multinomial: MultinomialConfig,
    pub forest: ForestConfig,
}

/// Named classifier plus the settings used to estimate out-of-fold probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub method: String,
    #[serde(default)]
    pub params: ClassifierParams,
    pub cv_folds: usize,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(method: &str, seed: u64) -> Self {
        Self {
            method: method.to_string(),
            params: ClassifierParams::default(),
            cv_folds: 10,
            seed,
        }
    }
}

type Factory = Arc<dyn Fn(&ClassifierParams) -> Box<dyn Classifier> + Send + Sync>;

/// Name to constructor map.
#[derive(Clone)]
pub struct ClassifierRegistry {
    factories: BTreeMap<String, Factory>,
}

impl std::fmt::Debug for ClassifierRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for ClassifierRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ClassifierRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `lasso`, `ridge`, `rf` and `prior`, plus the long aliases
    /// `multinomial_lasso`, `multinomial_ridge` and `random_forest`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        for (name, alias, penalty) in [
            ("lasso", "multinomial_lasso", Penalty::Lasso),
            ("ridge", "multinomial_ridge", Penalty::Ridge),
        ] {
            let factory = move |p: &ClassifierParams| -> Box<dyn Classifier> {
                Box::new(MultinomialClassifier {
                    name: name.to_string(),
                    penalty,
                    config: p.multinomial.clone(),
                })
            };
            r.register(name, factory);
            r.register(alias, factory);
        }
        let forest = |p: &ClassifierParams| -> Box<dyn Classifier> {
            Box::new(RandomForestClassifier {
                config: p.forest.clone(),
            })
        };
        r.register("rf", forest);
        r.register("random_forest", forest);
        r.register("prior", |_: &ClassifierParams| -> Box<dyn Classifier> {
            Box::new(PriorClassifier)
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ClassifierParams) -> Box<dyn Classifier> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, params: &ClassifierParams) -> Result<Box<dyn Classifier>> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| Error::UnknownClassifier(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

pub(crate) fn check_classes(labels: &[usize], n_classes: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {n_classes} classes"
            )));
        }
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::MissingClass(missing));
    }
    Ok(counts)
}

struct MultinomialClassifier {
    name: String,
    penalty: Penalty,
    config: MultinomialConfig,
}

impl Classifier for MultinomialClassifier {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(
        &self,
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn ProbabilityModel>> {
        let model = fit_multinomial(features, labels, n_classes, self.penalty, &self.config, seed)?;
        Ok(Box::new(model))
    }
}

struct RandomForestClassifier {
    config: ForestConfig,
}

impl Classifier for RandomForestClassifier {
    fn name(&self) -> &str {
        "rf"
    }

    fn fit(
        &self,
        features: ArrayView2<'_, f64>,
        labels: &[usize],
        n_classes: usize,
        seed: u64,
    ) -> Result<Box<dyn ProbabilityModel>> {
        Ok(Box::new(fit_random_forest(
            features,
            labels,
            n_classes,
            &self.config,
            seed,
        )?))
    }
}

/// Ignores the features and predicts the training class frequencies, which
/// turns every estimated weight into 1.
pub struct PriorClassifier;

struct PriorModel(Vec<f64>);

impl ProbabilityModel for PriorModel {
    fn predict_proba(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        Array2::from_shape_fn((features.nrows(), self.0.len()), |(_, k)| self.0[k])
    }
}

impl Classifier for PriorClassifier {
    fn name(&self) -> &str {
        "prior"
    }

    fn fit(
        &self,
        _features: ArrayView2<'_, f64>,
        labels: &[usize],
        n_classes: usize,
        _seed: u64,
    ) -> Result<Box<dyn ProbabilityModel>> {
        let counts = check_classes(labels, n_classes)?;
        let n = labels.len() as f64;
        Ok(Box::new(PriorModel(counts.iter().map(|&c| c as f64 / n).collect())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_registered() {
        let r = ClassifierRegistry::with_builtins();
        for name in ["lasso", "ridge", "rf", "prior", "multinomial_lasso", "random_forest"] {
            assert!(r.contains(name), "{name}");
        }
        assert!(matches!(
            r.create("boosting", &ClassifierParams::default()),
            Err(Error::UnknownClassifier(_))
        ));
    }

    #[test]
    fn custom_classifier_can_be_registered() {
        let mut r = ClassifierRegistry::empty();
        r.register("uniform-prior", |_: &ClassifierParams| -> Box<dyn Classifier> {
            Box::new(PriorClassifier)
        });
        let c = r.create("uniform-prior", &ClassifierParams::default()).unwrap();
        let x = Array2::<f64>::zeros((4, 1));
        let m = c.fit(x.view(), &[0, 0, 0, 1], 2, 0).unwrap();
        assert_eq!(m.predict_proba(x.view()).row(0).to_vec(), vec![0.75, 0.25]);
    }

    #[test]
    fn missing_class_is_an_error() {
        let x = Array2::<f64>::zeros((3, 1));
        assert!(matches!(
            PriorClassifier.fit(x.view(), &[0, 0, 2], 3, 0),
            Err(Error::MissingClass(1))
        ));
    }
}
