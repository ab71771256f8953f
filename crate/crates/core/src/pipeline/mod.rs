//! Repeated train/test comparison of weighting schemes.
//!
//! Each repetition fits every suite entry for every target subgroup on the
//! training data, selects lambda by cross-validation and scores the selected
//! model by its C-index on the target subgroup's test rows.

mod aggregate;

pub use aggregate::{aggregate, CIndexSummary, ExperimentReport, ModelSummary, OverallSummary};

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cox::{fit_cox_lasso_cv, predict_risk, CoxCoefficients, ObservationWeights, PathConfig};
use crate::error::{Error, Result};
use crate::folds::{derive_seed, rng_from_seed};
use crate::simulate::{generate_scenario, SimulationScenario};
use crate::survival::{concordance_index, SurvivalDataset};
use crate::weights::{
    compute_weights, cross_validated_probabilities, fixed_weights, group_auc, group_scores, ClassifierParams,
    ClassifierRegistry, CvProbabilities, WeightMatrix,
};

/// How the training rows are weighted for a target subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelSpec {
    /// `p(s | t, d, x) / p(s)` from the named classifier.
    Estimated(String),
    /// 1 for the target subgroup, `w` for everyone else.
    Fixed(f64),
    /// Target subgroup rows only.
    SubgroupOnly,
    /// All rows with unit weight plus subgroup indicator columns.
    Combined,
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Estimated(name) => write!(f, "estimated:{name}"),
            ModelSpec::Fixed(w) => write!(f, "fixed:{w}"),
            ModelSpec::SubgroupOnly => f.write_str("subgroup"),
            ModelSpec::Combined => f.write_str("all"),
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    /// Parses `estimated:<classifier>`, `fixed:<w>`, `subgroup` or `all`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "subgroup" | "subgroup_only" => return Ok(ModelSpec::SubgroupOnly),
            "all" | "combined" => return Ok(ModelSpec::Combined),
            _ => {}
        }
        if let Some(name) = s.strip_prefix("estimated:") {
            if name.is_empty() {
                return Err(Error::InvalidInput("estimated weights need a classifier name".into()));
            }
            return Ok(ModelSpec::Estimated(name.to_string()));
        }
        if let Some(w) = s.strip_prefix("fixed:") {
            let w: f64 = w
                .parse()
                .map_err(|_| Error::InvalidInput(format!("fixed weight '{w}' is not a number")))?;
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidInput(format!("fixed weight {w} outside [0, 1]")));
            }
            return Ok(ModelSpec::Fixed(w));
        }
        Err(Error::InvalidInput(format!(
            "unknown model '{s}' (expected estimated:<classifier>, fixed:<w>, subgroup or all)"
        )))
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.to_string()
    }
}

/// Ordered, duplicate-free list of models to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModelSpec>", into = "Vec<ModelSpec>")]
pub struct ModelSuite(Vec<ModelSpec>);

impl ModelSuite {
    pub fn new(entries: Vec<ModelSpec>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidInput("the model suite is empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].contains(e) {
                return Err(Error::InvalidInput(format!("model '{e}' is listed twice")));
            }
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[ModelSpec] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Classifier names used by estimated-weight entries, in suite order.
    pub fn classifiers(&self) -> Vec<&str> {
        self.0
            .iter()
            .filter_map(|m| match m {
                ModelSpec::Estimated(name) => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }
}

impl Default for ModelSuite {
    /// Estimated weights from lasso, ridge and random forest, fixed weights
    /// 0.1 to 0.9, the subgroup-only model and the combined model.
    fn default() -> Self {
        let mut entries: Vec<ModelSpec> = ["lasso", "ridge", "rf"]
            .iter()
            .map(|c| ModelSpec::Estimated(c.to_string()))
            .collect();
        entries.extend((1..=9).map(|k| ModelSpec::Fixed(k as f64 / 10.0)));
        entries.push(ModelSpec::SubgroupOnly);
        entries.push(ModelSpec::Combined);
        Self(entries)
    }
}

impl TryFrom<Vec<ModelSpec>> for ModelSuite {
    type Error = Error;

    fn try_from(v: Vec<ModelSpec>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ModelSuite> for Vec<ModelSpec> {
    fn from(s: ModelSuite) -> Self {
        s.0
    }
}

/// Fitting settings shared by every repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub path: PathConfig,
    pub cox_folds: usize,
    pub classifier_folds: usize,
    pub classifier: ClassifierParams,
    /// Subgroups (0-based) forming the first group for the group AUC; no AUC
    /// is computed when empty.
    pub group_one: Vec<usize>,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            path: PathConfig::default(),
            cox_folds: 10,
            classifier_folds: 10,
            classifier: ClassifierParams::default(),
            group_one: Vec::new(),
        }
    }
}

/// Selected model of one suite entry for one target subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: String,
    /// 0-based target subgroup.
    pub subgroup: usize,
    pub lambda: f64,
    /// Covariate coefficients, without subgroup indicators.
    pub coefficients: Vec<f64>,
    /// Subgroup-indicator coefficients of the combined model.
    pub dummy_coefficients: Vec<f64>,
    /// `None` when the test rows hold no usable pair.
    pub c_index: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionResult {
    pub index: usize,
    pub seed: u64,
    /// Suite order within each subgroup, subgroups ascending.
    pub fits: Vec<ModelFit>,
    /// Out-of-fold group-1-versus-rest AUC of each classifier on the training data.
    pub group_auc: BTreeMap<String, f64>,
}

/// Train/test split stratified by subgroup and event status: each stratum of
/// size `m` puts `floor(proportion m + 0.5)` rows in training. Returns
/// (training rows, test rows), each ascending.
pub fn stratified_subsample(dataset: &SurvivalDataset, proportion: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(proportion > 0.0 && proportion < 1.0) {
        return Err(Error::InvalidInput(format!(
            "training proportion {proportion} must lie in (0, 1)"
        )));
    }
    let mut strata: BTreeMap<(usize, bool), Vec<usize>> = BTreeMap::new();
    for s in 0..dataset.subgroup_count() {
        for e in [false, true] {
            strata.insert((s, e), Vec::new());
        }
    }
    for i in 0..dataset.len() {
        strata
            .get_mut(&(dataset.subgroups()[i], dataset.events()[i]))
            .expect("all strata inserted")
            .push(i);
    }
    let mut rng = rng_from_seed(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((s, e), mut rows) in strata {
        let m = rows.len();
        let k = (proportion * m as f64 + 0.5).floor() as usize;
        if k == 0 || k == m {
            let label = &dataset.subgroup_labels()[s];
            let status = if e { "event" } else { "censored" };
            return Err(Error::EmptyStratum(format!(
                "subgroup {label} / {status} ({m} rows, {k} to training)"
            )));
        }
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..k]);
        test.extend_from_slice(&rows[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn check_schema(train: &SurvivalDataset, test: &SurvivalDataset) -> Result<()> {
    if train.feature_names() != test.feature_names() || train.subgroup_labels() != test.subgroup_labels() {
        return Err(Error::InvalidInput(
            "training and test data do not share a schema".into(),
        ));
    }
    Ok(())
}

/// Out-of-fold probabilities from the named classifier and the weights
/// built from them.
pub fn estimate_weights(
    train: &SurvivalDataset,
    classifier: &str,
    settings: &FitSettings,
    registry: &ClassifierRegistry,
    seed: u64,
) -> Result<(WeightMatrix, CvProbabilities)> {
    let model = registry.create(classifier, &settings.classifier)?;
    let cv = cross_validated_probabilities(train, model.as_ref(), settings.classifier_folds, seed)?;
    Ok((compute_weights(&cv.probs, train.subgroups())?, cv))
}

/// Design and observation weights of `model` for target subgroup `target`.
/// Estimated weights are looked up in `estimated` by classifier name; the
/// combined model gets subgroup indicator columns.
pub fn model_design<'a>(
    train: &'a SurvivalDataset,
    model: &ModelSpec,
    target: usize,
    estimated: &BTreeMap<String, WeightMatrix>,
) -> Result<(Cow<'a, SurvivalDataset>, ObservationWeights)> {
    if target >= train.subgroup_count() {
        return Err(Error::InvalidInput(format!("target subgroup {target} out of range")));
    }
    let labels = train.subgroups();
    let (data, w) = match model {
        ModelSpec::Estimated(name) => {
            let m = estimated
                .get(name)
                .ok_or_else(|| Error::InvalidInput(format!("no estimated weights for classifier '{name}'")))?;
            (Cow::Borrowed(train), m.column(target))
        }
        ModelSpec::Fixed(w) => (Cow::Borrowed(train), fixed_weights(labels, target, *w)?),
        ModelSpec::SubgroupOnly => (Cow::Borrowed(train), fixed_weights(labels, target, 0.0)?),
        ModelSpec::Combined => (Cow::Owned(train.with_subgroup_dummies()), vec![1.0; train.len()]),
    };
    Ok((data, ObservationWeights::new(w)?))
}

/// One repetition: weights from each classifier, then every (subgroup,
/// model) fit scored on that subgroup's test rows.
pub fn run_repetition(
    train: &SurvivalDataset,
    test: &SurvivalDataset,
    suite: &ModelSuite,
    settings: &FitSettings,
    registry: &ClassifierRegistry,
    seed: u64,
) -> Result<RepetitionResult> {
    check_schema(train, test)?;
    let labels = train.subgroups();
    let mut estimated = BTreeMap::new();
    let mut aucs = BTreeMap::new();
    for name in suite.classifiers() {
        let (weights, cv) = estimate_weights(train, name, settings, registry, derive_seed(seed, "weights", &[]))?;
        if !settings.group_one.is_empty() {
            let positive: Vec<bool> = labels.iter().map(|s| settings.group_one.contains(s)).collect();
            let scores = group_scores(cv.probs.probs(), &settings.group_one);
            aucs.insert(name.to_string(), group_auc(&scores, &positive)?);
        }
        estimated.insert(name.to_string(), weights);
    }

    let p = train.n_features();
    let cox_seed = derive_seed(seed, "cox-cv", &[]);
    let fit = |model: &ModelSpec, s: usize| -> Result<CoxCoefficients> {
        let (data, w) = model_design(train, model, s, &estimated)?;
        let path = fit_cox_lasso_cv(&data, &w, &settings.path, settings.cox_folds, cox_seed)?;
        Ok(path
            .selected_coefficients()
            .expect("cross-validation selects a lambda")
            .clone())
    };
    // the combined model does not depend on the target subgroup
    let combined = if suite.entries().contains(&ModelSpec::Combined) {
        Some(fit(&ModelSpec::Combined, 0)?)
    } else {
        None
    };
    let test_dummies = test.with_subgroup_dummies();

    let tasks: Vec<(usize, &ModelSpec)> = (0..train.subgroup_count())
        .flat_map(|s| suite.entries().iter().map(move |m| (s, m)))
        .collect();
    let fits = tasks
        .into_par_iter()
        .map(|(s, model)| -> Result<ModelFit> {
            let (coefficients, test_x) = match model {
                ModelSpec::Combined => (combined.clone().expect("combined model fitted"), &test_dummies),
                _ => (fit(model, s)?, test),
            };
            let risk = predict_risk(&coefficients, test_x.covariates())?;
            let rows = test.subgroup_rows(s);
            let times: Vec<f64> = rows.iter().map(|&i| test.times()[i]).collect();
            let events: Vec<bool> = rows.iter().map(|&i| test.events()[i]).collect();
            let scores: Vec<f64> = rows.iter().map(|&i| risk.0[i]).collect();
            let c_index = match concordance_index(&times, &events, &scores) {
                Ok(c) => Some(c),
                Err(Error::UndefinedConcordance) => None,
                Err(Error::InvalidInput(_)) if rows.len() < 2 => None,
                Err(e) => return Err(e),
            };
            let CoxCoefficients { beta, lambda } = coefficients;
            Ok(ModelFit {
                model: model.to_string(),
                subgroup: s,
                lambda,
                coefficients: beta[..p].to_vec(),
                dummy_coefficients: beta[p..].to_vec(),
                c_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RepetitionResult {
        index: 0,
        seed,
        fits,
        group_auc: aucs,
    })
}

/// Where each repetition's training and test data come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Fresh training and test sets of the same design per repetition.
    Simulated(SimulationScenario),
    /// Stratified subsampling of a fixed data set.
    Dataset { data: SurvivalDataset, proportion: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub source: DataSource,
    pub repetitions: usize,
    pub master_seed: u64,
    pub suite: ModelSuite,
    pub settings: FitSettings,
}

/// A repetition that failed and was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionFailure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub results: Vec<RepetitionResult>,
    pub failures: Vec<RepetitionFailure>,
    pub report: ExperimentReport,
}

/// Seed of repetition `r`.
pub fn repetition_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, "repetition", &[r as u64])
}

fn repetition_data(source: &DataSource, seed: u64) -> Result<(SurvivalDataset, SurvivalDataset)> {
    match source {
        DataSource::Simulated(scenario) => Ok((
            generate_scenario(&scenario.with_seed(derive_seed(seed, "train", &[])))?,
            generate_scenario(&scenario.with_seed(derive_seed(seed, "test", &[])))?,
        )),
        DataSource::Dataset { data, proportion } => {
            let (train, test) = stratified_subsample(data, *proportion, derive_seed(seed, "split", &[]))?;
            Ok((data.subset(&train), data.subset(&test)))
        }
    }
}

/// Runs all repetitions (in parallel) and aggregates the successful ones.
/// Fails when more than a fifth of the repetitions fail.
pub fn run_experiment(spec: &ExperimentSpec, registry: &ClassifierRegistry) -> Result<ExperimentOutcome> {
    if spec.repetitions == 0 {
        return Err(Error::InvalidInput("at least one repetition is required".into()));
    }
    for name in spec.suite.classifiers() {
        if !registry.contains(name) {
            return Err(Error::UnknownClassifier(name.to_string()));
        }
    }
    let (feature_names, subgroup_labels) = match &spec.source {
        DataSource::Simulated(scenario) => {
            scenario.validate()?;
            let probe = generate_scenario(&SimulationScenario {
                n_per_subgroup: 2,
                ..scenario.clone()
            })?;
            (probe.feature_names().to_vec(), probe.subgroup_labels().to_vec())
        }
        DataSource::Dataset { data, .. } => (data.feature_names().to_vec(), data.subgroup_labels().to_vec()),
    };
    let outcomes: Vec<std::result::Result<RepetitionResult, RepetitionFailure>> = (0..spec.repetitions)
        .into_par_iter()
        .map(|r| {
            let seed = repetition_seed(spec.master_seed, r);
            repetition_data(&spec.source, seed)
                .and_then(|(train, test)| run_repetition(&train, &test, &spec.suite, &spec.settings, registry, seed))
                .map(|mut res| {
                    res.index = r;
                    res
                })
                .map_err(|e| {
                    log::warn!("repetition {r} (seed {seed}) failed: {e}");
                    RepetitionFailure {
                        index: r,
                        seed,
                        message: e.to_string(),
                    }
                })
        })
        .collect();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    if failures.len() * 5 > spec.repetitions {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: spec.repetitions,
        });
    }
    let report = aggregate(&results, &spec.suite, &feature_names, &subgroup_labels)?;
    Ok(ExperimentOutcome {
        results,
        failures,
        report,
    })
}
