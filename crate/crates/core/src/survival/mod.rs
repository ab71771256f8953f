//! Survival data types and model-agnostic evaluation utilities.

mod concordance;
mod kaplan_meier;
mod weibull;

pub use concordance::concordance_index;
pub use kaplan_meier::{kaplan_meier, KaplanMeier};
pub use weibull::{weibull_from_survival_points, WeibullParams};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// One patient record: observed time, event indicator, subgroup and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalObservation {
    pub time: f64,
    pub event: bool,
    /// Zero-based subgroup index.
    pub subgroup: usize,
    pub covariates: Vec<f64>,
}

/// Column-oriented survival data set.
///
/// Subgroups are stored as zero-based indices into `subgroup_labels`; the
/// external label order is the order of first appearance when read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    ids: Vec<String>,
    times: Vec<f64>,
    events: Vec<bool>,
    subgroups: Vec<usize>,
    subgroup_labels: Vec<String>,
    covariates: Array2<f64>,
    feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(
        ids: Vec<String>,
        times: Vec<f64>,
        events: Vec<bool>,
        subgroups: Vec<usize>,
        subgroup_labels: Vec<String>,
        covariates: Array2<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = times.len();
        if events.len() != n || subgroups.len() != n || ids.len() != n || covariates.nrows() != n {
            return Err(Error::Dimension(format!(
                "{} times, {} events, {} subgroups, {} ids, {} covariate rows",
                n,
                events.len(),
                subgroups.len(),
                ids.len(),
                covariates.nrows()
            )));
        }
        if feature_names.len() != covariates.ncols() {
            return Err(Error::Dimension(format!(
                "{} feature names for {} covariate columns",
                feature_names.len(),
                covariates.ncols()
            )));
        }
        if subgroup_labels.is_empty() {
            return Err(Error::InvalidInput("at least one subgroup is required".into()));
        }
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "observation {i}: time {t} is not positive"
            )));
        }
        if let Some((i, s)) = subgroups.iter().enumerate().find(|(_, s)| **s >= subgroup_labels.len()) {
            return Err(Error::InvalidInput(format!(
                "observation {i}: subgroup index {s} out of range"
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates".into()));
        }
        Ok(Self {
            ids,
            times,
            events,
            subgroups,
            subgroup_labels,
            covariates,
            feature_names,
        })
    }

    /// Builds a data set from row records; ids are `1..=n` and features `x1..xp`.
    pub fn from_observations(observations: &[SurvivalObservation], subgroup_count: usize) -> Result<Self> {
        let p = observations.first().map_or(0, |o| o.covariates.len());
        if let Some(o) = observations.iter().find(|o| o.covariates.len() != p) {
            return Err(Error::Dimension(format!(
                "observation has {} covariates, expected {p}",
                o.covariates.len()
            )));
        }
        let n = observations.len();
        let flat: Vec<f64> = observations.iter().flat_map(|o| o.covariates.iter().copied()).collect();
        let covariates = Array2::from_shape_vec((n, p), flat).map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(
            (1..=n).map(|i| i.to_string()).collect(),
            observations.iter().map(|o| o.time).collect(),
            observations.iter().map(|o| o.event).collect(),
            observations.iter().map(|o| o.subgroup).collect(),
            (1..=subgroup_count).map(|s| s.to_string()).collect(),
            covariates,
            (1..=p).map(|j| format!("x{j}")).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn subgroup_count(&self) -> usize {
        self.subgroup_labels.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn subgroups(&self) -> &[usize] {
        &self.subgroups
    }

    pub fn subgroup_labels(&self) -> &[String] {
        &self.subgroup_labels
    }

    pub fn subgroup_index(&self, label: &str) -> Option<usize> {
        self.subgroup_labels.iter().position(|l| l == label)
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn observation(&self, i: usize) -> SurvivalObservation {
        SurvivalObservation {
            time: self.times[i],
            event: self.events[i],
            subgroup: self.subgroups[i],
            covariates: self.covariates.row(i).to_vec(),
        }
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn subgroup_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.subgroup_count()];
        for &s in &self.subgroups {
            sizes[s] += 1;
        }
        sizes
    }

    /// Rows `indices` in the given order; subgroup labels are kept even if a
    /// subgroup becomes empty.
    pub fn subset(&self, indices: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            times: indices.iter().map(|&i| self.times[i]).collect(),
            events: indices.iter().map(|&i| self.events[i]).collect(),
            subgroups: indices.iter().map(|&i| self.subgroups[i]).collect(),
            subgroup_labels: self.subgroup_labels.clone(),
            covariates: self.covariates.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Rows belonging to subgroup `s`.
    pub fn subgroup_rows(&self, s: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.subgroups[i] == s).collect()
    }

    /// Copy with `S - 1` indicator columns appended, the first subgroup being
    /// the reference level.
    pub fn with_subgroup_dummies(&self) -> SurvivalDataset {
        let s_count = self.subgroup_count();
        let n = self.len();
        let p = self.n_features();
        let mut x = Array2::zeros((n, p + s_count.saturating_sub(1)));
        x.slice_mut(ndarray::s![.., ..p]).assign(&self.covariates);
        for (i, &s) in self.subgroups.iter().enumerate() {
            if s > 0 {
                x[[i, p + s - 1]] = 1.0;
            }
        }
        let mut names = self.feature_names.clone();
        names.extend(self.subgroup_labels.iter().skip(1).map(|l| format!("subgroup[{l}]")));
        SurvivalDataset {
            covariates: x,
            feature_names: names,
            ..self.clone()
        }
    }

    /// Copy with covariates replaced (same row count required).
    pub fn with_covariates(&self, covariates: Array2<f64>, feature_names: Vec<String>) -> Result<SurvivalDataset> {
        SurvivalDataset::new(
            self.ids.clone(),
            self.times.clone(),
            self.events.clone(),
            self.subgroups.clone(),
            self.subgroup_labels.clone(),
            covariates,
            feature_names,
        )
    }

    /// Concatenates two data sets sharing labels and feature schema.
    pub fn concat(&self, other: &SurvivalDataset) -> Result<SurvivalDataset> {
        if self.subgroup_labels != other.subgroup_labels || self.feature_names != other.feature_names {
            return Err(Error::InvalidInput("data sets do not share a schema".into()));
        }
        let covariates = ndarray::concatenate(Axis(0), &[self.covariates.view(), other.covariates.view()])
            .map_err(|e| Error::Dimension(e.to_string()))?;
        let cat = |a: &[String], b: &[String]| a.iter().chain(b).cloned().collect::<Vec<_>>();
        SurvivalDataset::new(
            cat(&self.ids, &other.ids),
            [self.times.as_slice(), &other.times].concat(),
            [self.events.as_slice(), &other.events].concat(),
            [self.subgroups.as_slice(), &other.subgroups].concat(),
            self.subgroup_labels.clone(),
            covariates,
            self.feature_names.clone(),
        )
    }
}

/// Linear risk scores `x'beta`, one per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskScoreVector(pub Vec<f64>);

impl RiskScoreVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
