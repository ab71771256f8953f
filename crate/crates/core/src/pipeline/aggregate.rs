//! Summaries across repetitions: mean C-index, inclusion frequencies and
//! mean coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ModelSuite, RepetitionResult};

/// Mean over the defined C-index values, with the number of defined and
/// undefined ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CIndexSummary {
    pub mean: Option<f64>,
    pub defined: usize,
    pub undefined: usize,
}

impl CIndexSummary {
    fn from_values<'a>(values: impl Iterator<Item = &'a Option<f64>>) -> Self {
        let (mut sum, mut defined, mut undefined) = (0.0, 0, 0);
        for v in values {
            match v {
                Some(c) => {
                    sum += c;
                    defined += 1;
                }
                None => undefined += 1,
            }
        }
        Self {
            mean: (defined > 0).then(|| sum / defined as f64),
            defined,
            undefined,
        }
    }
}

/// One model for one target subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub subgroup: String,
    pub c_index: CIndexSummary,
    pub mean_lambda: f64,
    /// Fraction of repetitions with a non-zero coefficient, per covariate.
    pub mif: Vec<f64>,
    /// Mean coefficient per covariate, zeros included.
    pub mean_coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallSummary {
    pub model: String,
    /// Pooled over repetitions and subgroups.
    pub c_index: CIndexSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub repetitions: usize,
    pub models: Vec<String>,
    pub subgroups: Vec<String>,
    pub features: Vec<String>,
    /// Model-major, subgroups ascending within a model.
    pub summaries: Vec<ModelSummary>,
    pub overall: Vec<OverallSummary>,
    /// Mean group AUC per classifier.
    pub group_auc: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn summary(&self, model: &str, subgroup: &str) -> Option<&ModelSummary> {
        self.summaries
            .iter()
            .find(|s| s.model == model && s.subgroup == subgroup)
    }

    pub fn overall(&self, model: &str) -> Option<&OverallSummary> {
        self.overall.iter().find(|s| s.model == model)
    }
}

pub fn aggregate(
    results: &[RepetitionResult],
    suite: &ModelSuite,
    feature_names: &[String],
    subgroup_labels: &[String],
) -> Result<ExperimentReport> {
    if results.is_empty() {
        return Err(Error::InvalidInput("nothing to aggregate".into()));
    }
    let p = feature_names.len();
    let models: Vec<String> = suite.entries().iter().map(|m| m.to_string()).collect();
    let mut summaries = Vec::new();
    let mut overall = Vec::new();
    for model in &models {
        let mut pooled = Vec::new();
        for (s, label) in subgroup_labels.iter().enumerate() {
            let fits: Vec<_> = results
                .iter()
                .flat_map(|r| &r.fits)
                .filter(|f| &f.model == model && f.subgroup == s)
                .collect();
            if fits.is_empty() {
                continue;
            }
            if let Some(f) = fits.iter().find(|f| f.coefficients.len() != p) {
                return Err(Error::Dimension(format!(
                    "{} coefficients for {p} features in model {model}",
                    f.coefficients.len()
                )));
            }
            let r = fits.len() as f64;
            let mut mif = vec![0.0; p];
            let mut mean = vec![0.0; p];
            for f in &fits {
                for (j, &b) in f.coefficients.iter().enumerate() {
                    mif[j] += f64::from(u8::from(b != 0.0));
                    mean[j] += b;
                }
            }
            mif.iter_mut().for_each(|v| *v /= r);
            mean.iter_mut().for_each(|v| *v /= r);
            pooled.extend(fits.iter().map(|f| f.c_index));
            summaries.push(ModelSummary {
                model: model.clone(),
                subgroup: label.clone(),
                c_index: CIndexSummary::from_values(fits.iter().map(|f| &f.c_index)),
                mean_lambda: fits.iter().map(|f| f.lambda).sum::<f64>() / r,
                mif,
                mean_coefficients: mean,
            });
        }
        overall.push(OverallSummary {
            model: model.clone(),
            c_index: CIndexSummary::from_values(pooled.iter()),
        });
    }
    let mut auc_sum: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in results {
        for (name, &a) in &r.group_auc {
            let e = auc_sum.entry(name.clone()).or_default();
            e.0 += a;
            e.1 += 1;
        }
    }
    Ok(ExperimentReport {
        repetitions: results.len(),
        models,
        subgroups: subgroup_labels.to_vec(),
        features: feature_names.to_vec(),
        summaries,
        overall,
        group_auc: auc_sum.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
    })
}
