//! Synthetic subgroup survival data: four subgroups (1A, 1B, 2A, 2B) drawn
//! from two latent groups with Weibull outcomes, Gaussian gene expression and
//! random censoring.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::folds::{derive_seed, rng_from_seed};
use crate::survival::{weibull_from_survival_points, SurvivalDataset, WeibullParams};

/// Number of prognostic genes at the start of every effect vector.
pub const PROGNOSTIC_GENES: usize = 12;

const BETA1: [f64; PROGNOSTIC_GENES] = [1.0, 1.0, 0.0, 0.0, -0.5, 0.5, 0.75, 0.25, -1.0, -1.0, -0.75, -0.25];
const BETA2: [f64; PROGNOSTIC_GENES] = [0.0, 0.0, 1.0, 1.0, 0.5, -0.5, 0.25, 0.75, -1.0, -1.0, -0.75, -0.25];

/// True effects of both groups, padded with zeros to length `p`.
pub fn effect_vectors(p: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if p < PROGNOSTIC_GENES {
        return Err(Error::InvalidInput(format!(
            "p = {p}, but the {PROGNOSTIC_GENES} prognostic genes need p >= {PROGNOSTIC_GENES}"
        )));
    }
    let pad = |b: &[f64]| {
        let mut v = b.to_vec();
        v.resize(p, 0.0);
        v
    };
    Ok((pad(&BETA1), pad(&BETA2)))
}

/// Expression means: `4 + 4 eps` for strong effects (|beta| = 1), `4 + 2 eps`
/// for moderate ones (0.5, 0.75) and 4 otherwise (0, 0.25).
pub fn mean_vector(epsilon: f64, beta: &[f64]) -> Result<Vec<f64>> {
    check_epsilon(epsilon)?;
    beta.iter()
        .map(|&b| {
            let a = b.abs();
            if a == 1.0 {
                Ok(4.0 + 4.0 * epsilon)
            } else if a == 0.5 || a == 0.75 {
                Ok(4.0 + 2.0 * epsilon)
            } else if a == 0.0 || a == 0.25 {
                Ok(4.0)
            } else {
                Err(Error::InvalidInput(format!("effect {b} has no expression-mean rule")))
            }
        })
        .collect()
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..=1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("epsilon {epsilon} outside [0, 1]")))
    }
}

/// `n x p` independent normals with column means `mu` and unit variance.
pub fn simulate_covariates(n: usize, mu: &[f64], seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    Array2::from_shape_fn((n, mu.len()), |(_, j)| mu[j] + rng.sample::<f64, _>(StandardNormal))
}

/// Weibull event and censoring times from the same mechanism, including the
/// linear predictor; returns observed times and event indicators.
pub fn simulate_survival(
    x: &Array2<f64>,
    beta: &[f64],
    weibull: &WeibullParams,
    seed: u64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if x.ncols() != beta.len() {
        return Err(Error::Dimension(format!(
            "{} covariate columns for {} effects",
            x.ncols(),
            beta.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut times = Vec::with_capacity(x.nrows());
    let mut events = Vec::with_capacity(x.nrows());
    for row in x.rows() {
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let t = weibull.inverse_survival(rng.sample(Open01), eta);
        let c = weibull.inverse_survival(rng.sample(Open01), eta);
        if !(t > 0.0 && t.is_finite() && c > 0.0 && c.is_finite()) {
            return Err(Error::NonFinite(format!("simulated time (linear predictor {eta})")));
        }
        times.push(t.min(c));
        events.push(t <= c);
    }
    Ok((times, events))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub weibull: WeibullParams,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationScenario {
    pub n_per_subgroup: usize,
    pub p: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub groups: [GroupParams; 2],
}

/// Group Weibull laws fitted to 3- and 5-year survival of 0.57/0.42 (group 1)
/// and 0.75/0.62 (group 2).
pub fn default_weibull() -> Result<[WeibullParams; 2]> {
    Ok([
        weibull_from_survival_points(3.0, 0.57, 5.0, 0.42)?,
        weibull_from_survival_points(3.0, 0.75, 5.0, 0.62)?,
    ])
}

impl SimulationScenario {
    /// Scenario with the default effects, means and Weibull laws.
    pub fn new(n_per_subgroup: usize, p: usize, epsilon: f64, seed: u64) -> Result<Self> {
        let (b1, b2) = effect_vectors(p)?;
        let [w1, w2] = default_weibull()?;
        let scenario = Self {
            n_per_subgroup,
            p,
            epsilon,
            seed,
            groups: [
                GroupParams {
                    weibull: w1,
                    mu: mean_vector(epsilon, &b1)?,
                    beta: b1,
                },
                GroupParams {
                    weibull: w2,
                    mu: mean_vector(epsilon, &b2)?,
                    beta: b2,
                },
            ],
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_per_subgroup < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 patients per subgroup, got {}",
                self.n_per_subgroup
            )));
        }
        if self.p < PROGNOSTIC_GENES {
            return Err(Error::InvalidInput(format!(
                "p = {} is below {PROGNOSTIC_GENES}",
                self.p
            )));
        }
        check_epsilon(self.epsilon)?;
        for (g, params) in self.groups.iter().enumerate() {
            if params.beta.len() != self.p || params.mu.len() != self.p {
                return Err(Error::Dimension(format!(
                    "group {} parameters do not have length {}",
                    g + 1,
                    self.p
                )));
            }
            if params.beta[PROGNOSTIC_GENES..].iter().any(|&b| b != 0.0) {
                return Err(Error::InvalidInput(format!(
                    "group {} has effects beyond the first {PROGNOSTIC_GENES} genes",
                    g + 1
                )));
            }
        }
        Ok(())
    }
}

pub const SUBGROUP_LABELS: [&str; 4] = ["1A", "1B", "2A", "2B"];

/// Rows ordered by subgroup 1A, 1B, 2A, 2B; ids `1..=4n`, genes `gene1..`.
pub fn generate_scenario(scenario: &SimulationScenario) -> Result<SurvivalDataset> {
    scenario.validate()?;
    let n = scenario.n_per_subgroup;
    let p = scenario.p;
    let mut x = Array2::zeros((4 * n, p));
    let mut times = Vec::with_capacity(4 * n);
    let mut events = Vec::with_capacity(4 * n);
    let mut subgroups = Vec::with_capacity(4 * n);
    for s in 0..4 {
        let group = &scenario.groups[s / 2];
        let xs = simulate_covariates(n, &group.mu, derive_seed(scenario.seed, "covariates", &[s as u64]));
        let (t, d) = simulate_survival(
            &xs,
            &group.beta,
            &group.weibull,
            derive_seed(scenario.seed, "survival", &[s as u64]),
        )?;
        x.slice_mut(ndarray::s![s * n..(s + 1) * n, ..]).assign(&xs);
        times.extend(t);
        events.extend(d);
        subgroups.extend(std::iter::repeat_n(s, n));
    }
    SurvivalDataset::new(
        (1..=4 * n).map(|i| i.to_string()).collect(),
        times,
        events,
        subgroups,
        SUBGROUP_LABELS.iter().map(|s| s.to_string()).collect(),
        x,
        (1..=p).map(|j| format!("gene{j}")).collect(),
    )
}
