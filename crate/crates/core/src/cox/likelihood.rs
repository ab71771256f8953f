//! Weighted Breslow partial likelihood and its derivatives with respect to the
//! linear predictor.

use crate::error::{Error, Result};
use crate::survival::SurvivalDataset;

use super::ObservationWeights;

/// Rows sorted by observed time with tie groups, reused across evaluations.
#[derive(Debug, Clone)]
pub(crate) struct RiskSetIndex {
    pub order: Vec<usize>,
    /// `(start, end)` positions in `order` of each tie group, ascending in time.
    pub groups: Vec<(usize, usize)>,
}

/// Pieces of the negated Hessian in coefficient space,
/// `sum_k row_k x_k x_k' - sum_g group_g s_g s_g'` with
/// `s_g = sum_{k in R_g} risks_k x_k` over the risk set of tie group `g`.
#[derive(Debug, Clone)]
pub(crate) struct HessianTerms {
    pub row: Vec<f64>,
    pub risks: Vec<f64>,
    pub group: Vec<f64>,
}

/// Log-likelihood plus derivatives with respect to each `eta_k`.
#[derive(Debug, Clone)]
pub(crate) struct EtaDerivatives {
    pub loglik: f64,
    pub grad: Vec<f64>,
}

impl RiskSetIndex {
    pub fn new(times: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let mut groups = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let t = times[order[start]];
            let mut end = start + 1;
            while end < order.len() && times[order[end]] == t {
                end += 1;
            }
            groups.push((start, end));
            start = end;
        }
        Self { order, groups }
    }

    /// `w_k exp(eta_k - shift)` with the shift taken over positive-weight rows;
    /// zero-weight rows contribute exactly zero whatever their predictor.
    fn scaled_risks(w: &[f64], eta: &[f64]) -> (Vec<f64>, f64) {
        let shift = eta
            .iter()
            .zip(w)
            .filter(|(_, &wk)| wk > 0.0)
            .map(|(&e, _)| e)
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        let risks = eta
            .iter()
            .zip(w)
            .map(|(&e, &wk)| if wk > 0.0 { wk * (e - shift).exp() } else { 0.0 })
            .collect();
        (risks, shift)
    }

    /// Risk-set denominators per tie group (scaled by `exp(-shift)`).
    fn denominators(&self, risks: &[f64]) -> Vec<f64> {
        let mut dens = vec![0.0; self.groups.len()];
        let mut acc = 0.0;
        for (g, &(start, end)) in self.groups.iter().enumerate().rev() {
            for &k in &self.order[start..end] {
                acc += risks[k];
            }
            dens[g] = acc;
        }
        dens
    }

    pub fn loglik(&self, events: &[bool], w: &[f64], eta: &[f64]) -> f64 {
        let (risks, shift) = Self::scaled_risks(w, eta);
        let dens = self.denominators(&risks);
        let mut ll = 0.0;
        for (g, &(start, end)) in self.groups.iter().enumerate() {
            let log_den = dens[g].ln();
            for &i in &self.order[start..end] {
                if events[i] && w[i] > 0.0 {
                    ll += w[i] * (eta[i] - shift - log_den);
                }
            }
        }
        ll
    }

    pub fn derivatives(&self, events: &[bool], w: &[f64], eta: &[f64]) -> EtaDerivatives {
        let n = eta.len();
        let (risks, shift) = Self::scaled_risks(w, eta);
        let dens = self.denominators(&risks);
        let mut grad = vec![0.0; n];
        let mut ll = 0.0;
        let mut a = 0.0;
        for (g, &(start, end)) in self.groups.iter().enumerate() {
            let den = dens[g];
            let log_den = den.ln();
            for &i in &self.order[start..end] {
                if events[i] && w[i] > 0.0 {
                    ll += w[i] * (eta[i] - shift - log_den);
                    a += w[i] / den;
                }
            }
            for &k in &self.order[start..end] {
                let r = risks[k];
                let ev = if events[k] { w[k] } else { 0.0 };
                grad[k] = ev - r * a;
            }
        }
        EtaDerivatives { loglik: ll, grad }
    }

    pub fn hessian_terms(&self, events: &[bool], w: &[f64], eta: &[f64]) -> HessianTerms {
        let (risks, _) = Self::scaled_risks(w, eta);
        let dens = self.denominators(&risks);
        let mut row = vec![0.0; eta.len()];
        let mut group = vec![0.0; self.groups.len()];
        let mut a = 0.0;
        for (g, &(start, end)) in self.groups.iter().enumerate() {
            let mass: f64 = self.order[start..end]
                .iter()
                .filter(|&&i| events[i] && w[i] > 0.0)
                .map(|&i| w[i])
                .sum();
            a += mass / dens[g];
            group[g] = mass / (dens[g] * dens[g]);
            for &k in &self.order[start..end] {
                row[k] = risks[k] * a;
            }
        }
        HessianTerms { row, risks, group }
    }
}

pub(crate) fn check_weighted_events(events: &[bool], w: &[f64]) -> Result<()> {
    if events.iter().zip(w).any(|(&e, &wi)| e && wi > 0.0) {
        Ok(())
    } else {
        Err(Error::NoEvents("no event carries positive weight".into()))
    }
}

pub(crate) fn linear_predictor(data: &SurvivalDataset, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != data.n_features() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            data.n_features()
        )));
    }
    let x = data.covariates();
    Ok(x.rows()
        .into_iter()
        .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect())
}

fn check_lengths(data: &SurvivalDataset, weights: &ObservationWeights) -> Result<()> {
    if weights.len() != data.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} observations",
            weights.len(),
            data.len()
        )));
    }
    Ok(())
}

/// Weighted partial log-likelihood
/// `sum_i d_i w_i (eta_i - ln sum_{k: t_k >= t_i} w_k exp(eta_k))`.
pub fn weighted_cox_loglik(data: &SurvivalDataset, weights: &ObservationWeights, beta: &[f64]) -> Result<f64> {
    check_lengths(data, weights)?;
    check_weighted_events(data.events(), weights.as_slice())?;
    let eta = linear_predictor(data, beta)?;
    let ll = RiskSetIndex::new(data.times()).loglik(data.events(), weights.as_slice(), &eta);
    if ll.is_finite() {
        Ok(ll)
    } else {
        Err(Error::NonFinite("weighted partial log-likelihood".into()))
    }
}

/// Gradient of [`weighted_cox_loglik`] with respect to the coefficients.
pub fn weighted_cox_gradient(data: &SurvivalDataset, weights: &ObservationWeights, beta: &[f64]) -> Result<Vec<f64>> {
    check_lengths(data, weights)?;
    check_weighted_events(data.events(), weights.as_slice())?;
    let eta = linear_predictor(data, beta)?;
    let d = RiskSetIndex::new(data.times()).derivatives(data.events(), weights.as_slice(), &eta);
    let x = data.covariates();
    let grad: Vec<f64> = x
        .columns()
        .into_iter()
        .map(|col| col.iter().zip(&d.grad).map(|(a, g)| a * g).sum())
        .collect();
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(Error::NonFinite("partial likelihood gradient".into()))
    }
}
