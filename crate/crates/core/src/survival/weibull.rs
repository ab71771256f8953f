use crate::error::{Error, Result};

/// Weibull survival `S(t) = exp(-scale * t^shape)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WeibullParams {
    scale: f64,
    shape: f64,
}

impl WeibullParams {
    pub fn new(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && shape.is_finite() && shape > 0.0) {
            return Err(Error::Domain(format!(
                "Weibull parameters must be positive (scale {scale}, shape {shape})"
            )));
        }
        Ok(Self { scale, shape })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.scale * t.powf(self.shape)).exp()
    }

    /// Inverse-transform draw of an event time for uniform `u` in (0, 1] and
    /// linear predictor `eta`: `(-ln u / (scale * exp(eta)))^(1/shape)`.
    pub fn inverse_survival(&self, u: f64, eta: f64) -> f64 {
        (-u.ln() / (self.scale * eta.exp())).powf(1.0 / self.shape)
    }
}

/// Weibull parameters whose survival curve passes through `(t1, s1)` and `(t2, s2)`.
pub fn weibull_from_survival_points(t1: f64, s1: f64, t2: f64, s2: f64) -> Result<WeibullParams> {
    if !(0.0 < t1 && t1 < t2 && t2.is_finite()) {
        return Err(Error::Domain(format!("need 0 < t1 < t2, got t1 = {t1}, t2 = {t2}")));
    }
    if !(0.0 < s2 && s2 < s1 && s1 < 1.0) {
        return Err(Error::Domain(format!("need 0 < s2 < s1 < 1, got s1 = {s1}, s2 = {s2}")));
    }
    let shape = (s2.ln() / s1.ln()).ln() / (t2 / t1).ln();
    let scale = -s1.ln() / t1.powf(shape);
    WeibullParams::new(scale, shape)
}
