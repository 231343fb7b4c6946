use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::EdlError;

/// Dirichlet concentration vector with the derived quantities used for
/// decisions: expected probabilities and the two uncertainty measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPrediction {
    pub alpha: Vec<f64>,
}

impl DirichletPrediction {
    pub fn new(alpha: Vec<f64>) -> Result<Self, EdlError> {
        if let Some(&a) = alpha.iter().find(|a| !(**a > 0.0)) {
            return Err(EdlError::NonPositiveAlpha(a));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(EdlError::NonFinite("alpha"));
        }
        Ok(DirichletPrediction { alpha })
    }

    pub fn classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn strength(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let s = self.strength();
        self.alpha.iter().map(|a| a / s).collect()
    }

    /// Index of the most probable class; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, a) in self.alpha.iter().enumerate() {
            if *a > self.alpha[best] {
                best = i;
            }
        }
        best
    }

    /// Negative largest expected probability, in `[-1, -1/C]`.
    pub fn u_alea(&self) -> f64 {
        let s = self.strength();
        -self.alpha.iter().cloned().fold(f64::MIN, f64::max) / s
    }

    /// `C / S`, in `(0, 1]`.
    pub fn u_epis(&self) -> f64 {
        self.classes() as f64 / self.strength()
    }
}

/// `alpha = ReLU(raw) + 1`.
pub fn dirichlet_from_raw(raw: &[f64]) -> Result<DirichletPrediction, EdlError> {
    if raw.iter().any(|r| !r.is_finite()) {
        return Err(EdlError::NonFinite("raw output"));
    }
    Ok(DirichletPrediction { alpha: raw.iter().map(|r| r.max(0.0) + 1.0).collect() })
}

/// `(u_alea, u_epis)`.
pub fn uncertainties(pred: &DirichletPrediction) -> (f64, f64) {
    (pred.u_alea(), pred.u_epis())
}

/// KL divergence from `Dir(alpha)` to the uniform Dirichlet of the same size.
pub fn kl_to_uniform(alpha: &[f64]) -> Result<f64, EdlError> {
    if let Some(&a) = alpha.iter().find(|a| !(**a > 0.0)) {
        return Err(EdlError::NonPositiveAlpha(a));
    }
    Ok(kl_unchecked(alpha))
}

pub(crate) fn kl_unchecked(alpha: &[f64]) -> f64 {
    if alpha.iter().all(|a| *a == 1.0) {
        return 0.0;
    }
    let c = alpha.len() as f64;
    let s: f64 = alpha.iter().sum();
    let dg_s = digamma(s);
    let mut kl = ln_gamma(s) - ln_gamma(c);
    for &a in alpha {
        kl += -ln_gamma(a) + (a - 1.0) * (digamma(a) - dg_s);
    }
    // Rounding can leave a tiny negative residue near the uniform point.
    kl.max(0.0)
}
