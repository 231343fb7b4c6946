use serde::{Deserialize, Serialize};

use super::dirichlet::kl_unchecked;
use super::model::EvidentialModel;
use super::special::trigamma;
use super::EdlError;

/// Form of the per-class data term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// `(y - p)^2 + p(1 - p)/(S + 1)`.
    #[default]
    Squared,
    /// `(y - p) + p(1 - p)/(S + 1)`, kept for inspection.
    Literal,
}

/// Which concentration the KL regularizer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlTarget {
    /// KL of the full `alpha`.
    #[default]
    Full,
    /// KL of `y + (1 - y) * alpha`, which removes the evidence of the true class.
    Misleading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LossConfig {
    #[serde(default)]
    pub variant: LossVariant,
    #[serde(default)]
    pub kl_target: KlTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// One-hot label.
    pub label: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data_term: f64,
    pub kl_term: f64,
    /// `min(1, t)`.
    pub lambda: f64,
    pub total: f64,
    pub samples: usize,
}

/// Annealing coefficient `min(1, t)`.
pub fn annealing(t: f64) -> f64 {
    t.min(1.0)
}

fn check_batch(batch: &[Sample], model: &EvidentialModel) -> Result<(), EdlError> {
    if batch.is_empty() {
        return Err(EdlError::EmptyBatch);
    }
    for s in batch {
        model.check_input(&s.features)?;
        if s.label.len() != model.classes {
            return Err(EdlError::DimensionMismatch { expected: model.classes, got: s.label.len() });
        }
        let ones = s.label.iter().filter(|v| **v == 1.0).count();
        if ones != 1 || s.label.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(EdlError::NotOneHot(s.label.clone()));
        }
    }
    Ok(())
}

fn kl_alpha(alpha: &[f64], y: &[f64], target: KlTarget) -> Vec<f64> {
    match target {
        KlTarget::Full => alpha.to_vec(),
        KlTarget::Misleading => alpha.iter().zip(y).map(|(a, y)| y + (1.0 - y) * a).collect(),
    }
}

fn data_term(alpha: &[f64], y: &[f64], variant: LossVariant) -> f64 {
    let s: f64 = alpha.iter().sum();
    alpha
        .iter()
        .zip(y)
        .map(|(a, y)| {
            let p = a / s;
            let resid = match variant {
                LossVariant::Squared => (y - p) * (y - p),
                LossVariant::Literal => y - p,
            };
            resid + p * (1.0 - p) / (s + 1.0)
        })
        .sum()
}

/// Evidential loss of a batch at annealing time `t`.
pub fn edl_loss(batch: &[Sample], model: &EvidentialModel, t: f64, cfg: LossConfig) -> Result<LossBreakdown, EdlError> {
    check_batch(batch, model)?;
    let lambda = annealing(t);
    let mut data = 0.0;
    let mut kl = 0.0;
    for s in batch {
        let alpha: Vec<f64> = model.forward_cached(&s.features).raw.iter().map(|r| r.max(0.0) + 1.0).collect();
        data += data_term(&alpha, &s.label, cfg.variant);
        kl += kl_unchecked(&kl_alpha(&alpha, &s.label, cfg.kl_target));
    }
    Ok(LossBreakdown { data_term: data, kl_term: kl, lambda, total: data + lambda * kl, samples: batch.len() })
}

/// Derivative of the data term with respect to each `alpha_k`.
fn data_grad_alpha(alpha: &[f64], y: &[f64], variant: LossVariant) -> Vec<f64> {
    let s: f64 = alpha.iter().sum();
    let p: Vec<f64> = alpha.iter().map(|a| a / s).collect();
    let g: Vec<f64> = p
        .iter()
        .zip(y)
        .map(|(p, y)| {
            let resid = match variant {
                LossVariant::Squared => -2.0 * (y - p),
                LossVariant::Literal => -1.0,
            };
            resid + (1.0 - 2.0 * p) / (s + 1.0)
        })
        .collect();
    let explicit_s: f64 = -p.iter().map(|p| p * (1.0 - p)).sum::<f64>() / ((s + 1.0) * (s + 1.0));
    (0..alpha.len())
        .map(|k| {
            let through_p: f64 = (0..alpha.len())
                .map(|j| g[j] * (if j == k { 1.0 } else { 0.0 } - p[j]) / s)
                .sum();
            through_p + explicit_s
        })
        .collect()
}

/// Derivative of the KL-to-uniform term with respect to its argument.
fn kl_grad(alpha: &[f64]) -> Vec<f64> {
    let c = alpha.len() as f64;
    let s: f64 = alpha.iter().sum();
    let tg_s = trigamma(s);
    alpha.iter().map(|&a| (a - 1.0) * trigamma(a) - tg_s * (s - c)).collect()
}

/// Analytic gradient of [`edl_loss`]'s total with respect to the flat parameters.
pub fn loss_gradient(batch: &[Sample], model: &EvidentialModel, t: f64, cfg: LossConfig) -> Result<Vec<f64>, EdlError> {
    check_batch(batch, model)?;
    let lambda = annealing(t);
    let (w1, b1, w2, b2) = model.offsets();
    let (d, h, c) = (model.input_dim, model.hidden, model.classes);
    let mut grad = vec![0.0; model.params.len()];
    for s in batch {
        let fw = model.forward_cached(&s.features);
        let alpha: Vec<f64> = fw.raw.iter().map(|r| r.max(0.0) + 1.0).collect();
        let mut d_alpha = data_grad_alpha(&alpha, &s.label, cfg.variant);
        if lambda > 0.0 {
            let ka = kl_alpha(&alpha, &s.label, cfg.kl_target);
            let kg = kl_grad(&ka);
            for k in 0..c {
                let chain = match cfg.kl_target {
                    KlTarget::Full => 1.0,
                    KlTarget::Misleading => 1.0 - s.label[k],
                };
                d_alpha[k] += lambda * kg[k] * chain;
            }
        }
        // Through ReLU(raw) + 1.
        let d_raw: Vec<f64> = (0..c).map(|k| if fw.raw[k] > 0.0 { d_alpha[k] } else { 0.0 }).collect();
        let mut d_hidden = vec![0.0; h];
        for k in 0..c {
            grad[b2 + k] += d_raw[k];
            for j in 0..h {
                grad[w2 + k * h + j] += d_raw[k] * fw.hidden[j];
                d_hidden[j] += d_raw[k] * model.params[w2 + k * h + j];
            }
        }
        for j in 0..h {
            let dz = d_hidden[j] * (1.0 - fw.hidden[j] * fw.hidden[j]);
            grad[b1 + j] += dz;
            for i in 0..d {
                grad[w1 + j * d + i] += dz * s.features[i];
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Model whose raw outputs are exactly zero: alpha = (1, 1).
    fn flat_model() -> EvidentialModel {
        EvidentialModel::zeros(3, 4, 2)
    }

    fn sample(label: [f64; 2]) -> Sample {
        Sample { features: vec![0.3, -0.2, 0.9], label: label.to_vec() }
    }

    #[test]
    fn uniform_prediction_loss() {
        let b = edl_loss(&[sample([1.0, 0.0])], &flat_model(), 0.0, LossConfig::default()).unwrap();
        assert!((b.data_term - (0.5 + 2.0 * 0.25 / 3.0)).abs() < 1e-15);
        assert_eq!(b.kl_term, 0.0);
        let two = edl_loss(&[sample([1.0, 0.0]), sample([1.0, 0.0])], &flat_model(), 0.0, LossConfig::default()).unwrap();
        assert!((two.total - 2.0 * b.total).abs() < 1e-15);
    }

    #[test]
    fn annealing_clamps() {
        assert_eq!(annealing(5.0), 1.0);
        assert_eq!(annealing(0.3), 0.3);
        assert_eq!(annealing(1.0), 1.0);
    }

    #[test]
    fn symmetric_point_is_stationary() {
        let batch = [sample([1.0, 0.0]), sample([0.0, 1.0])];
        let g = loss_gradient(&batch, &flat_model(), 0.5, LossConfig::default()).unwrap();
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-8);
    }

    #[test]
    fn errors() {
        let m = flat_model();
        assert!(matches!(edl_loss(&[], &m, 0.0, LossConfig::default()), Err(EdlError::EmptyBatch)));
        let bad = Sample { features: vec![0.0; 2], label: vec![1.0, 0.0] };
        assert!(matches!(edl_loss(&[bad], &m, 0.0, LossConfig::default()), Err(EdlError::DimensionMismatch { .. })));
        let bad = Sample { features: vec![0.0; 3], label: vec![1.0, 1.0] };
        assert!(matches!(edl_loss(&[bad], &m, 0.0, LossConfig::default()), Err(EdlError::NotOneHot(_))));
    }

    #[test]
    fn literal_residual_sums_to_zero() {
        // Sum over classes of (y - p) vanishes for one-hot y, leaving only the variance part.
        let alpha = [3.0, 5.0];
        let lit = data_term(&alpha, &[1.0, 0.0], LossVariant::Literal);
        let var: f64 = alpha.iter().map(|a| (a / 8.0) * (1.0 - a / 8.0) / 9.0).sum();
        assert!((lit - var).abs() < 1e-15);
    }
}
