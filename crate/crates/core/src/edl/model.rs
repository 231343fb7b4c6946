use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dirichlet::{dirichlet_from_raw, DirichletPrediction};
use super::train::TrainingSchedule;
use super::EdlError;

pub const MODEL_VERSION: &str = "edl-v1";

/// One-hidden-layer tanh network producing `classes` raw evidence outputs.
/// Parameters are stored flat as `[W1 (hidden x input), b1, W2 (classes x hidden), b2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidentialModel {
    pub input_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    pub params: Vec<f64>,
}

pub(crate) struct Forward {
    pub hidden: Vec<f64>,
    pub raw: Vec<f64>,
}

impl EvidentialModel {
    pub fn param_count(input_dim: usize, hidden: usize, classes: usize) -> usize {
        hidden * input_dim + hidden + classes * hidden + classes
    }

    pub fn zeros(input_dim: usize, hidden: usize, classes: usize) -> Self {
        EvidentialModel { input_dim, hidden, classes, params: vec![0.0; Self::param_count(input_dim, hidden, classes)] }
    }

    /// Xavier-uniform weights, zero hidden biases and unit output biases so that
    /// every class starts outside the ReLU dead zone.
    pub fn init(input_dim: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(input_dim, hidden, classes);
        let (w1, _, w2, b2) = m.offsets();
        let a1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + classes) as f64).sqrt();
        for i in 0..hidden * input_dim {
            m.params[w1 + i] = rng.random_range(-a1..a1);
        }
        for i in 0..classes * hidden {
            m.params[w2 + i] = rng.random_range(-a2..a2);
        }
        for c in 0..classes {
            m.params[b2 + c] = 1.0;
        }
        m
    }

    pub(crate) fn offsets(&self) -> (usize, usize, usize, usize) {
        let w1 = 0;
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        (w1, b1, w2, b2)
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), EdlError> {
        if x.len() != self.input_dim {
            return Err(EdlError::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EdlError::NonFinite("features"));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> Forward {
        let (w1, b1, w2, b2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|h| {
                let row = &p[w1 + h * self.input_dim..w1 + (h + 1) * self.input_dim];
                (p[b1 + h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect();
        let raw = (0..self.classes)
            .map(|c| {
                let row = &p[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
                p[b2 + c] + row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Forward { hidden, raw }
    }

    pub fn raw(&self, x: &[f64]) -> Result<Vec<f64>, EdlError> {
        self.check_input(x)?;
        Ok(self.forward_cached(x).raw)
    }

    pub fn predict(&self, x: &[f64]) -> Result<DirichletPrediction, EdlError> {
        dirichlet_from_raw(&self.raw(x)?)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Serialized model: parameters plus the schedule that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub config_hash: String,
    pub schedule: TrainingSchedule,
    pub model: EvidentialModel,
}

impl ModelFile {
    pub fn new(model: EvidentialModel, schedule: TrainingSchedule) -> Self {
        let config_hash = schedule_hash(&schedule);
        ModelFile { version: MODEL_VERSION.to_string(), config_hash, schedule, model }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EdlError> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| EdlError::Format(e.to_string()))?;
        if f.version != MODEL_VERSION {
            return Err(EdlError::Format(format!("unsupported version {:?}, expected {MODEL_VERSION:?}", f.version)));
        }
        let m = &f.model;
        let expected = EvidentialModel::param_count(m.input_dim, m.hidden, m.classes);
        if m.params.len() != expected {
            return Err(EdlError::DimensionMismatch { expected, got: m.params.len() });
        }
        if !m.is_finite() {
            return Err(EdlError::NonFinite("model parameters"));
        }
        if f.config_hash != schedule_hash(&f.schedule) {
            return Err(EdlError::Format("config_hash does not match the stored schedule".into()));
        }
        Ok(f)
    }
}

fn schedule_hash(schedule: &TrainingSchedule) -> String {
    let text = serde_json::to_string(schedule).expect("schedule serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}
