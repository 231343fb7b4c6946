use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{edl_loss, loss_gradient, LossBreakdown, LossConfig, Sample};
use super::model::EvidentialModel;
use super::EdlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Epochs over which the KL weight ramps from 0 to 1.
    pub anneal_denominator: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainingSchedule {
    fn default() -> Self {
        TrainingSchedule {
            epochs: 100,
            learning_rate: 0.05,
            anneal_denominator: 10.0,
            batch_size: 32,
            hidden: 8,
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

impl TrainingSchedule {
    /// Annealing time at a 0-based epoch.
    pub fn t_at(&self, epoch: usize) -> f64 {
        epoch as f64 / self.anneal_denominator
    }

    pub fn validate(&self) -> Result<(), EdlError> {
        if self.epochs == 0 {
            return Err(EdlError::Schedule("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(EdlError::Schedule("learning rate must be positive".into()));
        }
        if !(self.anneal_denominator > 0.0) {
            return Err(EdlError::Schedule("anneal_denominator must be positive".into()));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(EdlError::Schedule("batch size and hidden width must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: EvidentialModel,
    /// Full-dataset loss after each epoch.
    pub history: Vec<LossBreakdown>,
}

/// Seeded mini-batch gradient descent on the evidential loss.
pub fn train(dataset: &[Sample], schedule: &TrainingSchedule) -> Result<TrainingOutcome, EdlError> {
    schedule.validate()?;
    let first = dataset.first().ok_or(EdlError::EmptyBatch)?;
    let (d, c) = (first.features.len(), first.label.len());
    let mut seen = vec![false; c];
    for s in dataset {
        if let Some(k) = s.label.iter().position(|v| *v == 1.0) {
            if k < c {
                seen[k] = true;
            }
        }
    }
    if seen.iter().filter(|s| **s).count() < 2 {
        return Err(EdlError::SingleClass);
    }
    let mut model = EvidentialModel::init(d, schedule.hidden, c, schedule.seed);
    // Validates dimensions and labels for every sample up front.
    edl_loss(dataset, &model, 0.0, schedule.loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(schedule.epochs);
    let mut batch = Vec::with_capacity(schedule.batch_size);
    for epoch in 0..schedule.epochs {
        let t = schedule.t_at(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(schedule.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| dataset[i].clone()));
            let g = loss_gradient(&batch, &model, t, schedule.loss)?;
            let scale = schedule.learning_rate / batch.len() as f64;
            for (p, g) in model.params.iter_mut().zip(&g) {
                *p -= scale * g;
            }
        }
        if !model.is_finite() {
            return Err(EdlError::NonFinite("parameters after update"));
        }
        history.push(edl_loss(dataset, &model, t, schedule.loss)?);
    }
    Ok(TrainingOutcome { model, history })
}
