use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::sim::{governing_light, Frame, LightColor};

use super::PerceptionConfig;

pub const LIGHT_FEATURES: usize = 4;
/// Gaussian noise standard deviation per unit of weather noise.
const NOISE_SD: f64 = 0.05;

/// Synthetic light-camera features: `[red, yellow, green, proximity]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; LIGHT_FEATURES]);

impl FeatureVector {
    pub const NULL: FeatureVector = FeatureVector([0.0; LIGHT_FEATURES]);

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

/// Noise-free encoding of the light that governs the ego, or the null signal
/// when none is within the approach zone.
pub fn clean_light_features(frame: &Frame, config: &PerceptionConfig) -> FeatureVector {
    let Ok(Some((info, color))) = governing_light(frame, frame.ego_id, config.approach_zone) else {
        return FeatureVector::NULL;
    };
    let proximity = (1.0 - info.distance / config.approach_zone).clamp(0.0, 1.0);
    let mut f = [0.0, 0.0, 0.0, proximity];
    f[match color {
        LightColor::Red => 0,
        LightColor::Yellow => 1,
        LightColor::Green => 2,
    }] = 1.0;
    FeatureVector(f)
}

/// Weather degrades the signal two ways: a random visibility factor
/// `exp(-noise * X)`, `X ~ Exp(1)`, dims every channel, then Gaussian noise with
/// standard deviation proportional to the noise scale is added.
pub fn extract_light_features(frame: &Frame, config: &PerceptionConfig, rng: &mut impl Rng) -> FeatureVector {
    let clean = clean_light_features(frame, config);
    let noise = config.weather_noise;
    if noise <= 0.0 {
        return clean;
    }
    let x: f64 = Exp1.sample(rng);
    let visibility = (-noise * x).exp();
    let gauss = Normal::new(0.0, NOISE_SD * noise).expect("positive standard deviation");
    FeatureVector(clean.0.map(|c| c * visibility + gauss.sample(rng)))
}
