use csav_core::edl::{edl_loss, EvidentialModel, LossConfig, Sample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// KL(Beta(a, b) || Beta(1, 1)) by composite Simpson integration of f ln f,
/// after substituting x = (1 - cos(pi u)) / 2 to smooth the endpoint logs.
pub fn kl_beta_numeric(a: f64, b: f64) -> f64 {
    use std::f64::consts::PI;
    let ln_beta = statrs::function::beta::ln_beta(a, b);
    let g = |u: f64| -> f64 {
        let x = (1.0 - (PI * u).cos()) / 2.0;
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let ln_f = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta;
        ln_f.exp() * ln_f * (PI / 2.0) * (PI * u).sin()
    };
    let n = 20_000;
    let h = 1.0 / n as f64;
    let mut acc = g(0.0) + g(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(i as f64 * h);
    }
    acc * h / 3.0
}

pub fn random_case(rng: &mut ChaCha8Rng, d: usize, h: usize, n: usize) -> (EvidentialModel, Vec<Sample>) {
    let mut m = EvidentialModel::zeros(d, h, 2);
    for p in m.params.iter_mut() {
        *p = rng.random_range(-1.5..1.5);
    }
    let batch = (0..n)
        .map(|_| {
            let k = rng.random_range(0..2);
            Sample {
                features: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                label: if k == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] },
            }
        })
        .collect();
    (m, batch)
}

pub fn numeric_gradient(batch: &[Sample], m: &EvidentialModel, t: f64, cfg: LossConfig) -> Vec<f64> {
    let step = 1e-5;
    (0..m.params.len())
        .map(|i| {
            let mut plus = m.clone();
            plus.params[i] += step;
            let mut minus = m.clone();
            minus.params[i] -= step;
            let lp = edl_loss(batch, &plus, t, cfg).unwrap().total;
            let lm = edl_loss(batch, &minus, t, cfg).unwrap().total;
            (lp - lm) / (2.0 * step)
        })
        .collect()
}

pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Raw outputs that sit on the ReLU kink make central differences meaningless.
pub fn near_kink(batch: &[Sample], m: &EvidentialModel) -> bool {
    batch.iter().any(|s| m.raw(&s.features).unwrap().iter().any(|r| r.abs() < 1e-3))
}
