use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn is_valid(&self) -> bool {
        (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update with a per-coordinate learning rate.
/// `step` counts from 1. A zero learning rate leaves its coordinate
/// untouched.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    step: usize,
    learning_rates: &[f64],
    cfg: &AdamConfig,
) {
    assert!(step >= 1);
    assert_eq!(params.len(), grads.len());
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for k in 0..params.len() {
        let g = grads[k];
        let m = cfg.beta1 * moments.first[k] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * moments.second[k] + (1.0 - cfg.beta2) * g * g;
        moments.first[k] = m;
        moments.second[k] = v;
        let lr = learning_rates[k];
        if lr != 0.0 {
            params[k] -= lr * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = vec![1.5, -2.0];
        let mut m = Moments {
            first: vec![0.5, 0.5],
            second: vec![0.25, 0.25],
        };
        adam_step(
            &mut p,
            &[0.0, 0.0],
            &mut m,
            3,
            &[0.1, 0.1],
            &AdamConfig::default(),
        );
        assert_eq!(m.first, vec![0.45, 0.45]);
        assert!((m.second[0] - 0.24975).abs() < 1e-15);
        // Moments are non-zero so parameters move along the old direction,
        // but a fresh optimizer with zero gradient stays put.
        let mut q = vec![1.5, -2.0];
        adam_step(
            &mut q,
            &[0.0, 0.0],
            &mut Moments::zeros(2),
            1,
            &[0.1, 0.1],
            &AdamConfig::default(),
        );
        assert_eq!(q, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_reference_value() {
        let mut p = vec![0.0];
        adam_step(
            &mut p,
            &[1.0],
            &mut Moments::zeros(1),
            1,
            &[0.1],
            &AdamConfig::default(),
        );
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-16);
        assert!((p[0] + 0.0999999999).abs() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = vec![0.3, -0.7, 1.1];
            let mut m = Moments::zeros(3);
            for t in 1..=5 {
                let g: Vec<f64> = p.iter().map(|x| 2.0 * x - 0.1 * t as f64).collect();
                adam_step(&mut p, &g, &mut m, t, &[0.01; 3], &AdamConfig::default());
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn frozen_coordinate_is_untouched() {
        let mut p = vec![0.3, 0.3];
        adam_step(
            &mut p,
            &[1.0, 1.0],
            &mut Moments::zeros(2),
            1,
            &[0.0, 0.1],
            &AdamConfig::default(),
        );
        assert_eq!(p[0], 0.3);
        assert_ne!(p[1], 0.3);
    }
}
