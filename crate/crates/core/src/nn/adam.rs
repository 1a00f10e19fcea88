use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const DEFAULT_DECAY_RATE: f64 = 0.97;
pub const DEFAULT_DECAY_PERIOD: u64 = 100;

/// Adam with an exponentially decaying step size:
/// `lr(step) = base_lr · decay_rate^(step / decay_period)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub base_lr: f64,
    pub decay_rate: f64,
    pub decay_period: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize, base_lr: f64) -> Self {
        Self {
            base_lr,
            decay_rate: DEFAULT_DECAY_RATE,
            decay_period: DEFAULT_DECAY_PERIOD,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
            step: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
        }
    }

    pub fn with_decay(mut self, decay_rate: f64, decay_period: u64) -> Self {
        self.decay_rate = decay_rate;
        self.decay_period = decay_period;
        self
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn effective_lr(&self) -> f64 {
        let exponent = self.step as f64 / self.decay_period.max(1) as f64;
        self.base_lr * self.decay_rate.powf(exponent)
    }

    /// Applies one update in place and advances the step counter.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n || grads.len() != n {
            return Err(Error::Shape {
                context: "adam update",
                expected: n,
                got: if params.len() != n { params.len() } else { grads.len() },
            });
        }
        let lr = self.effective_lr();
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..n {
            let g = grads[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / c1;
            let v_hat = v / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::update`].
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    state.update(params, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(2, 0.1);
        let mut p = vec![1.0, -2.0];
        s.update(&mut p, &[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut s = AdamState::new(1, 0.01);
        let mut p = vec![0.0];
        let mut prev = p[0];
        for _ in 0..500 {
            s.update(&mut p, &[3.0]).unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
    }

    #[test]
    fn first_step_matches_scalar_trace() {
        // hand trace: m = 0.1g, v = 0.001g², m̂ = g, v̂ = g², Δ = lr·g/(|g|+ε)
        let g = 0.37;
        let lr = 0.05;
        let mut s = AdamState::new(1, lr);
        let mut p = vec![1.0];
        s.update(&mut p, &[g]).unwrap();
        let m = (1.0 - 0.9) * g;
        let v = (1.0 - 0.999) * g * g;
        let m_hat = m / (1.0 - 0.9);
        let v_hat = v / (1.0 - 0.999);
        let expected = 1.0 - lr * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!(((1.0 - p[0]) - lr).abs() < 1e-6);
    }

    #[test]
    fn learning_rate_decays_exponentially() {
        let mut s = AdamState::new(1, 1.0).with_decay(0.5, 10);
        let mut p = vec![0.0];
        for _ in 0..20 {
            s.update(&mut p, &[1.0]).unwrap();
        }
        assert!((s.effective_lr() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = AdamState::new(2, 0.1);
        let mut p = vec![0.0; 3];
        assert!(s.update(&mut p, &[0.0; 3]).is_err());
    }
}
