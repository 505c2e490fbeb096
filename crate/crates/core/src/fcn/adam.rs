//! Adam with the weight decay folded into the gradient as an L2 term.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("beta", "must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid("weight_decay", "must be non-negative"));
        }
        Ok(())
    }
}

/// Optimizer state: first/second moments and the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, param_count: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            m: vec![T::zero(); param_count],
            v: vec![T::zero(); param_count],
            step: 0,
        })
    }

    /// Steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update: `g += wd w`, moments, bias correction at step `t`,
    /// `w -= lr m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        for (what, len) in [("adam parameters", params.len()), ("adam gradients", grads.len())] {
            if len != self.m.len() {
                return Err(Error::LengthMismatch {
                    what,
                    expected: self.m.len(),
                    actual: len,
                });
            }
        }
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - num_traits::Float::powi(c.beta1, t));
        let bc2 = T::of(1.0 - num_traits::Float::powi(c.beta2, t));
        let (lr, eps, wd) = (T::of(c.learning_rate), T::of(c.epsilon), T::of(c.weight_decay));
        let one = T::one();
        for i in 0..params.len() {
            let g = grads[i] + wd * params[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lr: f64, wd: f64) -> AdamConfig {
        AdamConfig {
            learning_rate: lr,
            weight_decay: wd,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn first_step_by_hand() {
        let mut adam = Adam::<f64>::new(cfg(0.1, 0.0), 1).unwrap();
        let mut w = [1.0];
        adam.step(&mut w, &[1.0]).unwrap();
        // m_hat = 1, v_hat = 1
        assert!((w[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((w[0] - 0.9).abs() < 1e-6);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn second_step_by_hand() {
        let mut adam = Adam::<f64>::new(cfg(0.01, 0.5), 1).unwrap();
        let mut w = [2.0];
        adam.step(&mut w, &[0.0]).unwrap();
        adam.step(&mut w, &[3.0]).unwrap();
        let mut wr = 2.0f64;
        let (mut m, mut v) = (0.0, 0.0);
        for (t, g0) in [(1, 0.0), (2, 3.0)] {
            let g = g0 + 0.5 * wr;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            wr -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((w[0] - wr).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_without_decay_is_noop() {
        let mut adam = Adam::<f32>::new(cfg(0.1, 0.0), 3).unwrap();
        let mut w = [1.0, -2.0, 0.5];
        adam.step(&mut w, &[0.0; 3]).unwrap();
        assert_eq!(w, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn deterministic_and_checked() {
        let mut a = Adam::<f32>::new(cfg(0.1, 1e-3), 2).unwrap();
        let mut b = a.clone();
        let (mut wa, mut wb) = ([0.3, 0.7], [0.3, 0.7]);
        a.step(&mut wa, &[0.1, -0.2]).unwrap();
        b.step(&mut wb, &[0.1, -0.2]).unwrap();
        assert_eq!(wa, wb);
        assert!(a.step(&mut wa, &[0.1]).is_err());
        assert!(Adam::<f32>::new(cfg(0.0, 0.0), 1).is_err());
    }
}
