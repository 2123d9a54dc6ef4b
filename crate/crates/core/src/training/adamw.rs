//! AdamW over flat parameter vectors.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamW {
    pub fn new(n: usize, config: AdamWConfig) -> Self {
        AdamW {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update with learning rate `lr`. Weight decay is decoupled:
    /// `theta <- theta - lr * (wd * theta + m_hat / (sqrt(v_hat) + eps))`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer holds {} moments, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step += 1;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for k in 0..params.len() {
            let g = grads[k];
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let m_hat = self.m[k] / bc1;
            let v_hat = self.v[k] / bc2;
            params[k] -= lr * (weight_decay * params[k] + m_hat / (v_hat.sqrt() + eps));
        }
        Ok(())
    }
}

/// Step schedule: `base * 0.5^(epoch / halve_every)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub base: f64,
    pub halve_every: Option<usize>,
}

impl StepSchedule {
    pub fn constant(base: f64) -> Self {
        StepSchedule { base, halve_every: None }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        match self.halve_every {
            Some(k) if k > 0 => self.base * 0.5f64.powi((epoch / k) as i32),
            _ => self.base,
        }
    }
}
