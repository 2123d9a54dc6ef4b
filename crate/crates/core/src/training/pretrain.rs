//! Supervised pretraining on `(U, g_eq)` pairs.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Tensor};
use crate::bench::Dataset;
use crate::error::{Error, Result};
use crate::lattice::Q;
use crate::moments::GasParams;
use crate::network::MlpParams;

use super::adamw::{AdamW, AdamWConfig, StepSchedule};

/// Inputs (`N x 4` lattice-frame features) and targets (`N x 9`).
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSet {
    pub inputs: Tensor,
    pub targets: Tensor,
}

impl PretrainSet {
    pub fn new(inputs: Tensor, targets: Tensor) -> Result<Self> {
        if inputs.cols() != 4 || targets.cols() != Q || inputs.rows() != targets.rows() {
            return Err(Error::Shape(format!(
                "pretrain inputs {:?} / targets {:?}",
                inputs.shape(),
                targets.shape()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::Config("empty pretraining set".into()));
        }
        if let Some(v) = targets.data().iter().find(|v| !(**v > 0.0)) {
            return Err(Error::InvalidState(format!("pretraining target {v} is not positive")));
        }
        Ok(PretrainSet { inputs, targets })
    }

    /// Every fluid cell of the frames with `t < t_max`, taking every
    /// `stride`-th frame.
    pub fn from_dataset(
        data: &Dataset,
        gas: &GasParams,
        solid: Option<&[bool]>,
        t_max: u64,
        stride: usize,
    ) -> Result<Self> {
        let mut u = Vec::new();
        let mut y = Vec::new();
        for frame in data.frames.iter().filter(|f| f.t < t_max).step_by(stride.max(1)) {
            let states = frame.lattice_states(gas, solid)?;
            for (c, s) in states.iter().enumerate() {
                if solid.is_some_and(|m| m[c]) {
                    continue;
                }
                u.extend_from_slice(&s.features());
                y.extend_from_slice(frame.geq.cell(c));
            }
        }
        let n = u.len() / 4;
        PretrainSet::new(Tensor::from_vec(n, 4, u)?, Tensor::from_vec(n, Q, y)?)
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    /// Drops rows whose inputs repeat an earlier row bit for bit (uniform
    /// regions, identical rows of a quasi-1D case), keeping first occurrences.
    pub fn dedup(&self) -> PretrainSet {
        let mut seen = HashSet::new();
        let rows: Vec<usize> = (0..self.len())
            .filter(|&r| {
                let key: [u64; 4] = std::array::from_fn(|k| self.inputs.get(r, k).to_bits());
                seen.insert(key)
            })
            .collect();
        let (inputs, targets) = self.gather(&rows);
        PretrainSet { inputs, targets }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-feature mean and standard deviation of the inputs.
    pub fn input_stats(&self) -> ([f64; 4], [f64; 4]) {
        let n = self.len() as f64;
        let mut mean = [0.0; 4];
        let mut var = [0.0; 4];
        for r in 0..self.len() {
            for k in 0..4 {
                mean[k] += self.inputs.get(r, k);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for r in 0..self.len() {
            for k in 0..4 {
                let d = self.inputs.get(r, k) - mean[k];
                var[k] += d * d;
            }
        }
        (mean, var.map(|v| (v / n).sqrt()))
    }

    fn gather(&self, rows: &[usize]) -> (Tensor, Tensor) {
        let mut u = Tensor::zeros(rows.len(), 4);
        let mut y = Tensor::zeros(rows.len(), Q);
        for (k, &r) in rows.iter().enumerate() {
            u.row_mut(k).copy_from_slice(self.inputs.row(r));
            y.row_mut(k).copy_from_slice(self.targets.row(r));
        }
        (u, y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: StepSchedule,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    /// Seed of the minibatch shuffle.
    pub seed: u64,
    /// Before the first epoch, shift the output bias so the mean exponent
    /// matches the mean log-target.
    pub warm_start: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 500,
            lr: StepSchedule {
                base: 1e-3,
                halve_every: Some(100),
            },
            batch_size: 256,
            optimizer: AdamWConfig::default(),
            seed: 0,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    /// Mean minibatch loss of every epoch.
    pub epoch_loss: Vec<f64>,
    /// Full-set MSE after the last epoch.
    pub final_mse: f64,
}

/// Full-set mean squared error of the network on `set`.
pub fn evaluate_mse(params: &MlpParams, set: &PretrainSet) -> Result<f64> {
    let pred = params.eval(&set.inputs, usize::MAX)?;
    let mut acc = 0.0;
    for (p, t) in pred.data().iter().zip(set.targets.data()) {
        acc += (p - t) * (p - t);
    }
    Ok(acc / pred.len() as f64)
}

/// Minimizes the per-element MSE between the network and the targets with
/// minibatch AdamW. A saturated exponent aborts with the epoch number.
pub fn pretrain(set: &PretrainSet, params: &MlpParams, cfg: &PretrainConfig) -> Result<(MlpParams, PretrainReport)> {
    if cfg.batch_size == 0 || cfg.lr.base <= 0.0 {
        return Err(Error::Config("pretraining needs batch_size > 0 and lr > 0".into()));
    }
    let mut params = params.clone();
    if cfg.warm_start {
        let mut log_mean = [0.0; Q];
        for r in 0..set.len() {
            for (m, v) in log_mean.iter_mut().zip(set.targets.row(r)) {
                *m += v.ln() / set.len() as f64;
            }
        }
        params.shift_output_bias(&set.inputs, &log_mean)?;
    }
    let mut flat = params.flatten();
    let mut opt = AdamW::new(flat.len(), cfg.optimizer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.lr.lr(epoch);
        let mut acc = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (u, y) = set.gather(chunk);
            let mut tape = Tape::new();
            let handles = params.register(&mut tape);
            let basis = params.basis_tape(&mut tape, &handles);
            let un = tape.leaf(u);
            let pred = params
                .forward_tape(&mut tape, &handles, un, basis, usize::MAX)
                .map_err(|e| Error::TrainingAborted {
                    epoch,
                    cause: Box::new(e),
                })?;
            let yn = tape.leaf(y);
            let loss = tape.mse(pred, yn);
            acc += tape.value(loss).item();
            batches += 1;
            let grads = tape.backward(loss, 1.0)?;
            let g = params.gradient(&grads).flatten();
            opt.step(&mut flat, &g, lr)?;
            params.assign_flat(&flat)?;
        }
        let mean = acc / batches as f64;
        log::debug!("pretrain epoch {epoch}: loss {mean:.3e} lr {lr:.2e}");
        epoch_loss.push(mean);
    }
    let final_mse = evaluate_mse(&params, set).map_err(|e| Error::TrainingAborted {
        epoch: cfg.epochs,
        cause: Box::new(e),
    })?;
    Ok((params, PretrainReport { epoch_loss, final_mse }))
}
