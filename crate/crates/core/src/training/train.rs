//! Unrolled trajectory training.

use std::io::Write;
use std::path::PathBuf;
use std::rc::Rc;
use std::time::Instant;

use crate::bench::Dataset;
use crate::error::{Error, Result};
use crate::network::{save_checkpoint, MlpParams};

use super::adamw::{AdamW, AdamWConfig, StepSchedule};
use super::ops::StepContext;
use super::window::{window_loss_and_grad, StepTarget, WindowClosure, WindowWeights};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Unroll length `N_r`.
    pub n_r: usize,
    pub alpha: f64,
    /// Target TVD weight.
    pub alpha2: f64,
    /// Ramp the TVD weight linearly from 0 to `alpha2` over the epochs.
    pub tvd_ramp: bool,
    pub tvd_column: usize,
    pub lr: StepSchedule,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: AdamWConfig,
    /// Distance between consecutive window starts.
    pub window_stride: usize,
    /// Frames with `t < t_train` are training data.
    pub t_train: u64,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_r: 25,
            alpha: 0.0,
            alpha2: 0.0,
            tvd_ramp: false,
            tvd_column: 3,
            lr: StepSchedule {
                base: 1e-4,
                halve_every: Some(100),
            },
            epochs: 50,
            seed: 0,
            optimizer: AdamWConfig::default(),
            window_stride: 1,
            t_train: 500,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_r == 0 {
            return Err(Error::Config("n_r must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.alpha2 >= 0.0) {
            return Err(Error::Config(format!("alpha2 must be non-negative, got {}", self.alpha2)));
        }
        if !(self.lr.base > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.window_stride == 0 {
            return Err(Error::Config("window_stride must be at least 1".into()));
        }
        if self.tvd_column > 3 {
            return Err(Error::Config("tvd_column must be 0..=3".into()));
        }
        Ok(())
    }

    /// TVD weight used in `epoch`.
    pub fn alpha2_at(&self, epoch: usize) -> f64 {
        if !self.tvd_ramp {
            return self.alpha2;
        }
        if self.epochs <= 1 {
            return self.alpha2;
        }
        self.alpha2 * epoch as f64 / (self.epochs - 1) as f64
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub window_t: u64,
    pub loss: f64,
    pub tvd_term: f64,
    pub grad_norm: f64,
    pub wall_ms: u128,
}

pub fn write_log_csv<W: Write>(rows: &[LogRow], mut w: W) -> Result<()> {
    writeln!(w, "epoch,window_t,loss,tvd_term,grad_norm,wall_ms")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{}",
            r.epoch, r.window_t, r.loss, r.tvd_term, r.grad_norm, r.wall_ms
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: MlpParams,
    pub log: Vec<LogRow>,
    /// Mean window loss per epoch (over windows that ran).
    pub epoch_loss: Vec<f64>,
    pub skipped_windows: usize,
}

/// Window starts and lengths: every `stride`-th frame before `t_train`,
/// unrolling `min(n_r, remaining)` steps.
pub fn window_plan(data: &Dataset, cfg: &TrainConfig) -> Result<Vec<(u64, usize)>> {
    let Some(first) = data.frames.first() else {
        return Err(Error::Config("empty dataset".into()));
    };
    let t0 = first.t;
    let last = data.frames.last().unwrap().t.min(cfg.t_train.saturating_sub(1));
    if last <= t0 || !data.contiguous(t0, last) {
        return Err(Error::Config(format!(
            "dataset must hold contiguous frames {t0}..={last} for training"
        )));
    }
    let mut plan = Vec::new();
    let mut t = t0;
    while t < last {
        let len = cfg.n_r.min((last - t) as usize);
        plan.push((t, len));
        t += cfg.window_stride as u64;
    }
    Ok(plan)
}

/// Trains `params` on the windows of `data`. A window whose unroll fails
/// numerically is skipped (counted and logged at warn level).
pub fn train_unrolled(data: &Dataset, params: &MlpParams, cfg: &TrainConfig, ctx: &StepContext) -> Result<TrainReport> {
    cfg.validate()?;
    let plan = window_plan(data, cfg)?;
    let ctx = Rc::new(ctx.clone());
    let mut params = params.clone();
    let mut flat = params.flatten();
    let mut opt = AdamW::new(flat.len(), cfg.optimizer);
    let mut log = Vec::new();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut skipped = 0usize;
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr.lr(epoch);
        let weights = WindowWeights {
            alpha: cfg.alpha,
            alpha2: cfg.alpha2_at(epoch),
            tvd_column: cfg.tvd_column,
        };
        let mut acc = 0.0;
        let mut ran = 0usize;
        for &(t0, len) in &plan {
            let start = Instant::now();
            let frame0 = data.at(t0).expect("plan only holds stored frames");
            let x0 = ctx.merge(&frame0.f, &frame0.g)?;
            let targets: Vec<StepTarget<'_>> = (1..=len as u64)
                .map(|r| {
                    let fr = data.at(t0 + r).expect("plan only holds stored frames");
                    StepTarget { f: &fr.f, geq: &fr.geq }
                })
                .collect();
            let res = match window_loss_and_grad(&ctx, WindowClosure::Network(&params), x0, &targets, weights, true) {
                Ok(r) if r.loss.is_finite() && r.grad.iter().all(|g| g.is_finite()) => r,
                Ok(_) => {
                    skipped += 1;
                    log::warn!("epoch {epoch} window {t0}: non-finite loss or gradient, skipped");
                    continue;
                }
                Err(e) if e.is_numerical() => {
                    skipped += 1;
                    log::warn!("epoch {epoch} window {t0}: {e}, skipped");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let grad_norm = res.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            opt.step(&mut flat, &res.grad, lr)?;
            params.assign_flat(&flat)?;
            acc += res.loss;
            ran += 1;
            log.push(LogRow {
                epoch,
                window_t: t0,
                loss: res.loss,
                tvd_term: res.tvd,
                grad_norm,
                wall_ms: start.elapsed().as_millis(),
            });
        }
        let mean = if ran > 0 { acc / ran as f64 } else { f64::NAN };
        log::info!("epoch {epoch}: mean window loss {mean:.4e}, {ran} windows");
        epoch_loss.push(mean);
        if let (Some(k), Some(dir)) = (cfg.checkpoint_every, &cfg.checkpoint_dir) {
            if k > 0 && (epoch + 1) % k == 0 {
                save_checkpoint(&params, dir.join(format!("epoch_{:04}.ndew", epoch + 1)))?;
            }
        }
    }
    Ok(TrainReport {
        params,
        log,
        epoch_loss,
        skipped_windows: skipped,
    })
}
