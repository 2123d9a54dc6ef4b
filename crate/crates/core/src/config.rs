//! Run configuration: a text file of `key = value` lines plus overrides.
//!
//! ```text
//! # comment
//! case = sod1
//! scale = 10
//! pretrain_epochs = 100
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration.
//! Unknown keys and unparsable values are configuration errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which closure a simulation uses for `g_eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureKind {
    Polynomial,
    Newton,
    Neural,
}

impl FromStr for ClosureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "polynomial" | "poly" => Ok(ClosureKind::Polynomial),
            "newton" => Ok(ClosureKind::Newton),
            "neural" => Ok(ClosureKind::Neural),
            other => Err(Error::Config(format!("unknown closure '{other}'"))),
        }
    }
}

impl ClosureKind {
    pub fn name(self) -> &'static str {
        match self {
            ClosureKind::Polynomial => "polynomial",
            ClosureKind::Newton => "newton",
            ClosureKind::Neural => "neural",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // case and reference generation
    /// `sod1`, `sod2` or `cylinder`.
    pub case: String,
    pub scale: usize,
    /// Steps of the reference run.
    pub steps: u64,
    /// Overrides the case's relaxation-time floor (0 disables it).
    pub tau_min: Option<f64>,
    pub record_stride: u64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub newton_warm_start: bool,

    // files
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Checkpoint written by `pretrain`/`train` and read by `simulate`.
    pub checkpoint: PathBuf,
    /// Starting point of `train` (defaults to `checkpoint`).
    pub init_checkpoint: Option<PathBuf>,

    // network and pretraining
    pub width: usize,
    pub seed: u64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub pretrain_halve_every: usize,
    pub pretrain_batch: usize,
    /// Use every k-th training frame for pretraining.
    pub pretrain_frame_stride: usize,
    pub pretrain_dedup: bool,
    pub pretrain_warm_start: bool,
    pub weight_decay: f64,

    // unrolled training
    pub n_r: usize,
    pub alpha: f64,
    pub alpha2: f64,
    pub tvd_ramp: bool,
    /// Observable regularized by the TVD term (`rho`, `ux`, `uy` or `T`).
    pub tvd_observable: String,
    pub lr: f64,
    pub lr_halve_every: usize,
    pub epochs: usize,
    pub window_stride: usize,
    pub t_train: u64,
    pub checkpoint_every: usize,
    /// Rescale the network output to the cell's energy moment.
    pub renormalize: bool,

    // simulation, evaluation and export
    pub closure: ClosureKind,
    pub t_start: u64,
    pub t_end: u64,
    pub sim_dir: PathBuf,
    pub observable: String,
    /// Step exported by `export-profile`.
    pub t_profile: u64,
    /// Directory read by `export-profile`: `sim` or `data`.
    pub profile_from: String,
    pub profile_out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: "sod1".into(),
            scale: 10,
            steps: 600,
            tau_min: None,
            record_stride: 1,
            newton_tol: 1e-6,
            newton_max_iters: 20,
            newton_warm_start: true,
            data_dir: "data".into(),
            out_dir: "out".into(),
            checkpoint: "out/params.ndew".into(),
            init_checkpoint: None,
            width: 32,
            seed: 0,
            pretrain_epochs: 100,
            pretrain_lr: 1e-3,
            pretrain_halve_every: 50,
            pretrain_batch: 256,
            pretrain_frame_stride: 10,
            pretrain_dedup: true,
            pretrain_warm_start: true,
            weight_decay: 0.0,
            n_r: 25,
            alpha: 0.0,
            alpha2: 0.0,
            tvd_ramp: false,
            tvd_observable: "T".into(),
            lr: 1e-6,
            lr_halve_every: 100,
            epochs: 3,
            window_stride: 25,
            t_train: 500,
            checkpoint_every: 0,
            renormalize: true,
            closure: ClosureKind::Neural,
            t_start: 500,
            t_end: 600,
            sim_dir: "out/sim".into(),
            observable: "T".into(),
            t_profile: 600,
            profile_from: "sim".into(),
            profile_out: "out/profile.csv".into(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse '{value}' for key '{key}' as a boolean"))),
    }
}

impl RunConfig {
    /// Reads `path` on top of the defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let k = key.replace('-', "_");
        match k.as_str() {
            "case" => self.case = v.to_string(),
            "scale" => self.scale = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "tau_min" => {
                let t: f64 = parse(key, v)?;
                self.tau_min = Some(t);
            }
            "record_stride" => self.record_stride = parse(key, v)?,
            "newton_tol" => self.newton_tol = parse(key, v)?,
            "newton_max_iters" => self.newton_max_iters = parse(key, v)?,
            "newton_warm_start" => self.newton_warm_start = parse_bool(key, v)?,
            "data_dir" => self.data_dir = v.into(),
            "out_dir" => self.out_dir = v.into(),
            "checkpoint" => self.checkpoint = v.into(),
            "init_checkpoint" => self.init_checkpoint = Some(v.into()),
            "width" => self.width = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "pretrain_epochs" => self.pretrain_epochs = parse(key, v)?,
            "pretrain_lr" => self.pretrain_lr = parse(key, v)?,
            "pretrain_halve_every" => self.pretrain_halve_every = parse(key, v)?,
            "pretrain_batch" => self.pretrain_batch = parse(key, v)?,
            "pretrain_frame_stride" => self.pretrain_frame_stride = parse(key, v)?,
            "pretrain_dedup" => self.pretrain_dedup = parse_bool(key, v)?,
            "pretrain_warm_start" => self.pretrain_warm_start = parse_bool(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "n_r" => self.n_r = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "alpha2" => self.alpha2 = parse(key, v)?,
            "tvd_ramp" => self.tvd_ramp = parse_bool(key, v)?,
            "tvd_observable" => self.tvd_observable = v.to_string(),
            "lr" => self.lr = parse(key, v)?,
            "lr_halve_every" => self.lr_halve_every = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "window_stride" => self.window_stride = parse(key, v)?,
            "t_train" => self.t_train = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "renormalize" => self.renormalize = parse_bool(key, v)?,
            "closure" => self.closure = v.parse()?,
            "t_start" => self.t_start = parse(key, v)?,
            "t_end" => self.t_end = parse(key, v)?,
            "sim_dir" => self.sim_dir = v.into(),
            "observable" => self.observable = v.to_string(),
            "t_profile" => self.t_profile = parse(key, v)?,
            "profile_from" => self.profile_from = v.to_string(),
            "profile_out" => self.profile_out = v.into(),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Feature column of the TVD observable.
    /// Applies command-line overrides: `--key value`, `--key=value` or
    /// `key=value`.
    pub fn apply_args<S: AsRef<str>>(&mut self, args: &[S]) -> Result<()> {
        let mut it = args.iter().map(|a| a.as_ref());
        while let Some(arg) = it.next() {
            let body = arg.strip_prefix("--").unwrap_or(arg);
            if let Some((k, v)) = body.split_once('=') {
                self.set(k, v)?;
            } else if arg.starts_with("--") {
                let v = it.next().ok_or_else(|| Error::Config(format!("missing value for {arg}")))?;
                self.set(body, v)?;
            } else {
                return Err(Error::Config(format!("unexpected argument '{arg}'")));
            }
        }
        Ok(())
    }

    pub fn tvd_column(&self) -> Result<usize> {
        match self.tvd_observable.as_str() {
            "rho" => Ok(0),
            "ux" => Ok(1),
            "uy" => Ok(2),
            "T" | "t" => Ok(3),
            other => Err(Error::Config(format!("tvd_observable must be rho, ux, uy or T, got '{other}'"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.scale == 0 || self.width == 0 || self.n_r == 0 {
            return bad("scale, width and n_r must be positive");
        }
        if self.record_stride == 0 || self.window_stride == 0 || self.pretrain_frame_stride == 0 {
            return bad("strides must be positive");
        }
        if self.pretrain_batch == 0 {
            return bad("pretrain_batch must be positive");
        }
        if !(self.lr > 0.0 && self.pretrain_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) || !(self.alpha2 >= 0.0) {
            return bad("alpha must lie in [0, 1] and alpha2 must be non-negative");
        }
        if self.t_end < self.t_start {
            return bad("t_end is before t_start");
        }
        if !matches!(self.profile_from.as_str(), "sim" | "data") {
            return bad("profile_from must be sim or data");
        }
        self.tvd_column()?;
        Ok(())
    }

    /// The configuration as `key = value` lines (readable by [`apply_text`]).
    ///
    /// [`apply_text`]: RunConfig::apply_text
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("case", self.case.clone());
        kv("scale", self.scale.to_string());
        kv("steps", self.steps.to_string());
        if let Some(t) = self.tau_min {
            kv("tau_min", t.to_string());
        }
        kv("record_stride", self.record_stride.to_string());
        kv("newton_tol", self.newton_tol.to_string());
        kv("newton_max_iters", self.newton_max_iters.to_string());
        kv("newton_warm_start", self.newton_warm_start.to_string());
        kv("data_dir", self.data_dir.display().to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("checkpoint", self.checkpoint.display().to_string());
        if let Some(p) = &self.init_checkpoint {
            kv("init_checkpoint", p.display().to_string());
        }
        kv("width", self.width.to_string());
        kv("seed", self.seed.to_string());
        kv("pretrain_epochs", self.pretrain_epochs.to_string());
        kv("pretrain_lr", self.pretrain_lr.to_string());
        kv("pretrain_halve_every", self.pretrain_halve_every.to_string());
        kv("pretrain_batch", self.pretrain_batch.to_string());
        kv("pretrain_frame_stride", self.pretrain_frame_stride.to_string());
        kv("pretrain_dedup", self.pretrain_dedup.to_string());
        kv("pretrain_warm_start", self.pretrain_warm_start.to_string());
        kv("weight_decay", self.weight_decay.to_string());
        kv("n_r", self.n_r.to_string());
        kv("alpha", self.alpha.to_string());
        kv("alpha2", self.alpha2.to_string());
        kv("tvd_ramp", self.tvd_ramp.to_string());
        kv("tvd_observable", self.tvd_observable.clone());
        kv("lr", self.lr.to_string());
        kv("lr_halve_every", self.lr_halve_every.to_string());
        kv("epochs", self.epochs.to_string());
        kv("window_stride", self.window_stride.to_string());
        kv("t_train", self.t_train.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("renormalize", self.renormalize.to_string());
        kv("closure", self.closure.name().to_string());
        kv("t_start", self.t_start.to_string());
        kv("t_end", self.t_end.to_string());
        kv("sim_dir", self.sim_dir.display().to_string());
        kv("observable", self.observable.clone());
        kv("t_profile", self.t_profile.to_string());
        kv("profile_from", self.profile_from.clone());
        kv("profile_out", self.profile_out.display().to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("case = sod2\n# note\n\ntau_min = 0.8\nalpha2=1e-2 # trailing\ntvd_ramp = yes\n")
            .unwrap();
        assert_eq!(cfg.case, "sod2");
        assert_eq!(cfg.tau_min, Some(0.8));
        assert!(cfg.tvd_ramp);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("nope", "1"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("scale", "ten"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply_text("scale 10"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("closure", "magic"), Err(Error::Config(_))));
    }

    #[test]
    fn dashes_are_accepted_in_keys() {
        let mut cfg = RunConfig::default();
        cfg.set("window-stride", "5").unwrap();
        assert_eq!(cfg.window_stride, 5);
    }
}
