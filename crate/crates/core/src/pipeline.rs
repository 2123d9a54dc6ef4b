//! The generate → pretrain → train → simulate → evaluate chain, driven by a
//! [`RunConfig`]. The command-line tool and the examples are thin wrappers
//! around these functions.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bench::metrics::{evaluate, MetricReport, Observable, Trajectory, TrajectoryStep};
use crate::bench::{generate_reference, make_cylinder, make_sod, CaseSpec, Dataset, Frame, ReferenceOptions, ReferenceRun};
use crate::closures::NewtonSettings;
use crate::config::{ClosureKind, RunConfig};
use crate::error::{Error, Result};
use crate::network::MlpParams;
use crate::solver::{ClosureSpec, SolverState};
use crate::training::{
    pretrain, relative_tv_increase, train_unrolled, AdamWConfig, PretrainConfig, PretrainReport, PretrainSet,
    StepContext, StepSchedule, TrainConfig, TrainReport,
};

pub fn newton_settings(cfg: &RunConfig) -> NewtonSettings {
    NewtonSettings {
        tol: cfg.newton_tol,
        max_iters: cfg.newton_max_iters,
    }
}

/// The benchmark named by `cfg.case` at `cfg.scale`, with the `tau_min`
/// override applied.
pub fn build_case(cfg: &RunConfig) -> Result<CaseSpec> {
    let mut case = match cfg.case.as_str() {
        "sod1" => make_sod(1, cfg.scale)?,
        "sod2" => make_sod(2, cfg.scale)?,
        "cylinder" => make_cylinder(cfg.scale)?,
        other => return Err(Error::Config(format!("unknown case '{other}' (sod1, sod2, cylinder)"))),
    };
    if let Some(t) = cfg.tau_min {
        case.gas.tau_min = (t > 0.0).then_some(t);
        case.gas.validate()?;
    }
    Ok(case)
}

/// Newton-closure reference run of `cfg.steps` steps.
pub fn generate(cfg: &RunConfig, case: &CaseSpec) -> Result<ReferenceRun> {
    let opts = ReferenceOptions {
        newton: newton_settings(cfg),
        warm_start: cfg.newton_warm_start,
        stride: cfg.record_stride,
    };
    generate_reference(case, cfg.steps, &opts)
}

/// Fresh network with inputs standardized on the pretraining set.
pub fn initial_params(cfg: &RunConfig, set: &PretrainSet) -> MlpParams {
    let mut params = MlpParams::new(cfg.width, cfg.width, cfg.seed);
    let (mean, std) = set.input_stats();
    params.standardize_inputs(mean, std);
    params
}

/// Pretraining samples: every `pretrain_frame_stride`-th frame before
/// `t_train`, optionally with repeated inputs removed.
pub fn pretrain_set(cfg: &RunConfig, case: &CaseSpec, data: &Dataset) -> Result<PretrainSet> {
    let set = PretrainSet::from_dataset(data, &case.gas, case.grid.solid_mask(), cfg.t_train, cfg.pretrain_frame_stride)?;
    Ok(if cfg.pretrain_dedup { set.dedup() } else { set })
}

pub fn pretrain_config(cfg: &RunConfig) -> PretrainConfig {
    PretrainConfig {
        epochs: cfg.pretrain_epochs,
        lr: StepSchedule {
            base: cfg.pretrain_lr,
            halve_every: (cfg.pretrain_halve_every > 0).then_some(cfg.pretrain_halve_every),
        },
        batch_size: cfg.pretrain_batch,
        optimizer: AdamWConfig {
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
        seed: cfg.seed,
        warm_start: cfg.pretrain_warm_start,
    }
}

pub fn run_pretrain(cfg: &RunConfig, case: &CaseSpec, data: &Dataset) -> Result<(MlpParams, PretrainReport)> {
    let set = pretrain_set(cfg, case, data)?;
    let params = initial_params(cfg, &set);
    pretrain(&set, &params, &pretrain_config(cfg))
}

pub fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    Ok(TrainConfig {
        n_r: cfg.n_r,
        alpha: cfg.alpha,
        alpha2: cfg.alpha2,
        tvd_ramp: cfg.tvd_ramp,
        tvd_column: cfg.tvd_column()?,
        lr: StepSchedule {
            base: cfg.lr,
            halve_every: (cfg.lr_halve_every > 0).then_some(cfg.lr_halve_every),
        },
        epochs: cfg.epochs,
        seed: cfg.seed,
        optimizer: AdamWConfig {
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
        window_stride: cfg.window_stride,
        t_train: cfg.t_train,
        checkpoint_every: (cfg.checkpoint_every > 0).then_some(cfg.checkpoint_every),
        checkpoint_dir: (cfg.checkpoint_every > 0).then(|| cfg.out_dir.join("checkpoints")),
    })
}

pub fn run_train(cfg: &RunConfig, case: &CaseSpec, data: &Dataset, params: &MlpParams) -> Result<TrainReport> {
    let mut ctx = StepContext::for_case(case, &newton_settings(cfg))?;
    ctx.renormalize = cfg.renormalize;
    train_unrolled(data, params, &train_config(cfg)?, &ctx)
}

/// Closure requested by `cfg.closure`; `params` is required for `neural`.
pub fn closure_spec(cfg: &RunConfig, params: Option<&MlpParams>) -> Result<ClosureSpec> {
    Ok(match cfg.closure {
        ClosureKind::Polynomial => ClosureSpec::Polynomial,
        ClosureKind::Newton => ClosureSpec::Newton(newton_settings(cfg)),
        ClosureKind::Neural => {
            let p = params.ok_or_else(|| Error::Config("neural closure needs a checkpoint".into()))?;
            ClosureSpec::Neural {
                params: Box::new(p.clone()),
                renormalize: cfg.renormalize,
            }
        }
    })
}

/// An autoregressive run and where it stopped.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// Frames `{f, g, g_eq}` of every reached step.
    pub dataset: Dataset,
    /// Time of the failing step and the cause.
    pub divergence: Option<(u64, String)>,
}

impl Rollout {
    pub fn last_t(&self) -> Option<u64> {
        self.dataset.frames.last().map(|f| f.t)
    }
}

/// Steps `closure` from `start` until `t_end`, recording every step. A
/// numerical failure ends the run early and is reported, not returned.
pub fn rollout(case: &CaseSpec, closure: ClosureSpec, newton: &NewtonSettings, start: &Frame, t_end: u64) -> Result<Rollout> {
    let inlet = case.inlet_condition(newton)?;
    let mut st = SolverState::new(case.grid.clone(), case.gas, closure, start.f.clone(), start.g.clone(), inlet)?;
    st.t = start.t;
    rollout_state(&mut st, t_end)
}

/// Like [`rollout`], from an existing solver state.
pub fn rollout_state(st: &mut SolverState, t_end: u64) -> Result<Rollout> {
    let mut out = Dataset::default();
    let mut divergence = None;
    while st.t < t_end {
        let (f, g, t) = (st.f.clone(), st.g.clone(), st.t);
        match st.step() {
            Ok(eq) => out.push(Frame { t, f, g, geq: eq.geq })?,
            Err(Error::Divergence { t, cause }) => {
                divergence = Some((t, cause.to_string()));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if divergence.is_none() {
        match st.equilibria() {
            Ok(eq) => out.push(Frame {
                t: st.t,
                f: st.f.clone(),
                g: st.g.clone(),
                geq: eq.geq,
            })?,
            Err(e) if e.is_numerical() => divergence = Some((st.t, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(Rollout { dataset: out, divergence })
}

/// Lattice-frame trajectory of a dataset.
pub fn trajectory(case: &CaseSpec, data: &Dataset) -> Result<Trajectory> {
    let solid = case.grid.solid_mask();
    let mut tr = Trajectory::new(case.grid.nx(), case.grid.ny(), case.gas, solid.map(|m| m.to_vec()));
    for fr in &data.frames {
        tr.steps.push(TrajectoryStep {
            t: fr.t,
            lattice: fr.lattice_states(&case.gas, solid)?,
        });
    }
    Ok(tr)
}

/// Errors of `pred` against `reference` at every shared step.
pub fn compare(case: &CaseSpec, pred: &Rollout, reference: &Dataset) -> Result<MetricReport> {
    let p = trajectory(case, &pred.dataset)?;
    let times: Vec<u64> = p.steps.iter().map(|s| s.t).collect();
    let mut r = Dataset::default();
    for t in times {
        if let Some(fr) = reference.at(t) {
            r.push(fr.clone())?;
        }
    }
    evaluate(&p, &trajectory(case, &r)?, pred.divergence.as_ref().map(|d| d.0))
}

/// Row-averaged profiles of `obs`, one per frame.
pub fn profiles(case: &CaseSpec, data: &Dataset, obs: Observable) -> Result<Vec<Vec<f64>>> {
    let tr = trajectory(case, data)?;
    Ok(tr.steps.iter().map(|s| tr.profile(s, obs)).collect())
}

/// Summed relative total-variation growth of the temperature profile of a
/// rollout; a diverged rollout scores infinity.
pub fn rollout_tv_growth(case: &CaseSpec, run: &Rollout) -> Result<f64> {
    if run.divergence.is_some() {
        return Ok(f64::INFINITY);
    }
    Ok(relative_tv_increase(&profiles(case, &run.dataset, Observable::T)?))
}

/// Writes `x,<obs>` rows of the row-averaged profile at step `t`.
pub fn write_profile_csv<W: Write>(case: &CaseSpec, frame: &Frame, obs: Observable, mut w: W) -> Result<()> {
    let mut d = Dataset::default();
    d.push(frame.clone())?;
    let tr = trajectory(case, &d)?;
    writeln!(w, "x,{}", obs.name())?;
    for (x, v) in tr.profile(&tr.steps[0], obs).iter().enumerate() {
        writeln!(w, "{x},{v:e}")?;
    }
    Ok(())
}

/// Writes one row per step with the relative L2 error of each observable.
pub fn write_metrics_csv<W: Write>(report: &MetricReport, mut w: W) -> Result<()> {
    write!(w, "t")?;
    for o in Observable::ALL {
        write!(w, ",err_{}", o.name())?;
    }
    writeln!(w)?;
    for s in &report.steps {
        write!(w, "{}", s.t)?;
        for e in s.errors {
            write!(w, ",{e:e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads the frame of step `t` from a dataset directory.
pub fn load_frame(dir: &Path, t: u64) -> Result<Frame> {
    let read = |s: &str| {
        let path = dir.join(format!("{s}_{t:06}.ndeq"));
        if !path.exists() {
            return Err(Error::Config(format!("no snapshot for t = {t} in {}", dir.display())));
        }
        crate::population::PopulationGrid::load(path)
    };
    Ok(Frame {
        t,
        f: read("f")?,
        g: read("g")?,
        geq: read("geq")?,
    })
}

/// Saves a dataset with `cfg` as its manifest.
pub fn save_dataset(cfg: &RunConfig, case: &CaseSpec, data: &Dataset, dir: &Path, closure: &str) -> Result<()> {
    let manifest = format!(
        "{}grid = {}x{}\ngamma = {}\nprandtl = {}\nmu = {}\nu_shift = {},{}\ntau_min = {}\nrun_closure = {closure}\n",
        cfg.to_text(),
        case.grid.nx(),
        case.grid.ny(),
        case.gas.gamma,
        case.gas.prandtl,
        case.gas.mu,
        case.gas.u_shift[0],
        case.gas.u_shift[1],
        case.gas.tau_min.map_or("off".to_string(), |t| t.to_string()),
    );
    fs::create_dir_all(dir)?;
    data.save(dir, &case.gas, case.grid.solid_mask(), &manifest)
}
