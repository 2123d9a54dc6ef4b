//! Command-line front end.
//!
//! ```text
//! neurde <generate|pretrain|train|simulate|evaluate|export-profile>
//!        [--config FILE] [--KEY VALUE | --KEY=VALUE | KEY=VALUE]...
//! ```
//!
//! Exit codes: 0 success, 2 divergence, 3 configuration error, 1 otherwise.

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neurde::bench::metrics::Observable;
use neurde::bench::Dataset;
use neurde::config::RunConfig;
use neurde::network::{load_checkpoint, save_checkpoint};
use neurde::pipeline::{self, Rollout};
use neurde::training::write_log_csv;
use neurde::Error;

#[derive(Parser)]
#[command(name = "neurde", version, about = "Two-population lattice Boltzmann with a learned energy closure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides: `--key value`, `--key=value` or `key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Newton-closure reference trajectory into `data_dir`.
    Generate(Common),
    /// Supervised pretraining on `data_dir`; writes `checkpoint`.
    Pretrain(Common),
    /// Unrolled training from `init_checkpoint` (or `checkpoint`).
    Train(Common),
    /// Rollout from `t_start` to `t_end` into `sim_dir`.
    Simulate(Common),
    /// Errors of `sim_dir` against `data_dir`.
    Evaluate(Common),
    /// Row-averaged profile of `observable` at `t_profile` as CSV.
    ExportProfile(Common),
}

enum Failure {
    Diverged(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.into())
    }
}

type Action = fn(&RunConfig) -> Result<(), Failure>;

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_args(&common.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn report_rollout(run: &Rollout) -> Result<(), Failure> {
    match &run.divergence {
        Some((t, cause)) => Err(Failure::Diverged(format!("diverged at t = {t}: {cause}"))),
        None => Ok(()),
    }
}

fn generate(cfg: &RunConfig) -> Result<(), Failure> {
    let case = pipeline::build_case(cfg)?;
    let run = match pipeline::generate(cfg, &case) {
        Ok(r) => r,
        Err(e @ Error::Divergence { .. }) => return Err(Failure::Diverged(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    pipeline::save_dataset(cfg, &case, &run.dataset, &cfg.data_dir, "newton")?;
    println!(
        "{}: {} frames in {} (max Newton iterations {}, unconverged solves {}, max residual {:.2e})",
        case.name,
        run.dataset.len(),
        cfg.data_dir.display(),
        run.newton_max_iters,
        run.newton_unconverged,
        run.max_residual
    );
    Ok(())
}

fn pretrain(cfg: &RunConfig) -> Result<(), Failure> {
    let case = pipeline::build_case(cfg)?;
    let data = Dataset::load(&cfg.data_dir)?;
    let (params, report) = pipeline::run_pretrain(cfg, &case, &data)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in report.epoch_loss.iter().enumerate() {
        csv.push_str(&format!("{e},{l:e}\n"));
    }
    fs::write(cfg.out_dir.join("pretrain_loss.csv"), csv)?;
    save_checkpoint(&params, &cfg.checkpoint)?;
    println!("pretrain final MSE {:.3e}; checkpoint {}", report.final_mse, cfg.checkpoint.display());
    Ok(())
}

fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let case = pipeline::build_case(cfg)?;
    let data = Dataset::load(&cfg.data_dir)?;
    let init = cfg.init_checkpoint.as_ref().unwrap_or(&cfg.checkpoint);
    let params = load_checkpoint(init)?;
    let report = pipeline::run_train(cfg, &case, &data, &params)?;
    fs::create_dir_all(&cfg.out_dir)?;
    write_log_csv(&report.log, BufWriter::new(fs::File::create(cfg.out_dir.join("train_log.csv"))?))?;
    save_checkpoint(&report.params, &cfg.checkpoint)?;
    println!(
        "trained {} epochs, {} skipped windows, last mean window loss {:.3e}; checkpoint {}",
        report.epoch_loss.len(),
        report.skipped_windows,
        report.epoch_loss.last().copied().unwrap_or(f64::NAN),
        cfg.checkpoint.display()
    );
    Ok(())
}

fn simulate(cfg: &RunConfig) -> Result<(), Failure> {
    let case = pipeline::build_case(cfg)?;
    let params = match cfg.closure {
        neurde::config::ClosureKind::Neural => Some(load_checkpoint(&cfg.checkpoint)?),
        _ => None,
    };
    let closure = pipeline::closure_spec(cfg, params.as_ref())?;
    let run = if cfg.t_start == 0 {
        let mut st = case.initial_state(closure)?;
        pipeline::rollout_state(&mut st, cfg.t_end)?
    } else {
        let start = pipeline::load_frame(&cfg.data_dir, cfg.t_start)?;
        pipeline::rollout(&case, closure, &pipeline::newton_settings(cfg), &start, cfg.t_end)?
    };
    pipeline::save_dataset(cfg, &case, &run.dataset, &cfg.sim_dir, cfg.closure.name())?;
    println!(
        "{} closure: steps {}..{} written to {}",
        cfg.closure.name(),
        cfg.t_start,
        run.last_t().unwrap_or(cfg.t_start),
        cfg.sim_dir.display()
    );
    report_rollout(&run)
}

fn evaluate(cfg: &RunConfig) -> Result<(), Failure> {
    let case = pipeline::build_case(cfg)?;
    let pred = Dataset::load(&cfg.sim_dir)?;
    let reference = Dataset::load(&cfg.data_dir)?;
    let last = pred.frames.last().map(|f| f.t);
    let divergence = match last {
        Some(t) if t < cfg.t_end => Some((t, "run ended before t_end".to_string())),
        None => return Err(Error::Config(format!("no frames in {}", cfg.sim_dir.display())).into()),
        _ => None,
    };
    let run = Rollout { dataset: pred, divergence };
    let report = pipeline::compare(&case, &run, &reference)?;
    fs::create_dir_all(&cfg.out_dir)?;
    pipeline::write_metrics_csv(&report, BufWriter::new(fs::File::create(cfg.out_dir.join("metrics.csv"))?))?;
    if let Some(s) = report.steps.last() {
        let errs: Vec<String> = Observable::ALL
            .iter()
            .zip(s.errors)
            .map(|(o, e)| format!("{} {e:.3e}", o.name()))
            .collect();
        println!("t = {}: relative L2 {}", s.t, errs.join(", "));
    }
    println!(
        "temperature TV growth {:.4e}; Mach range [{:.3}, {:.3}]",
        pipeline::rollout_tv_growth(&case, &run)?,
        report.mach_min,
        report.mach_max
    );
    report_rollout(&run)
}

fn export_profile(cfg: &RunConfig) -> Result<(), Failure> {
    let case = pipeline::build_case(cfg)?;
    let obs = Observable::parse(&cfg.observable)?;
    let dir = if cfg.profile_from == "data" { &cfg.data_dir } else { &cfg.sim_dir };
    let frame = pipeline::load_frame(dir, cfg.t_profile)?;
    if let Some(parent) = cfg.profile_out.parent() {
        fs::create_dir_all(parent)?;
    }
    pipeline::write_profile_csv(&case, &frame, obs, BufWriter::new(fs::File::create(&cfg.profile_out)?))?;
    println!("{} profile at t = {} written to {}", obs.name(), cfg.t_profile, cfg.profile_out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let (common, run): (&Common, Action) = match &cli.command {
        Command::Generate(c) => (c, generate),
        Command::Pretrain(c) => (c, pretrain),
        Command::Train(c) => (c, train),
        Command::Simulate(c) => (c, simulate),
        Command::Evaluate(c) => (c, evaluate),
        Command::ExportProfile(c) => (c, export_profile),
    };
    let cfg = match load_config(common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged(msg)) => {
            eprintln!("divergence: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 3,
                Error::Divergence { .. } => 2,
                _ => 1,
            })
        }
    }
}
