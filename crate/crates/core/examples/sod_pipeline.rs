//! The whole chain on a shock tube: reference, pretraining, unrolled
//! training and an autoregressive run with the trained closure.
//!
//! Settings come from an optional config file followed by `key=value`
//! overrides. The defaults are the subsonic tube at scale 10, trained on
//! steps 0..500 and predicted over 500..600.
//!
//! ```text
//! cargo run --release --example sod_pipeline -- configs/sod1_desk.conf epochs=2
//! ```

use std::fs;
use std::io::BufWriter;

use neurde::bench::metrics::Observable;
use neurde::config::RunConfig;
use neurde::network::save_checkpoint;
use neurde::pipeline;

fn main() -> neurde::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = match args.first() {
        Some(a) if !a.contains('=') && !a.starts_with("--") => RunConfig::from_file(args.remove(0))?,
        _ => RunConfig::default(),
    };
    cfg.out_dir = "out/examples/sod_pipeline".into();
    cfg.apply_args(&args)?;
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;

    let case = pipeline::build_case(&cfg)?;
    let data = pipeline::generate(&cfg, &case)?.dataset;
    println!("{}: reference of {} frames", case.name, data.len());

    let (pre, report) = pipeline::run_pretrain(&cfg, &case, &data)?;
    println!("pretraining: final MSE {:.3e}", report.final_mse);

    let trained = pipeline::run_train(&cfg, &case, &data, &pre)?;
    for (e, l) in trained.epoch_loss.iter().enumerate() {
        println!("unrolled epoch {e}: mean window loss {l:.4e}");
    }
    save_checkpoint(&trained.params, cfg.out_dir.join("params.ndew"))?;

    let start = data
        .at(cfg.t_start)
        .ok_or_else(|| neurde::Error::Config(format!("no reference frame at t = {}", cfg.t_start)))?;
    let closure = pipeline::closure_spec(&cfg, Some(&trained.params))?;
    let run = pipeline::rollout(&case, closure, &pipeline::newton_settings(&cfg), start, cfg.t_end)?;
    if let Some((t, cause)) = &run.divergence {
        println!("rollout diverged at t = {t}: {cause}");
    }
    let report = pipeline::compare(&case, &run, &data)?;
    println!("{:>5} {:>10} {:>10} {:>10}", "t", "rho", "ux", "T");
    let every = ((cfg.t_end - cfg.t_start) / 10).max(1);
    for s in report.steps.iter().filter(|s| (s.t - cfg.t_start) % every == 0) {
        println!(
            "{:>5} {:>10.3e} {:>10.3e} {:>10.3e}",
            s.t,
            s.get(Observable::Rho),
            s.get(Observable::Ux),
            s.get(Observable::T)
        );
    }
    pipeline::write_metrics_csv(&report, BufWriter::new(fs::File::create(cfg.out_dir.join("metrics.csv"))?))?;
    if let (Some(pred), Some(truth)) = (run.dataset.frames.last(), data.at(run.last_t().unwrap_or(0))) {
        for (name, frame) in [("predicted", pred), ("reference", truth)] {
            let path = cfg.out_dir.join(format!("T_{name}.csv"));
            pipeline::write_profile_csv(&case, frame, Observable::T, BufWriter::new(fs::File::create(&path)?))?;
        }
    }
    println!("metrics and temperature profiles in {}", cfg.out_dir.display());
    Ok(())
}
