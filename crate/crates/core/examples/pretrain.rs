//! Supervised fit of the network closure to Newton equilibria.
//!
//! Generates (or loads, with `data_from=DIR`) a shock-tube reference, builds
//! the deduplicated pretraining set and fits the network, printing the loss
//! curve.
//!
//! ```text
//! cargo run --release --example pretrain -- pretrain_epochs=50 width=16
//! ```

use neurde::bench::Dataset;
use neurde::config::RunConfig;
use neurde::network::save_checkpoint;
use neurde::pipeline;
use neurde::training::evaluate_mse;

fn main() -> neurde::Result<()> {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let data_from = args.iter().position(|a| a.starts_with("data_from=")).map(|k| args.remove(k)[10..].to_string());
    let mut cfg = RunConfig::default();
    cfg.steps = cfg.t_train;
    cfg.checkpoint = "out/examples/pretrained.ndew".into();
    cfg.apply_args(&args)?;
    cfg.validate()?;

    let case = pipeline::build_case(&cfg)?;
    let data = match data_from {
        Some(dir) => Dataset::load(dir)?,
        None => pipeline::generate(&cfg, &case)?.dataset,
    };
    let set = pipeline::pretrain_set(&cfg, &case, &data)?;
    let init = pipeline::initial_params(&cfg, &set);
    println!(
        "{} samples from {} frames; width {}; initial MSE {:.3e}",
        set.len(),
        data.len(),
        cfg.width,
        evaluate_mse(&init, &set)?
    );
    let (params, report) = pipeline::run_pretrain(&cfg, &case, &data)?;
    let every = (report.epoch_loss.len() / 10).max(1);
    for (e, l) in report.epoch_loss.iter().enumerate() {
        if e % every == 0 || e + 1 == report.epoch_loss.len() {
            println!("epoch {e:>4}  loss {l:.4e}");
        }
    }
    println!("final MSE {:.4e}", report.final_mse);
    if let Some(dir) = cfg.checkpoint.parent() {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(&params, &cfg.checkpoint)?;
    println!("checkpoint written to {}", cfg.checkpoint.display());
    Ok(())
}
