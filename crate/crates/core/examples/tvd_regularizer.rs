//! Effect of the total-variation penalty on the transonic tube.
//!
//! One pretrained network is fine-tuned twice with the same seed, once
//! without the penalty and once with `alpha2` ramped linearly to its final
//! value. Both are then run from `t_start` to `t_end`, and the summed
//! relative growth of the temperature profile's total variation is printed
//! for each.
//!
//! ```text
//! cargo run --release --example tvd_regularizer -- alpha2=0.02
//! ```

use neurde::bench::metrics::{total_variation, Observable};
use neurde::config::RunConfig;
use neurde::pipeline;
use neurde::bench::Dataset;
use neurde::training::{relative_tv_increase, tvd_penalty_from_tv};

fn main() -> neurde::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.case = "sod2".into();
    cfg.tau_min = Some(0.8);
    cfg.steps = 500;
    cfg.lr = 1e-4;
    cfg.epochs = 4;
    cfg.alpha2 = 1e-2;
    cfg.t_start = 200;
    cfg.t_end = 300;
    cfg.apply_args(&std::env::args().skip(1).collect::<Vec<_>>())?;
    cfg.validate()?;

    println!("penalty of the TV sequence (3, 2, 4): {}", tvd_penalty_from_tv(&[3.0, 2.0, 4.0]));

    let case = pipeline::build_case(&cfg)?;
    let data = pipeline::generate(&cfg, &case)?.dataset;
    let start = data
        .at(cfg.t_start)
        .ok_or_else(|| neurde::Error::Config(format!("no reference frame at t = {}", cfg.t_start)))?;
    let mut window = Dataset::default();
    for f in data.frames.iter().filter(|f| (cfg.t_start..=cfg.t_end).contains(&f.t)) {
        window.push(f.clone())?;
    }
    let profiles = pipeline::profiles(&case, &window, Observable::T)?;
    let tv: Vec<f64> = profiles.iter().map(|p| total_variation(p)).collect();
    println!(
        "reference: TV of T goes {:.4} -> {:.4}, summed relative growth {:.4e}",
        tv[0],
        tv[tv.len() - 1],
        relative_tv_increase(&profiles)
    );

    let (pre, _) = pipeline::run_pretrain(&cfg, &case, &data)?;
    for (label, alpha2) in [("alpha2 = 0", 0.0), ("alpha2 ramp", cfg.alpha2)] {
        let mut c = cfg.clone();
        c.alpha2 = alpha2;
        c.tvd_ramp = alpha2 > 0.0;
        let trained = pipeline::run_train(&c, &case, &data, &pre)?;
        let closure = pipeline::closure_spec(&c, Some(&trained.params))?;
        let run = pipeline::rollout(&case, closure, &pipeline::newton_settings(&c), start, c.t_end)?;
        let growth = pipeline::rollout_tv_growth(&case, &run)?;
        let err = pipeline::compare(&case, &run, &data)?
            .steps
            .last()
            .map_or(f64::NAN, |s| s.get(Observable::T));
        println!(
            "{label:<12} TV growth {growth:.4e}; T error at t = {} {err:.3e}{}",
            run.last_t().unwrap_or(c.t_start),
            run.divergence.map_or(String::new(), |(t, cause)| format!(" (diverged at {t}: {cause})"))
        );
    }
    Ok(())
}
