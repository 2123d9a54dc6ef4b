//! Newton-closure reference run of a shock tube and a profile export.
//!
//! Generates the trajectory, saves it as a dataset directory and writes the
//! row-averaged profile of the final step as CSV.
//!
//! ```text
//! cargo run --release --example sod_reference -- case=sod2 steps=300 observable=p
//! ```

use std::fs;
use std::io::BufWriter;

use neurde::bench::metrics::Observable;
use neurde::bench::Dataset;
use neurde::config::RunConfig;
use neurde::pipeline;

fn main() -> neurde::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.data_dir = "out/examples/sod_reference".into();
    cfg.profile_out = "out/examples/sod_reference_profile.csv".into();
    cfg.apply_args(&std::env::args().skip(1).collect::<Vec<_>>())?;
    cfg.validate()?;

    let case = pipeline::build_case(&cfg)?;
    println!(
        "{}: {}x{} cells, gamma {}, mu {:.3e}, u_shift {:?}, tau_min {:?}",
        case.name,
        case.grid.nx(),
        case.grid.ny(),
        case.gas.gamma,
        case.gas.mu,
        case.gas.u_shift,
        case.gas.tau_min
    );
    let run = pipeline::generate(&cfg, &case)?;
    println!(
        "{} frames; Newton: max {} iterations, {} unconverged solves, max residual {:.2e}",
        run.dataset.len(),
        run.newton_max_iters,
        run.newton_unconverged,
        run.max_residual
    );
    pipeline::save_dataset(&cfg, &case, &run.dataset, &cfg.data_dir, "newton")?;

    let obs = Observable::parse(&cfg.observable)?;
    let last = run.dataset.frames.last().expect("at least one frame");
    if let Some(dir) = cfg.profile_out.parent() {
        fs::create_dir_all(dir)?;
    }
    pipeline::write_profile_csv(&case, last, obs, BufWriter::new(fs::File::create(&cfg.profile_out)?))?;
    let mut only_last = Dataset::default();
    only_last.push(last.clone())?;
    let profile = &pipeline::profiles(&case, &only_last, obs)?[0];
    let (lo, hi) = profile.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    println!(
        "{} at t = {}: range [{lo:.4}, {hi:.4}]; dataset in {}, profile in {}",
        obs.name(),
        last.t,
        cfg.data_dir.display(),
        cfg.profile_out.display()
    );
    Ok(())
}
