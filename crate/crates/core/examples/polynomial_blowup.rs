//! The polynomial energy closure on the transonic shock tube.
//!
//! With the physical checks switched off the run keeps going, so the growth
//! of the second-moment mismatch `|| R_xx[g_eq^poly] - R_xx^MB ||` can be
//! watched step by step until the fields stop being finite. A second run with
//! the default checks reports the step where the solver gives up.
//!
//! ```text
//! cargo run --release --example polynomial_blowup -- scale=10
//! ```

use neurde::bench::metrics::r_xx_poly_error;
use neurde::config::RunConfig;
use neurde::pipeline;
use neurde::solver::{ClosureSpec, StateChecks};

fn main() -> neurde::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.case = "sod2".into();
    cfg.apply_args(&std::env::args().skip(1).collect::<Vec<_>>())?;
    let case = pipeline::build_case(&cfg)?;

    let mut st = case.initial_state(ClosureSpec::Polynomial)?;
    st.checks = StateChecks::FiniteOnly;
    println!("step  R_xx error   min f      min g");
    while st.t <= 30 {
        let err = r_xx_poly_error(&st.raw_lattice_states(), case.grid.solid_mask());
        let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("{:>4}  {err:<11.4e} {:<+10.3e} {:+.3e}", st.t, min(st.f.as_slice()), min(st.g.as_slice()));
        if let Err(e) = st.step() {
            println!("stopped: {e}");
            break;
        }
    }

    let mut st = case.initial_state(ClosureSpec::Polynomial)?;
    let run = pipeline::rollout_state(&mut st, 100)?;
    match run.divergence {
        Some((t, cause)) => println!("with physical checks: divergence at t = {t} ({cause})"),
        None => println!("with physical checks: no divergence in 100 steps"),
    }

    let mut st = case.initial_state(ClosureSpec::Newton(pipeline::newton_settings(&cfg)))?;
    let run = pipeline::rollout_state(&mut st, 100)?;
    println!(
        "newton closure, same case: {}",
        run.divergence.map_or("100 steps without divergence".to_string(), |(t, c)| format!("diverged at {t}: {c}"))
    );
    Ok(())
}
