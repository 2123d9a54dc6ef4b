//! Backpropagation through the unrolled solver against finite differences.
//!
//! A 4x4 periodic box with a random smooth state is advanced a few steps
//! with the Newton closure to get targets. A small network is fitted to those
//! equilibria, then the window loss gradient from the tape is compared with
//! central differences on a few random parameters.
//!
//! ```text
//! cargo run --release --example gradient_check -- 3
//! ```

use std::rc::Rc;

use neurde::bench::DatasetRecorder;
use neurde::closures::NewtonSettings;
use neurde::grid::Grid;
use neurde::moments::{GasParams, MacroState};
use neurde::network::MlpParams;
use neurde::solver::{ClosureSpec, SolverState};
use neurde::training::{
    pretrain, window_loss_and_grad, PretrainConfig, PretrainSet, StepContext, StepSchedule, StepTarget, WindowClosure,
    WindowWeights,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> neurde::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let gas = GasParams::new(1.4, 0.71, 0.05)?;
    let grid = Grid::periodic(4, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let field: Vec<MacroState> = (0..16)
        .map(|_| {
            MacroState::new(
                rng.gen_range(0.8..1.2),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(0.3..0.4),
                &gas,
            )
        })
        .collect();
    let mut st = SolverState::lift(grid.clone(), gas, ClosureSpec::Newton(NewtonSettings::default()), &field, None)?;
    let mut rec = DatasetRecorder::new(1);
    st.run(steps + 1, &mut rec)?;
    let data = rec.dataset;

    let set = PretrainSet::from_dataset(&data, &gas, None, u64::MAX, 1)?;
    let mut params = MlpParams::new(10, 10, 7);
    let (mean, std) = set.input_stats();
    params.standardize_inputs(mean, std);
    let cfg = PretrainConfig {
        epochs: 1000,
        lr: StepSchedule {
            base: 3e-3,
            halve_every: Some(250),
        },
        batch_size: 16,
        ..PretrainConfig::default()
    };
    let (params, report) = pretrain(&set, &params, &cfg)?;
    println!("{} parameters, equilibrium MSE after fitting {:.2e}", params.flatten().len(), report.final_mse);

    let ctx = Rc::new(StepContext::new(grid, gas, None)?);
    let start = data.at(0).expect("frame 0");
    let targets: Vec<StepTarget> = (1..=steps)
        .map(|t| {
            let fr = data.at(t).expect("recorded frame");
            StepTarget { f: &fr.f, geq: &fr.geq }
        })
        .collect();
    let weights = WindowWeights {
        alpha: 0.5,
        ..WindowWeights::default()
    };
    let loss = |p: &MlpParams, grad: bool| {
        window_loss_and_grad(&ctx, WindowClosure::Network(p), ctx.merge(&start.f, &start.g)?, &targets, weights, grad)
    };
    let base = loss(&params, true)?;
    println!("window of {steps} steps: loss {:.6e}", base.loss);
    println!("{:>6} {:>14} {:>14} {:>10}", "param", "tape", "central diff", "rel err");
    let flat = params.flatten();
    // relative errors are floored at a thousandth of the largest gradient
    let floor = 1e-3 * base.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let h = 1e-5;
    for _ in 0..10 {
        let k = rng.gen_range(0..flat.len());
        let shifted = |d: f64| -> neurde::Result<f64> {
            let mut v = flat.clone();
            v[k] += d;
            let mut p = params.clone();
            p.assign_flat(&v)?;
            Ok(loss(&p, false)?.loss)
        };
        let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        let g = base.grad[k];
        println!("{k:>6} {g:>14.6e} {fd:>14.6e} {:>10.2e}", (g - fd).abs() / fd.abs().max(floor));
    }
    Ok(())
}
