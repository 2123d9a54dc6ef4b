#![allow(dead_code)]

use std::rc::Rc;

use neurde::bench::{Dataset, DatasetRecorder};
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

pub fn small_gas() -> GasParams {
    GasParams::new(1.4, 0.71, 0.05).unwrap()
}

/// Smooth random field on an `nx x ny` grid.
pub fn random_field(nx: usize, ny: usize, gas: &GasParams, seed: u64) -> Vec<MacroState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..nx * ny)
        .map(|_| {
            MacroState::new(
                rng.gen_range(0.8..1.2),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(-0.05..0.05),
                rng.gen_range(0.3..0.4),
                gas,
            )
        })
        .collect()
}

/// Newton-closure trajectory of `steps + 1` frames (t = 0..=steps).
pub fn newton_dataset(grid: &Grid, gas: GasParams, field: &[MacroState], steps: u64) -> Dataset {
    let mut st = SolverState::lift(grid.clone(), gas, ClosureSpec::Newton(NewtonSettings::default()), field, None).unwrap();
    let mut rec = DatasetRecorder::new(1);
    st.run(steps + 1, &mut rec).unwrap();
    rec.dataset
}

pub struct SmallProblem {
    pub ctx: StepContext,
    pub data: Dataset,
    pub gas: GasParams,
}

pub fn small_problem(nx: usize, ny: usize, steps: u64, seed: u64) -> SmallProblem {
    let gas = small_gas();
    let grid = Grid::periodic(nx, ny).unwrap();
    let field = random_field(nx, ny, &gas, seed);
    let data = newton_dataset(&grid, gas, &field, steps);
    let ctx = StepContext::new(grid, gas, None).unwrap();
    SmallProblem { ctx, data, gas }
}

/// Network fitted to the equilibria of `data` well enough to keep a short
/// unroll physical.
pub fn fitted_params(p: &SmallProblem, width: usize, seed: u64, epochs: usize) -> MlpParams {
    let set = PretrainSet::from_dataset(&p.data, &p.gas, None, u64::MAX, 1).unwrap();
    let mut params = MlpParams::new(width, width, seed);
    let (mean, std) = set.input_stats();
    params.standardize_inputs(mean, std);
    let cfg = PretrainConfig {
        epochs,
        lr: StepSchedule {
            base: 3e-3,
            halve_every: Some(epochs / 4 + 1),
        },
        batch_size: 16,
        seed,
        ..PretrainConfig::default()
    };
    pretrain(&set, &params, &cfg).unwrap().0
}

pub fn targets(data: &neurde::bench::Dataset, t0: u64, n: usize) -> Vec<StepTarget<'_>> {
    (1..=n as u64)
        .map(|r| {
            let fr = data.at(t0 + r).unwrap();
            StepTarget { f: &fr.f, geq: &fr.geq }
        })
        .collect()
}

/// Central-difference check of the window gradient on a few coordinates.
pub fn gradient_check(seed: u64, steps: usize, w: WindowWeights, renormalize: bool) -> f64 {
    let p = small_problem(4, 4, steps as u64, 100 + seed);
    let base = fitted_params(&p, 10, 7, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flat = base.flatten();
    for v in flat.iter_mut() {
        *v += rng.gen_range(-0.02..0.02);
    }
    let mut params = base.clone();
    params.assign_flat(&flat).unwrap();

    let mut ctx = p.ctx.clone();
    ctx.renormalize = renormalize;
    let ctx = Rc::new(ctx);
    let frame = p.data.at(0).unwrap();
    let tg = targets(&p.data, 0, steps);
    let eval = |par: &MlpParams, grad: bool| {
        window_loss_and_grad(
            &ctx,
            WindowClosure::Network(par),
            ctx.merge(&frame.f, &frame.g).unwrap(),
            &tg,
            w,
            grad,
        )
        .unwrap()
    };
    let g = eval(&params, true).grad;
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for _ in 0..12 {
        let k = rng.gen_range(0..flat.len());
        let h = 1e-5;
        let mut plus = params.clone();
        let mut fp = flat.clone();
        fp[k] += h;
        plus.assign_flat(&fp).unwrap();
        let mut minus = params.clone();
        fp[k] -= 2.0 * h;
        minus.assign_flat(&fp).unwrap();
        let fd = (eval(&plus, false).loss - eval(&minus, false).loss) / (2.0 * h);
        let rel = (fd - g[k]).abs() / fd.abs().max(1e-3 * gmax).max(1e-300);
        worst = worst.max(rel);
    }
    worst
}
