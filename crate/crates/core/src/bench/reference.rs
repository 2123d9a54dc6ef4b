//! Reference trajectories from the Newton (entropic) closure.

use super::cases::CaseSpec;
use super::dataset::{Dataset, DatasetRecorder, Frame};
use crate::closures::{energy_targets, NewtonSettings};
use crate::error::Result;
use crate::lattice::{CX, CY, Q};
use crate::solver::{ClosureSpec, SolverState};

#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub dataset: Dataset,
    pub final_state: SolverState,
    /// Largest Newton iteration count seen in any cell.
    pub newton_max_iters: usize,
    /// Cell solves that hit the iteration cap.
    pub newton_unconverged: usize,
    /// Largest closure moment residual, relative to `max(1, |target|)`.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ReferenceOptions {
    pub newton: NewtonSettings,
    pub warm_start: bool,
    /// Record every `stride`-th step (the final step is always recorded).
    pub stride: u64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            newton: NewtonSettings::default(),
            warm_start: true,
            stride: 1,
        }
    }
}

/// Runs `steps` steps of `case` with the Newton closure, recording
/// `{f, g, g_eq}` at `t = 0, stride, ...` and at `t = steps`.
pub fn generate_reference(case: &CaseSpec, steps: u64, opts: &ReferenceOptions) -> Result<ReferenceRun> {
    let mut state = case.initial_state(ClosureSpec::Newton(opts.newton))?;
    state.warm_start = opts.warm_start;
    let mut rec = DatasetRecorder::new(opts.stride);
    state.run(steps, &mut rec)?;
    let last = state.equilibria()?;
    rec.newton_max_iters = rec.newton_max_iters.max(last.newton_max_iters);
    rec.newton_unconverged += last.newton_unconverged;
    if rec.dataset.frames.last().map(|f| f.t) != Some(state.t) {
        rec.dataset.push(Frame {
            t: state.t,
            f: state.f.clone(),
            g: state.g.clone(),
            geq: last.geq,
        })?;
    }
    let mut max_residual: f64 = 0.0;
    let solid = case.grid.solid_mask();
    for fr in &rec.dataset.frames {
        let states = fr.lattice_states(&case.gas, solid)?;
        for (c, s) in states.iter().enumerate() {
            if solid.is_some_and(|m| m[c]) {
                continue;
            }
            let g = fr.geq.cell(c);
            let (m0, q) = energy_targets(s);
            let sum: f64 = g.iter().sum();
            let qx: f64 = (0..Q).map(|i| CX[i] * g[i]).sum();
            let qy: f64 = (0..Q).map(|i| CY[i] * g[i]).sum();
            max_residual = max_residual
                .max((sum - m0).abs() / m0.abs().max(1.0))
                .max((qx - q[0]).abs() / q[0].abs().max(1.0))
                .max((qy - q[1]).abs() / q[1].abs().max(1.0));
        }
    }
    Ok(ReferenceRun {
        dataset: rec.dataset,
        final_state: state,
        newton_max_iters: rec.newton_max_iters,
        newton_unconverged: rec.newton_unconverged,
        max_residual,
    })
}
