//! Error metrics, the polynomial fourth-moment diagnostic, local Mach
//! extrema and total variation.

use crate::closures::geq_poly_raw;
use crate::error::{Error, Result};
use crate::lattice::{CX, Q};
use crate::moments::{local_mach, maxwellian_higher_moments, GasParams, MacroState};
use crate::population::PopulationGrid;
use crate::solver::{Equilibria, Recorder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Rho,
    Ux,
    Uy,
    T,
    P,
}

impl Observable {
    pub const ALL: [Observable; 5] = [Observable::Rho, Observable::Ux, Observable::Uy, Observable::T, Observable::P];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Rho => "rho",
            Observable::Ux => "ux",
            Observable::Uy => "uy",
            Observable::T => "T",
            Observable::P => "p",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown observable '{s}'")))
    }

    pub fn of(self, s: &MacroState, gas: &GasParams) -> f64 {
        match self {
            Observable::Rho => s.rho,
            Observable::Ux => s.ux,
            Observable::Uy => s.uy,
            Observable::T => s.t,
            Observable::P => s.pressure(gas),
        }
    }
}

/// `||a - b||_2 / ||b||_2` (absolute norm when `b` vanishes).
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Total variation `sum_j |w_{j+1} - w_j|`.
pub fn total_variation(w: &[f64]) -> f64 {
    w.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
}

/// Lattice-frame states of one recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub t: u64,
    pub lattice: Vec<MacroState>,
}

/// Macroscopic trajectory on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub nx: usize,
    pub ny: usize,
    pub gas: GasParams,
    pub solid: Option<Vec<bool>>,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn new(nx: usize, ny: usize, gas: GasParams, solid: Option<Vec<bool>>) -> Self {
        Trajectory {
            nx,
            ny,
            gas,
            solid,
            steps: Vec::new(),
        }
    }

    fn is_solid(&self, c: usize) -> bool {
        self.solid.as_ref().is_some_and(|m| m[c])
    }

    pub fn at(&self, t: u64) -> Option<&TrajectoryStep> {
        self.steps.iter().find(|s| s.t == t)
    }

    /// Physical-frame observable over fluid cells.
    pub fn field(&self, step: &TrajectoryStep, obs: Observable) -> Vec<f64> {
        step.lattice
            .iter()
            .enumerate()
            .filter(|(c, _)| !self.is_solid(*c))
            .map(|(_, s)| obs.of(&s.shifted(self.gas.u_shift, &self.gas), &self.gas))
            .collect()
    }

    /// Row-averaged profile along x of a physical-frame observable.
    pub fn profile(&self, step: &TrajectoryStep, obs: Observable) -> Vec<f64> {
        (0..self.nx)
            .map(|x| {
                let mut acc = 0.0;
                let mut n = 0usize;
                for y in 0..self.ny {
                    let c = y * self.nx + x;
                    if !self.is_solid(c) {
                        acc += obs.of(&step.lattice[c].shifted(self.gas.u_shift, &self.gas), &self.gas);
                        n += 1;
                    }
                }
                if n > 0 {
                    acc / n as f64
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Records lattice states of every pre-step state.
pub struct TrajectoryRecorder {
    pub trajectory: Trajectory,
}

impl Recorder for TrajectoryRecorder {
    fn record(&mut self, t: u64, _: &PopulationGrid, _: &PopulationGrid, eq: &Equilibria, _: &GasParams) -> Result<()> {
        self.trajectory.steps.push(TrajectoryStep {
            t,
            lattice: eq.states.clone(),
        });
        Ok(())
    }
}

/// `|| R_xx[g_eq^poly] - R_xx^MB ||_2` over fluid cells, with
/// `R_xx[g] = sum_i c_ix^2 g_i`.
pub fn r_xx_poly_error(states: &[MacroState], solid: Option<&[bool]>) -> f64 {
    let mut acc = 0.0;
    for (c, s) in states.iter().enumerate() {
        if solid.is_some_and(|m| m[c]) {
            continue;
        }
        let g = geq_poly_raw(s);
        let rxx: f64 = (0..Q).map(|i| CX[i] * CX[i] * g[i]).sum();
        let d = rxx - maxwellian_higher_moments(s).r[0][0];
        acc += d * d;
    }
    acc.sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepErrors {
    pub t: u64,
    /// Relative L2 errors in the order of [`Observable::ALL`].
    pub errors: [f64; 5],
}

impl StepErrors {
    pub fn get(&self, obs: Observable) -> f64 {
        self.errors[Observable::ALL.iter().position(|o| *o == obs).unwrap()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub steps: Vec<StepErrors>,
    pub divergence_step: Option<u64>,
    /// `(t, ||R_xx^poly - R_xx^MB||)` of the predicted states.
    pub r_moment: Vec<(u64, f64)>,
    pub mach_min: f64,
    pub mach_max: f64,
}

impl MetricReport {
    pub fn at(&self, t: u64) -> Option<&StepErrors> {
        self.steps.iter().find(|s| s.t == t)
    }
}

/// Compares `pred` against `reference` at every common time stamp.
pub fn evaluate(pred: &Trajectory, reference: &Trajectory, divergence_step: Option<u64>) -> Result<MetricReport> {
    if (pred.nx, pred.ny) != (reference.nx, reference.ny) {
        return Err(Error::Shape(format!(
            "trajectory grids differ: {}x{} vs {}x{}",
            pred.nx, pred.ny, reference.nx, reference.ny
        )));
    }
    let mut steps = Vec::new();
    let mut r_moment = Vec::new();
    let mut mach_min = f64::INFINITY;
    let mut mach_max: f64 = 0.0;
    for p in &pred.steps {
        r_moment.push((p.t, r_xx_poly_error(&p.lattice, pred.solid.as_deref())));
        for (c, s) in p.lattice.iter().enumerate() {
            if pred.is_solid(c) {
                continue;
            }
            let m = local_mach(&s.shifted(pred.gas.u_shift, &pred.gas), &pred.gas);
            mach_min = mach_min.min(m);
            mach_max = mach_max.max(m);
        }
        let Some(r) = reference.at(p.t) else {
            continue;
        };
        if r.lattice.len() != p.lattice.len() {
            return Err(Error::Shape(format!("step {} has mismatched cell counts", p.t)));
        }
        let mut errors = [0.0; 5];
        for (k, obs) in Observable::ALL.iter().enumerate() {
            errors[k] = relative_l2(&pred.field(p, *obs), &reference.field(r, *obs));
        }
        steps.push(StepErrors { t: p.t, errors });
    }
    if steps.is_empty() && !pred.steps.is_empty() {
        return Err(Error::Shape("trajectories share no time stamps".into()));
    }
    Ok(MetricReport {
        steps,
        divergence_step,
        r_moment,
        mach_min: if mach_min.is_finite() { mach_min } else { 0.0 },
        mach_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(scale: f64) -> Trajectory {
        let gas = GasParams::new(1.4, 0.71, 0.01).unwrap();
        let mut tr = Trajectory::new(3, 2, gas, None);
        for t in 0..3 {
            let lattice = (0..6)
                .map(|c| {
                    let s = MacroState::new(1.0 + 0.1 * c as f64, 0.05 * c as f64, 0.01, 0.2 + 0.01 * t as f64, &gas);
                    MacroState::new(s.rho * scale, s.ux * scale, s.uy * scale, s.t * scale, &gas)
                })
                .collect();
            tr.steps.push(TrajectoryStep { t, lattice });
        }
        tr
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let a = traj(1.0);
        let r = evaluate(&a, &a, None).unwrap();
        assert!(r.steps.iter().all(|s| s.errors.iter().all(|e| *e == 0.0)));
    }

    #[test]
    fn scaled_prediction_has_relative_error_point_one() {
        let a = traj(1.1);
        let b = traj(1.0);
        let r = evaluate(&a, &b, None).unwrap();
        for s in &r.steps {
            for obs in [Observable::Rho, Observable::Ux, Observable::Uy, Observable::T] {
                assert!((s.get(obs) - 0.1).abs() < 1e-12, "{:?}", obs);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = traj(1.0);
        let mut b = traj(1.0);
        b.nx = 2;
        b.ny = 3;
        assert!(matches!(evaluate(&a, &b, None), Err(Error::Shape(_))));
    }

    #[test]
    fn total_variation_example() {
        assert_eq!(total_variation(&[0.0, 1.0, 1.0, 0.0]), 2.0);
    }
}
