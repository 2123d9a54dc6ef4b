//! Benchmark configurations: the two Sod shock tubes and the supersonic
//! cylinder, with a `scale` divisor for desk-sized runs.

use crate::boundary::InletCondition;
use crate::closures::NewtonSettings;
use crate::error::{Error, Result};
use crate::grid::{Boundaries, EdgeKind, Grid};
use crate::moments::{GasParams, MacroState};
use crate::solver::{ClosureSpec, SolverState};

/// Full-scale length of the shock tube in cells.
pub const SOD_LENGTH: usize = 3001;
/// Rows of the quasi-1D strip.
pub const SOD_ROWS: usize = 5;
/// Viscosity used for the subsonic tube.
pub const SOD1_MU: f64 = 0.025;
/// Viscosity of the transonic tube.
pub const SOD2_MU: f64 = 1e-4;
/// Reference temperature `p0 / (R rho0)` placing the normalized transonic
/// states inside the lattice temperature range.
pub const SOD2_T_REF: f64 = 0.2;
/// Relaxation-time floor for the transonic tube. Without it BGK at
/// `tau1 ~ 0.5003` breaks down on the initial jump within a few steps.
pub const SOD2_TAU_MIN: f64 = 0.6;

pub const CYLINDER_RE: f64 = 300.0;
pub const CYLINDER_MACH: f64 = 1.8;
pub const CYLINDER_T: f64 = 0.2;
pub const CYLINDER_RADIUS: usize = 20;
pub const CYLINDER_CENTER: (usize, usize) = (166, 149);

/// Temperature from density and pressure via the ideal-gas law, `p / (R rho)`.
pub fn temperature_from_pressure(rho: f64, p: f64, r: f64) -> f64 {
    p / (r * rho)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Piecewise constant: `left` for `x <= split`, `right` otherwise.
    Riemann {
        left: MacroState,
        right: MacroState,
        split: usize,
    },
    Uniform(MacroState),
}

impl InitialCondition {
    pub fn state_at(&self, x: usize, _y: usize) -> MacroState {
        match self {
            InitialCondition::Riemann { left, right, split } => {
                if x <= *split {
                    *left
                } else {
                    *right
                }
            }
            InitialCondition::Uniform(s) => *s,
        }
    }
}

/// Everything needed to set up and evaluate one benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSpec {
    pub name: String,
    pub grid: Grid,
    pub gas: GasParams,
    /// Physical-frame initial condition.
    pub initial: InitialCondition,
    /// Physical-frame inlet state for Dirichlet edges.
    pub inlet: Option<MacroState>,
    pub t_train: u64,
    pub t_eval: u64,
    pub scale: usize,
}

impl CaseSpec {
    pub fn initial_field(&self) -> Vec<MacroState> {
        (0..self.grid.cells())
            .map(|c| {
                let (x, y) = self.grid.coords(c);
                self.initial.state_at(x, y)
            })
            .collect()
    }

    /// Lattice-frame inlet populations.
    pub fn inlet_condition(&self, newton: &NewtonSettings) -> Result<Option<InletCondition>> {
        self.inlet
            .map(|s| {
                let shift = self.gas.u_shift;
                InletCondition::new(s.shifted([-shift[0], -shift[1]], &self.gas), newton)
            })
            .transpose()
    }

    /// Solver state lifted from the initial condition.
    pub fn initial_state(&self, closure: ClosureSpec) -> Result<SolverState> {
        let newton = match &closure {
            ClosureSpec::Newton(s) => *s,
            _ => NewtonSettings::default(),
        };
        let inlet = self.inlet_condition(&newton)?;
        SolverState::lift(self.grid.clone(), self.gas, closure, &self.initial_field(), inlet)
    }
}

/// The subsonic (`case = 1`) or transonic (`case = 2`) shock tube.
///
/// `scale` must divide `SOD_LENGTH - 1`; the tube has
/// `(SOD_LENGTH - 1) / scale + 1` cells and `SOD_ROWS` periodic rows.
pub fn make_sod(case: u8, scale: usize) -> Result<CaseSpec> {
    if scale == 0 || !(SOD_LENGTH - 1).is_multiple_of(scale) {
        return Err(Error::Config(format!(
            "sod scale must divide {}, got {scale}",
            SOD_LENGTH - 1
        )));
    }
    let nx = (SOD_LENGTH - 1) / scale + 1;
    let grid = Grid::new(
        nx,
        SOD_ROWS,
        Boundaries {
            left: EdgeKind::Neumann,
            right: EdgeKind::Neumann,
            bottom: EdgeKind::Periodic,
            top: EdgeKind::Periodic,
        },
    )?;
    // x / L_x <= 1/2 on cell centres
    let split = (nx - 1) / 2;
    let (name, gas, left, right) = match case {
        1 => {
            let gas = GasParams::new(2.0, 0.71, SOD1_MU)?.with_shift([3.0 / 50.0, 0.0]);
            let left = MacroState::new(0.5, 0.0, 0.0, 0.2, &gas);
            let right = MacroState::new(2.5, 0.0, 0.0, 0.025, &gas);
            ("sod1", gas, left, right)
        }
        2 => {
            let mut gas = GasParams::new(1.4, 0.71, SOD2_MU)?.with_shift([2.0 / 5.0, 0.0]);
            gas.tau_min = Some(SOD2_TAU_MIN);
            let t = |rho: f64, p: f64| SOD2_T_REF * temperature_from_pressure(rho, p, gas.r);
            let left = MacroState::new(1.0, 0.0, 0.0, t(1.0, 1.0), &gas);
            let right = MacroState::new(0.125, 0.0, 0.0, t(0.125, 0.1), &gas);
            ("sod2", gas, left, right)
        }
        other => return Err(Error::Config(format!("sod case must be 1 or 2, got {other}"))),
    };
    Ok(CaseSpec {
        name: name.into(),
        grid,
        gas,
        initial: InitialCondition::Riemann { left, right, split },
        inlet: None,
        t_train: 500,
        t_eval: 600,
        scale,
    })
}

/// Far-field speed `Ma * sqrt(gamma T)`.
pub fn cylinder_inlet_speed(gamma: f64) -> f64 {
    CYLINDER_MACH * (gamma * CYLINDER_T).sqrt()
}

/// Supersonic flow past a cylinder in a `25r x 15r` channel.
pub fn make_cylinder(scale: usize) -> Result<CaseSpec> {
    if scale == 0 {
        return Err(Error::Config("cylinder scale must be >= 1".into()));
    }
    let nx = 25 * CYLINDER_RADIUS / scale;
    let ny = 15 * CYLINDER_RADIUS / scale;
    let r = CYLINDER_RADIUS as f64 / scale as f64;
    let cx = CYLINDER_CENTER.0 as f64 / scale as f64;
    let cy = CYLINDER_CENTER.1 as f64 / scale as f64;
    if r < 1.0 || cx - r < 1.0 || cy - r < 1.0 || cx + r > (nx - 2) as f64 || cy + r > (ny - 2) as f64 {
        return Err(Error::Config(format!("cylinder does not fit the grid at scale {scale}")));
    }
    let gamma = 1.4;
    let speed = cylinder_inlet_speed(gamma);
    let rho_inf = 1.0;
    let mu = rho_inf * speed * 2.0 * r / CYLINDER_RE;
    let shift = 0.6 * speed;
    let gas = GasParams::new(gamma, 0.71, mu)?.with_shift([shift, 0.0]);
    let mut mask = vec![false; nx * ny];
    for y in 0..ny {
        for x in 0..nx {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if dx * dx + dy * dy <= r * r {
                mask[y * nx + x] = true;
            }
        }
    }
    let grid = Grid::new(
        nx,
        ny,
        Boundaries {
            left: EdgeKind::Dirichlet,
            right: EdgeKind::Neumann,
            bottom: EdgeKind::FreeStream,
            top: EdgeKind::FreeStream,
        },
    )?
    .with_solid(mask)?;
    let inflow = MacroState::new(rho_inf, speed, 0.0, CYLINDER_T, &gas);
    Ok(CaseSpec {
        name: "cylinder".into(),
        grid,
        gas,
        initial: InitialCondition::Uniform(inflow),
        inlet: Some(inflow),
        t_train: 500,
        t_eval: 600,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::local_mach;

    #[test]
    fn sod_case_1_states() {
        for scale in [1, 10] {
            let c = make_sod(1, scale).unwrap();
            assert_eq!(c.gas.gamma, 2.0);
            let l = c.initial.state_at(0, 0);
            let r = c.initial.state_at(c.grid.nx() - 1, 0);
            assert_eq!((l.rho, l.ux, l.uy, l.t), (0.5, 0.0, 0.0, 0.2));
            assert_eq!((r.rho, r.ux, r.uy, r.t), (2.5, 0.0, 0.0, 0.025));
        }
        assert_eq!(make_sod(1, 1).unwrap().grid.nx(), 3001);
        assert_eq!(make_sod(1, 10).unwrap().grid.nx(), 301);
        assert!(make_sod(1, 7).is_err());
        assert!(make_sod(3, 10).is_err());
    }

    #[test]
    fn sod_case_2_temperature() {
        assert!((temperature_from_pressure(0.125, 0.1, 1.0) - 0.8).abs() < 1e-15);
        let c = make_sod(2, 10).unwrap();
        let l = c.initial.state_at(0, 0);
        let r = c.initial.state_at(300, 0);
        assert!((r.t / l.t - 0.8).abs() < 1e-15);
        assert!((r.rho * r.t / (l.rho * l.t) - 0.1).abs() < 1e-15);
        assert_eq!(c.gas.u_shift, [0.4, 0.0]);
    }

    #[test]
    fn split_is_at_the_middle() {
        let c = make_sod(1, 10).unwrap();
        assert_eq!(c.initial.state_at(150, 0).rho, 0.5);
        assert_eq!(c.initial.state_at(151, 0).rho, 2.5);
    }

    #[test]
    fn cylinder_geometry_and_constants() {
        let c = make_cylinder(1).unwrap();
        assert_eq!((c.grid.ny(), c.grid.nx()), (300, 500));
        assert!(c.grid.is_solid(c.grid.index(166, 149)));
        assert!(!c.grid.is_solid(c.grid.index(166 + 21, 149)));
        let u = cylinder_inlet_speed(1.4);
        assert!((u - 0.9524).abs() < 1e-4);
        assert!((c.gas.mu - 0.12699).abs() < 1e-5);
        let inflow = c.inlet.unwrap();
        assert!((local_mach(&inflow, &c.gas) - 1.8).abs() < 1e-12);
        let d = make_cylinder(2).unwrap();
        assert_eq!((d.grid.ny(), d.grid.nx()), (150, 250));
        assert!(make_cylinder(40).is_err());
    }
}
