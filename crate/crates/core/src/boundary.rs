//! Bounce-back on solid cells and open-edge (Dirichlet, Neumann, free-stream)
//! boundary conditions.
//!
//! Bounce-back runs before streaming: each solid cell is filled with the
//! reflected populations of its fluid neighbours, so the pull in
//! [`crate::streaming::stream`] returns them to their source cell in the
//! opposite channel. Open edges are rewritten after streaming, x-edges first
//! and then y-edges, so corners take the y-edge rule.

use crate::closures::{feq_extended_signed, geq_newton, NewtonSettings};
use crate::error::{Error, Result};
use crate::grid::{EdgeKind, Grid};
use crate::lattice::{OPPOSITE, Q, VELOCITIES};
use crate::moments::MacroState;
use crate::population::{PopulationGrid, Species};
use crate::streaming::neighbor;

/// Inlet populations for Dirichlet edges, precomputed from a lattice-frame
/// state (f from the factorized equilibrium, g from the Newton closure).
#[derive(Debug, Clone, PartialEq)]
pub struct InletCondition {
    pub state: MacroState,
    pub f: [f64; Q],
    pub g: [f64; Q],
}

impl InletCondition {
    pub fn new(state: MacroState, newton: &NewtonSettings) -> Result<Self> {
        if !(state.rho > 0.0) || !(state.t > 0.0) {
            return Err(Error::InvalidState(format!(
                "inlet needs rho > 0 and T > 0 (rho = {}, T = {})",
                state.rho, state.t
            )));
        }
        let f = feq_extended_signed(&state)?;
        let g = geq_newton(&state, newton, None)?.geq;
        Ok(InletCondition { state, f, g })
    }

    pub fn populations(&self, species: Species) -> &[f64; Q] {
        match species {
            Species::F => &self.f,
            Species::G | Species::GEq => &self.g,
        }
    }
}

/// Fills solid cells with the reflected populations of fluid neighbours.
pub fn apply_bounce_back(pop: &mut PopulationGrid, grid: &Grid) {
    let Some(mask) = grid.solid_mask() else {
        return;
    };
    for s in 0..grid.cells() {
        if !mask[s] {
            continue;
        }
        let (x, y) = grid.coords(s);
        for j in 0..Q {
            let v = match neighbor(grid, x, y, VELOCITIES[j][0], VELOCITIES[j][1]) {
                Some(n) if !mask[n] => pop.cell(n)[OPPOSITE[j]],
                _ => 0.0,
            };
            pop.cell_mut(s)[j] = v;
        }
    }
}

pub(crate) fn bounce_back_adjoint(adj: &mut [f64], grid: &Grid) {
    let Some(mask) = grid.solid_mask() else {
        return;
    };
    for s in 0..grid.cells() {
        if !mask[s] {
            continue;
        }
        let (x, y) = grid.coords(s);
        for j in 0..Q {
            let a = std::mem::take(&mut adj[s * Q + j]);
            if let Some(n) = neighbor(grid, x, y, VELOCITIES[j][0], VELOCITIES[j][1]) {
                if !mask[n] {
                    adj[n * Q + OPPOSITE[j]] += a;
                }
            }
        }
    }
}

/// One open-edge action on a cell.
#[derive(Debug, Clone, Copy)]
enum EdgeOp {
    Copy { dst: usize, src: usize },
    Fix { dst: usize },
}

fn edge_ops(grid: &Grid) -> Vec<EdgeOp> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let b = grid.boundaries();
    let mut ops = Vec::new();
    let edge = |kind: EdgeKind, dst: usize, src: usize, ops: &mut Vec<EdgeOp>| match kind {
        EdgeKind::Periodic => {}
        EdgeKind::Dirichlet => ops.push(EdgeOp::Fix { dst }),
        EdgeKind::Neumann | EdgeKind::FreeStream => ops.push(EdgeOp::Copy { dst, src }),
    };
    for y in 0..ny {
        edge(b.left, grid.index(0, y), grid.index(1.min(nx - 1), y), &mut ops);
        edge(b.right, grid.index(nx - 1, y), grid.index(nx.saturating_sub(2), y), &mut ops);
    }
    for x in 0..nx {
        edge(b.bottom, grid.index(x, 0), grid.index(x, 1.min(ny - 1)), &mut ops);
        edge(b.top, grid.index(x, ny - 1), grid.index(x, ny.saturating_sub(2)), &mut ops);
    }
    ops
}

/// Rewrites open-edge cells after streaming.
pub fn apply_open_boundaries(pop: &mut PopulationGrid, grid: &Grid, inlet: Option<&InletCondition>) -> Result<()> {
    let fixed = match (grid.boundaries().has_dirichlet(), inlet) {
        (true, None) => {
            return Err(Error::Config("dirichlet edge requires an inlet state".into()));
        }
        (_, Some(c)) => Some(*c.populations(pop.species())),
        (false, None) => None,
    };
    for op in edge_ops(grid) {
        match op {
            EdgeOp::Copy { dst, src } => {
                let v = *pop.cell(src);
                *pop.cell_mut(dst) = v;
            }
            EdgeOp::Fix { dst } => *pop.cell_mut(dst) = fixed.unwrap(),
        }
    }
    Ok(())
}

pub(crate) fn open_boundaries_adjoint(adj: &mut [f64], grid: &Grid) {
    for op in edge_ops(grid).into_iter().rev() {
        match op {
            EdgeOp::Copy { dst, src } => {
                for i in 0..Q {
                    let a = std::mem::take(&mut adj[dst * Q + i]);
                    adj[src * Q + i] += a;
                }
            }
            EdgeOp::Fix { dst } => adj[dst * Q..(dst + 1) * Q].iter_mut().for_each(|v| *v = 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundaries;
    use crate::moments::{project, GasParams};
    use crate::streaming::stream;

    fn gas() -> GasParams {
        GasParams::new(1.4, 0.71, 0.01).unwrap()
    }

    #[test]
    fn reflection_returns_to_source() {
        let mut mask = vec![false; 16];
        mask[4 + 2] = true; // solid at (2, 1)
        let grid = Grid::periodic(4, 4).unwrap().with_solid(mask).unwrap();
        let mut p = PopulationGrid::zeros(4, 4, Species::F);
        p.set(1, 1, 1, 0.75);
        apply_bounce_back(&mut p, &grid);
        let out = stream(&p, &grid);
        assert_eq!(out.get(1, 1, 2), 0.75);
        assert_eq!(out.get(1, 1, 1), 0.0);
    }

    #[test]
    fn no_solid_is_identity() {
        let grid = Grid::periodic(3, 3).unwrap();
        let mut p = PopulationGrid::zeros(3, 3, Species::F);
        p.as_mut_slice().iter_mut().enumerate().for_each(|(k, v)| *v = k as f64);
        let before = p.clone();
        apply_bounce_back(&mut p, &grid);
        assert_eq!(p, before);
    }

    #[test]
    fn closed_box_conserves_fluid_mass() {
        let (nx, ny) = (7, 6);
        let mut mask = vec![false; nx * ny];
        for y in 0..ny {
            for x in 0..nx {
                if x == 0 || y == 0 || x == nx - 1 || y == ny - 1 {
                    mask[y * nx + x] = true;
                }
            }
        }
        let grid = Grid::periodic(nx, ny).unwrap().with_solid(mask.clone()).unwrap();
        let mut p = PopulationGrid::zeros(nx, ny, Species::F);
        for c in 0..nx * ny {
            if !mask[c] {
                for i in 0..Q {
                    p.cell_mut(c)[i] = ((c * 31 + i * 17) % 23) as f64 / 23.0 + 0.1;
                }
            }
        }
        let before = p.total(Some(&mask));
        for _ in 0..5 {
            apply_bounce_back(&mut p, &grid);
            p = stream(&p, &grid);
        }
        assert!((p.total(Some(&mask)) - before).abs() < 1e-12 * before);
    }

    fn channel_grid(left: EdgeKind, right: EdgeKind) -> Grid {
        Grid::new(
            6,
            4,
            Boundaries {
                left,
                right,
                bottom: EdgeKind::FreeStream,
                top: EdgeKind::FreeStream,
            },
        )
        .unwrap()
    }

    #[test]
    fn uniform_inlet_field_is_fixed_point() {
        let grid = channel_grid(EdgeKind::Dirichlet, EdgeKind::Neumann);
        let state = MacroState::new(1.0, 0.3, 0.0, 0.2, &gas());
        let inlet = InletCondition::new(state, &NewtonSettings::default()).unwrap();
        for species in [Species::F, Species::G] {
            let mut p = PopulationGrid::zeros(6, 4, species);
            for c in 0..24 {
                *p.cell_mut(c) = *inlet.populations(species);
            }
            let before = p.clone();
            let mut s = stream(&p, &grid);
            apply_open_boundaries(&mut s, &grid, Some(&inlet)).unwrap();
            assert_eq!(s, before);
        }
    }

    #[test]
    fn outlet_copies_interior_neighbour() {
        let grid = channel_grid(EdgeKind::Neumann, EdgeKind::Neumann);
        let mut p = PopulationGrid::zeros(6, 4, Species::F);
        p.as_mut_slice().iter_mut().enumerate().for_each(|(k, v)| *v = (k as f64).sin());
        apply_open_boundaries(&mut p, &grid, None).unwrap();
        for y in 1..3 {
            for i in 0..Q {
                assert_eq!(p.get(5, y, i), p.get(4, y, i));
                assert_eq!(p.get(0, y, i), p.get(1, y, i));
            }
        }
    }

    #[test]
    fn inlet_density_is_one() {
        let gas = gas();
        let u = 1.8 * (gas.gamma * 0.2f64).sqrt();
        let state = MacroState::new(1.0, u, 0.0, 0.2, &gas).shifted([-0.6 * u, 0.0], &gas);
        let inlet = InletCondition::new(state, &NewtonSettings::default()).unwrap();
        let m = project(&inlet.f, &inlet.g, &gas).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_inlet_and_missing_inlet() {
        let bad = MacroState { rho: 1.0, ux: 0.0, uy: 0.0, t: -0.1, e: 0.1 };
        assert!(matches!(
            InletCondition::new(bad, &NewtonSettings::default()),
            Err(Error::InvalidState(_))
        ));
        let grid = channel_grid(EdgeKind::Dirichlet, EdgeKind::Neumann);
        let mut p = PopulationGrid::zeros(6, 4, Species::F);
        assert!(matches!(apply_open_boundaries(&mut p, &grid, None), Err(Error::Config(_))));
    }
}
