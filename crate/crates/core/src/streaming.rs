//! Exact streaming: every channel is shifted one cell along its velocity.
//!
//! Pull scheme, `out[x][i] = in[x - c_i][i]`. Along a periodic axis the source
//! index wraps. Along an open axis a source outside the domain leaves the edge
//! value in place; those cells are rewritten by the open-boundary pass.

use crate::grid::Grid;
use crate::lattice::{Q, VELOCITIES};
use crate::population::PopulationGrid;

/// Index of the neighbour `(x + dx, y + dy)`, wrapping along periodic axes.
#[inline]
pub fn neighbor(grid: &Grid, x: usize, y: usize, dx: i32, dy: i32) -> Option<usize> {
    let nx = grid.nx() as i64;
    let ny = grid.ny() as i64;
    let mut sx = x as i64 + dx as i64;
    let mut sy = y as i64 + dy as i64;
    if sx < 0 || sx >= nx {
        if !grid.boundaries().x_periodic() {
            return None;
        }
        sx = sx.rem_euclid(nx);
    }
    if sy < 0 || sy >= ny {
        if !grid.boundaries().y_periodic() {
            return None;
        }
        sy = sy.rem_euclid(ny);
    }
    Some(sy as usize * grid.nx() + sx as usize)
}

/// Source cell for channel `i` arriving at `(x, y)`, or `None` when it lies
/// outside an open edge.
#[inline]
pub fn source(grid: &Grid, x: usize, y: usize, i: usize) -> Option<usize> {
    neighbor(grid, x, y, -VELOCITIES[i][0], -VELOCITIES[i][1])
}

pub fn stream(pop: &PopulationGrid, grid: &Grid) -> PopulationGrid {
    let mut out = pop.clone();
    stream_into(pop, grid, &mut out);
    out
}

/// Streams `pop` into a preallocated buffer of the same shape.
pub fn stream_into(pop: &PopulationGrid, grid: &Grid, out: &mut PopulationGrid) {
    debug_assert!(pop.nx() == grid.nx() && pop.ny() == grid.ny());
    let src = pop.as_slice();
    let dst = out.as_mut_slice();
    for y in 0..grid.ny() {
        for x in 0..grid.nx() {
            let c = grid.index(x, y);
            dst[c * Q] = src[c * Q];
            for i in 1..Q {
                let s = source(grid, x, y, i).unwrap_or(c);
                dst[c * Q + i] = src[s * Q + i];
            }
        }
    }
}

/// Adjoint of [`stream_into`]: scatters `adj` back to the source cells.
pub(crate) fn stream_adjoint(adj: &[f64], grid: &Grid, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for y in 0..grid.ny() {
        for x in 0..grid.nx() {
            let c = grid.index(x, y);
            out[c * Q] += adj[c * Q];
            for i in 1..Q {
                let s = source(grid, x, y, i).unwrap_or(c);
                out[s * Q + i] += adj[c * Q + i];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Species;
    use proptest::prelude::*;

    #[test]
    fn single_particle_moves_right() {
        let grid = Grid::periodic(3, 3).unwrap();
        let mut p = PopulationGrid::zeros(3, 3, Species::F);
        p.set(1, 1, 1, 1.0);
        let out = stream(&p, &grid);
        for y in 0..3 {
            for x in 0..3 {
                for i in 0..Q {
                    let want = if (x, y, i) == (2, 1, 1) { 1.0 } else { 0.0 };
                    assert_eq!(out.get(x, y, i), want);
                }
            }
        }
    }

    #[test]
    fn rest_channel_is_untouched() {
        let grid = Grid::periodic(4, 3).unwrap();
        let mut p = PopulationGrid::zeros(4, 3, Species::F);
        for c in 0..12 {
            p.cell_mut(c)[0] = c as f64 * 0.37;
        }
        let out = stream(&p, &grid);
        for c in 0..12 {
            assert_eq!(out.cell(c)[0], p.cell(c)[0]);
        }
    }

    #[test]
    fn adjoint_is_transpose() {
        let grid = Grid::new(
            5,
            4,
            crate::grid::Boundaries {
                left: crate::grid::EdgeKind::Neumann,
                right: crate::grid::EdgeKind::Neumann,
                bottom: crate::grid::EdgeKind::Periodic,
                top: crate::grid::EdgeKind::Periodic,
            },
        )
        .unwrap();
        let n = 5 * 4 * Q;
        let a: Vec<f64> = (0..n).map(|k| ((k * 7919) % 101) as f64 / 101.0).collect();
        let b: Vec<f64> = (0..n).map(|k| ((k * 104729) % 97) as f64 / 97.0).collect();
        let pa = PopulationGrid::from_vec(5, 4, Species::F, a.clone()).unwrap();
        let sa = stream(&pa, &grid);
        let mut tb = vec![0.0; n];
        stream_adjoint(&b, &grid, &mut tb);
        let lhs: f64 = sa.as_slice().iter().zip(&b).map(|(x, y)| x * y).sum();
        let rhs: f64 = a.iter().zip(&tb).map(|(x, y)| x * y).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn periodic_stream_permutes_each_channel(nx in 1usize..7, ny in 1usize..7, seed in any::<u64>()) {
            let grid = Grid::periodic(nx, ny).unwrap();
            let data: Vec<f64> = (0..nx * ny * Q)
                .map(|k| ((seed.wrapping_mul(6364136223846793005).wrapping_add((k as u64).wrapping_mul(1442695040888963407))) >> 11) as f64)
                .collect();
            let p = PopulationGrid::from_vec(nx, ny, Species::F, data).unwrap();
            let out = stream(&p, &grid);
            for i in 0..Q {
                let mut a: Vec<f64> = (0..nx * ny).map(|c| p.cell(c)[i]).collect();
                let mut b: Vec<f64> = (0..nx * ny).map(|c| out.cell(c)[i]).collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn forward_then_backward_shift_restores(nx in 1usize..7, ny in 1usize..7, seed in any::<u32>()) {
            // Channels i and opposite(i) move in opposite directions: streaming
            // twice with the channels swapped in between undoes the shift.
            let grid = Grid::periodic(nx, ny).unwrap();
            let data: Vec<f64> = (0..nx * ny * Q).map(|k| (k as f64 + seed as f64).sin()).collect();
            let p = PopulationGrid::from_vec(nx, ny, Species::F, data).unwrap();
            let mut once = stream(&p, &grid);
            for c in 0..nx * ny {
                let v = *once.cell(c);
                let cell = once.cell_mut(c);
                for i in 0..Q {
                    cell[i] = v[crate::lattice::OPPOSITE[i]];
                }
            }
            let mut twice = stream(&once, &grid);
            for c in 0..nx * ny {
                let v = *twice.cell(c);
                let cell = twice.cell_mut(c);
                for i in 0..Q {
                    cell[i] = v[crate::lattice::OPPOSITE[i]];
                }
            }
            prop_assert_eq!(twice, p);
        }
    }
}
