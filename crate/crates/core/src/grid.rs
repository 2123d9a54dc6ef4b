//! Rectangular lattice geometry and boundary specification.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Boundary treatment of one domain edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Periodic,
    /// Edge cells are overwritten with the inlet equilibrium every step.
    Dirichlet,
    /// First-order Neumann: edge cells copy the adjacent interior line.
    Neumann,
    /// Copy from the interior along the edge normal (used on the cylinder's
    /// top and bottom).
    FreeStream,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EdgeKind::Periodic => "periodic",
            EdgeKind::Dirichlet => "dirichlet",
            EdgeKind::Neumann => "neumann",
            EdgeKind::FreeStream => "free-stream",
        };
        f.write_str(s)
    }
}

impl FromStr for EdgeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(EdgeKind::Periodic),
            "dirichlet" => Ok(EdgeKind::Dirichlet),
            "neumann" | "neumann1" => Ok(EdgeKind::Neumann),
            "free-stream" | "freestream" => Ok(EdgeKind::FreeStream),
            other => Err(Error::Config(format!("unknown boundary kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Boundaries {
    pub left: EdgeKind,
    pub right: EdgeKind,
    pub bottom: EdgeKind,
    pub top: EdgeKind,
}

impl Boundaries {
    pub fn periodic() -> Self {
        Boundaries {
            left: EdgeKind::Periodic,
            right: EdgeKind::Periodic,
            bottom: EdgeKind::Periodic,
            top: EdgeKind::Periodic,
        }
    }

    pub fn x_periodic(&self) -> bool {
        self.left == EdgeKind::Periodic
    }

    pub fn y_periodic(&self) -> bool {
        self.bottom == EdgeKind::Periodic
    }

    pub fn has_dirichlet(&self) -> bool {
        [self.left, self.right, self.bottom, self.top].contains(&EdgeKind::Dirichlet)
    }
}

/// Lattice dimensions, edge conditions and an optional solid mask.
///
/// Cells are addressed row-major: `index = y * nx + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nx: usize,
    ny: usize,
    boundaries: Boundaries,
    solid: Option<Vec<bool>>,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, boundaries: Boundaries) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!("grid must be non-empty, got {nx}x{ny}")));
        }
        let (l, r) = (boundaries.left, boundaries.right);
        if (l == EdgeKind::Periodic) != (r == EdgeKind::Periodic) {
            return Err(Error::Config(
                "left and right edges must both be periodic or both non-periodic".into(),
            ));
        }
        let (b, t) = (boundaries.bottom, boundaries.top);
        if (b == EdgeKind::Periodic) != (t == EdgeKind::Periodic) {
            return Err(Error::Config(
                "bottom and top edges must both be periodic or both non-periodic".into(),
            ));
        }
        if !boundaries.x_periodic() && nx < 3 {
            return Err(Error::Config("open x-edges need nx >= 3".into()));
        }
        if !boundaries.y_periodic() && ny < 3 {
            return Err(Error::Config("open y-edges need ny >= 3".into()));
        }
        Ok(Grid {
            nx,
            ny,
            boundaries,
            solid: None,
        })
    }

    pub fn periodic(nx: usize, ny: usize) -> Result<Self> {
        Grid::new(nx, ny, Boundaries::periodic())
    }

    /// Attach a solid mask (row-major, `nx * ny` entries).
    pub fn with_solid(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.cells() {
            return Err(Error::Config(format!(
                "solid mask has {} entries, grid has {} cells",
                mask.len(),
                self.cells()
            )));
        }
        self.solid = if mask.iter().any(|&s| s) {
            Some(mask)
        } else {
            None
        };
        Ok(self)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn boundaries(&self) -> &Boundaries {
        &self.boundaries
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn solid_mask(&self) -> Option<&[bool]> {
        self.solid.as_deref()
    }

    #[inline]
    pub fn is_solid(&self, index: usize) -> bool {
        self.solid.as_ref().is_some_and(|m| m[index])
    }

    pub fn fluid_cells(&self) -> usize {
        self.solid
            .as_ref()
            .map_or(self.cells(), |m| m.iter().filter(|&&s| !s).count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mismatched_periodicity_is_rejected() {
        let b = Boundaries {
            left: EdgeKind::Periodic,
            right: EdgeKind::Neumann,
            ..Boundaries::periodic()
        };
        assert!(matches!(Grid::new(8, 8, b), Err(Error::Config(_))));
    }

    #[test]
    fn solid_mask_shape_is_checked() {
        let g = Grid::periodic(4, 3).unwrap();
        assert!(g.clone().with_solid(vec![false; 11]).is_err());
        let mut mask = vec![false; 12];
        mask[5] = true;
        let g = g.with_solid(mask).unwrap();
        assert!(g.is_solid(5));
        assert_eq!(g.fluid_cells(), 11);
        assert_eq!(g.coords(5), (1, 1));
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(Grid::periodic(0, 5).is_err());
    }
}
