//! The D2Q9 velocity set.
//!
//! Channel ordering is fixed crate-wide and used by every file format:
//!
//! ```text
//!   6   3   5        0: ( 0, 0)   5: ( 1, 1)
//!     \ | /          1: ( 1, 0)   6: (-1, 1)
//!   2 - 0 - 1        2: (-1, 0)   7: (-1,-1)
//!     / | \          3: ( 0, 1)   8: ( 1,-1)
//!   7   4   8        4: ( 0,-1)
//! ```

/// Number of discrete velocities.
pub const Q: usize = 9;

pub const VELOCITIES: [[i32; 2]; Q] = [
    [0, 0],
    [1, 0],
    [-1, 0],
    [0, 1],
    [0, -1],
    [1, 1],
    [-1, 1],
    [-1, -1],
    [1, -1],
];

pub const OPPOSITE: [usize; Q] = [0, 2, 1, 4, 3, 7, 8, 5, 6];

/// x components as floats.
pub const CX: [f64; Q] = [0.0, 1.0, -1.0, 0.0, 0.0, 1.0, -1.0, -1.0, 1.0];
/// y components as floats.
pub const CY: [f64; Q] = [0.0, 0.0, 0.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0];

/// Handle on the D2Q9 velocity set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LatticeD2Q9;

impl LatticeD2Q9 {
    pub fn velocities(&self) -> &'static [[i32; 2]; Q] {
        &VELOCITIES
    }

    pub fn velocity(&self, i: usize) -> [i32; 2] {
        VELOCITIES[i]
    }

    pub fn index_of(&self, c: [i32; 2]) -> Option<usize> {
        VELOCITIES.iter().position(|&v| v == c)
    }

    pub fn opposite(&self, i: usize) -> usize {
        OPPOSITE[i]
    }

    /// Velocities as float 2-vectors, the input batch of the basis network.
    pub fn velocity_matrix(&self) -> [[f64; 2]; Q] {
        let mut out = [[0.0; 2]; Q];
        for i in 0..Q {
            out[i] = [CX[i], CY[i]];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocities_sum_to_zero_and_close_under_negation() {
        let l = LatticeD2Q9;
        let sx: i32 = VELOCITIES.iter().map(|c| c[0]).sum();
        let sy: i32 = VELOCITIES.iter().map(|c| c[1]).sum();
        assert_eq!((sx, sy), (0, 0));
        for &c in &VELOCITIES {
            assert!(l.index_of([-c[0], -c[1]]).is_some());
        }
    }

    #[test]
    fn opposite_is_involution_and_negates() {
        let l = LatticeD2Q9;
        for i in 0..Q {
            assert_eq!(l.opposite(l.opposite(i)), i);
            let c = l.velocity(i);
            assert_eq!(l.velocity(l.opposite(i)), [-c[0], -c[1]]);
            assert_eq!(l.index_of(c), Some(i));
        }
    }

    #[test]
    fn float_tables_match_integer_velocities() {
        for i in 0..Q {
            assert_eq!(CX[i], VELOCITIES[i][0] as f64);
            assert_eq!(CY[i], VELOCITIES[i][1] as f64);
        }
    }
}
