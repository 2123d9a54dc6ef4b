//! Compressible two-population lattice Boltzmann solver on D2Q9 with a
//! pluggable energy-equilibrium closure: polynomial, entropic (Newton), or a
//! learned exponential-family network trained through the unrolled solver.

pub mod autodiff;
pub mod bench;
pub mod boundary;
pub mod closures;
pub mod config;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod moments;
pub mod network;
pub mod pipeline;
pub mod population;
pub mod real;
pub mod solver;
pub mod streaming;
pub mod training;

pub use error::{Error, Result};
