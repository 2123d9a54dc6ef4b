//! Per-cell population storage and the `NDEQ1` snapshot format.
//!
//! Snapshot layout (little-endian):
//!
//! ```text
//! b"NDEQ1" | u32 nx | u32 ny | u32 Q (=9) | u8 species | nx*ny*Q f64
//! ```
//!
//! Values are row-major over `(y, x, i)`, the same order as in memory.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CellRef, Error, Result};
use crate::lattice::Q;

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"NDEQ1";

/// Which population a grid holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    F,
    G,
    /// Recorded equilibrium of the g population.
    GEq,
}

impl Species {
    pub fn tag(self) -> u8 {
        match self {
            Species::F => 0,
            Species::G => 1,
            Species::GEq => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Species::F),
            1 => Ok(Species::G),
            2 => Ok(Species::GEq),
            t => Err(Error::Format(format!("unknown species tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Species::F => "f",
            Species::G => "g",
            Species::GEq => "geq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrid {
    nx: usize,
    ny: usize,
    species: Species,
    data: Vec<f64>,
}

impl PopulationGrid {
    pub fn zeros(nx: usize, ny: usize, species: Species) -> Self {
        PopulationGrid {
            nx,
            ny,
            species,
            data: vec![0.0; nx * ny * Q],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, species: Species, data: Vec<f64>) -> Result<Self> {
        if data.len() != nx * ny * Q {
            return Err(Error::Shape(format!(
                "expected {} values for {nx}x{ny}x{Q}, got {}",
                nx * ny * Q,
                data.len()
            )));
        }
        Ok(PopulationGrid {
            nx,
            ny,
            species,
            data,
        })
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

    pub fn species(&self) -> Species {
        self.species
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn cell(&self, index: usize) -> &[f64; Q] {
        self.data[index * Q..(index + 1) * Q].try_into().unwrap()
    }

    #[inline]
    pub fn cell_mut(&mut self, index: usize) -> &mut [f64; Q] {
        (&mut self.data[index * Q..(index + 1) * Q]).try_into().unwrap()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, i: usize) -> f64 {
        self.data[(y * self.nx + x) * Q + i]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, i: usize, v: f64) {
        self.data[(y * self.nx + x) * Q + i] = v;
    }

    pub fn same_shape(&self, other: &PopulationGrid) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    /// Sum of all values, optionally skipping masked cells.
    pub fn total(&self, skip: Option<&[bool]>) -> f64 {
        self.data
            .chunks_exact(Q)
            .enumerate()
            .filter(|(c, _)| skip.is_none_or(|m| !m[*c]))
            .map(|(_, v)| v.iter().sum::<f64>())
            .sum()
    }

    /// First cell holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => {
                let c = k / Q;
                Err(Error::NonFinite {
                    cell: CellRef(Some((c % self.nx, c / self.nx))),
                })
            }
        }
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&(self.nx as u32).to_le_bytes())?;
        w.write_all(&(self.ny as u32).to_le_bytes())?;
        w.write_all(&(Q as u32).to_le_bytes())?;
        w.write_all(&[self.species.tag()])?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Format("bad snapshot magic".into()));
        }
        let nx = read_u32(&mut r)? as usize;
        let ny = read_u32(&mut r)? as usize;
        let q = read_u32(&mut r)? as usize;
        if q != Q {
            return Err(Error::Format(format!("snapshot has Q = {q}, expected {Q}")));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let species = Species::from_tag(tag[0])?;
        let mut raw = vec![0u8; nx * ny * Q * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        PopulationGrid::from_vec(nx, ny, species, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        self.write_snapshot(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = fs::File::open(path)?;
        PopulationGrid::read_snapshot(std::io::BufReader::new(file))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_bit_exact() {
        let mut p = PopulationGrid::zeros(2, 1, Species::G);
        p.set(1, 0, 3, 1.5);
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"NDEQ1");
        assert_eq!(&buf[5..9], &2u32.to_le_bytes());
        assert_eq!(&buf[9..13], &1u32.to_le_bytes());
        assert_eq!(&buf[13..17], &9u32.to_le_bytes());
        assert_eq!(buf[17], 1);
        assert_eq!(buf.len(), 18 + 2 * 9 * 8);
        let off = 18 + (9 + 3) * 8;
        assert_eq!(&buf[off..off + 8], &1.5f64.to_le_bytes());
    }

    #[test]
    fn bad_magic_and_truncation_are_errors() {
        let p = PopulationGrid::zeros(2, 2, Species::F);
        let mut buf = Vec::new();
        p.write_snapshot(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            PopulationGrid::read_snapshot(&bad[..]),
            Err(Error::Format(_))
        ));
        assert!(PopulationGrid::read_snapshot(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn non_finite_reports_cell() {
        let mut p = PopulationGrid::zeros(3, 2, Species::F);
        p.set(2, 1, 4, f64::NAN);
        match p.check_finite() {
            Err(Error::NonFinite { cell }) => assert_eq!(cell.0, Some((2, 1))),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn snapshot_round_trip(nx in 1usize..5, ny in 1usize..4,
                               seed in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let data: Vec<f64> = (0..nx * ny * Q).map(|k| seed[k % seed.len()] * (k as f64 + 0.5)).collect();
            let p = PopulationGrid::from_vec(nx, ny, Species::F, data).unwrap();
            let mut buf = Vec::new();
            p.write_snapshot(&mut buf).unwrap();
            let back = PopulationGrid::read_snapshot(&buf[..]).unwrap();
            prop_assert_eq!(back, p);
        }
    }
}
