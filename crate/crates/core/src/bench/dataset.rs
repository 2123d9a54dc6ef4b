//! Recorded trajectories `{f, g, g_eq}` per time step, in memory and on disk.
//!
//! Directory layout: `f_<t>.ndeq`, `g_<t>.ndeq` and `geq_<t>.ndeq` for every
//! recorded step (`t` zero-padded to 6 digits), `observables.csv` with the
//! physical-frame fields of every recorded step, and `manifest.txt`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::moments::{project, GasParams, MacroState};
use crate::population::PopulationGrid;
use crate::solver::{Equilibria, Recorder};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: u64,
    pub f: PopulationGrid,
    pub g: PopulationGrid,
    pub geq: PopulationGrid,
}

impl Frame {
    /// Lattice-frame states of every cell (solid cells are skipped by the
    /// caller through the mask).
    pub fn lattice_states(&self, gas: &GasParams, solid: Option<&[bool]>) -> Result<Vec<MacroState>> {
        (0..self.f.cells())
            .map(|c| {
                if solid.is_some_and(|m| m[c]) {
                    return Ok(MacroState::new(1.0, 0.0, 0.0, 0.0, gas));
                }
                let nx = self.f.nx();
                project(self.f.cell(c), self.g.cell(c), gas).map_err(|e| e.at(c % nx, c / nx))
            })
            .collect()
    }

    pub fn observables(&self, gas: &GasParams, solid: Option<&[bool]>) -> Result<Vec<MacroState>> {
        Ok(self
            .lattice_states(gas, solid)?
            .into_iter()
            .map(|s| s.shifted(gas.u_shift, gas))
            .collect())
    }
}

/// Temporally ordered frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub frames: Vec<Frame>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: Frame) -> Result<()> {
        if let Some(last) = self.frames.last() {
            if !last.f.same_shape(&frame.f) {
                return Err(Error::Shape("frame shape differs from the dataset".into()));
            }
            if frame.t <= last.t {
                return Err(Error::InvalidState(format!(
                    "frames must be increasing in time ({} after {})",
                    frame.t, last.t
                )));
            }
        }
        self.frames.push(frame);
        Ok(())
    }

    /// Frame recorded at time `t`.
    pub fn at(&self, t: u64) -> Option<&Frame> {
        self.frames
            .binary_search_by_key(&t, |f| f.t)
            .ok()
            .map(|k| &self.frames[k])
    }

    /// Whether frames cover `t0..=t1` without gaps.
    pub fn contiguous(&self, t0: u64, t1: u64) -> bool {
        (t0..=t1).all(|t| self.at(t).is_some())
    }

    /// Keeps only frames with `t <= t_max`.
    pub fn truncated(&self, t_max: u64) -> Dataset {
        Dataset {
            frames: self.frames.iter().filter(|f| f.t <= t_max).cloned().collect(),
        }
    }

    pub fn save(&self, dir: impl AsRef<Path>, gas: &GasParams, solid: Option<&[bool]>, manifest: &str) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut csv = std::io::BufWriter::new(fs::File::create(dir.join("observables.csv"))?);
        writeln!(csv, "t,x,y,rho,ux,uy,T,p")?;
        for fr in &self.frames {
            fr.f.save(dir.join(format!("f_{:06}.ndeq", fr.t)))?;
            fr.g.save(dir.join(format!("g_{:06}.ndeq", fr.t)))?;
            fr.geq.save(dir.join(format!("geq_{:06}.ndeq", fr.t)))?;
            let nx = fr.f.nx();
            for (c, s) in fr.observables(gas, solid)?.iter().enumerate() {
                if solid.is_some_and(|m| m[c]) {
                    continue;
                }
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    fr.t,
                    c % nx,
                    c / nx,
                    s.rho,
                    s.ux,
                    s.uy,
                    s.t,
                    s.pressure(gas)
                )?;
            }
        }
        csv.flush()?;
        fs::write(dir.join("manifest.txt"), manifest)?;
        Ok(())
    }

    /// Loads every `f_*.ndeq` frame (with matching `g` and `geq`) in `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Dataset> {
        let dir = dir.as_ref();
        let mut times = Vec::new();
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(t) = name.strip_prefix("f_").and_then(|s| s.strip_suffix(".ndeq")) {
                let t: u64 = t
                    .parse()
                    .map_err(|_| Error::Format(format!("bad snapshot name {name}")))?;
                times.push(t);
            }
        }
        times.sort_unstable();
        let mut ds = Dataset::default();
        for t in times {
            ds.push(Frame {
                t,
                f: PopulationGrid::load(dir.join(format!("f_{t:06}.ndeq")))?,
                g: PopulationGrid::load(dir.join(format!("g_{t:06}.ndeq")))?,
                geq: PopulationGrid::load(dir.join(format!("geq_{t:06}.ndeq")))?,
            })?;
        }
        Ok(ds)
    }
}

/// Recorder that stores every `stride`-th pre-step state.
pub struct DatasetRecorder {
    pub dataset: Dataset,
    pub stride: u64,
    pub newton_max_iters: usize,
    pub newton_unconverged: usize,
}

impl DatasetRecorder {
    pub fn new(stride: u64) -> Self {
        DatasetRecorder {
            dataset: Dataset::default(),
            stride: stride.max(1),
            newton_max_iters: 0,
            newton_unconverged: 0,
        }
    }
}

impl Recorder for DatasetRecorder {
    fn record(&mut self, t: u64, f: &PopulationGrid, g: &PopulationGrid, eq: &Equilibria, _gas: &GasParams) -> Result<()> {
        self.newton_max_iters = self.newton_max_iters.max(eq.newton_max_iters);
        self.newton_unconverged += eq.newton_unconverged;
        if t.is_multiple_of(self.stride) {
            self.dataset.push(Frame {
                t,
                f: f.clone(),
                g: g.clone(),
                geq: eq.geq.clone(),
            })?;
        }
        Ok(())
    }
}
