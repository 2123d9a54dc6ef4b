//! Two-population BGK time stepping with a pluggable energy closure.
//!
//! One step is `collide -> bounce-back -> stream -> open boundaries` for both
//! populations. Populations live in the lattice frame, whose velocity is the
//! physical velocity minus `GasParams::u_shift`; observables handed to
//! callers are converted back to the physical frame.

use crate::autodiff::Tensor;
use crate::boundary::{apply_bounce_back, apply_open_boundaries, InletCondition};
use crate::closures::{
    feq_extended_raw, feq_extended_signed, g_quasi, geq_newton, geq_poly_raw, LagrangeMultipliers, NewtonSettings,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::Q;
use crate::moments::{
    pressure_tensor_eq, project, project_raw, relaxation_times, second_moment, weights, GasParams, MacroState,
};
use crate::network::{energy_moment, renormalize_energy, MlpParams};
use crate::population::{PopulationGrid, Species};
use crate::real::Real;
use crate::streaming::stream_into;

/// Which provider computes `g_eq`. The f-equilibrium is always the
/// factorized (extended) one.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosureSpec {
    Polynomial,
    Newton(NewtonSettings),
    /// Network closure. With `renormalize` each output is rescaled so that
    /// its energy moment matches `2 rho E` of the cell.
    Neural { params: Box<MlpParams>, renormalize: bool },
}

impl ClosureSpec {
    /// Renormalized network closure.
    pub fn neural(params: MlpParams) -> Self {
        ClosureSpec::Neural {
            params: Box::new(params),
            renormalize: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClosureSpec::Polynomial => "polynomial",
            ClosureSpec::Newton(_) => "newton",
            ClosureSpec::Neural { .. } => "neural",
        }
    }
}

/// BGK collision of one cell given its energy equilibrium.
///
/// `f_coll = f + (f_eq - f)/tau1`,
/// `g_coll = g + (g_eq - g)/tau2 + (1/tau2 - 1/tau1)(g* - g)`.
pub fn collide_cell<T: Real>(f: &[T; Q], g: &[T; Q], geq: &[T; Q], gas: &GasParams) -> ([T; Q], [T; Q]) {
    let s = project_raw(f, g, gas.cv());
    collide_cell_with_state(f, g, geq, &s, gas)
}

pub fn collide_cell_with_state<T: Real>(
    f: &[T; Q],
    g: &[T; Q],
    geq: &[T; Q],
    s: &MacroState<T>,
    gas: &GasParams,
) -> ([T; Q], [T; Q]) {
    let feq = feq_extended_raw(s);
    let (tau1, tau2) = relaxation_times(s, gas);
    let (w1, w2) = (tau1.recip(), tau2.recip());
    let p = second_moment(f);
    let p_eq = pressure_tensor_eq(s);
    let gs = g_quasi(s, geq, &p, &p_eq);
    let mut fo = *f;
    let mut go = *g;
    for i in 0..Q {
        fo[i] = f[i] + (feq[i] - f[i]) * w1;
        go[i] = g[i] + (geq[i] - g[i]) * w2 + (w2 - w1) * (gs[i] - g[i]);
    }
    (fo, go)
}

/// Observables and equilibrium of the current (pre-step) state.
#[derive(Debug, Clone)]
pub struct Equilibria {
    /// Lattice-frame states, one per cell (solid cells hold a placeholder).
    pub states: Vec<MacroState>,
    pub geq: PopulationGrid,
    pub newton_max_iters: usize,
    pub newton_unconverged: usize,
}

/// Receives every pre-step state of a run.
pub trait Recorder {
    fn record(&mut self, t: u64, f: &PopulationGrid, g: &PopulationGrid, eq: &Equilibria, gas: &GasParams) -> Result<()>;
}

/// Recorder that ignores everything.
pub struct NullRecorder;

impl Recorder for NullRecorder {
    fn record(&mut self, _: u64, _: &PopulationGrid, _: &PopulationGrid, _: &Equilibria, _: &GasParams) -> Result<()> {
        Ok(())
    }
}

/// How strictly the solver validates macroscopic states before colliding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateChecks {
    /// Reject non-positive density or temperature and `T >= 1`.
    #[default]
    Physical,
    /// Only reject non-finite populations. Lets a failing scheme run on
    /// until it produces NaN/inf, which is how blow-ups are diagnosed.
    FiniteOnly,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub f: PopulationGrid,
    pub g: PopulationGrid,
    pub t: u64,
    pub gas: GasParams,
    pub closure: ClosureSpec,
    pub grid: Grid,
    pub inlet: Option<InletCondition>,
    /// Reuse each cell's Newton multipliers from the previous step.
    pub warm_start: bool,
    pub checks: StateChecks,
    alpha: Vec<Option<LagrangeMultipliers>>,
    buf_f: PopulationGrid,
    buf_g: PopulationGrid,
}

/// Placeholder reported for solid cells.
fn solid_state(gas: &GasParams) -> MacroState {
    MacroState::new(1.0, 0.0, 0.0, 0.0, gas)
}

impl SolverState {
    pub fn new(
        grid: Grid,
        gas: GasParams,
        closure: ClosureSpec,
        f: PopulationGrid,
        g: PopulationGrid,
        inlet: Option<InletCondition>,
    ) -> Result<Self> {
        gas.validate()?;
        if !f.same_shape(&g) || f.nx() != grid.nx() || f.ny() != grid.ny() {
            return Err(Error::Shape(format!(
                "populations {}x{} / {}x{} do not match grid {}x{}",
                f.nx(),
                f.ny(),
                g.nx(),
                g.ny(),
                grid.nx(),
                grid.ny()
            )));
        }
        if grid.boundaries().has_dirichlet() && inlet.is_none() {
            return Err(Error::Config("dirichlet edge requires an inlet state".into()));
        }
        if let ClosureSpec::Newton(s) = &closure {
            s.validate()?;
        }
        let cells = grid.cells();
        let (nx, ny) = (grid.nx(), grid.ny());
        let f = PopulationGrid::from_vec(nx, ny, Species::F, f.into_vec())?;
        let g = PopulationGrid::from_vec(nx, ny, Species::G, g.into_vec())?;
        Ok(SolverState {
            buf_f: f.clone(),
            buf_g: g.clone(),
            f,
            g,
            t: 0,
            gas,
            closure,
            grid,
            inlet,
            warm_start: true,
            checks: StateChecks::Physical,
            alpha: vec![None; cells],
        })
    }

    /// Equilibrium lifting of a physical-frame field (`nx * ny` states,
    /// row-major). Solid cells are left empty.
    pub fn lift(
        grid: Grid,
        gas: GasParams,
        closure: ClosureSpec,
        field: &[MacroState],
        inlet: Option<InletCondition>,
    ) -> Result<Self> {
        if field.len() != grid.cells() {
            return Err(Error::Shape(format!(
                "field has {} states, grid has {} cells",
                field.len(),
                grid.cells()
            )));
        }
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut f = PopulationGrid::zeros(nx, ny, Species::F);
        let g = PopulationGrid::zeros(nx, ny, Species::G);
        let mut lattice = Vec::with_capacity(field.len());
        for (c, s) in field.iter().enumerate() {
            let (x, y) = grid.coords(c);
            if grid.is_solid(c) {
                lattice.push(solid_state(&gas));
                continue;
            }
            s.validate().map_err(|e| e.at(x, y))?;
            let ls = s.shifted([-gas.u_shift[0], -gas.u_shift[1]], &gas);
            *f.cell_mut(c) = feq_extended_signed(&ls).map_err(|e| e.at(x, y))?;
            lattice.push(ls);
        }
        let mut state = SolverState::new(grid, gas, closure, f, g, inlet)?;
        let geq = state.closure_equilibria(&lattice)?;
        state.g = PopulationGrid::from_vec(nx, ny, Species::G, geq.geq.into_vec())?;
        Ok(state)
    }

    pub fn nx(&self) -> usize {
        self.grid.nx()
    }

    pub fn ny(&self) -> usize {
        self.grid.ny()
    }

    /// Lattice-frame states of every cell.
    pub fn lattice_states(&self) -> Result<Vec<MacroState>> {
        let mut out = Vec::with_capacity(self.grid.cells());
        for c in 0..self.grid.cells() {
            if self.grid.is_solid(c) {
                out.push(solid_state(&self.gas));
                continue;
            }
            let (x, y) = self.grid.coords(c);
            let s = project(self.f.cell(c), self.g.cell(c), &self.gas).map_err(|e| e.at(x, y))?;
            out.push(s);
        }
        Ok(out)
    }

    /// Lattice-frame moments without any validity check, for diagnostics on
    /// states the solver would reject.
    pub fn raw_lattice_states(&self) -> Vec<MacroState> {
        let cv = self.gas.cv();
        (0..self.grid.cells())
            .map(|c| {
                if self.grid.is_solid(c) {
                    solid_state(&self.gas)
                } else {
                    project_raw(self.f.cell(c), self.g.cell(c), cv)
                }
            })
            .collect()
    }

    /// Physical-frame observables of every cell.
    pub fn observables(&self) -> Result<Vec<MacroState>> {
        let shift = self.gas.u_shift;
        Ok(self
            .lattice_states()?
            .into_iter()
            .map(|s| s.shifted(shift, &self.gas))
            .collect())
    }

    /// Evaluates the g-closure on the given lattice-frame states.
    fn closure_equilibria(&mut self, states: &[MacroState]) -> Result<Equilibria> {
        let (nx, ny) = (self.nx(), self.ny());
        let mut geq = PopulationGrid::zeros(nx, ny, Species::GEq);
        let mut newton_max_iters = 0;
        let mut newton_unconverged = 0;
        match &self.closure {
            ClosureSpec::Polynomial => {
                for (c, s) in states.iter().enumerate() {
                    if self.grid.is_solid(c) {
                        continue;
                    }
                    let (x, y) = self.grid.coords(c);
                    if self.checks == StateChecks::Physical {
                        weights(s.t).map_err(|e| e.at(x, y))?;
                    }
                    *geq.cell_mut(c) = geq_poly_raw(s);
                }
            }
            ClosureSpec::Newton(settings) => {
                for (c, s) in states.iter().enumerate() {
                    if self.grid.is_solid(c) {
                        continue;
                    }
                    let (x, y) = self.grid.coords(c);
                    let warm = if self.warm_start { self.alpha[c] } else { None };
                    let sol = geq_newton(s, settings, warm).map_err(|e| e.at(x, y))?;
                    newton_max_iters = newton_max_iters.max(sol.iterations);
                    newton_unconverged += usize::from(!sol.converged);
                    self.alpha[c] = Some(sol.alpha);
                    *geq.cell_mut(c) = sol.geq;
                }
            }
            ClosureSpec::Neural { params, renormalize } => {
                let fluid: Vec<usize> = (0..states.len()).filter(|&c| !self.grid.is_solid(c)).collect();
                let mut u = Tensor::zeros(fluid.len(), 4);
                for (r, &c) in fluid.iter().enumerate() {
                    let (x, y) = self.grid.coords(c);
                    weights(states[c].t).map_err(|e| e.at(x, y))?;
                    u.row_mut(r).copy_from_slice(&states[c].features());
                }
                let out = params.eval(&u, usize::MAX).map_err(|e| match e {
                    Error::Saturation { value, cell } => {
                        let (x, y) = self.grid.coords(fluid[cell.0.map_or(0, |c| c.0)]);
                        Error::Saturation { value, cell: crate::error::CellRef(Some((x, y))) }
                    }
                    other => other,
                })?;
                let cv = self.gas.cv();
                for (r, &c) in fluid.iter().enumerate() {
                    let cell = geq.cell_mut(c);
                    cell.copy_from_slice(out.row(r));
                    if *renormalize {
                        renormalize_energy(cell, energy_moment(u.row(r), cv));
                    }
                }
            }
        }
        Ok(Equilibria {
            states: states.to_vec(),
            geq,
            newton_max_iters,
            newton_unconverged,
        })
    }

    /// States and closure output of the current populations.
    pub fn equilibria(&mut self) -> Result<Equilibria> {
        let states = match self.checks {
            StateChecks::Physical => self.lattice_states()?,
            StateChecks::FiniteOnly => self.raw_lattice_states(),
        };
        self.closure_equilibria(&states)
    }

    fn try_step(&mut self) -> Result<Equilibria> {
        let eq = self.equilibria()?;
        let (nx, ny) = (self.nx(), self.ny());
        let mut fc = self.f.clone();
        let mut gc = self.g.clone();
        for c in 0..self.grid.cells() {
            if self.grid.is_solid(c) {
                continue;
            }
            let (x, y) = self.grid.coords(c);
            let s = &eq.states[c];
            if self.checks == StateChecks::Physical && !(s.t < 1.0) {
                return Err(Error::LatticeRange { value: s.t, cell: crate::error::CellRef(Some((x, y))) });
            }
            let (fo, go) = collide_cell_with_state(self.f.cell(c), self.g.cell(c), eq.geq.cell(c), s, &self.gas);
            *fc.cell_mut(c) = fo;
            *gc.cell_mut(c) = go;
        }
        for (pop, buf) in [(&mut fc, &mut self.buf_f), (&mut gc, &mut self.buf_g)] {
            apply_bounce_back(pop, &self.grid);
            stream_into(pop, &self.grid, buf);
            apply_open_boundaries(buf, &self.grid, self.inlet.as_ref())?;
            if let Some(mask) = self.grid.solid_mask() {
                for (c, &s) in mask.iter().enumerate() {
                    if s {
                        *buf.cell_mut(c) = [0.0; Q];
                    }
                }
            }
            buf.check_finite()?;
        }
        debug_assert_eq!((self.buf_f.nx(), self.buf_f.ny()), (nx, ny));
        std::mem::swap(&mut self.f, &mut self.buf_f);
        std::mem::swap(&mut self.g, &mut self.buf_g);
        Ok(eq)
    }

    /// Advances one time step. Numerical failures are reported as
    /// [`Error::Divergence`] with the time of the failing step; the state is
    /// left unchanged in that case.
    pub fn step(&mut self) -> Result<Equilibria> {
        match self.try_step() {
            Ok(eq) => {
                self.t += 1;
                Ok(eq)
            }
            Err(e) if e.is_numerical() => Err(Error::Divergence {
                t: self.t,
                cause: Box::new(e),
            }),
            Err(e) => Err(e),
        }
    }

    /// Steps until `t_end`, handing every pre-step state to `recorder`.
    pub fn run(&mut self, t_end: u64, recorder: &mut dyn Recorder) -> Result<()> {
        if t_end < self.t {
            return Err(Error::Config(format!("t_end {t_end} is before current time {}", self.t)));
        }
        while self.t < t_end {
            let (f, g) = (self.f.clone(), self.g.clone());
            let t = self.t;
            let eq = self.step()?;
            recorder.record(t, &f, &g, &eq, &self.gas)?;
        }
        Ok(())
    }

    /// Replaces the populations (e.g. loading a dataset snapshot) and drops
    /// warm-start data.
    pub fn set_populations(&mut self, f: &PopulationGrid, g: &PopulationGrid, t: u64) -> Result<()> {
        if !f.same_shape(&self.f) || !g.same_shape(&self.g) {
            return Err(Error::Shape("snapshot does not match the grid".into()));
        }
        self.f.as_mut_slice().copy_from_slice(f.as_slice());
        self.g.as_mut_slice().copy_from_slice(g.as_slice());
        self.t = t;
        self.alpha.iter_mut().for_each(|a| *a = None);
        Ok(())
    }

    /// Total mass over fluid cells.
    pub fn mass(&self) -> f64 {
        self.f.total(self.grid.solid_mask())
    }

    /// Total `sum g` over fluid cells (twice the total energy).
    pub fn energy(&self) -> f64 {
        self.g.total(self.grid.solid_mask())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CX, CY};

    fn gas(mu: f64) -> GasParams {
        GasParams::new(1.4, 0.71, mu).unwrap()
    }

    fn uniform(grid: &Grid, s: MacroState) -> Vec<MacroState> {
        vec![s; grid.cells()]
    }

    #[test]
    fn unit_relaxation_gives_equilibria() {
        // tau = 1 when mu = rho T / 2, with Pr = 1
        let g = GasParams::new(1.4, 1.0, 0.5 * 0.9 * 0.3).unwrap();
        let s = MacroState::new(0.9, 0.1, -0.05, 0.3, &g);
        let feq = feq_extended_raw(&s);
        let geq = geq_poly_raw(&s);
        let mut f = feq;
        f[1] += 0.01;
        f[2] += 0.01;
        f[0] -= 0.02;
        let mut gg = geq;
        gg[3] += 0.02;
        gg[0] -= 0.02;
        let (fo, go) = collide_cell(&f, &gg, &geq, &g);
        let s2 = project_raw(&f, &gg, g.cv());
        let feq2 = feq_extended_raw(&s2);
        for i in 0..Q {
            assert!((fo[i] - feq2[i]).abs() < 1e-15);
            assert!((go[i] - geq[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn equilibrium_is_collision_fixed_point() {
        let g = gas(0.01);
        let s = MacroState::new(1.1, 0.05, 0.02, 0.25, &g);
        let f = feq_extended_raw(&s);
        let geq = geq_poly_raw(&s);
        let (fo, _) = collide_cell(&f, &geq, &geq, &g);
        for i in 0..Q {
            assert!((fo[i] - f[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn collision_conserves_mass_and_momentum() {
        let g = gas(0.02);
        let mut f = [0.0; Q];
        let mut gg = [0.0; Q];
        for i in 0..Q {
            f[i] = 0.05 + 0.1 * ((i * 7 % 5) as f64) / 5.0;
            gg[i] = 0.04 + 0.05 * ((i * 3 % 4) as f64) / 4.0;
        }
        let s = project_raw(&f, &gg, g.cv());
        let geq = geq_poly_raw(&s);
        let (fo, go) = collide_cell(&f, &gg, &geq, &g);
        let m = |p: &[f64; Q], c: &[f64; Q]| -> f64 { (0..Q).map(|i| p[i] * c[i]).sum() };
        assert!((fo.iter().sum::<f64>() - f.iter().sum::<f64>()).abs() < 1e-13);
        assert!((m(&fo, &CX) - m(&f, &CX)).abs() < 1e-13);
        assert!((m(&fo, &CY) - m(&f, &CY)).abs() < 1e-13);
        assert!((go.iter().sum::<f64>() - gg.iter().sum::<f64>()).abs() < 1e-13);
    }

    #[test]
    fn global_equilibrium_is_fixed_point() {
        let g = gas(0.02).with_shift([0.05, 0.0]);
        let grid = Grid::periodic(6, 5).unwrap();
        let field = uniform(&grid, MacroState::new(1.2, 0.1, 0.02, 0.3, &g));
        for closure in [ClosureSpec::Polynomial, ClosureSpec::Newton(NewtonSettings::default())] {
            let mut st = SolverState::lift(grid.clone(), g, closure, &field, None).unwrap();
            let before = st.observables().unwrap();
            for _ in 0..3 {
                st.step().unwrap();
            }
            let after = st.observables().unwrap();
            for (a, b) in before.iter().zip(&after) {
                assert!((a.rho - b.rho).abs() < 1e-12);
                assert!((a.ux - b.ux).abs() < 1e-12);
                assert!((a.uy - b.uy).abs() < 1e-12);
                assert!((a.t - b.t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lift_then_project_recovers_field() {
        let g = gas(0.01).with_shift([0.06, 0.0]);
        let grid = Grid::periodic(4, 3).unwrap();
        let field: Vec<MacroState> = (0..12)
            .map(|c| MacroState::new(0.5 + 0.1 * c as f64, 0.01 * c as f64, -0.02, 0.1 + 0.01 * c as f64, &g))
            .collect();
        let st = SolverState::lift(grid, g, ClosureSpec::Newton(NewtonSettings::default()), &field, None).unwrap();
        let back = st.observables().unwrap();
        for (a, b) in field.iter().zip(&back) {
            assert!((a.rho - b.rho).abs() < 1e-12);
            assert!((a.ux - b.ux).abs() < 1e-12);
            assert!((a.uy - b.uy).abs() < 1e-12);
            assert!((a.t - b.t).abs() < 1e-6);
        }
    }

    #[test]
    fn newton_lift_at_rest_is_scaled_weights() {
        let g = gas(0.01);
        let grid = Grid::periodic(2, 2).unwrap();
        let s = MacroState::new(0.7, 0.0, 0.0, 0.2, &g);
        let st = SolverState::lift(grid, g, ClosureSpec::Newton(NewtonSettings::default()), &[s; 4], None).unwrap();
        let w = weights(0.2).unwrap();
        for i in 0..Q {
            assert!((st.g.cell(0)[i] - 2.0 * s.rho * s.e * w[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn run_composes_and_stops_at_t_end() {
        let g = gas(0.02);
        let grid = Grid::periodic(8, 3).unwrap();
        let field: Vec<MacroState> = (0..24)
            .map(|c| MacroState::new(1.0 + 0.1 * ((c % 8) as f64 / 8.0), 0.0, 0.0, 0.2, &g))
            .collect();
        let base = SolverState::lift(grid, g, ClosureSpec::Newton(NewtonSettings::default()), &field, None).unwrap();
        let mut a = base.clone();
        a.run(0, &mut NullRecorder).unwrap();
        assert_eq!(a.t, 0);
        a.run(5, &mut NullRecorder).unwrap();
        a.run(10, &mut NullRecorder).unwrap();
        let mut b = base.clone();
        b.run(10, &mut NullRecorder).unwrap();
        assert_eq!(a.f, b.f);
        assert_eq!(a.g, b.g);
        assert!(a.run(3, &mut NullRecorder).is_err());
    }

    #[test]
    fn divergence_carries_time_and_keeps_state() {
        let g = gas(0.02);
        let grid = Grid::periodic(3, 3).unwrap();
        let field = uniform(&grid, MacroState::new(1.0, 0.0, 0.0, 0.2, &g));
        let mut st = SolverState::lift(grid, g, ClosureSpec::Polynomial, &field, None).unwrap();
        st.step().unwrap();
        st.f.cell_mut(4)[0] = -5.0;
        let before = st.f.clone();
        match st.step() {
            Err(Error::Divergence { t, cause }) => {
                assert_eq!(t, 1);
                assert!(matches!(*cause, Error::NegativeDensity { cell, .. } if cell.0 == Some((1, 1))));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert_eq!(st.f, before);
        assert_eq!(st.t, 1);
    }
}
