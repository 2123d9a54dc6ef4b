//! Solver kernels as differentiable tape operations.
//!
//! The unrolled state is an `N x 18` tensor (`f` in columns 0..9, `g` in
//! 9..18) over all `N = nx * ny` cells; network-facing tensors (`U`, `g_eq`)
//! only hold the fluid cells, in row-major cell order.

use std::rc::Rc;

use crate::autodiff::{CustomOp, ScalarTape, Tensor, Var};
use crate::boundary::{
    apply_bounce_back, apply_open_boundaries, bounce_back_adjoint, open_boundaries_adjoint, InletCondition,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::Q;
use crate::moments::{project, project_raw, weights, GasParams};
use crate::network::{energy_moment, renormalize_energy};
use crate::population::{PopulationGrid, Species};
use crate::solver::collide_cell;
use crate::streaming::{stream_adjoint, stream_into};

/// Width of the stacked `f | g` state.
pub const STATE_COLS: usize = 2 * Q;

/// Grid, gas and boundary data shared by the ops of one unroll.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub grid: Grid,
    pub gas: GasParams,
    pub inlet: Option<InletCondition>,
    /// Fluid cell indices; row `r` of `U` / `g_eq` belongs to `fluid[r]`.
    pub fluid: Vec<usize>,
    /// Rescale network equilibria to the exact energy moment, as the
    /// solver's renormalized neural closure does.
    pub renormalize: bool,
}

impl StepContext {
    pub fn new(grid: Grid, gas: GasParams, inlet: Option<InletCondition>) -> Result<Self> {
        if grid.boundaries().has_dirichlet() && inlet.is_none() {
            return Err(Error::Config("dirichlet edge requires an inlet state".into()));
        }
        let fluid = (0..grid.cells()).filter(|&c| !grid.is_solid(c)).collect();
        Ok(StepContext {
            grid,
            gas,
            inlet,
            fluid,
            renormalize: true,
        })
    }

    /// Context of a benchmark case; the Dirichlet inlet (if any) is built
    /// with `newton`.
    pub fn for_case(case: &crate::bench::CaseSpec, newton: &crate::closures::NewtonSettings) -> Result<Self> {
        StepContext::new(case.grid.clone(), case.gas, case.inlet_condition(newton)?)
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    /// Stacks two population grids into the `N x 18` state.
    pub fn merge(&self, f: &PopulationGrid, g: &PopulationGrid) -> Result<Tensor> {
        let n = self.cells();
        if f.cells() != n || g.cells() != n {
            return Err(Error::Shape("populations do not match the grid".into()));
        }
        let mut x = Tensor::zeros(n, STATE_COLS);
        for c in 0..n {
            let row = x.row_mut(c);
            row[..Q].copy_from_slice(f.cell(c));
            row[Q..].copy_from_slice(g.cell(c));
        }
        Ok(x)
    }

    pub fn split(&self, x: &Tensor) -> (PopulationGrid, PopulationGrid) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut f = PopulationGrid::zeros(nx, ny, Species::F);
        let mut g = PopulationGrid::zeros(nx, ny, Species::G);
        for c in 0..self.cells() {
            let row = x.row(c);
            f.cell_mut(c).copy_from_slice(&row[..Q]);
            g.cell_mut(c).copy_from_slice(&row[Q..]);
        }
        (f, g)
    }

    /// Fluid rows of a cell-indexed population grid, as `N_fluid x 9`.
    pub fn fluid_rows(&self, pop: &PopulationGrid) -> Tensor {
        let mut t = Tensor::zeros(self.fluid.len(), Q);
        for (r, &c) in self.fluid.iter().enumerate() {
            t.row_mut(r).copy_from_slice(pop.cell(c));
        }
        t
    }

    fn cell_error(&self, c: usize, e: Error) -> Error {
        let (x, y) = self.grid.coords(c);
        e.at(x, y)
    }
}

fn row9(s: &[f64]) -> [f64; Q] {
    s.try_into().unwrap()
}

/// Lattice-frame features `(rho, ux, uy, T)` of every fluid cell, with the
/// same validity checks as the solver.
pub fn moments_forward(ctx: &StepContext, x: &Tensor) -> Result<Tensor> {
    let mut u = Tensor::zeros(ctx.fluid.len(), 4);
    for (r, &c) in ctx.fluid.iter().enumerate() {
        let row = x.row(c);
        let s = project(&row9(&row[..Q]), &row9(&row[Q..]), &ctx.gas).map_err(|e| ctx.cell_error(c, e))?;
        weights(s.t).map_err(|e| ctx.cell_error(c, e))?;
        u.row_mut(r).copy_from_slice(&s.features());
    }
    Ok(u)
}

pub struct MomentsOp(pub Rc<StepContext>);

impl CustomOp for MomentsOp {
    fn name(&self) -> &'static str {
        "moments"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        if !needs[0] {
            return vec![None];
        }
        let ctx = &self.0;
        let x = inputs[0];
        let cv = ctx.gas.cv();
        let mut gx = Tensor::zeros(x.rows(), x.cols());
        let tape = ScalarTape::new();
        for (r, &c) in ctx.fluid.iter().enumerate() {
            tape.clear();
            let row = x.row(c);
            let vars: [Var<'_>; STATE_COLS] = std::array::from_fn(|k| tape.var(row[k]));
            let f: [Var<'_>; Q] = std::array::from_fn(|i| vars[i]);
            let g: [Var<'_>; Q] = std::array::from_fn(|i| vars[Q + i]);
            let s = project_raw(&f, &g, cv);
            let adj = tape.adjoints(&[s.rho, s.ux, s.uy, s.t], grad.row(r));
            let out = gx.row_mut(c);
            for k in 0..STATE_COLS {
                out[k] = adj[vars[k].index()];
            }
        }
        vec![Some(gx)]
    }
}

/// BGK collision of every fluid cell given the fluid-row equilibria.
pub fn collide_forward(ctx: &StepContext, x: &Tensor, geq: &Tensor) -> Tensor {
    let mut out = x.clone();
    for (r, &c) in ctx.fluid.iter().enumerate() {
        let row = x.row(c);
        let (fo, go) = collide_cell(&row9(&row[..Q]), &row9(&row[Q..]), &row9(geq.row(r)), &ctx.gas);
        let o = out.row_mut(c);
        o[..Q].copy_from_slice(&fo);
        o[Q..].copy_from_slice(&go);
    }
    out
}

pub struct CollideOp(pub Rc<StepContext>);

impl CustomOp for CollideOp {
    fn name(&self) -> &'static str {
        "collide"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let ctx = &self.0;
        let (x, geq) = (inputs[0], inputs[1]);
        // solid rows pass through unchanged
        let mut gx = grad.clone();
        let mut gq = Tensor::zeros(geq.rows(), geq.cols());
        let tape = ScalarTape::new();
        for (r, &c) in ctx.fluid.iter().enumerate() {
            tape.clear();
            let row = x.row(c);
            let f: [Var<'_>; Q] = std::array::from_fn(|i| tape.var(row[i]));
            let g: [Var<'_>; Q] = std::array::from_fn(|i| tape.var(row[Q + i]));
            let q: [Var<'_>; Q] = std::array::from_fn(|i| tape.var(geq.get(r, i)));
            let (fo, go) = collide_cell(&f, &g, &q, &ctx.gas);
            let outs: Vec<Var<'_>> = fo.iter().chain(go.iter()).copied().collect();
            let adj = tape.adjoints(&outs, grad.row(c));
            let o = gx.row_mut(c);
            for i in 0..Q {
                o[i] = adj[f[i].index()];
                o[Q + i] = adj[g[i].index()];
            }
            let oq = gq.row_mut(r);
            for i in 0..Q {
                oq[i] = adj[q[i].index()];
            }
        }
        vec![needs[0].then_some(gx), needs[1].then_some(gq)]
    }
}

/// Bounce-back, streaming, open boundaries and solid reset for both species.
pub fn propagate_forward(ctx: &StepContext, xc: &Tensor) -> Result<Tensor> {
    let (nx, ny) = (ctx.grid.nx(), ctx.grid.ny());
    let (mut f, mut g) = ctx.split(xc);
    let mut out = Vec::with_capacity(2);
    for pop in [&mut f, &mut g] {
        let mut buf = PopulationGrid::zeros(nx, ny, pop.species());
        apply_bounce_back(pop, &ctx.grid);
        stream_into(pop, &ctx.grid, &mut buf);
        apply_open_boundaries(&mut buf, &ctx.grid, ctx.inlet.as_ref())?;
        if let Some(mask) = ctx.grid.solid_mask() {
            for (c, &s) in mask.iter().enumerate() {
                if s {
                    *buf.cell_mut(c) = [0.0; Q];
                }
            }
        }
        buf.check_finite()?;
        out.push(buf);
    }
    ctx.merge(&out[0], &out[1])
}

pub struct PropagateOp(pub Rc<StepContext>);

impl CustomOp for PropagateOp {
    fn name(&self) -> &'static str {
        "propagate"
    }

    fn backward(&self, _inputs: &[&Tensor], _output: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        if !needs[0] {
            return vec![None];
        }
        let ctx = &self.0;
        let (ga, gb) = ctx.split(grad);
        let mut res = Vec::with_capacity(2);
        for adj_pop in [ga, gb] {
            let mut adj = adj_pop.into_vec();
            if let Some(mask) = ctx.grid.solid_mask() {
                for (c, &s) in mask.iter().enumerate() {
                    if s {
                        adj[c * Q..(c + 1) * Q].iter_mut().for_each(|v| *v = 0.0);
                    }
                }
            }
            open_boundaries_adjoint(&mut adj, &ctx.grid);
            let mut back = vec![0.0; adj.len()];
            stream_adjoint(&adj, &ctx.grid, &mut back);
            bounce_back_adjoint(&mut back, &ctx.grid);
            res.push(back);
        }
        let mut gx = Tensor::zeros(grad.rows(), grad.cols());
        for c in 0..ctx.cells() {
            let o = gx.row_mut(c);
            o[..Q].copy_from_slice(&res[0][c * Q..(c + 1) * Q]);
            o[Q..].copy_from_slice(&res[1][c * Q..(c + 1) * Q]);
        }
        vec![Some(gx)]
    }
}

/// x-profile of one feature column, averaged over the fluid cells of each
/// grid column.
fn profile(ctx: &StepContext, u: &Tensor, col: usize) -> (Vec<f64>, Vec<usize>) {
    let nx = ctx.grid.nx();
    let mut sum = vec![0.0; nx];
    let mut count = vec![0usize; nx];
    for (r, &c) in ctx.fluid.iter().enumerate() {
        let (x, _) = ctx.grid.coords(c);
        sum[x] += u.get(r, col);
        count[x] += 1;
    }
    for x in 0..nx {
        if count[x] > 0 {
            sum[x] /= count[x] as f64;
        }
    }
    (sum, count)
}

/// Total variation of the x-profile of feature column `col` (`1 x 1`).
pub fn profile_tv_forward(ctx: &StepContext, u: &Tensor, col: usize) -> Tensor {
    let (p, _) = profile(ctx, u, col);
    Tensor::scalar(crate::bench::metrics::total_variation(&p))
}

pub struct ProfileTvOp {
    pub ctx: Rc<StepContext>,
    pub col: usize,
}

impl CustomOp for ProfileTvOp {
    fn name(&self) -> &'static str {
        "profile_tv"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        if !needs[0] {
            return vec![None];
        }
        let u = inputs[0];
        let (p, count) = profile(&self.ctx, u, self.col);
        let sign = |d: f64| {
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        };
        let nx = p.len();
        let mut dp = vec![0.0; nx];
        for j in 0..nx.saturating_sub(1) {
            let s = sign(p[j + 1] - p[j]);
            dp[j + 1] += s;
            dp[j] -= s;
        }
        let seed = grad.item();
        let mut gu = Tensor::zeros(u.rows(), u.cols());
        for (r, &c) in self.ctx.fluid.iter().enumerate() {
            let (x, _) = self.ctx.grid.coords(c);
            gu.set(r, self.col, seed * dp[x] / count[x] as f64);
        }
        vec![Some(gu)]
    }
}

/// Network output rescaled row-wise to `2 rho E` of the matching `U` row.
pub fn renormalize_forward(ctx: &StepContext, u: &Tensor, raw: &Tensor) -> Tensor {
    let cv = ctx.gas.cv();
    let mut out = raw.clone();
    for r in 0..out.rows() {
        renormalize_energy(out.row_mut(r), energy_moment(u.row(r), cv));
    }
    out
}

/// Inputs `[U, raw g_eq]`.
pub struct RenormalizeOp(pub Rc<StepContext>);

impl CustomOp for RenormalizeOp {
    fn name(&self) -> &'static str {
        "renormalize"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>> {
        let (u, raw) = (inputs[0], inputs[1]);
        let cv = self.0.gas.cv();
        let mut gu = Tensor::zeros(u.rows(), u.cols());
        let mut graw = Tensor::zeros(raw.rows(), raw.cols());
        for r in 0..raw.rows() {
            let x = raw.row(r);
            let gr = grad.row(r);
            let sum: f64 = x.iter().sum();
            let m = energy_moment(u.row(r), cv);
            // out_i = x_i m / S
            let gx: f64 = gr.iter().zip(x).map(|(g, v)| g * v).sum::<f64>() / sum;
            for (o, g) in graw.row_mut(r).iter_mut().zip(gr) {
                *o = m / sum * (g - gx);
            }
            let (rho, ux, uy, t) = (u.get(r, 0), u.get(r, 1), u.get(r, 2), u.get(r, 3));
            let dm = [
                2.0 * (cv * t + 0.5 * (ux * ux + uy * uy)),
                2.0 * rho * ux,
                2.0 * rho * uy,
                2.0 * rho * cv,
            ];
            for (o, d) in gu.row_mut(r).iter_mut().zip(dm) {
                *o = gx * d;
            }
        }
        vec![needs[0].then_some(gu), needs[1].then_some(graw)]
    }
}
