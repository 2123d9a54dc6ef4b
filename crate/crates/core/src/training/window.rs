//! One training window: an `N_r`-step unroll recorded on the tensor tape.

use std::rc::Rc;

use crate::autodiff::{NodeId, Tape, Tensor};
use crate::error::{Error, Result};
use crate::lattice::Q;
use crate::network::MlpParams;
use crate::population::PopulationGrid;

use super::ops::{
    collide_forward, moments_forward, profile_tv_forward, propagate_forward, renormalize_forward, CollideOp, MomentsOp,
    ProfileTvOp, PropagateOp, RenormalizeOp, StepContext,
};

/// Loss weights of a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowWeights {
    /// Weight of the population term; `1 - alpha` goes to the equilibrium term.
    pub alpha: f64,
    /// Weight of the TVD penalty (0 disables it).
    pub alpha2: f64,
    /// Feature column regularized by the TVD term (0 rho, 1 ux, 2 uy, 3 T).
    pub tvd_column: usize,
}

impl Default for WindowWeights {
    fn default() -> Self {
        WindowWeights {
            alpha: 0.0,
            alpha2: 0.0,
            tvd_column: 3,
        }
    }
}

/// Reference data for step `r` of the window.
#[derive(Debug, Clone, Copy)]
pub struct StepTarget<'a> {
    pub f: &'a PopulationGrid,
    pub geq: &'a PopulationGrid,
}

/// Where the energy equilibrium comes from inside the unroll.
#[derive(Debug, Clone, Copy)]
pub enum WindowClosure<'a> {
    Network(&'a MlpParams),
    /// Fixed equilibria, one per step starting at the window start (length
    /// `N_r + 1`). Used to check the plumbing against the data generator.
    Oracle(&'a [&'a PopulationGrid]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    /// Total loss including the weighted TVD term.
    pub loss: f64,
    /// Unweighted TVD penalty.
    pub tvd: f64,
    /// Flat gradient (same layout as [`MlpParams::flatten`]); empty for the
    /// oracle closure.
    pub grad: Vec<f64>,
}

/// Records one window on `tape`; returns `(loss, tvd)` nodes.
pub fn record_window(
    tape: &mut Tape,
    ctx: &Rc<StepContext>,
    closure: WindowClosure<'_>,
    x0: Tensor,
    targets: &[StepTarget<'_>],
    w: WindowWeights,
) -> Result<(NodeId, Option<NodeId>)> {
    let n_r = targets.len();
    if n_r == 0 {
        return Err(Error::Config("window needs at least one step".into()));
    }
    if !(0.0..=1.0).contains(&w.alpha) || w.alpha2 < 0.0 || w.tvd_column > 3 {
        return Err(Error::Config(format!("invalid window weights {w:?}")));
    }
    let net = match closure {
        WindowClosure::Network(p) => {
            let handles = p.register(tape);
            let basis = p.basis_tape(tape, &handles);
            Some((p, handles, basis))
        }
        WindowClosure::Oracle(eqs) => {
            if eqs.len() < n_r + 1 {
                return Err(Error::Shape(format!("oracle needs {} equilibria, got {}", n_r + 1, eqs.len())));
            }
            None
        }
    };
    let row_width = ctx.grid.nx();
    let equilibrium = |tape: &mut Tape, x: NodeId, r: usize| -> Result<(NodeId, NodeId)> {
        let uv = moments_forward(ctx, tape.value(x))?;
        let u = tape.custom(Box::new(MomentsOp(ctx.clone())), &[x], uv);
        let geq = match (&net, closure) {
            (Some((p, handles, basis)), _) => {
                let raw = p.forward_tape(tape, handles, u, *basis, row_width)?;
                if ctx.renormalize {
                    let v = renormalize_forward(ctx, tape.value(u), tape.value(raw));
                    tape.custom(Box::new(RenormalizeOp(ctx.clone())), &[u, raw], v)
                } else {
                    raw
                }
            }
            (None, WindowClosure::Oracle(eqs)) => tape.leaf(ctx.fluid_rows(eqs[r])),
            _ => unreachable!(),
        };
        Ok((u, geq))
    };

    let mut x = tape.leaf(x0);
    let (mut u, mut geq) = equilibrium(tape, x, 0)?;
    let mut tv_prev = (w.alpha2 > 0.0).then(|| {
        let v = profile_tv_forward(ctx, tape.value(u), w.tvd_column);
        tape.custom(Box::new(ProfileTvOp { ctx: ctx.clone(), col: w.tvd_column }), &[u], v)
    });
    let mut data_loss: Option<NodeId> = None;
    let mut tvd: Option<NodeId> = None;
    for (r, target) in targets.iter().enumerate() {
        let xc_v = collide_forward(ctx, tape.value(x), tape.value(geq));
        let xc = tape.custom(Box::new(CollideOp(ctx.clone())), &[x, geq], xc_v);
        let xn_v = propagate_forward(ctx, tape.value(xc))?;
        x = tape.custom(Box::new(PropagateOp(ctx.clone())), &[xc], xn_v);
        (u, geq) = equilibrium(tape, x, r + 1)?;

        let mut term: Option<NodeId> = None;
        if w.alpha < 1.0 {
            let t = tape.leaf(ctx.fluid_rows(target.geq));
            let l = tape.mse(geq, t);
            term = Some(tape.scale(l, (1.0 - w.alpha) / n_r as f64));
        }
        if w.alpha > 0.0 {
            let fp = tape.columns(x, 0, Q);
            let ft = tape.leaf(Tensor::from_vec(ctx.cells(), Q, target.f.as_slice().to_vec())?);
            let l = tape.mse(fp, ft);
            let l = tape.scale(l, w.alpha / n_r as f64);
            term = Some(match term {
                Some(a) => tape.add(a, l),
                None => l,
            });
        }
        let term = term.expect("alpha is in [0, 1]");
        data_loss = Some(match data_loss {
            Some(a) => tape.add(a, term),
            None => term,
        });

        if let Some(prev) = tv_prev {
            let v = profile_tv_forward(ctx, tape.value(u), w.tvd_column);
            let cur = tape.custom(Box::new(ProfileTvOp { ctx: ctx.clone(), col: w.tvd_column }), &[u], v);
            let d = tape.sub(cur, prev);
            let inc = tape.relu(d);
            tvd = Some(match tvd {
                Some(a) => tape.add(a, inc),
                None => inc,
            });
            tv_prev = Some(cur);
        }
    }
    let mut loss = data_loss.expect("window has at least one step");
    if let Some(t) = tvd {
        let weighted = tape.scale(t, w.alpha2);
        loss = tape.add(loss, weighted);
    }
    Ok((loss, tvd))
}

/// Runs one window and, for the network closure, its gradient.
pub fn window_loss_and_grad(
    ctx: &Rc<StepContext>,
    closure: WindowClosure<'_>,
    x0: Tensor,
    targets: &[StepTarget<'_>],
    w: WindowWeights,
    with_grad: bool,
) -> Result<WindowResult> {
    let mut tape = Tape::new();
    let (loss, tvd) = record_window(&mut tape, ctx, closure, x0, targets, w)?;
    let loss_v = tape.value(loss).item();
    let tvd_v = tvd.map_or(0.0, |t| tape.value(t).item());
    let grad = match (closure, with_grad) {
        (WindowClosure::Network(p), true) => {
            let grads = tape.backward(loss, 1.0)?;
            p.gradient(&grads).flatten()
        }
        _ => Vec::new(),
    };
    Ok(WindowResult {
        loss: loss_v,
        tvd: tvd_v,
        grad,
    })
}
