//! The learned energy equilibrium `exp(sum_k lambda_k(U) phi_k(c_i))`.
//!
//! `lambda` maps the observables `(rho, ux, uy, T)` to `p` coefficients and
//! `phi` maps each lattice velocity to `p` basis values. The basis does not
//! depend on the state, so it is evaluated once per batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::mlp::Mlp;
use crate::autodiff::{Gradients, NodeId, Tape, Tensor};
use crate::error::{CellRef, Error, Result};
use crate::lattice::{CX, CY, Q};

/// Largest admissible exponent before `exp`.
pub const EXPONENT_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub lambda: Mlp,
    pub phi: Mlp,
}

/// Parameter nodes of one tape registration.
#[derive(Debug, Clone)]
pub struct ParamHandles {
    pub lambda: Vec<(NodeId, NodeId)>,
    pub phi: Vec<(NodeId, NodeId)>,
}

/// The `Q x 2` matrix of lattice velocities.
pub fn velocity_tensor() -> Tensor {
    let mut data = Vec::with_capacity(2 * Q);
    for i in 0..Q {
        data.push(CX[i]);
        data.push(CY[i]);
    }
    Tensor::from_vec(Q, 2, data).unwrap()
}

impl MlpParams {
    /// Default architecture: three GELU hidden layers of `width` units and a
    /// linear output of `basis` units on both networks.
    pub fn new(width: usize, basis: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda = Mlp::random(&[4, width, width, width, basis], 0.1, &mut rng);
        let phi = Mlp::random(&[2, width, width, width, basis], 1.0, &mut rng);
        MlpParams { lambda, phi }
    }

    pub fn from_parts(lambda: Mlp, phi: Mlp) -> Result<Self> {
        if lambda.input_dim() != 4 || phi.input_dim() != 2 {
            return Err(Error::Shape(format!(
                "network inputs must be 4 (lambda) and 2 (phi), got {} and {}",
                lambda.input_dim(),
                phi.input_dim()
            )));
        }
        if lambda.output_dim() != phi.output_dim() {
            return Err(Error::Shape(format!(
                "basis width differs: lambda {} vs phi {}",
                lambda.output_dim(),
                phi.output_dim()
            )));
        }
        Ok(MlpParams { lambda, phi })
    }

    pub fn zeros_like(&self) -> Self {
        MlpParams {
            lambda: Mlp::zeros(&self.lambda.sizes()),
            phi: Mlp::zeros(&self.phi.sizes()),
        }
    }

    pub fn basis_size(&self) -> usize {
        self.lambda.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.lambda.num_params() + self.phi.num_params()
    }

    fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.lambda
            .layers
            .iter()
            .chain(&self.phi.layers)
            .flat_map(|l| [&l.w, &l.b])
    }

    fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.lambda
            .layers
            .iter_mut()
            .chain(self.phi.layers.iter_mut())
            .flat_map(|l| [&mut l.w, &mut l.b])
    }

    /// All parameters, lambda-net first, each layer's weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for t in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.data().iter().all(|v| v.is_finite()))
    }

    /// Folds an affine input normalization `(U - mean) / std` into the first
    /// lambda layer. Components with zero spread are left unscaled.
    pub fn standardize_inputs(&mut self, mean: [f64; 4], std: [f64; 4]) {
        let first = &mut self.lambda.layers[0];
        let (rows, cols) = first.w.shape();
        for r in 0..rows {
            let mut shift = 0.0;
            for k in 0..cols {
                let s = if std[k] > 1e-12 { std[k] } else { 1.0 };
                let w = first.w.get(r, k) / s;
                first.w.set(r, k, w);
                shift += w * mean[k];
            }
            first.b.data_mut()[r] -= shift;
        }
    }

    pub fn register(&self, tape: &mut Tape) -> ParamHandles {
        let mut slot = 0;
        let mut reg = |mlp: &Mlp, tape: &mut Tape| {
            mlp.layers
                .iter()
                .map(|l| {
                    let w = tape.param(slot, l.w.clone());
                    let b = tape.param(slot + 1, l.b.clone());
                    slot += 2;
                    (w, b)
                })
                .collect::<Vec<_>>()
        };
        let lambda = reg(&self.lambda, tape);
        let phi = reg(&self.phi, tape);
        ParamHandles { lambda, phi }
    }

    /// Gradient shaped like `self`; parameters without an adjoint get zeros.
    pub fn gradient(&self, grads: &Gradients) -> MlpParams {
        let mut out = self.zeros_like();
        for (slot, t) in out.tensors_mut().enumerate() {
            if let Some(g) = grads.param(slot) {
                t.data_mut().copy_from_slice(g.data());
            }
        }
        out
    }

    /// Shifts the last lambda bias so the exponents, averaged over the rows of
    /// `u`, equal `log_target` (least squares when the basis has rank < Q).
    /// The shift is the minimum-norm solution of `B db = r` with a tiny ridge.
    pub fn shift_output_bias(&mut self, u: &Tensor, log_target: &[f64; Q]) -> Result<()> {
        let lam = self.lambda.forward(u);
        let basis = self.basis();
        let p = self.basis_size();
        let n = u.rows().max(1) as f64;
        let mut mean_lam = vec![0.0; p];
        for r in 0..lam.rows() {
            for (m, v) in mean_lam.iter_mut().zip(lam.row(r)) {
                *m += v / n;
            }
        }
        let mut resid = [0.0; Q];
        for i in 0..Q {
            let s: f64 = (0..p).map(|k| mean_lam[k] * basis.get(i, k)).sum();
            resid[i] = log_target[i] - s;
        }
        let mut gram = [[0.0; Q]; Q];
        let scale = (0..Q).map(|i| (0..p).map(|k| basis.get(i, k).powi(2)).sum::<f64>()).fold(0.0, f64::max);
        for i in 0..Q {
            for j in 0..Q {
                gram[i][j] = (0..p).map(|k| basis.get(i, k) * basis.get(j, k)).sum();
            }
            gram[i][i] += 1e-10 * scale.max(1e-300);
        }
        let z = solve_dense(gram, resid)
            .ok_or_else(|| Error::InvalidState("basis Gram matrix is singular".into()))?;
        let bias = self.lambda.layers.last_mut().unwrap().b.data_mut();
        for (k, b) in bias.iter_mut().enumerate() {
            *b += (0..Q).map(|i| basis.get(i, k) * z[i]).sum::<f64>();
        }
        Ok(())
    }

    /// `Q x p` basis matrix.
    pub fn basis(&self) -> Tensor {
        self.phi.forward(&velocity_tensor())
    }

    /// Equilibria for a batch of observables (`N x 4`), returned as `N x Q`.
    /// Row `r` maps to cell `(r % row_width, r / row_width)` in errors.
    pub fn eval(&self, u: &Tensor, row_width: usize) -> Result<Tensor> {
        let lam = self.lambda.forward(u);
        let basis = self.basis();
        let mut s = Tensor::zeros(u.rows(), Q);
        crate::autodiff::tensor::gemm(1.0, &lam, false, &basis, true, 0.0, &mut s);
        check_exponents(&s, row_width)?;
        Ok(s.map(f64::exp))
    }

    /// Single-state convenience wrapper around [`MlpParams::eval`].
    pub fn eval_state(&self, features: [f64; 4]) -> Result<[f64; Q]> {
        let u = Tensor::from_vec(1, 4, features.to_vec())?;
        let g = self.eval(&u, 1)?;
        Ok(g.row(0).try_into().unwrap())
    }

    /// Records the basis network on `tape`.
    pub fn basis_tape(&self, tape: &mut Tape, handles: &ParamHandles) -> NodeId {
        let c = tape.leaf(velocity_tensor());
        self.phi.forward_tape(tape, &handles.phi, c)
    }

    /// Records `exp(lambda(U) . phi(c_i))` for the batch node `u` (`N x 4`).
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        handles: &ParamHandles,
        u: NodeId,
        basis: NodeId,
        row_width: usize,
    ) -> Result<NodeId> {
        let lam = self.lambda.forward_tape(tape, &handles.lambda, u);
        let s = tape.inner_t(lam, basis);
        check_exponents(tape.value(s), row_width)?;
        Ok(tape.exp(s))
    }
}

/// Energy moment `2 rho E` of lattice-frame features `(rho, ux, uy, T)`.
pub fn energy_moment(features: &[f64], cv: f64) -> f64 {
    let (rho, ux, uy, t) = (features[0], features[1], features[2], features[3]);
    2.0 * rho * (cv * t + 0.5 * (ux * ux + uy * uy))
}

/// Rescales a positive equilibrium so that its sum is `target`. The shape
/// (and positivity) of the exponential family is kept; only the partition
/// factor changes.
pub fn renormalize_energy(geq: &mut [f64], target: f64) {
    let k = target / geq.iter().sum::<f64>();
    geq.iter_mut().for_each(|v| *v *= k);
}

/// Gaussian elimination with partial pivoting.
fn solve_dense<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for c in 0..N {
        let piv = (c..N).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if !(a[piv][c].abs() > 0.0) {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..N {
            let m = a[r][c] / a[c][c];
            for k in c..N {
                a[r][k] -= m * a[c][k];
            }
            b[r] -= m * b[c];
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let s: f64 = (r + 1..N).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn check_exponents(s: &Tensor, row_width: usize) -> Result<()> {
    for r in 0..s.rows() {
        for &v in s.row(r) {
            if !(v.abs() <= EXPONENT_LIMIT) {
                let w = row_width.max(1);
                return Err(Error::Saturation {
                    value: v,
                    cell: CellRef(Some((r % w, r / w))),
                });
            }
        }
    }
    Ok(())
}
