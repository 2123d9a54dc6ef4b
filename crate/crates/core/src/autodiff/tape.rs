//! Tensor-level reverse-mode tape.
//!
//! Forward values are computed eagerly when a node is pushed. Parameters are
//! tagged with a slot number; [`Tape::backward`] returns their gradients
//! summed over every node that shares the slot. Data leaves receive no
//! adjoint unless created with [`Tape::leaf_with_grad`].

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A differentiable operation defined outside the tape (solver kernels).
pub trait CustomOp {
    fn name(&self) -> &'static str;

    /// Adjoints of each input given the output adjoint. Entries for inputs
    /// with `needs[k] == false` may be `None`.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &Tensor, needs: &[bool]) -> Vec<Option<Tensor>>;
}

enum Op {
    Leaf,
    Param(usize),
    /// `x W^T + b`, with `W` stored `out x in` and `b` as `1 x out`.
    Affine { x: NodeId, w: NodeId, b: NodeId },
    Gelu(NodeId),
    Exp(NodeId),
    Relu(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sum(NodeId),
    /// `a b^T`.
    InnerT(NodeId, NodeId),
    /// Mean of squared differences.
    Mse(NodeId, NodeId),
    Columns { x: NodeId, start: usize },
    Custom { op: Box<dyn CustomOp>, inputs: Vec<NodeId> },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of a backward sweep.
pub struct Gradients {
    adj: Vec<Option<Tensor>>,
    slots: Vec<(usize, NodeId)>,
}

impl Gradients {
    /// Gradient of a parameter slot, summed over its nodes.
    pub fn param(&self, slot: usize) -> Option<Tensor> {
        let mut acc: Option<Tensor> = None;
        for &(s, id) in &self.slots {
            if s != slot {
                continue;
            }
            if let Some(a) = &self.adj[id.0] {
                match &mut acc {
                    Some(t) => t.add_assign(a),
                    None => acc = Some(a.clone()),
                }
            }
        }
        acc
    }

    /// Adjoint of any node that required a gradient.
    pub fn node(&self, id: NodeId) -> Option<&Tensor> {
        self.adj.get(id.0).and_then(|a| a.as_ref())
    }
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    pub fn leaf_with_grad(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn param(&mut self, slot: usize, value: Tensor) -> NodeId {
        self.push(value, Op::Param(slot), true)
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xv = self.value(x);
        let wv = self.value(w);
        let bv = self.value(b);
        assert_eq!(xv.cols(), wv.cols(), "affine input width");
        assert_eq!(bv.len(), wv.rows(), "affine bias width");
        let mut y = Tensor::zeros(xv.rows(), wv.rows());
        for r in 0..y.rows() {
            y.row_mut(r).copy_from_slice(bv.data());
        }
        gemm(1.0, xv, false, wv, true, 1.0, &mut y);
        let needs = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(y, Op::Affine { x, w, b }, needs)
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).map(gelu);
        let needs = self.needs(x);
        self.push(y, Op::Gelu(x), needs)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).map(f64::exp);
        let needs = self.needs(x);
        self.push(y, Op::Exp(x), needs)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let y = self.value(x).map(|v| v.max(0.0));
        let needs = self.needs(x);
        self.push(y, Op::Relu(x), needs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = self.value(a).zip(self.value(b), |p, q| p + q);
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::Add(a, b), needs)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = self.value(a).zip(self.value(b), |p, q| p - q);
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::Sub(a, b), needs)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let y = self.value(a).zip(self.value(b), |p, q| p * q);
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::Mul(a, b), needs)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let y = self.value(a).map(|v| v * c);
        let needs = self.needs(a);
        self.push(y, Op::Scale(a, c), needs)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let y = Tensor::scalar(self.value(a).sum());
        let needs = self.needs(a);
        self.push(y, Op::Sum(a), needs)
    }

    pub fn inner_t(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        let mut y = Tensor::zeros(av.rows(), bv.rows());
        gemm(1.0, av, false, bv, true, 0.0, &mut y);
        let needs = self.needs(a) || self.needs(b);
        self.push(y, Op::InnerT(a, b), needs)
    }

    pub fn mse(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let av = self.value(a);
        let bv = self.value(b);
        assert_eq!(av.shape(), bv.shape(), "mse operands");
        let n = av.len().max(1) as f64;
        let s: f64 = av.data().iter().zip(bv.data()).map(|(p, q)| (p - q) * (p - q)).sum();
        let needs = self.needs(a) || self.needs(b);
        self.push(Tensor::scalar(s / n), Op::Mse(a, b), needs)
    }

    pub fn columns(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let xv = self.value(x);
        let mut y = Tensor::zeros(xv.rows(), len);
        for r in 0..xv.rows() {
            y.row_mut(r).copy_from_slice(&xv.row(r)[start..start + len]);
        }
        let needs = self.needs(x);
        self.push(y, Op::Columns { x, start }, needs)
    }

    pub fn custom(&mut self, op: Box<dyn CustomOp>, inputs: &[NodeId], value: Tensor) -> NodeId {
        let needs = inputs.iter().any(|&i| self.needs(i));
        self.push(
            value,
            Op::Custom {
                op,
                inputs: inputs.to_vec(),
            },
            needs,
        )
    }

    /// Reverse sweep from `loss` (seeded with `seed`).
    pub fn backward(&self, loss: NodeId, seed: f64) -> Result<Gradients> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        let mut adj: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let lv = self.value(loss);
        adj[loss.0] = Some(Tensor::from_vec(lv.rows(), lv.cols(), vec![seed; lv.len()])?);
        let mut keep = vec![false; self.nodes.len()];
        let mut slots = Vec::new();
        for (k, n) in self.nodes.iter().enumerate() {
            match n.op {
                Op::Param(s) => {
                    keep[k] = true;
                    slots.push((s, NodeId(k)));
                }
                Op::Leaf if n.needs_grad => keep[k] = true,
                _ => {}
            }
        }
        for k in (0..=loss.0).rev() {
            let node = &self.nodes[k];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = (if keep[k] { adj[k].clone() } else { adj[k].take() }) else {
                continue;
            };
            self.backward_node(node, &g, &mut adj);
        }
        for k in 0..adj.len() {
            if !keep[k] {
                adj[k] = None;
            }
        }
        Ok(Gradients { adj, slots })
    }

    fn accumulate(&self, adj: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        if !self.needs(id) {
            return;
        }
        match &mut adj[id.0] {
            Some(t) => t.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn backward_node(&self, node: &Node, g: &Tensor, adj: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Affine { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                if self.needs(*x) {
                    let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                    gemm(1.0, g, false, wv, false, 0.0, &mut dx);
                    self.accumulate(adj, *x, dx);
                }
                if self.needs(*w) {
                    let mut dw = Tensor::zeros(wv.rows(), wv.cols());
                    gemm(1.0, g, true, xv, false, 0.0, &mut dw);
                    self.accumulate(adj, *w, dw);
                }
                if self.needs(*b) {
                    let bv = self.value(*b);
                    let mut db = Tensor::zeros(bv.rows(), bv.cols());
                    for r in 0..g.rows() {
                        for (d, v) in db.data_mut().iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                    self.accumulate(adj, *b, db);
                }
            }
            Op::Gelu(x) => {
                let d = self.value(*x).zip(g, |v, a| a * gelu_grad(v));
                self.accumulate(adj, *x, d);
            }
            Op::Exp(x) => {
                let d = node.value.zip(g, |y, a| a * y);
                self.accumulate(adj, *x, d);
            }
            Op::Relu(x) => {
                let d = self.value(*x).zip(g, |v, a| if v > 0.0 { a } else { 0.0 });
                self.accumulate(adj, *x, d);
            }
            Op::Add(a, b) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                if self.needs(*a) {
                    self.accumulate(adj, *a, self.value(*b).zip(g, |v, s| v * s));
                }
                if self.needs(*b) {
                    self.accumulate(adj, *b, self.value(*a).zip(g, |v, s| v * s));
                }
            }
            Op::Scale(a, c) => self.accumulate(adj, *a, g.map(|v| v * c)),
            Op::Sum(a) => {
                let s = g.item();
                self.accumulate(adj, *a, self.value(*a).map(|_| s));
            }
            Op::InnerT(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if self.needs(*a) {
                    let mut da = Tensor::zeros(av.rows(), av.cols());
                    gemm(1.0, g, false, bv, false, 0.0, &mut da);
                    self.accumulate(adj, *a, da);
                }
                if self.needs(*b) {
                    let mut db = Tensor::zeros(bv.rows(), bv.cols());
                    gemm(1.0, g, true, av, false, 0.0, &mut db);
                    self.accumulate(adj, *b, db);
                }
            }
            Op::Mse(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let c = 2.0 * g.item() / av.len().max(1) as f64;
                let d = av.zip(bv, |p, q| c * (p - q));
                if self.needs(*b) {
                    self.accumulate(adj, *b, d.map(|v| -v));
                }
                self.accumulate(adj, *a, d);
            }
            Op::Columns { x, start } => {
                let xv = self.value(*x);
                let mut d = Tensor::zeros(xv.rows(), xv.cols());
                for r in 0..g.rows() {
                    d.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                }
                self.accumulate(adj, *x, d);
            }
            Op::Custom { op, inputs } => {
                let vals: Vec<&Tensor> = inputs.iter().map(|&i| self.value(i)).collect();
                let needs: Vec<bool> = inputs.iter().map(|&i| self.needs(i)).collect();
                let grads = op.backward(&vals, &node.value, g, &needs);
                for ((&i, gi), n) in inputs.iter().zip(grads).zip(needs) {
                    if let (Some(gi), true) = (gi, n) {
                        self.accumulate(adj, i, gi);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(build: impl Fn(&mut Tape, NodeId) -> NodeId, x0: Tensor) {
        let mut tape = Tape::new();
        let x = tape.param(0, x0.clone());
        let l = build(&mut tape, x);
        let g = tape.backward(l, 1.0).unwrap().param(0).unwrap();
        let h = 1e-6;
        for k in 0..x0.len() {
            let eval = |d: f64| {
                let mut xs = x0.clone();
                xs.data_mut()[k] += d;
                let mut t = Tape::new();
                let x = t.param(0, xs);
                let l = build(&mut t, x);
                t.value(l).item()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let an = g.data()[k];
            assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "k={k}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(10.0) - 10.0).abs() < 1e-6);
        let h = 1e-5;
        let fd = (gelu(0.5 + h) - gelu(0.5 - h)) / (2.0 * h);
        assert!((fd - gelu_grad(0.5)).abs() < 1e-7);
    }

    #[test]
    fn affine_gelu_chain_matches_fd() {
        let w = Tensor::from_vec(3, 2, vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.7]).unwrap();
        let b = Tensor::from_vec(1, 3, vec![0.05, -0.1, 0.2]).unwrap();
        let x = Tensor::from_vec(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]).unwrap();
        let (w2, b2) = (w.clone(), b.clone());
        fd_check(
            move |t, x| {
                let w = t.leaf(w2.clone());
                let b = t.leaf(b2.clone());
                let y = t.affine(x, w, b);
                let z = t.gelu(y);
                let e = t.exp(z);
                t.sum(e)
            },
            x.clone(),
        );
        let x2 = x.clone();
        fd_check(
            move |t, w| {
                let xl = t.leaf(x2.clone());
                let b = t.leaf(b.clone());
                let y = t.affine(xl, w, b);
                let s = t.inner_t(y, y);
                let r = t.relu(s);
                let m = t.mul(r, r);
                let q = t.scale(m, 0.5);
                t.sum(q)
            },
            w,
        );
    }

    #[test]
    fn mse_and_columns() {
        let target = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        fd_check(
            move |t, x| {
                let c = t.columns(x, 1, 3);
                let tg = t.leaf(target.clone());
                let d = t.sub(c, tg);
                let a = t.add(d, c);
                let m = t.mse(a, tg);
                t.scale(m, 3.0)
            },
            Tensor::from_vec(2, 4, vec![0.5, 1.5, -2.0, 0.25, 1.0, 0.0, 3.0, -1.0]).unwrap(),
        );
    }

    #[test]
    fn data_only_loss_has_zero_gradient() {
        let mut t = Tape::new();
        let p = t.param(0, Tensor::scalar(2.0));
        let d = t.leaf(Tensor::scalar(3.0));
        let l = t.mul(d, d);
        let g = t.backward(l, 1.0).unwrap();
        assert!(g.param(0).is_none());
        assert!(g.node(p).is_none());
    }

    #[test]
    fn empty_tape_is_an_error() {
        let t = Tape::new();
        assert!(matches!(t.backward(NodeId(0), 1.0), Err(Error::EmptyTape)));
    }
}
