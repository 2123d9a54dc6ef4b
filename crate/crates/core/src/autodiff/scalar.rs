//! Per-cell scalar reverse-mode tape.
//!
//! Used to differentiate the local collision and moment kernels, which are
//! written once over [`Real`]. Each node stores at most two parents with the
//! local partial derivatives.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::real::Real;

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [(u32, f64); 2],
}

const NONE: (u32, f64) = (u32::MAX, 0.0);

#[derive(Debug, Default)]
pub struct ScalarTape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t ScalarTape,
    idx: u32,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.val)
    }
}

impl ScalarTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, val: f64, a: (u32, f64), b: (u32, f64)) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(Node { parents: [a, b] });
        Var { tape: self, idx, val }
    }

    /// New independent variable.
    pub fn var(&self, val: f64) -> Var<'_> {
        self.push(val, NONE, NONE)
    }

    /// Vector-Jacobian product: adjoints of every node given output seeds.
    pub fn adjoints(&self, outputs: &[Var<'_>], seeds: &[f64]) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        for (o, s) in outputs.iter().zip(seeds) {
            adj[o.idx as usize] += s;
        }
        for k in (0..nodes.len()).rev() {
            let a = adj[k];
            if a == 0.0 {
                continue;
            }
            for &(p, d) in &nodes[k].parents {
                if p != u32::MAX {
                    adj[p as usize] += a * d;
                }
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    fn unary(self, val: f64, d: f64) -> Self {
        self.tape.push(val, (self.idx, d), NONE)
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        self.tape.push(val, (self.idx, da), (other.idx, db))
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.binary(o, q, 1.0 / o.val, -q / o.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, c: f64) -> Self {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl<'t> Real for Var<'t> {
    fn value(self) -> f64 {
        self.val
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }

    fn sqrt(self) -> Self {
        let s = self.val.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.val;
        self.unary(r, -r * r)
    }

    fn rsub(self, c: f64) -> Self {
        self.unary(c - self.val, -1.0)
    }
}
