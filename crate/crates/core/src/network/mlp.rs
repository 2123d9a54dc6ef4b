//! Fully connected GELU networks with a linear output layer.

use rand::Rng;

use crate::autodiff::{gelu, NodeId, Tape, Tensor};
use crate::autodiff::tensor::gemm;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`, row-major.
    pub w: Tensor,
    /// `1 x out`.
    pub b: Tensor,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.w.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    /// The output layer is additionally scaled by `out_scale`.
    pub fn random<R: Rng>(sizes: &[usize], out_scale: f64, rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let (fi, fo) = (sizes[k], sizes[k + 1]);
                let bound = (6.0 / fi as f64).sqrt() * if k + 1 == n { out_scale } else { 1.0 };
                let w = (0..fi * fo).map(|_| rng.gen_range(-bound..=bound)).collect();
                Layer {
                    w: Tensor::from_vec(fo, fi, w).unwrap(),
                    b: Tensor::zeros(1, fo),
                }
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|s| Layer {
                w: Tensor::zeros(s[1], s[0]),
                b: Tensor::zeros(1, s[1]),
            })
            .collect();
        Mlp { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].fan_in()];
        s.extend(self.layers.iter().map(|l| l.fan_out()));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass without recording, `x` is `N x in`.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let mut y = Tensor::zeros(h.rows(), l.fan_out());
            for r in 0..y.rows() {
                y.row_mut(r).copy_from_slice(l.b.data());
            }
            gemm(1.0, &h, false, &l.w, true, 1.0, &mut y);
            if k < last {
                y.data_mut().iter_mut().for_each(|v| *v = gelu(*v));
            }
            h = y;
        }
        h
    }

    /// Forward pass on a tape using previously registered parameter nodes.
    pub fn forward_tape(&self, tape: &mut Tape, handles: &[(NodeId, NodeId)], x: NodeId) -> NodeId {
        let mut h = x;
        let last = handles.len() - 1;
        for (k, &(w, b)) in handles.iter().enumerate() {
            h = tape.affine(h, w, b);
            if k < last {
                h = tape.gelu(h);
            }
        }
        h
    }
}
