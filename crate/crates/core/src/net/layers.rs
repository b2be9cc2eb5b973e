//! Dense building blocks with explicit backward passes.
//!
//! Row-vector convention throughout: `y = x W + b` with `W` of shape
//! `(in, out)` and biases stored as `(1, out)` rows.

use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::alignment::AttentionMask;

const LN_EPS: f64 = 1e-5;

pub(crate) fn randn(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Array2<f64> {
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn((rows, cols), || normal.sample(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array2<f64>,
}

impl Linear {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Self {
            w: randn(input, output, 0.02, rng),
            b: Array2::zeros((1, output)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array2::zeros(self.b.raw_dim()),
        }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.w);
        y += &self.b;
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(
        &self,
        x: &ArrayView2<f64>,
        dy: &Array2<f64>,
        grad: &mut Linear,
    ) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.w.t())
    }

    pub(crate) fn tensors<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        out.push((format!("{name}.w"), &self.w));
        out.push((format!("{name}.b"), &self.b));
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Array2<f64>>) {
        out.push(&mut self.w);
        out.push(&mut self.b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Array2<f64>,
    pub bias: Array2<f64>,
}

/// Saved normalized input and reciprocal std per row.
#[derive(Debug, Clone)]
pub struct LnCache {
    xhat: Array2<f64>,
    rstd: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gain: Array2::ones((1, dim)),
            bias: Array2::zeros((1, dim)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gain: Array2::zeros(self.gain.raw_dim()),
            bias: Array2::zeros(self.bias.raw_dim()),
        }
    }

    pub fn forward(&self, x: &ArrayView2<f64>) -> (Array2<f64>, LnCache) {
        let d = x.ncols() as f64;
        let mut xhat = x.to_owned();
        let mut rstd = Vec::with_capacity(x.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / d;
            let r = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| v * r);
            rstd.push(r);
        }
        let mut y = &xhat * &self.gain;
        y += &self.bias;
        (y, LnCache { xhat, rstd })
    }

    pub fn apply(&self, x: &ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).0
    }

    pub fn backward(&self, cache: &LnCache, dy: &Array2<f64>, grad: &mut LayerNorm) -> Array2<f64> {
        grad.gain += &(dy * &cache.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        grad.bias += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dxhat = dy * &self.gain;
        let d = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for (i, mut out) in dx.rows_mut().into_iter().enumerate() {
            let g = dxhat.row(i);
            let xh = cache.xhat.row(i);
            let mean_g = g.sum() / d;
            let mean_gx = g.dot(&xh) / d;
            let r = cache.rstd[i];
            Zip::from(&mut out)
                .and(&g)
                .and(&xh)
                .for_each(|o, &gi, &xi| *o = r * (gi - mean_g - xi * mean_gx));
        }
        dx
    }

    pub(crate) fn tensors<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        out.push((format!("{name}.gain"), &self.gain));
        out.push((format!("{name}.bias"), &self.bias));
    }

    pub(crate) fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Array2<f64>>) {
        out.push(&mut self.gain);
        out.push(&mut self.bias);
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh approximation of GELU.
pub fn gelu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()))
}

pub fn gelu_backward(x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
    let mut dx = dy.clone();
    Zip::from(&mut dx).and(x).for_each(|d, &v| {
        let t = (GELU_C * (v + 0.044715 * v * v * v)).tanh();
        let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
        *d *= 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
    });
    dx
}

/// Which keys each query row may see.
#[derive(Clone, Copy)]
pub enum KeyMask<'a> {
    /// Every key visible.
    Full,
    /// Query row `i` is absolute position `offset + i` of `mask`; key `j` is
    /// absolute position `j`.
    Causal {
        mask: &'a AttentionMask,
        offset: usize,
    },
}

impl KeyMask<'_> {
    fn visible(&self, q: usize, k: usize) -> bool {
        match self {
            KeyMask::Full => true,
            KeyMask::Causal { mask, offset } => mask.allows(offset + q, k),
        }
    }
}

/// Multi-head scaled dot-product attention on already projected `q`, `k`,
/// `v`. Returns the concatenated head outputs and, if `keep_probs`, the
/// per-head attention probabilities (masked entries exactly zero).
pub fn attention(
    q: &ArrayView2<f64>,
    k: &ArrayView2<f64>,
    v: &ArrayView2<f64>,
    heads: usize,
    mask: KeyMask<'_>,
    keep_probs: bool,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let dh = q.ncols() / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = Array2::zeros((q.nrows(), q.ncols()));
    let mut probs = Vec::new();
    for head in 0..heads {
        let cols = s![.., head * dh..(head + 1) * dh];
        let mut p = q.slice(cols).dot(&k.slice(cols).t());
        softmax_rows_masked(&mut p, scale, mask);
        out.slice_mut(cols).assign(&p.dot(&v.slice(cols)));
        if keep_probs {
            probs.push(p);
        }
    }
    (out, probs)
}

fn softmax_rows_masked(scores: &mut Array2<f64>, scale: f64, mask: KeyMask<'_>) {
    for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for (j, s) in row.iter_mut().enumerate() {
            if mask.visible(i, j) {
                *s *= scale;
                max = max.max(*s);
            }
        }
        let mut sum = 0.0;
        for (j, s) in row.iter_mut().enumerate() {
            if mask.visible(i, j) {
                *s = (*s - max).exp();
                sum += *s;
            } else {
                *s = 0.0;
            }
        }
        row.mapv_inplace(|v| v / sum);
    }
}

/// Gradients of [`attention`] with respect to `q`, `k`, `v`.
pub fn attention_backward(
    q: &ArrayView2<f64>,
    k: &ArrayView2<f64>,
    v: &ArrayView2<f64>,
    probs: &[Array2<f64>],
    dout: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let heads = probs.len();
    let dh = q.ncols() / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Array2::zeros(q.raw_dim());
    let mut dk = Array2::zeros(k.raw_dim());
    let mut dv = Array2::zeros(v.raw_dim());
    for (head, p) in probs.iter().enumerate() {
        let cols = s![.., head * dh..(head + 1) * dh];
        let d_o = dout.slice(cols);
        dv.slice_mut(cols).assign(&p.t().dot(&d_o));
        let mut ds = d_o.dot(&v.slice(cols).t());
        Zip::from(ds.rows_mut())
            .and(p.rows())
            .for_each(|mut dr, pr| {
                let dot = dr.dot(&pr);
                Zip::from(&mut dr)
                    .and(&pr)
                    .for_each(|d, &pv| *d = pv * (*d - dot) * scale);
            });
        dq.slice_mut(cols).assign(&ds.dot(&k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&q.slice(cols)));
    }
    (dq, dk, dv)
}

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
