#![allow(dead_code)]

use lformer::corpus::TokenGrid;
use lformer::net::{ModelConfig, Network};
use lformer::GridShape;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn tiny_config(h: usize) -> ModelConfig {
    ModelConfig {
        h,
        k: 16,
        n_classes: 4,
        layers: 2,
        heads: 4,
        dim: 32,
        latent_dim: 8,
        n_cond: 4,
        ..ModelConfig::default()
    }
}

/// Random-init network with weights scaled up so logits vary noticeably
/// from cell to cell.
pub fn random_net(h: usize, seed: u64) -> Network {
    let mut net = Network::init(&tiny_config(h), seed).unwrap();
    for t in net.params.tensors_mut() {
        t.mapv_inplace(|v| v * 10.0);
    }
    net
}

pub fn random_grid(h: usize, k: usize, rng: &mut impl Rng) -> TokenGrid {
    let tokens = (0..h * h).map(|_| rng.random_range(0..k as u32)).collect();
    TokenGrid::from_vec(GridShape::new(h).unwrap(), tokens).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Token cells intersecting the half-open pixel box, by brute force over
/// every cell footprint. Returns 0-indexed `(row, col)` pairs.
pub fn region_oracle(
    x1: usize,
    y1: usize,
    x2: usize,
    y2: usize,
    f: usize,
    h: usize,
) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for r in 0..h {
        for c in 0..h {
            let (px1, px2) = (c * f, (c + 1) * f);
            let (py1, py2) = (r * f, (r + 1) * f);
            if px1 < x2 && x1 < px2 && py1 < y2 && y1 < py2 {
                cells.push((r, c));
            }
        }
    }
    cells
}

pub fn max_abs_diff(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
