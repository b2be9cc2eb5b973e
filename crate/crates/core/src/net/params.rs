use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::layers::{randn, LayerNorm, Linear};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln_self: LayerNorm,
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub ln_cross: LayerNorm,
    pub cq: Linear,
    pub ck: Linear,
    pub cv: Linear,
    pub co: Linear,
    pub ln_ffn: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

impl BlockParams {
    fn new(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.dim;
        Self {
            ln_self: LayerNorm::new(d),
            q: Linear::new(d, d, rng),
            k: Linear::new(d, d, rng),
            v: Linear::new(d, d, rng),
            o: Linear::new(d, d, rng),
            ln_cross: LayerNorm::new(d),
            cq: Linear::new(d, d, rng),
            ck: Linear::new(d, d, rng),
            cv: Linear::new(d, d, rng),
            co: Linear::new(d, d, rng),
            ln_ffn: LayerNorm::new(d),
            fc1: Linear::new(d, cfg.ffn_dim(), rng),
            fc2: Linear::new(cfg.ffn_dim(), d, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            ln_self: self.ln_self.zeros_like(),
            q: self.q.zeros_like(),
            k: self.k.zeros_like(),
            v: self.v.zeros_like(),
            o: self.o.zeros_like(),
            ln_cross: self.ln_cross.zeros_like(),
            cq: self.cq.zeros_like(),
            ck: self.ck.zeros_like(),
            cv: self.cv.zeros_like(),
            co: self.co.zeros_like(),
            ln_ffn: self.ln_ffn.zeros_like(),
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
        }
    }

    fn tensors<'a>(&'a self, name: &str, out: &mut Vec<(String, &'a Array2<f64>)>) {
        self.ln_self.tensors(&format!("{name}.ln_self"), out);
        self.q.tensors(&format!("{name}.q"), out);
        self.k.tensors(&format!("{name}.k"), out);
        self.v.tensors(&format!("{name}.v"), out);
        self.o.tensors(&format!("{name}.o"), out);
        self.ln_cross.tensors(&format!("{name}.ln_cross"), out);
        self.cq.tensors(&format!("{name}.cq"), out);
        self.ck.tensors(&format!("{name}.ck"), out);
        self.cv.tensors(&format!("{name}.cv"), out);
        self.co.tensors(&format!("{name}.co"), out);
        self.ln_ffn.tensors(&format!("{name}.ln_ffn"), out);
        self.fc1.tensors(&format!("{name}.fc1"), out);
        self.fc2.tensors(&format!("{name}.fc2"), out);
    }

    fn tensors_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Array2<f64>>) {
        self.ln_self.tensors_mut(out);
        self.q.tensors_mut(out);
        self.k.tensors_mut(out);
        self.v.tensors_mut(out);
        self.o.tensors_mut(out);
        self.ln_cross.tensors_mut(out);
        self.cq.tensors_mut(out);
        self.ck.tensors_mut(out);
        self.cv.tensors_mut(out);
        self.co.tensors_mut(out);
        self.ln_ffn.tensors_mut(out);
        self.fc1.tensors_mut(out);
        self.fc2.tensors_mut(out);
    }
}

/// All trainable tensors. The same type doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// `k` codebook ids, then PAD, then BOS.
    pub tok_emb: Array2<f64>,
    pub row_emb: Array2<f64>,
    pub col_emb: Array2<f64>,
    /// `(n_classes + 1) * n_cond` rows; class `c` owns rows
    /// `c * n_cond .. (c + 1) * n_cond`, the last class is NULL.
    pub cond_emb: Array2<f64>,
    pub blocks: Vec<BlockParams>,
    pub ln_out: LayerNorm,
    pub head: Linear,
    // posterior encoder q(z | x)
    pub enc_tok: Array2<f64>,
    pub enc_pos: Array2<f64>,
    pub enc_fc1: Linear,
    pub enc_fc2: Linear,
    // prior mean from the pooled condition
    pub prior: Linear,
    // mapping network f(z)
    pub map_fc1: Linear,
    pub map_fc2: Linear,
}

impl ModelParams {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = config;
        let d = cfg.dim;
        let std = 0.02;
        Ok(Self {
            config: cfg.clone(),
            tok_emb: randn(cfg.k + 2, d, std, &mut rng),
            row_emb: randn(cfg.h, d, std, &mut rng),
            col_emb: randn(cfg.h, d, std, &mut rng),
            cond_emb: randn((cfg.n_classes + 1) * cfg.n_cond, d, std, &mut rng),
            blocks: (0..cfg.layers)
                .map(|_| BlockParams::new(cfg, &mut rng))
                .collect(),
            ln_out: LayerNorm::new(d),
            head: Linear::new(d, cfg.k, &mut rng),
            enc_tok: randn(cfg.k, d, std, &mut rng),
            enc_pos: randn(cfg.h * cfg.h, d, std, &mut rng),
            enc_fc1: Linear::new(d, d, &mut rng),
            enc_fc2: Linear::new(d, 2 * cfg.latent_dim, &mut rng),
            prior: Linear::new(d, cfg.latent_dim, &mut rng),
            map_fc1: Linear::new(cfg.latent_dim, d, &mut rng),
            map_fc2: Linear::new(d, d, &mut rng),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let z = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        Self {
            config: self.config.clone(),
            tok_emb: z(&self.tok_emb),
            row_emb: z(&self.row_emb),
            col_emb: z(&self.col_emb),
            cond_emb: z(&self.cond_emb),
            blocks: self.blocks.iter().map(BlockParams::zeros_like).collect(),
            ln_out: self.ln_out.zeros_like(),
            head: self.head.zeros_like(),
            enc_tok: z(&self.enc_tok),
            enc_pos: z(&self.enc_pos),
            enc_fc1: self.enc_fc1.zeros_like(),
            enc_fc2: self.enc_fc2.zeros_like(),
            prior: self.prior.zeros_like(),
            map_fc1: self.map_fc1.zeros_like(),
            map_fc2: self.map_fc2.zeros_like(),
        }
    }

    /// Named tensors in declared (checkpoint) order.
    pub fn tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = vec![
            ("tok_emb".to_string(), &self.tok_emb),
            ("row_emb".to_string(), &self.row_emb),
            ("col_emb".to_string(), &self.col_emb),
            ("cond_emb".to_string(), &self.cond_emb),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            b.tensors(&format!("blocks.{i}"), &mut out);
        }
        self.ln_out.tensors("ln_out", &mut out);
        self.head.tensors("head", &mut out);
        out.push(("enc_tok".to_string(), &self.enc_tok));
        out.push(("enc_pos".to_string(), &self.enc_pos));
        self.enc_fc1.tensors("enc_fc1", &mut out);
        self.enc_fc2.tensors("enc_fc2", &mut out);
        self.prior.tensors("prior", &mut out);
        self.map_fc1.tensors("map_fc1", &mut out);
        self.map_fc2.tensors("map_fc2", &mut out);
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = vec![
            &mut self.tok_emb,
            &mut self.row_emb,
            &mut self.col_emb,
            &mut self.cond_emb,
        ];
        for b in self.blocks.iter_mut() {
            b.tensors_mut(&mut out);
        }
        self.ln_out.tensors_mut(&mut out);
        self.head.tensors_mut(&mut out);
        out.push(&mut self.enc_tok);
        out.push(&mut self.enc_pos);
        self.enc_fc1.tensors_mut(&mut out);
        self.enc_fc2.tensors_mut(&mut out);
        self.prior.tensors_mut(&mut out);
        self.map_fc1.tensors_mut(&mut out);
        self.map_fc2.tensors_mut(&mut out);
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            dst.scaled_add(scale, src);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_orders_agree() {
        let mut p = ModelParams::init(&ModelConfig::default(), 0).unwrap();
        let shapes: Vec<_> = p.tensors().iter().map(|(_, t)| t.dim()).collect();
        let shapes_mut: Vec<_> = p.tensors_mut().iter().map(|t| t.dim()).collect();
        assert_eq!(shapes, shapes_mut);
        let names: std::collections::HashSet<_> = p.tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), shapes.len());
    }

    #[test]
    fn head_emits_k_logits() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(&cfg, 0).unwrap();
        assert_eq!(p.head.w.ncols(), cfg.k);
        assert_eq!(p.tok_emb.nrows(), cfg.k + 2);
        assert!(p.all_finite());
    }

    #[test]
    fn init_deterministic() {
        let cfg = ModelConfig::default();
        assert_eq!(
            ModelParams::init(&cfg, 5).unwrap(),
            ModelParams::init(&cfg, 5).unwrap()
        );
    }
}
