use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ModelConfig;
use super::layers::{
    attention, attention_backward, gelu, gelu_backward, softmax, KeyMask, LnCache,
};
use super::params::{BlockParams, ModelParams};
use crate::alignment::{AttentionMask, PaddedLayout, Position};
use crate::corpus::TokenGrid;
use crate::error::{Error, Result};
use crate::lgrid::GridShape;

/// Diagonal Gaussian `N(mu, exp(log_sigma)^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLatent {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl GaussianLatent {
    /// `z = mu + sigma * eps`.
    pub fn reparameterize(&self, eps: &[f64]) -> Vec<f64> {
        self.mu
            .iter()
            .zip(&self.log_sigma)
            .zip(eps)
            .map(|((m, ls), e)| m + ls.exp() * e)
            .collect()
    }
}

/// `KL(N(mu, sigma^2) || N(prior_mu, I))` in closed form.
pub fn kl_to_unit_prior(posterior: &GaussianLatent, prior_mu: &[f64]) -> f64 {
    posterior
        .mu
        .iter()
        .zip(&posterior.log_sigma)
        .zip(prior_mu)
        .map(|((m, ls), pm)| {
            let d = m - pm;
            0.5 * ((2.0 * ls).exp() + d * d - 1.0 - 2.0 * ls)
        })
        .sum()
}

/// Mean token cross-entropy plus `beta * kl`.
pub fn loss(logits: &Array2<f64>, targets: &[u32], kl: f64, beta: f64) -> Result<f64> {
    Ok(cross_entropy(logits, targets)? + beta * kl)
}

/// Mean cross-entropy of `logits` rows against `targets`.
pub fn cross_entropy(logits: &Array2<f64>, targets: &[u32]) -> Result<f64> {
    if logits.nrows() != targets.len() {
        return Err(Error::LengthMismatch {
            expected: logits.nrows(),
            actual: targets.len(),
        });
    }
    let mut total = 0.0;
    for (row, &t) in logits.rows().into_iter().zip(targets) {
        if t as usize >= row.len() {
            return Err(Error::InvalidToken {
                id: t,
                k: row.len(),
            });
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[t as usize];
    }
    Ok(total / targets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
}

/// Output of [`Network::forward_train`].
#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// `h^2 x k`, row `i` predicts L-order rank `i + 1`.
    pub logits: Array2<f64>,
    pub kl: f64,
    pub posterior: GaussianLatent,
    pub prior_mu: Vec<f64>,
    pub z: Vec<f64>,
    /// Class after condition dropout.
    pub class: usize,
}

/// Parameters plus the fixed sequence geometry derived from the config.
#[derive(Debug, Clone)]
pub struct Network {
    pub params: ModelParams,
    layout: PaddedLayout,
    mask: AttentionMask,
}

struct BlockActs {
    ln_self: LnCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    att: Array2<f64>,
    ln_cross: LnCache,
    b: Array2<f64>,
    cq: Array2<f64>,
    ck: Array2<f64>,
    cv: Array2<f64>,
    cprobs: Vec<Array2<f64>>,
    catt: Array2<f64>,
    ln_ffn: LnCache,
    c: Array2<f64>,
    hidden: Array2<f64>,
    act: Array2<f64>,
}

struct DecoderActs {
    blocks: Vec<BlockActs>,
    ln_out: LnCache,
    pred_in: Array2<f64>,
    logits: Array2<f64>,
}

struct LatentActs {
    pooled: Array2<f64>,
    enc_hidden: Array2<f64>,
    enc_act: Array2<f64>,
    posterior: GaussianLatent,
    cond_mean: Array2<f64>,
    prior_mu: Vec<f64>,
    eps: Vec<f64>,
    z: Array2<f64>,
    map_hidden: Array2<f64>,
    map_act: Array2<f64>,
    fz: Array2<f64>,
}

impl Network {
    pub fn new(params: ModelParams) -> Result<Self> {
        let cfg = &params.config;
        cfg.validate()?;
        let layout = PaddedLayout::new(GridShape::new(cfg.h)?, cfg.prefix_len())?;
        let mask = AttentionMask::block_causal(&layout);
        Ok(Self {
            params,
            layout,
            mask,
        })
    }

    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        Self::new(ModelParams::init(config, seed)?)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    pub fn layout(&self) -> &PaddedLayout {
        &self.layout
    }

    pub fn mask(&self) -> &AttentionMask {
        &self.mask
    }

    pub(crate) fn check_class(&self, class: usize) -> Result<()> {
        let n = self.config().n_classes;
        if class > n {
            return Err(Error::InvalidClass {
                class,
                n_classes: n,
            });
        }
        Ok(())
    }

    pub(crate) fn check_grid(&self, grid: &TokenGrid) -> Result<()> {
        if grid.side() != self.config().h {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.config().h),
                actual: format!("{0}x{0}", grid.side()),
            });
        }
        grid.validate(self.config().k)
    }

    /// Condition-sequence rows of `class` (NULL included).
    pub fn cond_rows(&self, class: usize) -> ArrayView2<'_, f64> {
        let n = self.config().n_cond;
        self.params
            .cond_emb
            .slice(s![class * n..(class + 1) * n, ..])
    }

    pub fn prior_mean(&self, class: usize) -> Result<Vec<f64>> {
        self.check_class(class)?;
        let mean = self
            .cond_rows(class)
            .mean_axis(Axis(0))
            .expect("n_cond >= 1");
        let mean = mean.insert_axis(Axis(0));
        Ok(self.params.prior.forward(&mean.view()).row(0).to_vec())
    }

    pub fn posterior(&self, grid: &TokenGrid) -> Result<GaussianLatent> {
        self.check_grid(grid)?;
        let pooled = self.pool_grid(grid);
        let hidden = self.params.enc_fc1.forward(&pooled.view());
        let out = self.params.enc_fc2.forward(&gelu(&hidden).view());
        Ok(self.split_latent(&out))
    }

    /// Mapping network `f(z)` as a `1 x dim` row.
    pub fn map_latent(&self, z: &[f64]) -> Array2<f64> {
        let z = Array2::from_shape_vec((1, z.len()), z.to_vec()).expect("row");
        let hidden = self.params.map_fc1.forward(&z.view());
        self.params.map_fc2.forward(&gelu(&hidden).view())
    }

    fn pool_grid(&self, grid: &TokenGrid) -> Array2<f64> {
        let d = self.config().dim;
        let mut pooled = Array1::<f64>::zeros(d);
        for (i, &t) in grid.tokens().iter().enumerate() {
            pooled += &self.params.enc_tok.row(t as usize);
            pooled += &self.params.enc_pos.row(i);
        }
        pooled /= grid.tokens().len() as f64;
        pooled.insert_axis(Axis(0))
    }

    fn split_latent(&self, out: &Array2<f64>) -> GaussianLatent {
        let dz = self.config().latent_dim;
        let row = out.row(0);
        GaussianLatent {
            mu: row.slice(s![..dz]).to_vec(),
            log_sigma: row.slice(s![dz..]).to_vec(),
        }
    }

    /// Input embeddings for positions `range`. `tokens` holds the grid in
    /// L-order; only ranks that appear as inputs in `range` are read.
    pub(crate) fn embed(
        &self,
        class: usize,
        fz: &Array2<f64>,
        tokens: &[u32],
        range: std::ops::Range<usize>,
    ) -> Array2<f64> {
        let cfg = self.config();
        let p = &self.params;
        let mut x = Array2::zeros((range.len(), cfg.dim));
        for (i, pos) in range.enumerate() {
            let mut row = x.row_mut(i);
            if pos < cfg.n_cond {
                row.assign(&p.cond_emb.row(class * cfg.n_cond + pos));
                continue;
            }
            if pos == cfg.n_cond {
                row.assign(&fz.row(0));
                continue;
            }
            let id = match self.layout.positions()[pos] {
                Position::Bos => cfg.bos_id(),
                Position::Pad => cfg.pad_id(),
                Position::Token(r) => tokens[r - 1] as usize,
                Position::Cond(_) => unreachable!("condition slots handled above"),
            };
            let cell = self
                .layout
                .target_cell(pos)
                .expect("non-condition position");
            row.assign(&p.tok_emb.row(id));
            row += &p.row_emb.row(cell.row - 1);
            row += &p.col_emb.row(cell.col - 1);
        }
        x
    }

    fn block_forward(
        &self,
        blk: &BlockParams,
        x: &mut Array2<f64>,
        cond: &ArrayView2<f64>,
    ) -> BlockActs {
        let heads = self.config().heads;
        let (a, ln_self) = blk.ln_self.forward(&x.view());
        let q = blk.q.forward(&a.view());
        let k = blk.k.forward(&a.view());
        let v = blk.v.forward(&a.view());
        let mask = KeyMask::Causal {
            mask: &self.mask,
            offset: 0,
        };
        let (att, probs) = attention(&q.view(), &k.view(), &v.view(), heads, mask, true);
        *x += &blk.o.forward(&att.view());

        let (b, ln_cross) = blk.ln_cross.forward(&x.view());
        let cq = blk.cq.forward(&b.view());
        let ck = blk.ck.forward(cond);
        let cv = blk.cv.forward(cond);
        let (catt, cprobs) = attention(
            &cq.view(),
            &ck.view(),
            &cv.view(),
            heads,
            KeyMask::Full,
            true,
        );
        *x += &blk.co.forward(&catt.view());

        let (c, ln_ffn) = blk.ln_ffn.forward(&x.view());
        let hidden = blk.fc1.forward(&c.view());
        let act = gelu(&hidden);
        *x += &blk.fc2.forward(&act.view());

        BlockActs {
            ln_self,
            a,
            q,
            k,
            v,
            probs,
            att,
            ln_cross,
            b,
            cq,
            ck,
            cv,
            cprobs,
            catt,
            ln_ffn,
            c,
            hidden,
            act,
        }
    }

    /// Backpropagates through one block. `dx` holds dL/d(output) on entry
    /// and dL/d(input) on exit; condition gradients accumulate into `dcond`.
    fn block_backward(
        &self,
        blk: &BlockParams,
        acts: &BlockActs,
        cond: &ArrayView2<f64>,
        dx: &mut Array2<f64>,
        dcond: &mut Array2<f64>,
        g: &mut BlockParams,
    ) {
        // feed-forward
        let dact = blk.fc2.backward(&acts.act.view(), dx, &mut g.fc2);
        let dhidden = gelu_backward(&acts.hidden, &dact);
        let dc = blk.fc1.backward(&acts.c.view(), &dhidden, &mut g.fc1);
        *dx += &blk.ln_ffn.backward(&acts.ln_ffn, &dc, &mut g.ln_ffn);

        // cross-attention
        let dcatt = blk.co.backward(&acts.catt.view(), dx, &mut g.co);
        let (dcq, dck, dcv) = attention_backward(
            &acts.cq.view(),
            &acts.ck.view(),
            &acts.cv.view(),
            &acts.cprobs,
            &dcatt,
        );
        *dcond += &blk.ck.backward(cond, &dck, &mut g.ck);
        *dcond += &blk.cv.backward(cond, &dcv, &mut g.cv);
        let db = blk.cq.backward(&acts.b.view(), &dcq, &mut g.cq);
        *dx += &blk.ln_cross.backward(&acts.ln_cross, &db, &mut g.ln_cross);

        // self-attention
        let datt = blk.o.backward(&acts.att.view(), dx, &mut g.o);
        let (dq, dk, dv) = attention_backward(
            &acts.q.view(),
            &acts.k.view(),
            &acts.v.view(),
            &acts.probs,
            &datt,
        );
        let mut da = blk.q.backward(&acts.a.view(), &dq, &mut g.q);
        da += &blk.k.backward(&acts.a.view(), &dk, &mut g.k);
        da += &blk.v.backward(&acts.a.view(), &dv, &mut g.v);
        *dx += &blk.ln_self.backward(&acts.ln_self, &da, &mut g.ln_self);
    }

    fn decoder_forward(&self, class: usize, fz: &Array2<f64>, tokens: &[u32]) -> DecoderActs {
        let cfg = self.config();
        let mut x = self.embed(class, fz, tokens, 0..cfg.seq_len());
        let cond = self.cond_rows(class);
        let blocks = self
            .params
            .blocks
            .iter()
            .map(|blk| self.block_forward(blk, &mut x, &cond))
            .collect();
        let pred_in = x.slice(s![cfg.prefix_len().., ..]).to_owned();
        let (normed, ln_out) = self.params.ln_out.forward(&pred_in.view());
        let logits = self.params.head.forward(&normed.view());
        DecoderActs {
            blocks,
            ln_out,
            pred_in: normed,
            logits,
        }
    }

    /// Teacher-forced logits (`h^2 x k`) for a fixed latent `z`.
    pub fn forward_decoder(
        &self,
        grid: &TokenGrid,
        class: usize,
        z: &[f64],
    ) -> Result<Array2<f64>> {
        self.check_grid(grid)?;
        self.check_class(class)?;
        if z.len() != self.config().latent_dim {
            return Err(Error::LengthMismatch {
                expected: self.config().latent_dim,
                actual: z.len(),
            });
        }
        let tokens = self.layout.targets(grid)?;
        let fz = self.map_latent(z);
        Ok(self.decoder_forward(class, &fz, &tokens).logits)
    }

    fn drop_class(&self, class: usize, rng: &mut impl Rng) -> usize {
        let p = self.config().p_drop_cond;
        if p > 0.0 && rng.random::<f64>() < p {
            self.config().null_class()
        } else {
            class
        }
    }

    fn latent_forward(&self, grid: &TokenGrid, class: usize, rng: &mut impl Rng) -> LatentActs {
        let p = &self.params;
        let pooled = self.pool_grid(grid);
        let enc_hidden = p.enc_fc1.forward(&pooled.view());
        let enc_act = gelu(&enc_hidden);
        let posterior = self.split_latent(&p.enc_fc2.forward(&enc_act.view()));
        let cond_mean = self
            .cond_rows(class)
            .mean_axis(Axis(0))
            .expect("n_cond >= 1")
            .insert_axis(Axis(0));
        let prior_mu = p.prior.forward(&cond_mean.view()).row(0).to_vec();
        let eps: Vec<f64> = (0..self.config().latent_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let zv = posterior.reparameterize(&eps);
        let z = Array2::from_shape_vec((1, zv.len()), zv).expect("row");
        let map_hidden = p.map_fc1.forward(&z.view());
        let map_act = gelu(&map_hidden);
        let fz = p.map_fc2.forward(&map_act.view());
        LatentActs {
            pooled,
            enc_hidden,
            enc_act,
            posterior,
            cond_mean,
            prior_mu,
            eps,
            z,
            map_hidden,
            map_act,
            fz,
        }
    }

    /// Training forward pass: condition dropout, posterior sample via the
    /// reparameterization trick, teacher-forced logits and the KL term.
    pub fn forward_train(
        &self,
        grid: &TokenGrid,
        class: usize,
        rng: &mut impl Rng,
    ) -> Result<TrainOutput> {
        self.check_grid(grid)?;
        self.check_class(class)?;
        let class = self.drop_class(class, rng);
        let lat = self.latent_forward(grid, class, rng);
        let tokens = self.layout.targets(grid)?;
        let acts = self.decoder_forward(class, &lat.fz, &tokens);
        let kl = kl_to_unit_prior(&lat.posterior, &lat.prior_mu);
        Ok(TrainOutput {
            logits: acts.logits,
            kl,
            z: lat.z.row(0).to_vec(),
            posterior: lat.posterior,
            prior_mu: lat.prior_mu,
            class,
        })
    }

    /// Loss of one example and its gradient. Consumes `rng` exactly like
    /// [`Network::forward_train`].
    pub fn loss_and_grad(
        &self,
        grid: &TokenGrid,
        class: usize,
        rng: &mut impl Rng,
    ) -> Result<(LossParts, ModelParams)> {
        let mut grad = self.params.zeros_like();
        let parts = self.accumulate_grad(grid, class, rng, &mut grad, 1.0)?;
        Ok((parts, grad))
    }

    /// Adds `weight * dL/dparams` for one example into `grad`.
    pub fn accumulate_grad(
        &self,
        grid: &TokenGrid,
        class: usize,
        rng: &mut impl Rng,
        grad: &mut ModelParams,
        weight: f64,
    ) -> Result<LossParts> {
        self.check_grid(grid)?;
        self.check_class(class)?;
        let cfg = self.config();
        let p = &self.params;
        let class = self.drop_class(class, rng);
        let lat = self.latent_forward(grid, class, rng);
        let tokens = self.layout.targets(grid)?;
        let acts = self.decoder_forward(class, &lat.fz, &tokens);

        let ce = cross_entropy(&acts.logits, &tokens)?;
        let kl = kl_to_unit_prior(&lat.posterior, &lat.prior_mu);
        let parts = LossParts {
            ce,
            kl,
            total: ce + cfg.beta * kl,
        };

        // d(mean CE)/d(logits)
        let n = tokens.len() as f64;
        let mut dlogits = acts.logits.clone();
        for (mut row, &t) in dlogits.rows_mut().into_iter().zip(&tokens) {
            let probs = softmax(row.as_slice().expect("contiguous"));
            for (d, pv) in row.iter_mut().zip(probs) {
                *d = weight * pv / n;
            }
            row[t as usize] -= weight / n;
        }

        let dnormed = p
            .head
            .backward(&acts.pred_in.view(), &dlogits, &mut grad.head);
        let dpred = p.ln_out.backward(&acts.ln_out, &dnormed, &mut grad.ln_out);
        let mut dx = Array2::zeros((cfg.seq_len(), cfg.dim));
        dx.slice_mut(s![cfg.prefix_len().., ..]).assign(&dpred);

        let cond = self.cond_rows(class);
        let mut dcond = Array2::zeros((cfg.n_cond, cfg.dim));
        for ((blk, bacts), bgrad) in p
            .blocks
            .iter()
            .zip(&acts.blocks)
            .zip(grad.blocks.iter_mut())
            .rev()
        {
            self.block_backward(blk, bacts, &cond, &mut dx, &mut dcond, bgrad);
        }

        // input embeddings
        let mut dfz = Array2::zeros((1, cfg.dim));
        for (pos, drow) in dx.rows().into_iter().enumerate() {
            if pos < cfg.n_cond {
                dcond.row_mut(pos).scaled_add(1.0, &drow);
                continue;
            }
            if pos == cfg.n_cond {
                dfz.row_mut(0).assign(&drow);
                continue;
            }
            let id = match self.layout.positions()[pos] {
                Position::Bos => cfg.bos_id(),
                Position::Pad => cfg.pad_id(),
                Position::Token(r) => tokens[r - 1] as usize,
                Position::Cond(_) => unreachable!(),
            };
            let cell = self
                .layout
                .target_cell(pos)
                .expect("non-condition position");
            grad.tok_emb.row_mut(id).scaled_add(1.0, &drow);
            grad.row_emb.row_mut(cell.row - 1).scaled_add(1.0, &drow);
            grad.col_emb.row_mut(cell.col - 1).scaled_add(1.0, &drow);
        }

        // mapping network and reparameterization
        let dmap_act = p
            .map_fc2
            .backward(&lat.map_act.view(), &dfz, &mut grad.map_fc2);
        let dmap_hidden = gelu_backward(&lat.map_hidden, &dmap_act);
        let dz = p
            .map_fc1
            .backward(&lat.z.view(), &dmap_hidden, &mut grad.map_fc1);

        let dz_dim = cfg.latent_dim;
        let bw = weight * cfg.beta;
        let mut dpost = Array2::zeros((1, 2 * dz_dim));
        let mut dprior = Array2::zeros((1, dz_dim));
        for i in 0..dz_dim {
            let mu = lat.posterior.mu[i];
            let ls = lat.posterior.log_sigma[i];
            let sigma = ls.exp();
            let diff = mu - lat.prior_mu[i];
            dpost[[0, i]] = dz[[0, i]] + bw * diff;
            dpost[[0, dz_dim + i]] = dz[[0, i]] * sigma * lat.eps[i] + bw * (sigma * sigma - 1.0);
            dprior[[0, i]] = -bw * diff;
        }

        // posterior encoder
        let denc_act = p
            .enc_fc2
            .backward(&lat.enc_act.view(), &dpost, &mut grad.enc_fc2);
        let denc_hidden = gelu_backward(&lat.enc_hidden, &denc_act);
        let dpooled = p
            .enc_fc1
            .backward(&lat.pooled.view(), &denc_hidden, &mut grad.enc_fc1);
        let inv = 1.0 / grid.tokens().len() as f64;
        for (i, &t) in grid.tokens().iter().enumerate() {
            grad.enc_tok
                .row_mut(t as usize)
                .scaled_add(inv, &dpooled.row(0));
            grad.enc_pos.row_mut(i).scaled_add(inv, &dpooled.row(0));
        }

        // prior head
        let dmean = p
            .prior
            .backward(&lat.cond_mean.view(), &dprior, &mut grad.prior);
        for mut row in dcond.rows_mut() {
            row.scaled_add(1.0 / cfg.n_cond as f64, &dmean.row(0));
        }
        let n_cond = cfg.n_cond;
        grad.cond_emb
            .slice_mut(s![class * n_cond..(class + 1) * n_cond, ..])
            .scaled_add(1.0, &dcond);

        Ok(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Network {
        let cfg = ModelConfig {
            h: 4,
            k: 6,
            n_classes: 3,
            layers: 2,
            heads: 2,
            dim: 8,
            latent_dim: 3,
            n_cond: 2,
            ..ModelConfig::default()
        };
        Network::init(&cfg, 11).unwrap()
    }

    fn grid(h: usize, k: u32, seed: u64) -> TokenGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = GridShape::new(h).unwrap();
        TokenGrid::from_vec(shape, (0..h * h).map(|_| rng.random_range(0..k)).collect()).unwrap()
    }

    #[test]
    fn kl_closed_form_examples() {
        let same = GaussianLatent {
            mu: vec![0.3, -1.0],
            log_sigma: vec![0.0, 0.0],
        };
        assert_eq!(kl_to_unit_prior(&same, &[0.3, -1.0]), 0.0);
        let shifted = GaussianLatent {
            mu: vec![1.0],
            log_sigma: vec![0.0],
        };
        assert!((kl_to_unit_prior(&shifted, &[0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Array2::zeros((64, 16));
        let targets: Vec<u32> = (0..64).map(|i| i % 16).collect();
        let ce = cross_entropy(&logits, &targets).unwrap();
        assert!((ce - 16f64.ln()).abs() < 1e-12);
        assert!((loss(&logits, &targets, 2.0, 0.0).unwrap() - ce).abs() < 1e-15);
        assert!((loss(&logits, &targets, 2.0, 0.5).unwrap() - ce - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_give_zero_ce() {
        let mut logits = Array2::zeros((4, 3));
        for i in 0..4 {
            logits[[i, i % 3]] = 100.0;
        }
        let ce = cross_entropy(&logits, &[0, 1, 2, 0]).unwrap();
        assert!(ce < 1e-40);
    }

    #[test]
    fn loss_shape_mismatch() {
        let logits = Array2::zeros((4, 3));
        assert!(matches!(
            cross_entropy(&logits, &[0, 1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn logits_shape() {
        let net = Network::init(&ModelConfig::default(), 0).unwrap();
        let g = grid(8, 16, 1);
        let out = net
            .forward_train(&g, 1, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert_eq!(out.logits.dim(), (64, 16));
        assert!(out.kl >= 0.0);
        for row in out.logits.rows() {
            let p = softmax(row.as_slice().unwrap());
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_invalid_inputs() {
        let net = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let bad_tok = TokenGrid::filled(GridShape::new(4).unwrap(), 6);
        assert!(matches!(
            net.forward_train(&bad_tok, 0, &mut rng),
            Err(Error::InvalidToken { .. })
        ));
        let g = grid(4, 6, 0);
        assert!(matches!(
            net.forward_train(&g, 4, &mut rng),
            Err(Error::InvalidClass { .. })
        ));
        // NULL class is a valid condition
        net.forward_train(&g, 3, &mut rng).unwrap();
    }

    #[test]
    fn loss_and_grad_matches_forward_train() {
        let net = tiny();
        let g = grid(4, 6, 3);
        let out = net
            .forward_train(&g, 1, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let (parts, _) = net
            .loss_and_grad(&g, 1, &mut ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let targets = net.layout().targets(&g).unwrap();
        let expect = loss(&out.logits, &targets, out.kl, net.config().beta).unwrap();
        assert!((parts.total - expect).abs() < 1e-12);
    }
}
