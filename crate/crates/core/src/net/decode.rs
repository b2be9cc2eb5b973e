//! Block-by-block inference with a per-layer key/value cache.
//!
//! Step `t` feeds the positions returned by
//! [`PaddedLayout::step_inputs`](crate::alignment::PaddedLayout::step_inputs):
//! the condition prefix and BOS at `t = 1`, padded block `t - 1` after that.
//! Only those rows are projected; their keys and values are appended to the
//! cache and queries attend over everything cached so far.

use std::ops::Range;

use ndarray::{s, Array2};

use super::layers::{attention, gelu, KeyMask};
use super::model::Network;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct LayerKv {
    k: Array2<f64>,
    v: Array2<f64>,
    // cross-attention keys/values of the condition sequence
    ck: Array2<f64>,
    cv: Array2<f64>,
}

/// Cached state of one conditioning stream (class + latent).
#[derive(Debug, Clone)]
pub struct StreamCache {
    class: usize,
    z: Vec<f64>,
    fz: Array2<f64>,
    layers: Vec<LayerKv>,
    len: usize,
    steps: usize,
}

impl StreamCache {
    pub fn class(&self) -> usize {
        self.class
    }

    pub fn latent(&self) -> &[f64] {
        &self.z
    }

    /// Number of cached positions.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Completed decode steps.
    pub fn steps(&self) -> usize {
        self.steps
    }
}

impl Network {
    /// Fresh cache for `class` with latent `z`; cross-attention keys and
    /// values are computed once here.
    pub fn start_stream(&self, class: usize, z: &[f64]) -> Result<StreamCache> {
        self.check_class(class)?;
        let cfg = self.config();
        if z.len() != cfg.latent_dim {
            return Err(Error::LengthMismatch {
                expected: cfg.latent_dim,
                actual: z.len(),
            });
        }
        let cond = self.cond_rows(class);
        let capacity = cfg.seq_len();
        let layers = self
            .params
            .blocks
            .iter()
            .map(|blk| LayerKv {
                k: Array2::zeros((capacity, cfg.dim)),
                v: Array2::zeros((capacity, cfg.dim)),
                ck: blk.ck.forward(&cond),
                cv: blk.cv.forward(&cond),
            })
            .collect();
        Ok(StreamCache {
            class,
            z: z.to_vec(),
            fz: self.map_latent(z),
            layers,
            len: 0,
            steps: 0,
        })
    }

    /// Runs positions `range` (which must start at the cache length) through
    /// every layer, appending their keys/values, and returns the final
    /// hidden states after the output LayerNorm.
    fn run_chunk(
        &self,
        cache: &mut StreamCache,
        range: Range<usize>,
        tokens: &[u32],
    ) -> Array2<f64> {
        debug_assert_eq!(range.start, cache.len);
        let heads = self.config().heads;
        let off = range.start;
        let end = range.end;
        let mut x = self.embed(cache.class, &cache.fz, tokens, range);
        for (blk, kv) in self.params.blocks.iter().zip(cache.layers.iter_mut()) {
            let a = blk.ln_self.apply(&x.view());
            let q = blk.q.forward(&a.view());
            kv.k.slice_mut(s![off..end, ..])
                .assign(&blk.k.forward(&a.view()));
            kv.v.slice_mut(s![off..end, ..])
                .assign(&blk.v.forward(&a.view()));
            let mask = KeyMask::Causal {
                mask: self.mask(),
                offset: off,
            };
            let (att, _) = attention(
                &q.view(),
                &kv.k.slice(s![..end, ..]),
                &kv.v.slice(s![..end, ..]),
                heads,
                mask,
                false,
            );
            x += &blk.o.forward(&att.view());

            let b = blk.ln_cross.apply(&x.view());
            let cq = blk.cq.forward(&b.view());
            let (catt, _) = attention(
                &cq.view(),
                &kv.ck.view(),
                &kv.cv.view(),
                heads,
                KeyMask::Full,
                false,
            );
            x += &blk.co.forward(&catt.view());

            let c = blk.ln_ffn.apply(&x.view());
            let act = gelu(&blk.fc1.forward(&c.view()));
            x += &blk.fc2.forward(&act.view());
        }
        cache.len = end;
        self.params.ln_out.apply(&x.view())
    }

    fn head_rows(&self, hidden: &Array2<f64>, chunk: &Range<usize>, t: usize) -> Array2<f64> {
        let out = self.layout().step_outputs(t);
        let rows = hidden.slice(s![out.start - chunk.start..out.end - chunk.start, ..]);
        self.params.head.forward(&rows)
    }

    fn check_step(&self, t: usize) -> Result<()> {
        let h = self.config().h;
        if t == 0 || t > h {
            return Err(Error::BlockOutOfRange { t, h });
        }
        Ok(())
    }

    /// Logits (`(2t-1) x k`) for block `t`, advancing `cache` by one step.
    /// `tokens` is the grid in L-order; ranks `<= (t-1)^2` must be filled.
    pub fn forward_logits_for_step(
        &self,
        cache: &mut StreamCache,
        t: usize,
        tokens: &[u32],
    ) -> Result<Array2<f64>> {
        self.check_step(t)?;
        if cache.steps + 1 != t {
            return Err(Error::StepMismatch {
                state: cache.steps,
                requested: t,
            });
        }
        let needed = (t - 1) * (t - 1);
        if tokens.len() < needed {
            return Err(Error::LengthMismatch {
                expected: needed,
                actual: tokens.len(),
            });
        }
        let range = self.layout().step_inputs(t);
        let hidden = self.run_chunk(cache, range.clone(), tokens);
        cache.steps = t;
        Ok(self.head_rows(&hidden, &range, t))
    }

    /// Same logits as [`Network::forward_logits_for_step`], recomputed from
    /// scratch over the whole prefix with no cache.
    pub fn forward_logits_uncached(
        &self,
        class: usize,
        z: &[f64],
        t: usize,
        tokens: &[u32],
    ) -> Result<Array2<f64>> {
        self.check_step(t)?;
        let needed = (t - 1) * (t - 1);
        if tokens.len() < needed {
            return Err(Error::LengthMismatch {
                expected: needed,
                actual: tokens.len(),
            });
        }
        let mut cache = self.start_stream(class, z)?;
        let range = 0..self.layout().step_inputs(t).end;
        let hidden = self.run_chunk(&mut cache, range.clone(), tokens);
        Ok(self.head_rows(&hidden, &range, t))
    }
}
