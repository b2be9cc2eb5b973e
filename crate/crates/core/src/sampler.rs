//! Semi-autoregressive generation: `h` steps, step `t` samples all `2t - 1`
//! tokens of block `t` independently from their filtered distributions.
//!
//! The latent `z` is drawn once per image from the class prior
//! `N(mu(class), I)`. With guidance enabled a second stream runs on the NULL
//! class with `z` fixed at the NULL prior mean, and the two logit sets are
//! combined before filtering.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenGrid;
use crate::error::{Error, Result};
use crate::lgrid::Cell;
use crate::net::{Network, StreamCache};

/// How the global latent is chosen for a generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatentMode {
    /// Draw from the class prior using the sampling seed.
    #[default]
    Sample,
    /// Use the prior mean (the mode), independent of the seed.
    PriorMean,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub temperature: f64,
    /// Keep only the `top_k` most likely ids; `None` keeps all.
    #[serde(default)]
    pub top_k: Option<usize>,
    pub top_p: f64,
    /// Guidance scale. `0` disables the null stream and samples from the
    /// conditional logits alone.
    pub cfg_scale: f64,
    pub seed: u64,
    #[serde(default)]
    pub latent: LatentMode,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_k: None,
            top_p: 1.0,
            cfg_scale: 0.0,
            seed: 0,
            latent: LatentMode::Sample,
        }
    }
}

impl SampleConfig {
    /// Argmax decoding with `z` at the prior mode; seed-independent.
    pub fn greedy() -> Self {
        Self {
            top_k: Some(1),
            latent: LatentMode::PriorMean,
            ..Self::default()
        }
    }

    pub fn validate(&self, k: usize, latent_dim: usize) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if let Some(top_k) = self.top_k {
            if top_k == 0 || top_k > k {
                return Err(Error::Config(format!("top_k {top_k} outside 1..={k}")));
            }
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if !(self.cfg_scale >= 0.0 && self.cfg_scale.is_finite()) {
            return Err(Error::Config(format!(
                "cfg_scale {} must be >= 0",
                self.cfg_scale
            )));
        }
        if let LatentMode::Fixed(z) = &self.latent {
            if z.len() != latent_dim {
                return Err(Error::LengthMismatch {
                    expected: latent_dim,
                    actual: z.len(),
                });
            }
        }
        Ok(())
    }
}

/// Temperature, then top-k, then the smallest top-p nucleus, renormalized.
/// Ties rank the lower token id first. Non-finite logits get zero mass.
pub fn filter_logits(
    logits: &[f64],
    temperature: f64,
    top_k: usize,
    top_p: f64,
) -> Result<Vec<f64>> {
    let mut order: Vec<usize> = (0..logits.len())
        .filter(|&i| logits[i].is_finite())
        .collect();
    if order.is_empty() {
        return Err(Error::NoFiniteLogits);
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    // stable sort keeps ascending ids among equal logits
    order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]));
    order.truncate(top_k.max(1));

    let max = scaled[order[0]];
    let exps: Vec<f64> = order.iter().map(|&i| (scaled[i] - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let mut keep = order.len();
    let mut cum = 0.0;
    for (n, e) in exps.iter().enumerate() {
        cum += e / sum;
        if cum >= top_p {
            keep = n + 1;
            break;
        }
    }
    let kept_sum: f64 = exps[..keep].iter().sum();
    let mut probs = vec![0.0; logits.len()];
    for (&i, e) in order[..keep].iter().zip(&exps) {
        probs[i] = e / kept_sum;
    }
    Ok(probs)
}

/// `null + scale * (cond - null)`.
pub fn guided_logits(cond: &Array2<f64>, null: &Array2<f64>, scale: f64) -> Result<Array2<f64>> {
    if cond.dim() != null.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", cond.dim()),
            actual: format!("{:?}", null.dim()),
        });
    }
    Ok(null + &((cond - null) * scale))
}

fn draw(probs: &[f64], rng: &mut impl Rng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i as u32;
            }
        }
    }
    last as u32
}

/// In-progress generation: caches for the conditional and optional null
/// streams plus the grid in L-order.
#[derive(Debug, Clone)]
pub struct DecodeState {
    cond: StreamCache,
    null: Option<StreamCache>,
    scale: f64,
    completed: usize,
    tokens: Vec<u32>,
}

impl DecodeState {
    /// Starts a generation. `tokens` seeds the L-order sequence (for edits);
    /// ranks beyond the completed square are overwritten as decoding runs.
    pub fn new(
        net: &Network,
        class: usize,
        z: &[f64],
        scale: f64,
        tokens: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = net.config().h * net.config().h;
        let null = if scale > 0.0 {
            let null_class = net.config().null_class();
            let zn = net.prior_mean(null_class)?;
            Some(net.start_stream(null_class, &zn)?)
        } else {
            None
        };
        let tokens = tokens.unwrap_or_else(|| vec![0; n]);
        if tokens.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: tokens.len(),
            });
        }
        Ok(Self {
            cond: net.start_stream(class, z)?,
            null,
            scale,
            completed: 0,
            tokens,
        })
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn latent(&self) -> &[f64] {
        self.cond.latent()
    }

    /// Cached positions per stream.
    pub fn cache_len(&self) -> usize {
        self.cond.len()
    }

    pub fn has_null_stream(&self) -> bool {
        self.null.is_some()
    }

    /// L-order tokens; ranks above `completed^2` are placeholders.
    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    /// Guided logits for the next block. With `cached = false` every stream
    /// is recomputed over the full prefix instead of using its cache.
    pub fn next_logits(&mut self, net: &Network, cached: bool) -> Result<Array2<f64>> {
        let t = self.completed + 1;
        let run = |stream: &mut StreamCache, tokens: &[u32]| -> Result<Array2<f64>> {
            if cached {
                net.forward_logits_for_step(stream, t, tokens)
            } else {
                net.forward_logits_uncached(stream.class(), stream.latent(), t, tokens)
            }
        };
        let cond = run(&mut self.cond, &self.tokens)?;
        match self.null.as_mut() {
            Some(null) => guided_logits(&cond, &run(null, &self.tokens)?, self.scale),
            None => Ok(cond),
        }
    }

    /// Records the tokens of block `completed + 1`.
    pub fn commit(&mut self, block: &[u32]) -> Result<()> {
        let t = self.completed + 1;
        if block.len() != 2 * t - 1 {
            return Err(Error::LengthMismatch {
                expected: 2 * t - 1,
                actual: block.len(),
            });
        }
        let lo = (t - 1) * (t - 1);
        self.tokens[lo..lo + block.len()].copy_from_slice(block);
        self.completed = t;
        Ok(())
    }
}

/// Result of a traced generation.
#[derive(Debug, Clone)]
pub struct Generation {
    pub grid: TokenGrid,
    pub z: Vec<f64>,
    /// Guided logits of every executed step.
    pub step_logits: Vec<Array2<f64>>,
}

pub(crate) struct DecodePlan<'a> {
    pub base: Option<&'a TokenGrid>,
    /// Cells resampled; others keep the base token.
    pub regenerate: &'a dyn Fn(Cell) -> bool,
    /// Last block to decode; later blocks keep the base tokens.
    pub last_block: usize,
    pub cached: bool,
}

pub(crate) fn choose_latent(
    net: &Network,
    class: usize,
    cfg: &SampleConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let mu = net.prior_mean(class)?;
    Ok(match &cfg.latent {
        LatentMode::Sample => mu
            .iter()
            .map(|m| m + rng.sample::<f64, _>(StandardNormal))
            .collect(),
        LatentMode::PriorMean => mu,
        LatentMode::Fixed(z) => z.clone(),
    })
}

pub(crate) fn run(
    net: &Network,
    class: usize,
    cfg: &SampleConfig,
    plan: DecodePlan<'_>,
) -> Result<Generation> {
    let mc = net.config();
    cfg.validate(mc.k, mc.latent_dim)?;
    net.check_class(class)?;
    let lorder = net.layout().lorder();
    let base_tokens = match plan.base {
        Some(g) => {
            net.check_grid(g)?;
            Some(lorder.to_lorder(g)?)
        }
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let z = choose_latent(net, class, cfg, &mut rng)?;
    let mut state = DecodeState::new(net, class, &z, cfg.cfg_scale, base_tokens)?;
    let mut step_logits = Vec::with_capacity(plan.last_block);
    for t in 1..=plan.last_block {
        let logits = state.next_logits(net, plan.cached)?;
        let (lo, _) = crate::lgrid::block_bounds(t);
        let mut block = state.tokens()[lo - 1..lo - 1 + 2 * t - 1].to_vec();
        for (i, cell) in lorder.block_cells(t).iter().enumerate() {
            if (plan.regenerate)(*cell) {
                let row = logits.row(i);
                let probs = filter_logits(
                    row.as_slice().expect("contiguous"),
                    cfg.temperature,
                    cfg.top_k.unwrap_or(mc.k),
                    cfg.top_p,
                )?;
                block[i] = draw(&probs, &mut rng);
            }
        }
        state.commit(&block)?;
        step_logits.push(logits);
    }
    Ok(Generation {
        grid: lorder.from_lorder(state.tokens())?,
        z,
        step_logits,
    })
}

/// Generates a grid for `class` using the attention cache.
pub fn sample(net: &Network, class: usize, cfg: &SampleConfig) -> Result<TokenGrid> {
    Ok(sample_traced(net, class, cfg, true)?.grid)
}

/// Generates a grid recomputing the full prefix each step. Same semantics
/// and random stream as [`sample`].
pub fn sample_without_cache(net: &Network, class: usize, cfg: &SampleConfig) -> Result<TokenGrid> {
    Ok(sample_traced(net, class, cfg, false)?.grid)
}

pub fn sample_traced(
    net: &Network,
    class: usize,
    cfg: &SampleConfig,
    cached: bool,
) -> Result<Generation> {
    run(
        net,
        class,
        cfg,
        DecodePlan {
            base: None,
            regenerate: &|_| true,
            last_block: net.config().h,
            cached,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ModelConfig;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn top_k_one_is_argmax() {
        let p = filter_logits(&[0.1, 3.0, -2.0, 2.9], 1.0, 1, 1.0).unwrap();
        assert_eq!(p, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unfiltered_is_softmax() {
        let l = [0.5, -1.0, 2.0, 0.0];
        let p = filter_logits(&l, 1.0, 4, 1.0).unwrap();
        assert!(close(&p, &crate::net::softmax(&l), 1e-15));
    }

    #[test]
    fn nucleus_example() {
        // softmax([2,1,0,-1]) = [0.6439, 0.2369, 0.0871, 0.0321]; cumulative
        // mass first reaches 0.8 at id 1.
        let p = filter_logits(&[2.0, 1.0, 0.0, -1.0], 1.0, 4, 0.8).unwrap();
        let e = [1.0f64, (-1.0f64).exp()];
        let expect = [e[0] / (e[0] + e[1]), e[1] / (e[0] + e[1]), 0.0, 0.0];
        assert!(close(&p, &expect, 1e-12));
        assert!((p[0] - 0.731).abs() < 5e-4 && (p[1] - 0.269).abs() < 5e-4);
    }

    #[test]
    fn ties_prefer_lower_id() {
        let p = filter_logits(&[1.0, 2.0, 2.0, 2.0], 1.0, 2, 1.0).unwrap();
        assert_eq!(p, vec![0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn temperature_sharpens() {
        let hot = filter_logits(&[1.0, 0.0], 2.0, 2, 1.0).unwrap();
        let cold = filter_logits(&[1.0, 0.0], 0.5, 2, 1.0).unwrap();
        assert!(cold[0] > hot[0]);
    }

    #[test]
    fn all_neg_inf_rejected() {
        assert!(matches!(
            filter_logits(&[f64::NEG_INFINITY; 3], 1.0, 3, 1.0),
            Err(Error::NoFiniteLogits)
        ));
    }

    #[test]
    fn guidance_formula() {
        let c = Array2::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap();
        let n = Array2::zeros((1, 2));
        assert_eq!(guided_logits(&c, &n, 1.0).unwrap(), c);
        assert_eq!(guided_logits(&c, &n, 0.0).unwrap(), n);
        assert_eq!(
            guided_logits(&c, &n, 3.0)
                .unwrap()
                .into_raw_vec_and_offset()
                .0,
            vec![3.0, 0.0]
        );
        assert!(guided_logits(&c, &Array2::zeros((2, 2)), 1.0).is_err());
    }

    #[test]
    fn block_sizes_and_determinism() {
        let cfg = ModelConfig::default();
        let net = Network::init(&cfg, 1).unwrap();
        let sc = SampleConfig {
            seed: 5,
            cfg_scale: 3.0,
            ..Default::default()
        };
        let g = sample_traced(&net, 2, &sc, true).unwrap();
        let rows: Vec<_> = g.step_logits.iter().map(|l| l.nrows()).collect();
        assert_eq!(rows, vec![1, 3, 5, 7, 9, 11, 13, 15]);
        assert_eq!(rows.iter().sum::<usize>(), 64);
        assert_eq!(sample(&net, 2, &sc).unwrap(), g.grid);
    }

    #[test]
    fn single_cell_grid() {
        let cfg = ModelConfig {
            h: 1,
            ..ModelConfig::default()
        };
        let net = Network::init(&cfg, 1).unwrap();
        let g = sample_traced(&net, 0, &SampleConfig::default(), true).unwrap();
        assert_eq!(g.step_logits.len(), 1);
        assert_eq!(g.grid.tokens().len(), 1);
    }

    #[test]
    fn greedy_ignores_seed() {
        let net = Network::init(&ModelConfig::default(), 2).unwrap();
        let a = sample(
            &net,
            1,
            &SampleConfig {
                seed: 1,
                ..SampleConfig::greedy()
            },
        )
        .unwrap();
        let b = sample(
            &net,
            1,
            &SampleConfig {
                seed: 99,
                ..SampleConfig::greedy()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn null_stream_only_with_guidance() {
        let cfg = ModelConfig::default();
        let net = Network::init(&cfg, 0).unwrap();
        let z = vec![0.0; cfg.latent_dim];
        assert!(!DecodeState::new(&net, 0, &z, 0.0, None)
            .unwrap()
            .has_null_stream());
        assert!(DecodeState::new(&net, 0, &z, 3.0, None)
            .unwrap()
            .has_null_stream());
    }

    #[test]
    fn invalid_configs() {
        let net = Network::init(&ModelConfig::default(), 0).unwrap();
        for bad in [
            SampleConfig {
                temperature: 0.0,
                ..Default::default()
            },
            SampleConfig {
                top_k: Some(0),
                ..Default::default()
            },
            SampleConfig {
                top_k: Some(17),
                ..Default::default()
            },
            SampleConfig {
                top_p: 0.0,
                ..Default::default()
            },
            SampleConfig {
                cfg_scale: -1.0,
                ..Default::default()
            },
            SampleConfig {
                latent: LatentMode::Fixed(vec![0.0]),
                ..Default::default()
            },
        ] {
            assert!(sample(&net, 0, &bad).is_err(), "{bad:?}");
        }
        assert!(sample(&net, 9, &SampleConfig::default()).is_err());
    }
}
