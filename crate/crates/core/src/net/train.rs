use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{cross_entropy, LossParts, Network};
use super::optim::Adam;
use crate::corpus::Example;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_batch() -> usize {
    8
}

fn default_epochs() -> usize {
    10
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be positive", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub steps: u64,
    pub ce: f64,
    pub kl: f64,
    pub loss: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "epoch,steps,ce,kl,loss";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.9},{:.9},{:.9}",
            self.epoch, self.steps, self.ce, self.kl, self.loss
        )
    }
}

/// Teacher-forced training with Adam. All randomness derives from
/// `config.seed` and the step/epoch counters, so a run restored from a
/// checkpoint continues exactly as the uninterrupted run would.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub net: Network,
    pub adam: Adam,
    pub config: TrainConfig,
    pub epoch: usize,
}

impl Trainer {
    pub fn new(net: Network, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(&net.params, config.lr);
        Ok(Self {
            net,
            adam,
            config,
            epoch: 0,
        })
    }

    /// One optimizer step on `batch`; returns the batch-mean loss parts.
    pub fn step(&mut self, batch: &[Example]) -> Result<LossParts> {
        let mut grad = self.net.params.zeros_like();
        let mut sum = LossParts::default();
        let w = 1.0 / batch.len() as f64;
        for (i, ex) in batch.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_add(self.adam.step));
            rng.set_stream(i as u64);
            let parts = self
                .net
                .accumulate_grad(&ex.grid, ex.class, &mut rng, &mut grad, w)?;
            sum.ce += parts.ce * w;
            sum.kl += parts.kl * w;
            sum.total += parts.total * w;
        }
        self.adam.update(&mut self.net.params, &grad);
        Ok(sum)
    }

    pub fn train_epoch(&mut self, data: &[Example]) -> Result<EpochMetrics> {
        if data.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(u64::MAX - self.epoch as u64);
        order.shuffle(&mut rng);
        let mut ce = 0.0;
        let mut kl = 0.0;
        let mut total = 0.0;
        let mut seen = 0.0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| data[i].clone()).collect();
            let parts = self.step(&batch)?;
            let n = batch.len() as f64;
            ce += parts.ce * n;
            kl += parts.kl * n;
            total += parts.total * n;
            seen += n;
        }
        self.epoch += 1;
        Ok(EpochMetrics {
            epoch: self.epoch,
            steps: self.adam.step,
            ce: ce / seen,
            kl: kl / seen,
            loss: total / seen,
        })
    }
}

/// Mean per-token teacher-forced cross-entropy with `z` at the posterior
/// mean and no condition dropout.
pub fn evaluate_ce(net: &Network, data: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in data {
        let post = net.posterior(&ex.grid)?;
        let logits = net.forward_decoder(&ex.grid, ex.class, &post.mu)?;
        total += cross_entropy(&logits, &net.layout().targets(&ex.grid)?)?;
    }
    Ok(total / data.len() as f64)
}
