use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and loss hyperparameters.
///
/// `n_cond` is the length of the learned per-class condition sequence. The
/// transformer prefix is that sequence followed by one slot holding `f(z)`,
/// so the padded layout sees `n_cond + 1` condition positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub h: usize,
    /// Codebook size.
    pub k: usize,
    pub n_classes: usize,
    pub layers: usize,
    pub heads: usize,
    pub dim: usize,
    pub latent_dim: usize,
    pub n_cond: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_p_drop")]
    pub p_drop_cond: f64,
}

fn default_beta() -> f64 {
    1.0
}

fn default_p_drop() -> f64 {
    0.1
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            h: 8,
            k: 16,
            n_classes: 4,
            layers: 2,
            heads: 4,
            dim: 32,
            latent_dim: 8,
            n_cond: 4,
            beta: default_beta(),
            p_drop_cond: default_p_drop(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("h", self.h),
            ("k", self.k),
            ("n_classes", self.n_classes),
            ("layers", self.layers),
            ("heads", self.heads),
            ("dim", self.dim),
            ("latent_dim", self.latent_dim),
            ("n_cond", self.n_cond),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "dim {} not divisible by heads {}",
                self.dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.p_drop_cond) {
            return Err(Error::Config(format!(
                "p_drop_cond {} outside [0, 1)",
                self.p_drop_cond
            )));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta {} must be >= 0", self.beta)));
        }
        Ok(())
    }

    /// Id of the unconditional (NULL) class.
    pub fn null_class(&self) -> usize {
        self.n_classes
    }

    /// Condition positions in the transformer input: class sequence + `f(z)`.
    pub fn prefix_len(&self) -> usize {
        self.n_cond + 1
    }

    pub fn seq_len(&self) -> usize {
        self.prefix_len() + self.h * self.h
    }

    pub fn pad_id(&self) -> usize {
        self.k
    }

    pub fn bos_id(&self) -> usize {
        self.k + 1
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn ffn_dim(&self) -> usize {
        4 * self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ModelConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let base = ModelConfig::default();
        let cases = [
            ModelConfig {
                heads: 3,
                ..base.clone()
            },
            ModelConfig {
                layers: 0,
                ..base.clone()
            },
            ModelConfig {
                p_drop_cond: 1.0,
                ..base.clone()
            },
            ModelConfig {
                beta: -0.5,
                ..base.clone()
            },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "h = 4\nk = 8\nn_classes = 2\nlayers = 1\nheads = 1\ndim = 8\nlatent_dim = 2\nn_cond = 1\nbogus = 3\n";
        assert!(toml::from_str::<ModelConfig>(text).is_err());
    }
}
