#![allow(dead_code)]

use lformer::corpus::{generate, DatasetSpec, Example, GeneratorKind};
use lformer::net::{ModelConfig, Network, TrainConfig, Trainer};

/// Small model trained for `steps` optimizer steps on QUADRANT grids with
/// the given noise rate.
pub fn toy_quadrant(steps: u64, noise_rate: f64) -> lformer::Result<(Network, Vec<Example>)> {
    let model = ModelConfig {
        h: 8,
        k: 16,
        n_classes: 4,
        layers: 2,
        heads: 4,
        dim: 48,
        latent_dim: 4,
        n_cond: 4,
        ..ModelConfig::default()
    };
    let data = generate(&DatasetSpec {
        h: 8,
        k: 16,
        n_classes: 4,
        n_samples: 128,
        kind: GeneratorKind::Quadrant,
        noise_rate,
        seed: 0,
    })?;
    let mut trainer = Trainer::new(
        Network::init(&model, 0)?,
        TrainConfig {
            lr: 3e-3,
            batch_size: 16,
            epochs: 0,
            seed: 0,
        },
    )?;
    while trainer.adam.step < steps {
        let m = trainer.train_epoch(&data)?;
        eprintln!("epoch {:>2}: ce {:.3} kl {:.3}", m.epoch, m.ce, m.kl);
    }
    Ok((trainer.net, data))
}
