//! Trains the toy model on noise-free QUADRANT grids, then checks greedy
//! class-conditional samples against the ground-truth pattern.
//!
//! cargo run --release --example train_quadrant -- [steps]

use std::time::Instant;

use lformer::corpus::{generate, DatasetSpec, GeneratorKind};
use lformer::net::{evaluate_ce, ModelConfig, Network, TrainConfig, Trainer};
use lformer::sampler::{sample, SampleConfig};

fn main() -> lformer::Result<()> {
    let steps: u64 = std::env::args()
        .nth(1)
        .map_or(300, |s| s.parse().expect("steps"));
    let model = ModelConfig {
        h: 8,
        k: 16,
        n_classes: 4,
        layers: 4,
        heads: 4,
        dim: 128,
        latent_dim: 8,
        n_cond: 4,
        ..ModelConfig::default()
    };
    let data = generate(&DatasetSpec {
        h: 8,
        k: 16,
        n_classes: 4,
        n_samples: 64,
        kind: GeneratorKind::Quadrant,
        noise_rate: 0.0,
        seed: 0,
    })?;
    let mut trainer = Trainer::new(
        Network::init(&model, 1)?,
        TrainConfig {
            lr: 1e-3,
            batch_size: 8,
            epochs: 0,
            seed: 1,
        },
    )?;
    let start = Instant::now();
    while trainer.adam.step < steps {
        let m = trainer.train_epoch(&data)?;
        println!(
            "epoch {:>3} step {:>4} ce {:.4} kl {:.4} ({:.1}s)",
            m.epoch,
            m.steps,
            m.ce,
            m.kl,
            start.elapsed().as_secs_f64()
        );
    }
    let net = &trainer.net;
    println!("teacher-forced CE {:.4}", evaluate_ce(net, &data)?);
    for (class, ex) in data.iter().take(4).enumerate() {
        let grid = sample(net, class, &SampleConfig::greedy())?;
        let target = &ex.grid;
        let hits = grid
            .tokens()
            .iter()
            .zip(target.tokens())
            .filter(|(a, b)| a == b)
            .count();
        println!("class {class}: {hits}/64 cells correct\n{}", grid.to_text());
    }
    Ok(())
}
