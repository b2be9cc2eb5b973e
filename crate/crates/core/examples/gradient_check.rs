//! Compares the hand-written backward pass with central differences on a
//! tiny model.

use lformer::corpus::{generate, DatasetSpec, GeneratorKind};
use lformer::net::gradcheck::grad_check;
use lformer::net::{ModelConfig, Network};

fn main() -> lformer::Result<()> {
    let cfg = ModelConfig {
        h: 3,
        k: 6,
        n_classes: 3,
        layers: 2,
        heads: 2,
        dim: 8,
        latent_dim: 3,
        n_cond: 2,
        ..ModelConfig::default()
    };
    let mut net = Network::init(&cfg, 0)?;
    // larger weights so every path carries gradient
    for t in net.params.tensors_mut() {
        t.mapv_inplace(|v| v * 20.0);
    }
    let data = generate(&DatasetSpec {
        h: 3,
        k: 6,
        n_classes: 3,
        n_samples: 4,
        kind: GeneratorKind::Markov,
        noise_rate: 0.3,
        seed: 1,
    })?;
    println!(
        "{} parameters in {} tensors",
        net.params.num_params(),
        net.params.tensors().len()
    );
    for beta in [0.0, 1.0] {
        net.params.config.beta = beta;
        let err = grad_check(&net, &data, 5, 1e-5, 2)?;
        println!("beta {beta}: max relative error {err:.2e}");
    }
    Ok(())
}
