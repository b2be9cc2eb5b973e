//! Sampling knobs on a model trained on noisy QUADRANT grids: temperature,
//! top-k, top-p and classifier-free guidance.
//!
//! cargo run --release --example sample_cfg

use lformer::corpus::quadrant_ids;
use lformer::sampler::{sample, SampleConfig};
use lformer::TokenGrid;

mod common;

fn pattern_accuracy(grid: &TokenGrid, class: usize) -> f64 {
    let ids = quadrant_ids(class, 4, 16);
    let h = grid.side();
    let mut hits = 0;
    for r in 0..h {
        for c in 0..h {
            let q = (2 * r >= h) as usize * 2 + (2 * c >= h) as usize;
            hits += (grid.get(r, c) == ids[q]) as usize;
        }
    }
    hits as f64 / (h * h) as f64
}

fn main() -> lformer::Result<()> {
    let (net, _) = common::toy_quadrant(160, 0.3)?;
    let settings = [
        ("t=1.0", SampleConfig::default()),
        (
            "t=0.7",
            SampleConfig {
                temperature: 0.7,
                ..SampleConfig::default()
            },
        ),
        (
            "top_k=2",
            SampleConfig {
                top_k: Some(2),
                ..SampleConfig::default()
            },
        ),
        (
            "top_p=0.8",
            SampleConfig {
                top_p: 0.8,
                ..SampleConfig::default()
            },
        ),
        (
            "cfg=1.5",
            SampleConfig {
                cfg_scale: 1.5,
                ..SampleConfig::default()
            },
        ),
        (
            "cfg=3",
            SampleConfig {
                cfg_scale: 3.0,
                ..SampleConfig::default()
            },
        ),
        ("greedy", SampleConfig::greedy()),
    ];
    println!(
        "{:<10} mean fraction of cells on the class pattern (20 samples x 4 classes)",
        "setting"
    );
    for (name, base) in settings {
        let mut total = 0.0;
        for class in 0..4 {
            for seed in 0..20 {
                let cfg = SampleConfig {
                    seed,
                    ..base.clone()
                };
                total += pattern_accuracy(&sample(&net, class, &cfg)?, class);
            }
        }
        println!("{name:<10} {:.3}", total / 80.0);
    }
    let g = sample(
        &net,
        2,
        &SampleConfig {
            seed: 5,
            ..SampleConfig::default()
        },
    )?;
    println!("\nclass 2, t=1.0, seed 5:\n{}", g.to_text());
    Ok(())
}
