//! Wall-clock of cached against uncached decoding on a random toy model.
//!
//! cargo run --release --example cache_speedup

use lformer::complexity::bench_decode;
use lformer::net::{ModelConfig, Network};
use lformer::sampler::SampleConfig;

fn main() -> lformer::Result<()> {
    println!(
        "{:>4} {:>12} {:>12} {:>8}",
        "h", "cached_ms", "uncached_ms", "speedup"
    );
    for h in [4, 8, 16, 32] {
        let net = Network::init(
            &ModelConfig {
                h,
                ..ModelConfig::default()
            },
            0,
        )?;
        let r = bench_decode(&net, 3, &SampleConfig::greedy())?;
        println!(
            "{h:>4} {:>12.2} {:>12.2} {:>8.2}",
            r.cached_ms, r.uncached_ms, r.speedup
        );
    }
    Ok(())
}
