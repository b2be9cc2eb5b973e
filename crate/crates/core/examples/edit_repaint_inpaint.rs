//! Repaints a grid from several kept corners and inpaints a damaged patch.
//!
//! cargo run --release --example edit_repaint_inpaint

use lformer::editing::{bbox_to_region, blocks_for_region, inpaint, repaint, PixelBBox};
use lformer::sampler::SampleConfig;

mod common;

fn main() -> lformer::Result<()> {
    let (net, data) = common::toy_quadrant(160, 0.0)?;
    let source = &data[0];
    println!(
        "source (class {}):\n{}",
        source.class,
        source.grid.to_text()
    );

    let cfg = SampleConfig::greedy();
    for t_keep in [0, 1, 6] {
        let g = repaint(&net, &source.grid, t_keep, 1, &cfg)?;
        println!(
            "repaint under class 1 keeping the {t_keep}x{t_keep} corner:\n{}",
            g.to_text()
        );
    }

    // pixel box on a 64x64 image with 8x8 pixels per token
    let bbox: PixelBBox = "20,20,44,44".parse()?;
    let region = bbox_to_region(&bbox, 8)?;
    let (lo, hi) = blocks_for_region(&region);
    println!("bbox {bbox:?} -> token region {region:?}, blocks {lo}..={hi}");
    let mut damaged = source.grid.clone();
    for r in region.y1..region.y2 {
        for c in region.x1..region.x2 {
            damaged.set(r, c, 15);
        }
    }
    println!("damaged:\n{}", damaged.to_text());
    let restored = inpaint(&net, &damaged, &bbox, 8, source.class, &cfg)?;
    println!("inpainted:\n{}", restored.to_text());
    println!("restored exactly: {}", restored == source.grid);
    Ok(())
}
