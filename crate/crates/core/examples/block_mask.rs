//! Shows the pad-aligned input sequence and its block-causal mask.
//!
//! cargo run --example block_mask -- [h] [condition positions]

use lformer::alignment::{describe, AttentionMask, PaddedLayout};
use lformer::GridShape;

fn main() -> lformer::Result<()> {
    let mut args = std::env::args().skip(1);
    let h: usize = args.next().map_or(3, |s| s.parse().expect("h"));
    let n_cond: usize = args
        .next()
        .map_or(2, |s| s.parse().expect("condition positions"));
    let layout = PaddedLayout::new(GridShape::new(h)?, n_cond)?;
    print!("{}", describe(&layout));
    let mask = AttentionMask::block_causal(&layout);
    println!("\nmask ({0}x{0}, row = query):", mask.len());
    print!("{}", mask.render());
    for t in 1..=h {
        println!(
            "step {t}: feed positions {:?}, read outputs {:?}",
            layout.step_inputs(t),
            layout.step_outputs(t)
        );
    }
    Ok(())
}
