//! Prints the L-order rank of every cell and the cells of each block.
//!
//! cargo run --example lorder_layout -- [h]

use lformer::LOrderLayout;

fn main() -> lformer::Result<()> {
    let h: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("h"));
    let layout = LOrderLayout::build(h)?;
    println!("rank of each cell ({h}x{h}):\n{}", layout.render());
    for t in 1..=h {
        let (lo, hi) = layout.block_range(t)?;
        let cells: Vec<String> = layout
            .block_cells(t)
            .iter()
            .map(|c| format!("({},{})", c.row, c.col))
            .collect();
        println!("block {t}: ranks {lo}..={hi}  {}", cells.join(" "));
    }
    Ok(())
}
