//! Attention multiplication counts for L-shape, bidirectional and
//! token-by-token decoding, checked against the closed form.

use lformer::complexity::{compare, render_table, verify_identity, OpCountReport};

fn main() -> lformer::Result<()> {
    let mut rows = Vec::new();
    for n in [64, 256, 1024, 4096] {
        rows.extend(compare(n, 1024)?);
    }
    print!("{}", render_table(&rows));
    let bad = verify_identity(4096, &[1, 7, 1024]);
    println!("\nclosed-form mismatches for N <= 4096: {}", bad.len());
    println!("\n{}", OpCountReport::CSV_HEADER);
    for r in rows.iter().filter(|r| r.n == 1024) {
        println!("{}", r.csv_line());
    }
    Ok(())
}
