//! Geometry of the L-shape block decomposition.
//!
//! An `h x h` grid is split into `h` mirrored-L blocks. Block `t` holds the
//! cells whose larger coordinate is `t` (1-indexed), so blocks `1..=t` always
//! form the top-left `t x t` square. Cells are ranked block by block; inside a
//! block the order is clockwise: down the right column `(1,t)..(t,t)`, then
//! leftwards along the bottom row `(t,t-1)..(t,1)`.
//!
//! Ranks, blocks, rows and columns are all 1-indexed in this module.

use std::fmt::Write as _;

use crate::corpus::TokenGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    h: usize,
}

impl GridShape {
    pub fn new(h: usize) -> Result<Self> {
        if h == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { h })
    }

    pub fn side(&self) -> usize {
        self.h
    }

    pub fn num_tokens(&self) -> usize {
        self.h * self.h
    }
}

/// 1-indexed grid coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Block containing this cell.
    pub fn block(&self) -> usize {
        self.row.max(self.col)
    }
}

/// First and last rank of block `t`, `((t-1)^2 + 1, t^2)`.
pub fn block_bounds(t: usize) -> (usize, usize) {
    ((t - 1) * (t - 1) + 1, t * t)
}

/// Block containing `rank`: the smallest `t` with `t^2 >= rank`.
pub fn block_of(rank: usize) -> usize {
    debug_assert!(rank >= 1);
    let mut t = (rank as f64).sqrt() as usize;
    while t * t < rank {
        t += 1;
    }
    while t > 1 && (t - 1) * (t - 1) >= rank {
        t -= 1;
    }
    t
}

/// Precomputed bijection between grid cells and L-order ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LOrderLayout {
    shape: GridShape,
    // indexed by (row-1)*h + (col-1)
    rank_of_cell: Vec<usize>,
    // indexed by rank-1
    cell_of_rank: Vec<Cell>,
}

impl LOrderLayout {
    pub fn new(shape: GridShape) -> Self {
        let h = shape.side();
        let mut cell_of_rank = Vec::with_capacity(h * h);
        for t in 1..=h {
            for row in 1..=t {
                cell_of_rank.push(Cell::new(row, t));
            }
            for col in (1..t).rev() {
                cell_of_rank.push(Cell::new(t, col));
            }
        }
        let mut rank_of_cell = vec![0; h * h];
        for (i, cell) in cell_of_rank.iter().enumerate() {
            rank_of_cell[(cell.row - 1) * h + (cell.col - 1)] = i + 1;
        }
        Self {
            shape,
            rank_of_cell,
            cell_of_rank,
        }
    }

    /// Builds the layout for a side length, rejecting `h = 0`.
    pub fn build(h: usize) -> Result<Self> {
        Ok(Self::new(GridShape::new(h)?))
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn side(&self) -> usize {
        self.shape.side()
    }

    pub fn rank_of_cell(&self, cell: Cell) -> usize {
        let h = self.side();
        assert!(
            (1..=h).contains(&cell.row) && (1..=h).contains(&cell.col),
            "cell {cell:?} outside {h}x{h} grid"
        );
        self.rank_of_cell[(cell.row - 1) * h + (cell.col - 1)]
    }

    pub fn cell_of_rank(&self, rank: usize) -> Cell {
        self.cell_of_rank[rank - 1]
    }

    pub fn block_of_rank(&self, rank: usize) -> usize {
        assert!((1..=self.shape.num_tokens()).contains(&rank));
        block_of(rank)
    }

    pub fn block_range(&self, t: usize) -> Result<(usize, usize)> {
        if t == 0 || t > self.side() {
            return Err(Error::BlockOutOfRange { t, h: self.side() });
        }
        Ok(block_bounds(t))
    }

    /// Cells of block `t` in clockwise order.
    pub fn block_cells(&self, t: usize) -> &[Cell] {
        let (lo, hi) = block_bounds(t);
        &self.cell_of_rank[lo - 1..hi]
    }

    /// Iterates the cells in L-order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cell_of_rank.iter().copied()
    }

    pub fn to_lorder(&self, grid: &TokenGrid) -> Result<Vec<u32>> {
        if grid.shape() != self.shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.side()),
                actual: format!("{0}x{0}", grid.side()),
            });
        }
        Ok(self
            .cell_of_rank
            .iter()
            .map(|c| grid.get(c.row - 1, c.col - 1))
            .collect())
    }

    pub fn from_lorder(&self, seq: &[u32]) -> Result<TokenGrid> {
        let n = self.shape.num_tokens();
        if seq.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: seq.len(),
            });
        }
        let mut grid = TokenGrid::filled(self.shape, 0);
        for (cell, &tok) in self.cell_of_rank.iter().zip(seq) {
            grid.set(cell.row - 1, cell.col - 1, tok);
        }
        Ok(grid)
    }

    /// Text rendering with one rank per cell, rows top to bottom.
    pub fn render(&self) -> String {
        let h = self.side();
        let width = (h * h).to_string().len();
        let mut out = String::new();
        for row in 1..=h {
            for col in 1..=h {
                if col > 1 {
                    out.push(' ');
                }
                let _ = write!(out, "{:>width$}", self.rank_of_cell(Cell::new(row, col)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_grid() {
        assert!(matches!(LOrderLayout::build(0), Err(Error::EmptyGrid)));
    }

    #[test]
    fn single_cell() {
        let l = LOrderLayout::build(1).unwrap();
        assert_eq!(l.rank_of_cell(Cell::new(1, 1)), 1);
        assert_eq!(l.block_of_rank(1), 1);
    }

    #[test]
    fn block_three_of_eight() {
        let l = LOrderLayout::build(8).unwrap();
        assert_eq!(l.block_range(3).unwrap(), (5, 9));
        assert_eq!(l.block_cells(3).len(), 5);
        assert_eq!(l.rank_of_cell(Cell::new(1, 3)), 5);
        assert_eq!(l.rank_of_cell(Cell::new(3, 3)), 7);
        assert_eq!(l.rank_of_cell(Cell::new(3, 1)), 9);
    }

    #[test]
    fn block_ranges() {
        let l = LOrderLayout::build(8).unwrap();
        assert_eq!(l.block_range(1).unwrap(), (1, 1));
        assert_eq!(l.block_range(8).unwrap(), (50, 64));
        assert!(matches!(
            l.block_range(0),
            Err(Error::BlockOutOfRange { .. })
        ));
        assert!(matches!(
            l.block_range(9),
            Err(Error::BlockOutOfRange { .. })
        ));
    }

    #[test]
    fn two_by_two_lorder() {
        let l = LOrderLayout::build(2).unwrap();
        let g = TokenGrid::from_rows(&[vec![10, 11], vec![12, 13]]).unwrap();
        assert_eq!(l.to_lorder(&g).unwrap(), vec![10, 11, 13, 12]);
        assert_eq!(l.from_lorder(&[10, 11, 13, 12]).unwrap(), g);
    }

    #[test]
    fn from_lorder_length_mismatch() {
        let l = LOrderLayout::build(3).unwrap();
        assert!(matches!(
            l.from_lorder(&[0; 8]),
            Err(Error::LengthMismatch {
                expected: 9,
                actual: 8
            })
        ));
    }

    #[test]
    fn block_of_matches_bounds() {
        for t in 1..200 {
            let (lo, hi) = block_bounds(t);
            assert_eq!(block_of(lo), t);
            assert_eq!(block_of(hi), t);
        }
    }

    #[test]
    fn render_h3() {
        let l = LOrderLayout::build(3).unwrap();
        assert_eq!(l.render(), "1 2 5\n4 3 6\n9 8 7\n");
    }
}
