//! Pad-aligned input sequence and block-causal attention mask.
//!
//! The transformer input is `[COND x n_cond; BOS; pad(b_1); ...; pad(b_{h-1})]`
//! where `pad(b_k) = [PAD; b_k; PAD]` has `2k + 1` positions, exactly the size
//! of block `k + 1`. The output at every non-condition position predicts one
//! rank, and those ranks run `1..=h^2` in sequence order, so the logits of a
//! whole grid are the contiguous output rows starting at BOS.
//!
//! Padded block `k` occupies positions `n_cond + k^2 .. n_cond + (k+1)^2`,
//! and BOS sits at `n_cond` (the `k = 0` case of the same formula).

use std::fmt::Write as _;
use std::ops::Range;

use crate::corpus::TokenGrid;
use crate::error::{Error, Result};
use crate::lgrid::{Cell, GridShape, LOrderLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Cond(usize),
    Bos,
    Pad,
    /// Ground-truth token of the given 1-indexed rank.
    Token(usize),
}

#[derive(Debug, Clone)]
pub struct PaddedLayout {
    lorder: LOrderLayout,
    n_cond: usize,
    positions: Vec<Position>,
}

impl PaddedLayout {
    pub fn new(shape: GridShape, n_cond: usize) -> Result<Self> {
        if n_cond == 0 {
            return Err(Error::Config("n_cond must be at least 1".into()));
        }
        let h = shape.side();
        let mut positions = Vec::with_capacity(n_cond + h * h);
        positions.extend((0..n_cond).map(Position::Cond));
        positions.push(Position::Bos);
        for k in 1..h {
            positions.push(Position::Pad);
            let first = (k - 1) * (k - 1) + 1;
            positions.extend((first..=k * k).map(Position::Token));
            positions.push(Position::Pad);
        }
        debug_assert_eq!(positions.len(), n_cond + h * h);
        Ok(Self {
            lorder: LOrderLayout::new(shape),
            n_cond,
            positions,
        })
    }

    pub fn lorder(&self) -> &LOrderLayout {
        &self.lorder
    }

    pub fn shape(&self) -> GridShape {
        self.lorder.shape()
    }

    pub fn n_cond(&self) -> usize {
        self.n_cond
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn bos_index(&self) -> usize {
        self.n_cond
    }

    /// Positions of padded block `k` (`1 <= k < h`).
    pub fn padded_block(&self, k: usize) -> Range<usize> {
        assert!(
            k >= 1 && k < self.shape().side(),
            "padded block {k} out of range"
        );
        self.n_cond + k * k..self.n_cond + (k + 1) * (k + 1)
    }

    /// Positions fed to the network at decode step `t`: the condition prefix
    /// and BOS for `t = 1`, padded block `t - 1` afterwards. Their outputs
    /// predict block `t`.
    pub fn step_inputs(&self, t: usize) -> Range<usize> {
        assert!(t >= 1 && t <= self.shape().side(), "step {t} out of range");
        if t == 1 {
            0..self.n_cond + 1
        } else {
            self.padded_block(t - 1)
        }
    }

    /// Positions whose outputs predict block `t`.
    pub fn step_outputs(&self, t: usize) -> Range<usize> {
        let inputs = self.step_inputs(t);
        if t == 1 {
            self.n_cond..self.n_cond + 1
        } else {
            inputs
        }
    }

    /// Rank predicted by the output at `pos`, if any.
    pub fn predict_target(&self, pos: usize) -> Option<usize> {
        (pos >= self.n_cond && pos < self.len()).then(|| pos - self.n_cond + 1)
    }

    /// Grid cell whose token `pos` predicts.
    pub fn target_cell(&self, pos: usize) -> Option<Cell> {
        self.predict_target(pos)
            .map(|r| self.lorder.cell_of_rank(r))
    }

    /// Visibility group: COND = 0, BOS = 1, padded block k = k + 1.
    fn group(&self, pos: usize) -> usize {
        if pos < self.n_cond {
            0
        } else {
            crate::lgrid::block_of(pos - self.n_cond + 1)
        }
    }

    /// Targets aligned to the prediction positions, i.e. the grid in L-order.
    pub fn targets(&self, grid: &TokenGrid) -> Result<Vec<u32>> {
        self.lorder.to_lorder(grid)
    }
}

/// Boolean query x key visibility matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    n: usize,
    allow: Vec<bool>,
}

impl AttentionMask {
    pub fn block_causal(layout: &PaddedLayout) -> Self {
        let n = layout.len();
        let groups: Vec<usize> = (0..n).map(|p| layout.group(p)).collect();
        let mut allow = vec![false; n * n];
        for q in 0..n {
            for k in 0..n {
                allow[q * n + k] = groups[k] <= groups[q];
            }
        }
        Self { n, allow }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn allows(&self, query: usize, key: usize) -> bool {
        self.allow[query * self.n + key]
    }

    pub fn row(&self, query: usize) -> &[bool] {
        &self.allow[query * self.n..(query + 1) * self.n]
    }

    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.n * (self.n + 1));
        for q in 0..self.n {
            for &a in self.row(q) {
                out.push(if a { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }
}

/// One-line-per-position description of a padded layout.
pub fn describe(layout: &PaddedLayout) -> String {
    let mut out = String::new();
    for (i, p) in layout.positions().iter().enumerate() {
        let input = match p {
            Position::Cond(c) => format!("COND({c})"),
            Position::Bos => "BOS".to_string(),
            Position::Pad => "PAD".to_string(),
            Position::Token(r) => format!("TOKEN({r})"),
        };
        match layout.predict_target(i) {
            Some(r) => {
                let _ = writeln!(out, "{i:>4} {input:<12} -> rank {r}");
            }
            None => {
                let _ = writeln!(out, "{i:>4} {input}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(h: usize, n_cond: usize) -> PaddedLayout {
        PaddedLayout::new(GridShape::new(h).unwrap(), n_cond).unwrap()
    }

    #[test]
    fn single_block_layout() {
        let l = layout(1, 1);
        assert_eq!(l.positions(), &[Position::Cond(0), Position::Bos]);
        assert_eq!(l.predict_target(1), Some(1));
        assert_eq!(l.predict_target(0), None);
        let m = AttentionMask::block_causal(&l);
        assert_eq!(m.render(), "10\n11\n");
    }

    #[test]
    fn two_by_two_layout() {
        let l = layout(2, 2);
        assert_eq!(
            l.positions(),
            &[
                Position::Cond(0),
                Position::Cond(1),
                Position::Bos,
                Position::Pad,
                Position::Token(1),
                Position::Pad
            ]
        );
        let predicted: Vec<_> = (3..6).map(|p| l.predict_target(p).unwrap()).collect();
        assert_eq!(predicted, vec![2, 3, 4]);
    }

    #[test]
    fn eight_by_eight_layout() {
        let l = layout(8, 4);
        assert_eq!(l.len(), 68);
        let pb7 = l.padded_block(7);
        assert_eq!(pb7.len(), 15);
        let ranks: Vec<_> = pb7.map(|p| l.predict_target(p).unwrap()).collect();
        assert_eq!(ranks, (50..=64).collect::<Vec<_>>());
    }

    #[test]
    fn padded_blocks_are_pad_token_pad() {
        let l = layout(6, 3);
        for k in 1..6 {
            let span = l.padded_block(k);
            assert_eq!(span.len(), 2 * k + 1);
            let p = &l.positions()[span];
            assert_eq!(p[0], Position::Pad);
            assert_eq!(p[2 * k], Position::Pad);
            for (i, pos) in p[1..2 * k].iter().enumerate() {
                assert_eq!(*pos, Position::Token((k - 1) * (k - 1) + 1 + i));
            }
        }
    }

    #[test]
    fn token_one_sees_only_its_block_and_earlier() {
        let l = layout(2, 1);
        let m = AttentionMask::block_causal(&l);
        // [COND, BOS, PAD, TOKEN(1), PAD]
        assert_eq!(m.row(3), &[true, true, true, true, true]);
        assert_eq!(m.row(1), &[true, true, false, false, false]);
        assert_eq!(m.row(0), &[true, false, false, false, false]);
    }

    #[test]
    fn row_sums_closed_form() {
        for n_cond in [1, 3] {
            let l = layout(8, n_cond);
            let m = AttentionMask::block_causal(&l);
            for k in 1..8 {
                for p in l.padded_block(k) {
                    let sum = m.row(p).iter().filter(|&&a| a).count();
                    let direct = n_cond + 1 + (1..=k).map(|j| 2 * j + 1).sum::<usize>();
                    assert_eq!(sum, direct);
                    assert_eq!(sum, n_cond + (k + 1) * (k + 1));
                }
            }
        }
    }

    #[test]
    fn step_spans() {
        let l = layout(4, 2);
        assert_eq!(l.step_inputs(1), 0..3);
        assert_eq!(l.step_outputs(1), 2..3);
        assert_eq!(l.step_inputs(2), 3..6);
        assert_eq!(l.step_outputs(4), 11..18);
    }

    #[test]
    fn targets_h2() {
        let l = layout(2, 1);
        let g = TokenGrid::from_rows(&[vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(l.targets(&g).unwrap(), vec![1, 2, 4, 3]);
    }

    #[test]
    fn zero_cond_rejected() {
        assert!(PaddedLayout::new(GridShape::new(2).unwrap(), 0).is_err());
    }
}
