//! Training-free editing in token space.
//!
//! Repainting keeps the top-left `t_keep x t_keep` square and regenerates
//! every later block. Inpainting maps a pixel box to a token region and
//! regenerates only the blocks that intersect it; each generated block is
//! merged with the original (new tokens inside the region, original tokens
//! outside) before the next step conditions on it.
//!
//! Coordinates here are 0-indexed and half-open, `x` along columns and `y`
//! along rows.

use serde::{Deserialize, Serialize};

use crate::corpus::TokenGrid;
use crate::error::{Error, Result};
use crate::lgrid::Cell;
use crate::net::Network;
use crate::sampler::{run, DecodePlan, SampleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBBox {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl PixelBBox {
    pub fn new(x1: usize, y1: usize, x2: usize, y2: usize) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Checks the box is nonempty and inside a `side_px x side_px` image.
    pub fn validate(&self, side_px: usize) -> Result<()> {
        if self.x1 >= self.x2 || self.y1 >= self.y2 {
            return Err(Error::InvalidBBox(format!("{self:?} is empty")));
        }
        if self.x2 > side_px || self.y2 > side_px {
            return Err(Error::InvalidBBox(format!(
                "{self:?} exceeds {side_px}x{side_px} image"
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for PixelBBox {
    type Err = Error;

    /// Parses `x1,y1,x2,y2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidBBox(format!("{s:?}: {e}")))?;
        match parts[..] {
            [x1, y1, x2, y2] => Ok(Self::new(x1, y1, x2, y2)),
            _ => Err(Error::InvalidBBox(format!("{s:?}: expected x1,y1,x2,y2"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenRegion {
    pub x1: usize,
    pub y1: usize,
    pub x2: usize,
    pub y2: usize,
}

impl TokenRegion {
    /// Whether a 1-indexed grid cell lies in the region.
    pub fn contains(&self, cell: Cell) -> bool {
        let (r, c) = (cell.row - 1, cell.col - 1);
        (self.x1..self.x2).contains(&c) && (self.y1..self.y2).contains(&r)
    }

    pub fn num_cells(&self) -> usize {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

/// Floor the near edges, ceil the far edges.
pub fn bbox_to_region(bbox: &PixelBBox, factor: usize) -> Result<TokenRegion> {
    if factor == 0 {
        return Err(Error::Config(
            "downsampling factor must be at least 1".into(),
        ));
    }
    if bbox.x1 >= bbox.x2 || bbox.y1 >= bbox.y2 {
        return Err(Error::EmptyRegion);
    }
    let region = TokenRegion {
        x1: bbox.x1 / factor,
        y1: bbox.y1 / factor,
        x2: bbox.x2.div_ceil(factor),
        y2: bbox.y2.div_ceil(factor),
    };
    if region.x1 >= region.x2 || region.y1 >= region.y2 {
        return Err(Error::EmptyRegion);
    }
    Ok(region)
}

/// First and last (1-indexed) blocks touching the region.
pub fn blocks_for_region(region: &TokenRegion) -> (usize, usize) {
    (
        region.x1.max(region.y1) + 1,
        (region.x2 - 1).max(region.y2 - 1) + 1,
    )
}

/// Keeps ranks `<= t_keep^2` and regenerates the rest under `class`.
pub fn repaint(
    net: &Network,
    grid: &TokenGrid,
    t_keep: usize,
    class: usize,
    cfg: &SampleConfig,
) -> Result<TokenGrid> {
    let h = net.config().h;
    if t_keep > h {
        return Err(Error::BlockOutOfRange { t: t_keep, h });
    }
    net.check_grid(grid)?;
    if t_keep == h {
        return Ok(grid.clone());
    }
    let gen = run(
        net,
        class,
        cfg,
        DecodePlan {
            base: Some(grid),
            regenerate: &|cell: Cell| cell.block() > t_keep,
            last_block: h,
            cached: true,
        },
    )?;
    Ok(gen.grid)
}

/// Regenerates the blocks intersecting the box, replacing only in-region
/// tokens at every step.
pub fn inpaint(
    net: &Network,
    grid: &TokenGrid,
    bbox: &PixelBBox,
    factor: usize,
    class: usize,
    cfg: &SampleConfig,
) -> Result<TokenGrid> {
    let h = net.config().h;
    bbox.validate(h * factor)?;
    let region = bbox_to_region(bbox, factor)?;
    net.check_grid(grid)?;
    let (_, t_hi) = blocks_for_region(&region);
    let gen = run(
        net,
        class,
        cfg,
        DecodePlan {
            base: Some(grid),
            regenerate: &|cell: Cell| region.contains(cell),
            last_block: t_hi,
            cached: true,
        },
    )?;
    Ok(gen.grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_example_box() {
        let r = bbox_to_region(&PixelBBox::new(16, 24, 40, 48), 8).unwrap();
        assert_eq!((r.x1, r.y1, r.x2, r.y2), (2, 3, 5, 6));
        assert_eq!(blocks_for_region(&r), (4, 6));
    }

    #[test]
    fn unaligned_box_rounds_outward() {
        let r = bbox_to_region(&PixelBBox::new(17, 1, 18, 63), 8).unwrap();
        assert_eq!((r.x1, r.y1, r.x2, r.y2), (2, 0, 3, 8));
    }

    #[test]
    fn unit_factor_is_identity() {
        let b = PixelBBox::new(1, 2, 5, 7);
        let r = bbox_to_region(&b, 1).unwrap();
        assert_eq!((r.x1, r.y1, r.x2, r.y2), (1, 2, 5, 7));
    }

    #[test]
    fn origin_cell_is_block_one() {
        let r = TokenRegion {
            x1: 0,
            y1: 0,
            x2: 1,
            y2: 1,
        };
        assert_eq!(blocks_for_region(&r), (1, 1));
        let full = TokenRegion {
            x1: 0,
            y1: 0,
            x2: 8,
            y2: 8,
        };
        assert_eq!(blocks_for_region(&full), (1, 8));
    }

    #[test]
    fn contains_uses_columns_for_x() {
        let r = TokenRegion {
            x1: 2,
            y1: 3,
            x2: 5,
            y2: 6,
        };
        // 0-indexed row 3, col 2 -> 1-indexed (4, 3)
        assert!(r.contains(Cell::new(4, 3)));
        assert!(!r.contains(Cell::new(3, 4)));
        assert_eq!(r.num_cells(), 9);
    }

    #[test]
    fn bad_boxes() {
        assert!(PixelBBox::new(3, 0, 3, 4).validate(64).is_err());
        assert!(PixelBBox::new(0, 0, 65, 4).validate(64).is_err());
        assert!(bbox_to_region(&PixelBBox::new(0, 0, 4, 4), 0).is_err());
        assert!(matches!(
            bbox_to_region(&PixelBBox::new(5, 0, 5, 4), 8),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn parses_bbox() {
        assert_eq!(
            "1, 2,3,4".parse::<PixelBBox>().unwrap(),
            PixelBBox::new(1, 2, 3, 4)
        );
        assert!("1,2,3".parse::<PixelBBox>().is_err());
        assert!("a,2,3,4".parse::<PixelBBox>().is_err());
    }
}
