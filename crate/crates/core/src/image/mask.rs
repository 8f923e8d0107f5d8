use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MaskGrid;
use crate::error::{Error, Result};

/// Smallest and largest side length of a random block.
pub const BLOCK_SIDE_RANGE: (usize, usize) = (10, 20);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineOrientation {
    /// Whole rows are missing.
    Horizontal,
    /// Whole columns are missing.
    Vertical,
}

/// Recipe for a synthetic degradation mask. Generation is a pure function
/// of the recipe and the target shape.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskRecipe {
    /// Exactly `floor(rate * H * W)` distinct pixels missing.
    RandomPixels { rate: f64, seed: u64 },
    /// `count` rectangles with sides drawn from [`BLOCK_SIDE_RANGE`].
    RandomBlocks { count: usize, seed: u64 },
    /// `count` distinct full rows or columns missing.
    Lines {
        count: usize,
        orientation: LineOrientation,
        seed: u64,
    },
}

/// An axis-aligned rectangle `[row, row + height) x [col, col + width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl MaskRecipe {
    /// Block placements for a [`MaskRecipe::RandomBlocks`] recipe.
    pub fn block_layout(&self, height: usize, width: usize) -> Result<Vec<Block>> {
        let &MaskRecipe::RandomBlocks { count, seed } = self else {
            return Err(Error::InvalidParameter(
                "block layout requested for a non-block recipe".into(),
            ));
        };
        let (lo, hi) = BLOCK_SIDE_RANGE;
        if count == 0 {
            return Err(Error::InvalidParameter(
                "block count must be positive".into(),
            ));
        }
        if height < hi || width < hi {
            return Err(Error::InvalidParameter(format!(
                "random blocks need an image of at least {hi}x{hi}, got {height}x{width}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..count)
            .map(|_| {
                let bh = rng.random_range(lo..=hi);
                let bw = rng.random_range(lo..=hi);
                Block {
                    row: rng.random_range(0..=height - bh),
                    col: rng.random_range(0..=width - bw),
                    height: bh,
                    width: bw,
                }
            })
            .collect())
    }
}

/// Generates the mask described by `recipe` (`true` = observed).
pub fn gen_mask(recipe: &MaskRecipe, height: usize, width: usize) -> Result<MaskGrid> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter(format!(
            "mask dimensions must be positive, got {height}x{width}"
        )));
    }
    let mut mask = MaskGrid::all_observed(height, width);
    match *recipe {
        MaskRecipe::RandomPixels { rate, seed } => {
            if !(rate > 0.0 && rate < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "missing rate must lie in (0, 1), got {rate}"
                )));
            }
            let total = height * width;
            let missing = (rate * total as f64).floor() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for idx in sample(&mut rng, total, missing) {
                mask.set(idx / width, idx % width, false);
            }
        }
        MaskRecipe::RandomBlocks { .. } => {
            for b in recipe.block_layout(height, width)? {
                for r in b.row..b.row + b.height {
                    for c in b.col..b.col + b.width {
                        mask.set(r, c, false);
                    }
                }
            }
        }
        MaskRecipe::Lines {
            count,
            orientation,
            seed,
        } => {
            if count == 0 || count >= height.min(width) {
                return Err(Error::InvalidParameter(format!(
                    "line count must lie in [1, {}), got {count}",
                    height.min(width)
                )));
            }
            let span = match orientation {
                LineOrientation::Horizontal => height,
                LineOrientation::Vertical => width,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for line in sample(&mut rng, span, count) {
                match orientation {
                    LineOrientation::Horizontal => {
                        (0..width).for_each(|c| mask.set(line, c, false))
                    }
                    LineOrientation::Vertical => (0..height).for_each(|r| mask.set(r, line, false)),
                }
            }
        }
    }
    Ok(mask)
}
