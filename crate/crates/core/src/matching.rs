//! Region-wise patch matching.
//!
//! The neighborhood of a target patch is split into disjoint subregions and
//! the single most similar patch is taken from each one, so matches are
//! spread around the target instead of clustering along one direction.
//! Offsets are displacements of a patch's top-left corner, `dy` along rows
//! and `dx` along columns.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{ImageGrid, MaskGrid};
use crate::linalg::Matrix;

/// Top-left corner of a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Position {
    pub row: usize,
    pub col: usize,
}

impl Position {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Offset {
    pub dy: i64,
    pub dx: i64,
}

impl Offset {
    pub const fn new(dy: i64, dx: i64) -> Self {
        Self { dy, dx }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PartitionStrategy {
    /// Equal-angle fan-shaped sectors of the disc of radius `r`.
    Sectors,
    /// An `a x b` grid of equal cells over the square `[-r, r]^2`.
    Grids,
    /// One region: the full square window. The `n` closest candidates are
    /// kept, as in classic exhaustive block matching.
    Exhaustive,
}

impl fmt::Display for PartitionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sectors => "sectors",
            Self::Grids => "grids",
            Self::Exhaustive => "none",
        })
    }
}

impl FromStr for PartitionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sectors" => Ok(Self::Sectors),
            "grids" => Ok(Self::Grids),
            "none" => Ok(Self::Exhaustive),
            other => Err(Error::InvalidParameter(format!(
                "unknown partition strategy {other:?} (expected sectors, grids or none)"
            ))),
        }
    }
}

/// Precomputed neighborhood partition.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    strategy: PartitionStrategy,
    regions: usize,
    radius: usize,
    offsets: Vec<Vec<Offset>>,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self::new(PartitionStrategy::Sectors, 60, 90).expect("default partition is valid")
    }
}

/// `(a, b)` with `a * b = n`, `a` the largest divisor not above `sqrt(n)`.
fn grid_shape(n: usize) -> (usize, usize) {
    let mut a = (n as f64).sqrt().floor() as usize;
    while a * a > n {
        a -= 1;
    }
    while !n.is_multiple_of(a) {
        a -= 1;
    }
    (a, n / a)
}

/// Sector of a nonzero displacement: `floor(theta n / 2 pi)` with
/// `theta = atan2(dy, dx)` in `[0, 2 pi)`.
fn sector_of(dy: i64, dx: i64, n: usize) -> usize {
    let theta = (dy as f64).atan2(dx as f64).rem_euclid(TAU);
    // The nudge keeps exact boundary angles such as pi/2 in the upper sector.
    let idx = (theta * n as f64 / TAU + 1e-9).floor() as usize;
    idx.min(n - 1)
}

/// Builds the offset sets for a strategy.
pub fn build_partition(
    strategy: PartitionStrategy,
    regions: usize,
    radius: usize,
) -> Result<PartitionSpec> {
    PartitionSpec::new(strategy, regions, radius)
}

impl PartitionSpec {
    pub fn new(strategy: PartitionStrategy, regions: usize, radius: usize) -> Result<Self> {
        if regions == 0 {
            return Err(Error::InvalidParameter(
                "region count must be positive".into(),
            ));
        }
        if radius == 0 {
            return Err(Error::InvalidParameter(
                "search radius must be positive".into(),
            ));
        }
        let r = radius as i64;
        let span = 2 * radius + 1;
        let grid = grid_shape(regions);
        if strategy == PartitionStrategy::Grids {
            let (a, b) = grid;
            if b > 3 * a {
                return Err(Error::InvalidParameter(format!(
                    "{regions} regions do not factor into a near-square grid (best is {a}x{b})"
                )));
            }
            if b > span {
                return Err(Error::InvalidParameter(format!(
                    "a {a}x{b} grid does not fit a window of side {span}"
                )));
            }
        }
        let sets = match strategy {
            PartitionStrategy::Exhaustive => 1,
            _ => regions,
        };
        let mut offsets = vec![Vec::new(); sets];
        for dy in -r..=r {
            for dx in -r..=r {
                if dy == 0 && dx == 0 {
                    continue;
                }
                let set = match strategy {
                    PartitionStrategy::Sectors => {
                        if dy * dy + dx * dx > r * r {
                            continue;
                        }
                        sector_of(dy, dx, regions)
                    }
                    PartitionStrategy::Grids => {
                        let (a, b) = grid;
                        let row = (dy + r) as usize * a / span;
                        let col = (dx + r) as usize * b / span;
                        row * b + col
                    }
                    PartitionStrategy::Exhaustive => 0,
                };
                offsets[set].push(Offset::new(dy, dx));
            }
        }
        Ok(Self {
            strategy,
            regions,
            radius,
            offsets,
        })
    }

    pub fn strategy(&self) -> PartitionStrategy {
        self.strategy
    }

    /// Configured subregion count. For the exhaustive window this is the
    /// number of matches kept.
    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Offset sets in subregion order, each enumerated row-major by `(dy, dx)`.
    pub fn offsets(&self) -> &[Vec<Offset>] {
        &self.offsets
    }
}

fn check_patch(height: usize, width: usize, p: Position, side: usize) -> Result<()> {
    if side == 0 || p.row + side > height || p.col + side > width {
        return Err(Error::OutOfBounds {
            row: p.row,
            col: p.col,
            side,
            height,
            width,
        });
    }
    Ok(())
}

/// Column-major vectorization of the `side x side` block at `p`.
pub fn extract_patch(img: &ImageGrid, p: Position, side: usize) -> Result<Vec<f64>> {
    check_patch(img.height(), img.width(), p, side)?;
    let mut out = Vec::with_capacity(side * side);
    for c in 0..side {
        for r in 0..side {
            out.push(img.get(p.row + r, p.col + c));
        }
    }
    Ok(out)
}

fn extract_mask_patch(mask: &MaskGrid, p: Position, side: usize) -> Result<Vec<bool>> {
    check_patch(mask.height(), mask.width(), p, side)?;
    let mut out = Vec::with_capacity(side * side);
    for c in 0..side {
        for r in 0..side {
            out.push(mask.is_observed(p.row + r, p.col + c));
        }
    }
    Ok(out)
}

/// Adds a column-major patch into `sum` at `p` and 1 into `weight` over the
/// same footprint.
pub fn embed_accumulate(
    sum: &mut ImageGrid,
    weight: &mut ImageGrid,
    p: Position,
    patch: &[f64],
) -> Result<()> {
    sum.check_same_shape(weight.shape())?;
    let side = (patch.len() as f64).sqrt().round() as usize;
    if side * side != patch.len() {
        return Err(Error::InvalidParameter(format!(
            "patch of length {} is not square",
            patch.len()
        )));
    }
    check_patch(sum.height(), sum.width(), p, side)?;
    for c in 0..side {
        for r in 0..side {
            let (row, col) = (p.row + r, p.col + c);
            sum.set(row, col, sum.get(row, col) + patch[c * side + r]);
            weight.set(row, col, weight.get(row, col) + 1.0);
        }
    }
    Ok(())
}

/// Squared distance between two patches, given as row-major pixel slices.
/// Stops early once the partial sum reaches `bound`.
#[inline]
fn patch_distance(
    pixels: &[f64],
    width: usize,
    a: Position,
    b: Position,
    side: usize,
    bound: f64,
) -> f64 {
    let mut acc = 0.0;
    for r in 0..side {
        let ra = &pixels[(a.row + r) * width + a.col..][..side];
        let rb = &pixels[(b.row + r) * width + b.col..][..side];
        for (x, y) in ra.iter().zip(rb) {
            acc += (x - y) * (x - y);
        }
        if acc >= bound {
            return acc;
        }
    }
    acc
}

fn translate(p: Position, o: Offset, limit: (usize, usize)) -> Option<Position> {
    let row = p.row as i64 + o.dy;
    let col = p.col as i64 + o.dx;
    if row < 0 || col < 0 || row as usize > limit.0 || col as usize > limit.1 {
        return None;
    }
    Some(Position::new(row as usize, col as usize))
}

/// Most similar patch per subregion, in subregion order.
///
/// Distances are plain squared Frobenius distances on the current estimate.
/// Candidates outside the image are skipped and empty subregions yield
/// nothing. Ties go to the first candidate in offset order. For the
/// exhaustive window the `regions()` closest candidates are returned,
/// nearest first.
pub fn match_regions(
    img: &ImageGrid,
    p: Position,
    spec: &PartitionSpec,
    side: usize,
) -> Result<Vec<Position>> {
    let (h, w) = img.shape();
    check_patch(h, w, p, side)?;
    let limit = (h - side, w - side);
    let pixels = img.pixels();

    if spec.strategy == PartitionStrategy::Exhaustive {
        let mut scored: Vec<(f64, usize, Position)> = spec.offsets[0]
            .iter()
            .enumerate()
            .filter_map(|(i, &o)| translate(p, o, limit).map(|q| (i, q)))
            .map(|(i, q)| (patch_distance(pixels, w, p, q, side, f64::INFINITY), i, q))
            .collect();
        let keep = spec.regions.min(scored.len());
        if keep < scored.len() {
            scored.select_nth_unstable_by(keep, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            scored.truncate(keep);
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        return Ok(scored.into_iter().map(|(_, _, q)| q).collect());
    }

    let mut out = Vec::with_capacity(spec.offsets.len());
    for set in &spec.offsets {
        let mut best: Option<(f64, Position)> = None;
        for &o in set {
            let Some(q) = translate(p, o, limit) else {
                continue;
            };
            let bound = best.map_or(f64::INFINITY, |b| b.0);
            let d = patch_distance(pixels, w, p, q, side, bound);
            if d < bound {
                best = Some((d, q));
            }
        }
        if let Some((_, q)) = best {
            out.push(q);
        }
    }
    Ok(out)
}

/// Patch-group matrix: one vectorized patch per column, target first.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGroup {
    pub y: Matrix,
    /// Observation indicator of each entry of `y`, taken from the input mask.
    pub omega: MaskGrid,
    pub positions: Vec<Position>,
    pub patch_side: usize,
}

/// Stacks the target at `p` and its `matches` into a group. The indicator
/// always comes from the original mask `mask`.
pub fn build_group(
    img: &ImageGrid,
    mask: &MaskGrid,
    p: Position,
    matches: &[Position],
    side: usize,
) -> Result<PatchGroup> {
    img.check_same_shape(mask.shape())?;
    let positions: Vec<Position> = std::iter::once(p).chain(matches.iter().copied()).collect();
    let m = side * side;
    let n = positions.len();
    let mut y = Matrix::zeros(m, n);
    let mut bits = vec![false; m * n];
    for (j, &q) in positions.iter().enumerate() {
        let vals = extract_patch(img, q, side)?;
        let obs = extract_mask_patch(mask, q, side)?;
        for i in 0..m {
            y.set(i, j, vals[i]);
            bits[i * n + j] = obs[i];
        }
    }
    Ok(PatchGroup {
        y,
        omega: MaskGrid::new(m, n, bits)?,
        positions,
        patch_side: side,
    })
}
