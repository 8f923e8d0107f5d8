//! Patch-based inpainting: group, decompose, aggregate, repeat.
//!
//! Each outer iteration slides a target window over the current estimate,
//! gathers region-wise matches for every target, decomposes each patch group
//! and averages the low-rank estimates back into the image. Group masks
//! always come from the input mask, never from the estimate.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::{psnr, ImageGrid, MaskGrid};
use crate::linalg::Matrix;
use crate::matching::{build_group, embed_accumulate, match_regions, PartitionSpec, Position};
use crate::parallel::Workers;
use crate::solver::{ncwlrd_decompose, Decomposition, SolverConfig};

/// Targets solved per batch. Bounds memory; results are reduced batch by
/// batch in target order.
const BATCH: usize = 256;

/// Relative PSNR change that ends the outer loop when a reference is given.
pub const PSNR_STOP_RATIO: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Known missing pixels, clean observations.
    Inpaint,
    /// Impulse noise at unknown locations, optionally with a known mask.
    Blind,
    /// Whole-image split into stripe field and clean image.
    Destripe,
}

impl Mode {
    /// `1` for inpainting, `1/sqrt(max(H, W))` for blind inpainting and a
    /// tenth of that for destriping.
    pub fn default_lambda(self, height: usize, width: usize) -> f64 {
        let scale = 1.0 / (height.max(width) as f64).sqrt();
        match self {
            Self::Inpaint => 1.0,
            Self::Blind => scale,
            Self::Destripe => 0.1 * scale,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Inpaint => "inpaint",
            Self::Blind => "blind",
            Self::Destripe => "destripe",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inpaint" => Ok(Self::Inpaint),
            "blind" => Ok(Self::Blind),
            "destripe" => Ok(Self::Destripe),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub patch_side: usize,
    pub stride: usize,
    pub partition: PartitionSpec,
    /// `solver.lambda` is replaced by [`PipelineConfig::effective_lambda`].
    pub solver: SolverConfig,
    /// Overrides the mode's default `lambda`.
    pub lambda: Option<f64>,
    /// Relative image change that ends the outer loop without a reference.
    pub outer_tol: f64,
    pub max_outer: usize,
    /// Worker count; `None` uses machine parallelism.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Inpaint,
            patch_side: 8,
            stride: 4,
            partition: PartitionSpec::default(),
            solver: SolverConfig::default(),
            lambda: None,
            outer_tol: 1e-3,
            max_outer: 10,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn effective_lambda(&self, height: usize, width: usize) -> f64 {
        self.lambda
            .unwrap_or_else(|| self.mode.default_lambda(height, width))
    }

    /// Solver settings with the effective `lambda` filled in.
    pub fn effective_solver(&self, height: usize, width: usize) -> SolverConfig {
        SolverConfig {
            lambda: self.effective_lambda(height, width),
            ..self.solver.clone()
        }
    }

    fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.patch_side < 2 {
            return Err(Error::InvalidParameter(format!(
                "patch side must be at least 2, got {}",
                self.patch_side
            )));
        }
        if self.patch_side > height.min(width) {
            return Err(Error::InvalidParameter(format!(
                "patch side {} exceeds the {height}x{width} image",
                self.patch_side
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be positive".into()));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "outer tolerance must be positive, got {}",
                self.outer_tol
            )));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter("max_outer must be positive".into()));
        }
        self.effective_solver(height, width).validate()
    }
}

#[derive(Clone, Debug)]
pub struct InpaintResult {
    pub image: ImageGrid,
    pub outer_iterations: usize,
    /// `||I_{t+1} - I_t||_F / ||I_t||_F` per outer iteration.
    pub per_iteration_change: Vec<f64>,
    /// PSNR against the reference per outer iteration, when one was given.
    pub per_iteration_psnr: Vec<f64>,
    /// Groups that hit `max_iter` in each outer iteration.
    pub unconverged_groups: Vec<usize>,
    /// Groups solved per outer iteration.
    pub groups_per_iteration: usize,
}

impl InpaintResult {
    /// True when every group of the final outer iteration converged.
    pub fn converged(&self) -> bool {
        self.unconverged_groups.last().is_none_or(|&n| n == 0)
    }
}

/// Top-left corners of a sliding window with the last row and column
/// clamped to the image edge, so every pixel is covered.
pub fn target_positions(height: usize, width: usize, side: usize, stride: usize) -> Vec<Position> {
    assert!(side >= 1 && side <= height && side <= width && stride >= 1);
    let axis = |len: usize| {
        let last = len - side;
        let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
        if v.last() != Some(&last) {
            v.push(last);
        }
        v
    };
    let rows = axis(height);
    let cols = axis(width);
    rows.iter()
        .flat_map(|&r| cols.iter().map(move |&c| Position::new(r, c)))
        .collect()
}

/// Averages patch estimates. Each group pairs an `m x n` matrix of
/// column-major patches with the `n` positions its columns came from.
pub fn aggregate(
    groups: &[(Matrix, Vec<Position>)],
    height: usize,
    width: usize,
) -> Result<ImageGrid> {
    let mut acc = Accumulator::new(height, width);
    for (x, positions) in groups {
        acc.add(x, positions)?;
    }
    acc.finish()
}

struct Accumulator {
    sum: ImageGrid,
    weight: ImageGrid,
}

impl Accumulator {
    fn new(height: usize, width: usize) -> Self {
        Self {
            sum: ImageGrid::filled(height, width, 0.0),
            weight: ImageGrid::filled(height, width, 0.0),
        }
    }

    fn add(&mut self, x: &Matrix, positions: &[Position]) -> Result<()> {
        if x.cols() != positions.len() {
            return Err(Error::ShapeMismatch {
                expected: (x.rows(), positions.len()),
                got: x.shape(),
            });
        }
        for (j, &p) in positions.iter().enumerate() {
            embed_accumulate(&mut self.sum, &mut self.weight, p, &x.column(j))?;
        }
        Ok(())
    }

    fn finish(self) -> Result<ImageGrid> {
        let (h, w) = self.sum.shape();
        let mut out = self.sum;
        for (i, (v, &wt)) in out
            .pixels_mut()
            .iter_mut()
            .zip(self.weight.pixels())
            .enumerate()
        {
            if wt == 0.0 {
                return Err(Error::Uncovered {
                    row: i / w,
                    col: i % w,
                });
            }
            *v /= wt;
        }
        debug_assert_eq!(out.shape(), (h, w));
        Ok(out)
    }
}

struct GroupOutcome {
    low_rank: Matrix,
    positions: Vec<Position>,
    converged: bool,
}

/// Runs the outer loop. Missing pixels start at the mean of the observed
/// ones. With a reference image the loop stops once consecutive PSNR
/// values differ by less than 1%; otherwise once the relative change drops
/// below `outer_tol`.
fn run(
    image: &ImageGrid,
    mask: &MaskGrid,
    cfg: &PipelineConfig,
    reference: Option<&ImageGrid>,
) -> Result<InpaintResult> {
    image.check_same_shape(mask.shape())?;
    if let Some(r) = reference {
        image.check_same_shape(r.shape())?;
    }
    let (h, w) = image.shape();
    cfg.validate(h, w)?;
    let observed = mask.observed_count();
    if observed == 0 {
        return Err(Error::NothingObserved);
    }

    let fill = image
        .pixels()
        .iter()
        .zip(mask.bits())
        .filter(|(_, &b)| b)
        .map(|(v, _)| v)
        .sum::<f64>()
        / observed as f64;
    let mut estimate = image.clone();
    for (v, &b) in estimate.pixels_mut().iter_mut().zip(mask.bits()) {
        if !b {
            *v = fill;
        }
    }

    let solver = cfg.effective_solver(h, w);
    let side = cfg.patch_side;
    let targets = target_positions(h, w, side, cfg.stride);
    let workers = Workers::new(cfg.threads)?;

    let mut result = InpaintResult {
        image: estimate.clone(),
        outer_iterations: 0,
        per_iteration_change: Vec::new(),
        per_iteration_psnr: Vec::new(),
        unconverged_groups: Vec::new(),
        groups_per_iteration: targets.len(),
    };

    for _ in 0..cfg.max_outer {
        let mut acc = Accumulator::new(h, w);
        let mut unconverged = 0;
        for batch in targets.chunks(BATCH) {
            let outcomes = workers.map(batch, |&p| -> Result<GroupOutcome> {
                let matches = match_regions(&estimate, p, &cfg.partition, side)?;
                let group = build_group(&estimate, mask, p, &matches, side)?;
                let dec = ncwlrd_decompose(&group.y, &group.omega, &solver)?;
                Ok(GroupOutcome {
                    low_rank: dec.low_rank,
                    positions: group.positions,
                    converged: dec.converged,
                })
            });
            for outcome in outcomes {
                let o = outcome?;
                unconverged += usize::from(!o.converged);
                acc.add(&o.low_rank, &o.positions)?;
            }
        }
        let next = acc.finish()?;
        let prev_norm = estimate.frobenius_norm();
        let diff: f64 = next
            .pixels()
            .iter()
            .zip(estimate.pixels())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let change = if prev_norm > 0.0 {
            diff / prev_norm
        } else {
            diff
        };
        estimate = next;

        result.outer_iterations += 1;
        result.per_iteration_change.push(change);
        result.unconverged_groups.push(unconverged);

        let stop = match reference {
            Some(r) => {
                let p = psnr(&estimate, r)?;
                let stop = result.per_iteration_psnr.last().is_some_and(|&prev| {
                    if prev.is_infinite() || p.is_infinite() {
                        prev == p
                    } else {
                        (p - prev).abs() < PSNR_STOP_RATIO * prev.abs()
                    }
                });
                result.per_iteration_psnr.push(p);
                stop
            }
            None => change < cfg.outer_tol,
        };
        if stop {
            break;
        }
    }
    result.image = estimate;
    Ok(result)
}

/// Fills the unobserved pixels of `image` (mask `true` = observed).
///
/// A fully observed image is returned unchanged without running the loop.
pub fn inpaint(
    image: &ImageGrid,
    mask: &MaskGrid,
    cfg: &PipelineConfig,
    reference: Option<&ImageGrid>,
) -> Result<InpaintResult> {
    image.check_same_shape(mask.shape())?;
    let cfg = PipelineConfig {
        mode: Mode::Inpaint,
        ..cfg.clone()
    };
    if mask.missing_count() == 0 {
        let (h, w) = image.shape();
        cfg.validate(h, w)?;
        let per_iteration_psnr = match reference {
            Some(r) => vec![psnr(image, r)?],
            None => Vec::new(),
        };
        return Ok(InpaintResult {
            image: image.clone(),
            outer_iterations: 0,
            per_iteration_change: Vec::new(),
            per_iteration_psnr,
            unconverged_groups: Vec::new(),
            groups_per_iteration: 0,
        });
    }
    run(image, mask, &cfg, reference)
}

/// Removes impulse noise at unknown locations and fills any known holes.
/// `lambda` defaults to `1/sqrt(max(H, W))`, so outliers move into the
/// sparse part of each group.
pub fn blind_inpaint(
    image: &ImageGrid,
    mask: Option<&MaskGrid>,
    cfg: &PipelineConfig,
    reference: Option<&ImageGrid>,
) -> Result<InpaintResult> {
    let all = MaskGrid::all_observed(image.height(), image.width());
    let cfg = PipelineConfig {
        mode: Mode::Blind,
        ..cfg.clone()
    };
    run(image, mask.unwrap_or(&all), &cfg, reference)
}

#[derive(Clone, Debug)]
pub struct DestripeResult {
    pub clean: ImageGrid,
    /// Zero-mean stripe field.
    pub stripes: ImageGrid,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// Splits `image` into a stripe field and a clean image with a single
/// whole-image decomposition (`Omega = 1`, `lambda = 0.1/sqrt(max(H, W))`).
///
/// Column stripes plus the image's mean level form a rank-one matrix, so
/// both land in the low-rank part while texture stays in the sparse part.
/// The mean of the low-rank part is moved back to the clean image; the
/// stripe field is returned with zero mean.
pub fn destripe(image: &ImageGrid, cfg: &PipelineConfig) -> Result<DestripeResult> {
    let (h, w) = image.shape();
    let cfg = PipelineConfig {
        mode: Mode::Destripe,
        ..cfg.clone()
    };
    let solver = cfg.effective_solver(h, w);
    solver.validate()?;
    let y = image.to_matrix();
    let dec: Decomposition = ncwlrd_decompose(&y, &MaskGrid::all_observed(h, w), &solver)?;
    let level = dec.low_rank.as_slice().iter().sum::<f64>() / (h * w) as f64;
    let clean = ImageGrid::from_matrix(&dec.sparse.map(|v| v + level))?;
    let stripes = ImageGrid::from_matrix(&dec.low_rank.map(|v| v - level))?;
    Ok(DestripeResult {
        clean,
        stripes,
        lambda: solver.lambda,
        iterations: dec.iterations,
        converged: dec.converged,
        relative_residual: dec.relative_residual(),
    })
}
