//! Adaptive non-convex weighted low-rank decomposition with region-wise
//! patch matching for image inpainting, blind impulse removal and
//! destriping.
//!
//! The building blocks, bottom up:
//!
//! - [`linalg`]: dense matrices, thin SVD, soft shrinkage.
//! - [`solver`]: the ADMM decomposition `Y = X + B` and a nuclear-norm
//!   baseline.
//! - [`matching`]: neighborhood partitions and patch-group assembly.
//! - [`pipeline`]: the outer inpainting loop and the blind/destripe modes.
//! - [`image`]: rasters, masks, PGM/PNG I/O, PSNR and SSIM.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod image;
pub mod linalg;
pub mod matching;
pub mod parallel;
pub mod pipeline;
pub mod solver;
pub mod synthetic;

pub use error::{Error, Result};
pub use image::{ImageGrid, MaskGrid};
pub use linalg::Matrix;
pub use matching::{PartitionSpec, PartitionStrategy, PatchGroup, Position};
pub use pipeline::{
    blind_inpaint, destripe, inpaint, DestripeResult, InpaintResult, Mode, PipelineConfig,
};
pub use solver::{ncwlrd_decompose, nnm_complete, Decomposition, GammaValue, SolverConfig};
