//! Grayscale rasters, binary masks, file I/O and quality metrics.

mod io;
mod mask;
mod metrics;

pub use io::{read_image, read_mask, write_image, write_mask};
pub use mask::{gen_mask, LineOrientation, MaskRecipe};
pub use metrics::{mse, psnr, ssim};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `height x width` grayscale raster of real intensities, row-major.
///
/// Values are nominally in `[0, 255]` but intermediate estimates may leave
/// that range; only finiteness is enforced.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if pixels.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "{} pixels cannot fill a {height}x{width} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(
            height >= 1 && width >= 1,
            "image dimensions must be positive"
        );
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Self::filled(height, width, 0.0);
        for r in 0..height {
            for c in 0..width {
                img.pixels[r * width + c] = f(r, c);
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.width + col] = value;
    }

    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    /// Same values as a `height x width` matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.height, self.width, |r, c| self.get(r, c))
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        Self::new(m.rows(), m.cols(), m.as_slice().to_vec())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.pixels.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub(crate) fn check_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                got: other,
            });
        }
        Ok(())
    }
}

/// Binary observation mask; `true` marks an observed pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskGrid {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl MaskGrid {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be positive, got {height}x{width}"
            )));
        }
        if bits.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "{} bits cannot fill a {height}x{width} mask",
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn all_observed(height: usize, width: usize) -> Self {
        assert!(
            height >= 1 && width >= 1,
            "mask dimensions must be positive"
        );
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::all_observed(height, width);
        for r in 0..height {
            for c in 0..width {
                m.bits[r * width + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, observed: bool) {
        self.bits[row * self.width + col] = observed;
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn missing_count(&self) -> usize {
        self.bits.len() - self.observed_count()
    }

    /// Fraction of unobserved entries.
    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / self.bits.len() as f64
    }

    /// Zeroes unobserved pixels of `image`.
    pub fn apply(&self, image: &ImageGrid) -> Result<ImageGrid> {
        image.check_same_shape(self.shape())?;
        let pixels = image
            .pixels()
            .iter()
            .zip(&self.bits)
            .map(|(&v, &b)| if b { v } else { 0.0 })
            .collect();
        ImageGrid::new(self.height, self.width, pixels)
    }
}
