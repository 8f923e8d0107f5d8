//! PSNR and SSIM on the 8-bit intensity scale.
//!
//! SSIM follows the usual Gaussian-window formulation: an 11x11 window with
//! sigma 1.5, `K1 = 0.01`, `K2 = 0.03`, dynamic range 255, averaged over all
//! fully interior window positions.

use super::ImageGrid;
use crate::error::{Error, Result};

const PEAK: f64 = 255.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub fn mse(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    a.check_same_shape(b.shape())?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.pixels().len() as f64)
}

/// `10 log10(255^2 / MSE)`; identical images give `f64::INFINITY`.
pub fn psnr(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / err).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *w = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= total);
    k
}

/// Separable "valid" filtering of a row-major buffer.
fn filter_valid(data: &[f64], height: usize, width: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (height - n + 1, width - n + 1);
    let mut horiz = vec![0.0; height * ow];
    for r in 0..height {
        let row = &data[r * width..(r + 1) * width];
        for c in 0..ow {
            horiz[r * ow + c] = row[c..c + n].iter().zip(k).map(|(x, w)| x * w).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|i| horiz[(r + i) * ow + c] * k[i]).sum();
        }
    }
    out
}

/// Mean structural similarity of two equally shaped images.
pub fn ssim(a: &ImageGrid, b: &ImageGrid) -> Result<f64> {
    a.check_same_shape(b.shape())?;
    let (h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::InvalidParameter(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let k = gaussian_kernel();
    let x = a.pixels();
    let y = b.pixels();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, h, w, &k);
    let mu_y = filter_valid(y, h, w, &k);
    let e_xx = filter_valid(&xx, h, w, &k);
    let e_yy = filter_valid(&yy, h, w, &k);
    let e_xy = filter_valid(&xy, h, w, &k);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let total: f64 = (0..mu_x.len())
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (var_x + var_y + c2))
        })
        .sum();
    Ok(total / mu_x.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct per-window SSIM with a 2-D Gaussian, no separable filtering.
    fn ssim_brute_force(a: &ImageGrid, b: &ImageGrid) -> f64 {
        let (h, w) = a.shape();
        let half = 5.0;
        let mut weights = [[0.0; 11]; 11];
        let mut total = 0.0;
        for (i, row) in weights.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - half, j as f64 - half);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                total += *v;
            }
        }
        let c1 = (0.01f64 * 255.0).powi(2);
        let c2 = (0.03f64 * 255.0).powi(2);
        let mut acc = 0.0;
        let mut count = 0;
        for r0 in 0..=h - 11 {
            for c0 in 0..=w - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for (i, row) in weights.iter().enumerate() {
                    for (j, &wt) in row.iter().enumerate() {
                        let wgt = wt / total;
                        mx += wgt * a.get(r0 + i, c0 + j);
                        my += wgt * b.get(r0 + i, c0 + j);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for (i, row) in weights.iter().enumerate() {
                    for (j, &wt) in row.iter().enumerate() {
                        let wgt = wt / total;
                        let dx = a.get(r0 + i, c0 + j) - mx;
                        let dy = b.get(r0 + i, c0 + j) - my;
                        vx += wgt * dx * dx;
                        vy += wgt * dy * dy;
                        cxy += wgt * dx * dy;
                    }
                }
                acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        acc / count as f64
    }

    fn checker(n: usize) -> ImageGrid {
        ImageGrid::from_fn(n, n, |r, c| {
            if (r / 2 + c / 3) % 2 == 0 {
                230.0
            } else {
                20.0
            }
        })
    }

    #[test]
    fn psnr_closed_forms() {
        let zero = ImageGrid::filled(8, 8, 0.0);
        let sixteen = ImageGrid::filled(8, 8, 16.0);
        let full = ImageGrid::filled(8, 8, 255.0);
        assert_eq!(psnr(&zero, &zero).unwrap(), f64::INFINITY);
        let expected = 10.0 * (65025.0f64 / 256.0).log10();
        assert!((psnr(&zero, &sixteen).unwrap() - expected).abs() < 1e-12);
        assert!((psnr(&zero, &sixteen).unwrap() - 24.048).abs() < 1e-3);
        assert!(psnr(&zero, &full).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ssim_constant_images() {
        let a = ImageGrid::filled(16, 16, 100.0);
        let b = ImageGrid::filled(16, 16, 120.0);
        let c1 = 6.5025;
        let expected = (2.0 * 100.0 * 120.0 + c1) / (100.0f64.powi(2) + 120.0f64.powi(2) + c1);
        let got = ssim(&a, &b).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.98361).abs() < 1e-4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_matches_brute_force_and_penalizes_inversion() {
        let a = checker(16);
        let inv = ImageGrid::from_fn(16, 16, |r, c| 255.0 - a.get(r, c));
        let fast = ssim(&a, &inv).unwrap();
        let slow = ssim_brute_force(&a, &inv);
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        assert!(fast < 0.5);
        let ramp = ImageGrid::from_fn(20, 17, |r, c| (r * 7 + c * 3) as f64);
        let noisy = ImageGrid::from_fn(20, 17, |r, c| ramp.get(r, c) + ((r * c) % 5) as f64);
        assert!((ssim(&ramp, &noisy).unwrap() - ssim_brute_force(&ramp, &noisy)).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_symmetric() {
        let a = checker(16);
        let b = ImageGrid::from_fn(16, 16, |r, c| a.get(r, c) * 0.8 + (r + c) as f64);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let a = checker(16);
        let mut last = f64::INFINITY;
        for amp in [1.0, 2.0, 5.0, 10.0, 40.0] {
            let b = ImageGrid::from_fn(16, 16, |r, c| {
                a.get(r, c)
                    + if (r * 31 + c * 17) % 2 == 0 {
                        amp
                    } else {
                        -amp
                    }
            });
            let p = psnr(&a, &b).unwrap();
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn metric_errors() {
        let a = ImageGrid::filled(8, 8, 1.0);
        let b = ImageGrid::filled(8, 9, 1.0);
        assert!(matches!(psnr(&a, &b), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(ssim(&a, &a), Err(Error::InvalidParameter(_))));
    }
}
