//! Seeded synthetic inputs: planted low-rank matrices, test textures and
//! corruption models. Used by tests, benches and the CLI demos.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{gen_mask, ImageGrid, MaskGrid, MaskRecipe};
use crate::linalg::Matrix;

/// `U V^T * 255 / rank` with `U`, `V` uniform on `[0, 1]`, so entries sit
/// roughly in `[0, 255]`.
pub fn planted_low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
    assert!(rank >= 1, "rank must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..rows * rank).map(|_| rng.random::<f64>()).collect();
    let v: Vec<f64> = (0..cols * rank).map(|_| rng.random::<f64>()).collect();
    let scale = 255.0 / rank as f64;
    Matrix::from_fn(rows, cols, |r, c| {
        scale
            * (0..rank)
                .map(|k| u[r * rank + k] * v[c * rank + k])
                .sum::<f64>()
    })
}

/// Indicator with exactly `floor(rate * rows * cols)` entries unobserved.
pub fn random_indicator(rows: usize, cols: usize, rate: f64, seed: u64) -> MaskGrid {
    gen_mask(&MaskRecipe::RandomPixels { rate, seed }, rows, cols)
        .expect("missing rate must lie in (0, 1)")
}

/// `L` with unobserved entries zeroed.
pub fn observe(l: &Matrix, omega: &MaskGrid) -> Matrix {
    Matrix::from_fn(l.rows(), l.cols(), |r, c| {
        if omega.is_observed(r, c) {
            l.get(r, c)
        } else {
            0.0
        }
    })
}

/// Adds `±magnitude` to a `fraction` of the entries; returns the spiked
/// matrix and the spike locations.
pub fn with_spikes(
    l: &Matrix,
    fraction: f64,
    magnitude: f64,
    seed: u64,
) -> (Matrix, Vec<(usize, usize)>) {
    let (rows, cols) = l.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = (fraction * (rows * cols) as f64).floor() as usize;
    let mut out = l.clone();
    let mut spots: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, rows * cols, count)
        .into_iter()
        .map(|i| (i / cols, i % cols))
        .collect();
    spots.sort_unstable();
    for &(r, c) in &spots {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        out.set(r, c, l.get(r, c) + sign * magnitude);
    }
    (out, spots)
}

/// `128 + 60 sin(2 pi x / 8) sin(2 pi y / 8)`.
pub fn sinusoid_product(height: usize, width: usize) -> ImageGrid {
    ImageGrid::from_fn(height, width, |y, x| {
        128.0 + 60.0 * (2.0 * PI * x as f64 / 8.0).sin() * (2.0 * PI * y as f64 / 8.0).sin()
    })
}

/// Exactly rank-4 smooth image with values in roughly `[40, 200]`.
pub fn rank_four_image(height: usize, width: usize) -> ImageGrid {
    let wave = |f: fn(f64) -> f64, i: usize, period: f64| f(2.0 * PI * i as f64 / period);
    let u = |i: usize| {
        [
            1.0,
            wave(f64::sin, i, 16.0),
            wave(f64::cos, i, 23.0),
            wave(f64::sin, i, 40.0),
        ]
    };
    let v = |j: usize| {
        [
            1.0,
            wave(f64::cos, j, 19.0),
            wave(f64::sin, j, 29.0),
            wave(f64::cos, j, 11.0),
        ]
    };
    let weights = [128.0, 40.0, 30.0, 20.0];
    ImageGrid::from_fn(height, width, |r, c| {
        let (ur, vc) = (u(r), v(c));
        (0..4).map(|k| weights[k] * ur[k] * vc[k]).sum()
    })
}

/// Sum of random plane waves plus a fine diagonal pattern. Full rank, with
/// no column- or row-constant component.
pub fn rich_texture(height: usize, width: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64)> = (0..8)
        .map(|_| {
            (
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let (h, w) = (height as f64, width as f64);
    ImageGrid::from_fn(height, width, |y, x| {
        let (yf, xf) = (y as f64, x as f64);
        let smooth: f64 = waves
            .iter()
            .map(|&(ky, kx, ph)| (2.0 * PI * (ky * yf / h + kx * xf / w) + ph).cos())
            .sum();
        128.0 + 18.0 * smooth + 20.0 * (2.0 * PI * (xf + yf) / 7.0).sin()
    })
}

/// Flat `128` background with random bright and dark rectangles (sides 3
/// to 10, offsets `±[20, 70]`) covering about `cover` of the area. A
/// rectangle is skipped if it would leave any row or column more than 45%
/// covered, so every row and column stays mostly background.
pub fn sparse_scene(height: usize, width: usize, cover: f64, seed: u64) -> ImageGrid {
    assert!(
        height > 10 && width > 10,
        "scene needs at least 11x11 pixels"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = ImageGrid::filled(height, width, 128.0);
    let mut hit = vec![false; height * width];
    let mut row_count = vec![0usize; height];
    let mut col_count = vec![0usize; width];
    let mut covered = 0usize;
    let target = (cover * (height * width) as f64) as usize;
    let (row_cap, col_cap) = (width * 45 / 100, height * 45 / 100);
    for _ in 0..100_000 {
        if covered >= target {
            break;
        }
        let h = rng.random_range(3..=10);
        let w = rng.random_range(3..=10);
        let y0 = rng.random_range(0..height - h);
        let x0 = rng.random_range(0..width - w);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let value = 128.0 + sign * rng.random_range(20.0..70.0);
        let mut rows = row_count.clone();
        let mut cols = col_count.clone();
        let mut fresh = 0;
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                if !hit[y * width + x] {
                    rows[y] += 1;
                    cols[x] += 1;
                    fresh += 1;
                }
            }
        }
        if rows.iter().any(|&n| n > row_cap) || cols.iter().any(|&n| n > col_cap) {
            continue;
        }
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                hit[y * width + x] = true;
                img.set(y, x, value);
            }
        }
        row_count = rows;
        col_count = cols;
        covered += fresh;
    }
    img
}

/// Replaces a `density` fraction of pixels by `0` or `255`; returns the
/// corrupted image and the corrupted flat indices, sorted.
pub fn salt_and_pepper(img: &ImageGrid, density: f64, seed: u64) -> (ImageGrid, Vec<usize>) {
    impulse(img, density, seed, |rng| {
        if rng.random::<bool>() {
            255.0
        } else {
            0.0
        }
    })
}

/// Replaces a `density` fraction of pixels by uniform values in `[0, 255]`.
pub fn random_valued_impulse(img: &ImageGrid, density: f64, seed: u64) -> (ImageGrid, Vec<usize>) {
    impulse(img, density, seed, |rng| rng.random_range(0.0..=255.0))
}

fn impulse(
    img: &ImageGrid,
    density: f64,
    seed: u64,
    mut value: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> (ImageGrid, Vec<usize>) {
    let n = img.pixels().len();
    let count = (density * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hit = rand::seq::index::sample(&mut rng, n, count).into_vec();
    hit.sort_unstable();
    let mut out = img.clone();
    for &i in &hit {
        out.pixels_mut()[i] = value(&mut rng);
    }
    (out, hit)
}

/// Column-constant offsets drawn uniformly from `[-amplitude, amplitude]`.
pub fn column_stripes(height: usize, width: usize, amplitude: f64, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<f64> = (0..width)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect();
    ImageGrid::from_fn(height, width, |_, c| offsets[c])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values;

    #[test]
    fn planted_matrix_has_requested_rank() {
        let l = planted_low_rank(30, 20, 3, 1);
        let s = singular_values(&l).unwrap();
        assert!(s[2] > 1e-6 * s[0]);
        assert!(s[3] < 1e-9 * s[0]);
    }

    #[test]
    fn rank_four_image_is_rank_four() {
        let img = rank_four_image(64, 64);
        let s = singular_values(&img.to_matrix()).unwrap();
        assert!(s[3] > 1e-3 * s[0]);
        assert!(s[4] < 1e-9 * s[0]);
        assert!(img.pixels().iter().all(|&v| (0.0..=255.0).contains(&v)));
    }

    #[test]
    fn impulses_hit_exact_count() {
        let img = ImageGrid::filled(10, 10, 100.0);
        let (noisy, hit) = salt_and_pepper(&img, 0.2, 3);
        assert_eq!(hit.len(), 20);
        for (i, &v) in noisy.pixels().iter().enumerate() {
            if hit.binary_search(&i).is_ok() {
                assert!(v == 0.0 || v == 255.0);
            } else {
                assert_eq!(v, 100.0);
            }
        }
    }

    #[test]
    fn scene_rows_and_columns_stay_mostly_flat() {
        let img = sparse_scene(64, 48, 0.2, 1);
        let flat = |v: f64| v == 128.0;
        let off = img.pixels().iter().filter(|&&v| !flat(v)).count();
        assert!(off as f64 >= 0.2 * (64 * 48) as f64);
        for r in 0..64 {
            assert!((0..48).filter(|&c| !flat(img.get(r, c))).count() <= 48 * 45 / 100);
        }
        for c in 0..48 {
            assert!((0..64).filter(|&r| !flat(img.get(r, c))).count() <= 64 * 45 / 100);
        }
    }

    #[test]
    fn stripes_are_column_constant() {
        let s = column_stripes(5, 7, 30.0, 2);
        for c in 0..7 {
            assert!(s.get(0, c).abs() <= 30.0);
            assert!((1..5).all(|r| s.get(r, c) == s.get(0, c)));
        }
    }

    #[test]
    fn spikes_are_planted_where_reported() {
        let l = planted_low_rank(10, 10, 1, 5);
        let (y, spots) = with_spikes(&l, 0.05, 100.0, 6);
        assert_eq!(spots.len(), 5);
        for &(r, c) in &spots {
            assert!(((y.get(r, c) - l.get(r, c)).abs() - 100.0).abs() < 1e-9);
        }
        assert_eq!(y.distance(&l), (5.0f64 * 100.0 * 100.0).sqrt());
    }
}
