//! Adaptive non-convex weighted low-rank decomposition.
//!
//! Splits an observed matrix `Y` into a low-rank part `X` and a sparse part
//! `B` by solving
//!
//! ```text
//! min_{X,B}  sum_i phi(sigma_i(X)) + lambda * ||Omega . B||_1   s.t.  Y = X + B
//! ```
//!
//! with ADMM. `phi` is identity below 1, a concave quadratic on `(1, gamma]`
//! and flat above `gamma`, so large singular values are left untouched while
//! the tail is soft-thresholded. `gamma = (eta + alpha) * sigma_1(Y)` adapts
//! to the missing fraction `alpha` and the spectrum of the input.
//!
//! Entries with `Omega = 0` carry no `l1` cost, so `B` absorbs whatever the
//! low-rank estimate leaves there and `X` fills the holes.
//!
//! The same ADMM loop with a plain nuclear-norm proximal step is exposed as
//! [`nnm_complete`] for comparison.

use crate::error::{Error, Result};
use crate::image::MaskGrid;
use crate::linalg::{singular_values, soft_shrink, svd, Matrix};

/// Added on top of `1 + 1/mu0` when flooring `gamma`.
pub const GAMMA_FLOOR_MARGIN: f64 = 1e-6;

/// Initial penalty is `MU0_SCALE / sigma_1(Y)` unless configured.
pub const MU0_SCALE: f64 = 1.25;

/// ADMM parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Weight of the masked `l1` term.
    pub lambda: f64,
    /// Offset in `gamma = (eta + alpha) * sigma_1`.
    pub eta: f64,
    /// Growth factor of the penalty `mu` per iteration.
    pub rho: f64,
    /// Initial penalty; `None` picks `1.25 / sigma_1(Y)`.
    pub mu0: Option<f64>,
    /// Stop once `||Y - X - B||_F / ||Y||_F <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eta: 0.1,
            rho: 1.2,
            mu0: None,
            tol: 1e-7,
            max_iter: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!(
                "{what} is out of range: {v}"
            )))
        };
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda);
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", self.eta);
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad("rho", self.rho);
        }
        if !(self.tol > 0.0) {
            return bad("tol", self.tol);
        }
        if let Some(mu0) = self.mu0 {
            if !(mu0 > 0.0 && mu0.is_finite()) {
                return bad("mu0", mu0);
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    /// Initial penalty for an input with largest singular value `sigma1`.
    pub fn initial_mu(&self, sigma1: f64) -> f64 {
        match self.mu0 {
            Some(mu0) => mu0,
            None if sigma1 > 0.0 => MU0_SCALE / sigma1,
            None => MU0_SCALE,
        }
    }
}

/// The adaptive breakpoint of `phi` together with its inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaValue {
    pub gamma: f64,
    /// Fraction of unobserved entries.
    pub alpha: f64,
    /// Largest singular value of the observed matrix.
    pub sigma1: f64,
}

impl GammaValue {
    /// `max((eta + alpha) * sigma1, 1 + 1/mu0 + margin)`.
    ///
    /// The floor keeps `mu - 1/(gamma - 1) > 0` for every `mu >= mu0`, which
    /// the middle branch of the singular-value update divides by.
    pub fn new(sigma1: f64, alpha: f64, eta: f64, mu0: f64) -> Self {
        let floor = 1.0 + 1.0 / mu0 + GAMMA_FLOOR_MARGIN;
        Self {
            gamma: ((eta + alpha) * sigma1).max(floor),
            alpha,
            sigma1,
        }
    }
}

fn check_indicator(y: &Matrix, omega: &MaskGrid) -> Result<()> {
    if omega.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            expected: y.shape(),
            got: omega.shape(),
        });
    }
    Ok(())
}

/// Computes `gamma` from the observed matrix and its indicator.
pub fn gamma_from(y: &Matrix, omega: &MaskGrid, eta: f64, mu0: f64) -> Result<GammaValue> {
    check_indicator(y, omega)?;
    let sigma1 = if y.is_zero() {
        0.0
    } else {
        singular_values(y)?[0]
    };
    Ok(GammaValue::new(sigma1, omega.missing_fraction(), eta, mu0))
}

/// The adaptive penalty applied to one singular value.
pub fn phi(sigma: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "phi needs gamma > 1, got {gamma}"
        )));
    }
    if sigma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "phi is defined for nonnegative arguments, got {sigma}"
        )));
    }
    Ok(if sigma <= 1.0 {
        sigma
    } else if sigma <= gamma {
        (-sigma * sigma + 2.0 * gamma * sigma - 1.0) / (2.0 * (gamma - 1.0))
    } else {
        (gamma + 1.0) / 2.0
    })
}

fn check_shrink_params(mu: f64, gamma: f64) -> Result<()> {
    if !(mu > 0.0) || !(gamma > 1.0) || !(mu - 1.0 / (gamma - 1.0) > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "singular-value shrinkage needs mu > 1/(gamma - 1); got mu = {mu}, gamma = {gamma}"
        )));
    }
    Ok(())
}

/// Closed-form minimizer of `mu/2 (sigma - s)^2 + phi(sigma)` over `sigma >= 0`.
#[inline]
fn shrink_one(s: f64, mu: f64, gamma: f64) -> f64 {
    if s <= (mu + 1.0) / mu {
        ((mu * s - 1.0) / mu).max(0.0)
    } else if s < gamma {
        (mu * s - gamma / (gamma - 1.0)) / (mu - 1.0 / (gamma - 1.0))
    } else {
        s
    }
}

/// Applies the closed-form `phi`-proximal map to a nonincreasing spectrum.
pub fn shrink_singular_values(s: &[f64], mu: f64, gamma: f64) -> Result<Vec<f64>> {
    check_shrink_params(mu, gamma)?;
    Ok(s.iter().map(|&x| shrink_one(x, mu, gamma)).collect())
}

/// Result of a low-rank/sparse decomposition.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub low_rank: Matrix,
    pub sparse: Matrix,
    pub iterations: usize,
    pub converged: bool,
    /// `||Y - X - B||_F / ||Y||_F` after each iteration.
    pub residual_history: Vec<f64>,
    /// `||A||_F` of the multiplier after each iteration.
    pub multiplier_norm_history: Vec<f64>,
    /// `||X^(k+1) - X^(k)||_F` per iteration.
    pub low_rank_step_history: Vec<f64>,
    /// `||B^(k+1) - B^(k)||_F` per iteration.
    pub sparse_step_history: Vec<f64>,
    /// `None` for the nuclear-norm baseline and for the zero input.
    pub gamma: Option<GammaValue>,
}

impl Decomposition {
    fn zero(shape: (usize, usize), gamma: Option<GammaValue>) -> Self {
        Self {
            low_rank: Matrix::zeros(shape.0, shape.1),
            sparse: Matrix::zeros(shape.0, shape.1),
            iterations: 0,
            converged: true,
            residual_history: Vec::new(),
            multiplier_norm_history: Vec::new(),
            low_rank_step_history: Vec::new(),
            sparse_step_history: Vec::new(),
            gamma,
        }
    }

    /// Relative residual of the returned iterate (0 for the zero input).
    pub fn relative_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy)]
enum LowRankPenalty {
    Adaptive { gamma: f64 },
    Nuclear,
}

impl LowRankPenalty {
    fn shrink(self, s: &[f64], mu: f64) -> Result<Vec<f64>> {
        match self {
            Self::Adaptive { gamma } => shrink_singular_values(s, mu, gamma),
            Self::Nuclear => Ok(s.iter().map(|&x| soft_shrink(x, 1.0 / mu)).collect()),
        }
    }
}

struct Problem<'a> {
    y: &'a Matrix,
    omega: &'a MaskGrid,
    lambda: f64,
    sigma1: f64,
    mu0: f64,
    rho: f64,
    tol: f64,
    max_iter: usize,
    penalty: LowRankPenalty,
    gamma: Option<GammaValue>,
}

fn run_admm(p: Problem<'_>) -> Result<Decomposition> {
    let (m, n) = p.y.shape();
    let y = p.y.as_slice();
    let observed = p.omega.bits();
    let y_norm = p.y.frobenius_norm();

    let mut x = Matrix::zeros(m, n);
    let mut b = Matrix::zeros(m, n);
    let mut a = p.y.scaled(1.0 / p.sigma1);
    let mut d = Matrix::zeros(m, n);
    let mut mu = p.mu0;

    let mut out = Decomposition::zero((m, n), p.gamma);
    let mut best: Option<(f64, Matrix, Matrix)> = None;

    for k in 0..p.max_iter {
        // B-step: soft shrinkage on observed entries, pass-through elsewhere.
        let threshold = p.lambda / mu;
        let mut b_step = 0.0;
        {
            let (xs, as_) = (x.as_slice(), a.as_slice());
            let bs = b.as_mut_slice();
            let ds = d.as_mut_slice();
            for i in 0..m * n {
                let e = as_[i] / mu + y[i] - xs[i];
                let nb = if observed[i] {
                    soft_shrink(e, threshold)
                } else {
                    e
                };
                b_step += (nb - bs[i]) * (nb - bs[i]);
                bs[i] = nb;
                ds[i] = as_[i] / mu + y[i] - nb;
            }
        }

        // X-step: shrink the spectrum of D.
        let dec = svd(&d)?;
        let sigma = p.penalty.shrink(&dec.s, mu)?;
        let x_new = dec.reconstruct_with(&sigma);
        let x_step = x_new.distance(&x);
        x = x_new;

        // Multiplier step.
        let mut resid_sq = 0.0;
        {
            let (xs, bs) = (x.as_slice(), b.as_slice());
            for (i, ai) in a.as_mut_slice().iter_mut().enumerate() {
                let r = y[i] - bs[i] - xs[i];
                resid_sq += r * r;
                *ai += mu * r;
            }
        }
        let residual = resid_sq.sqrt() / y_norm;
        mu *= p.rho;

        out.iterations = k + 1;
        out.residual_history.push(residual);
        out.multiplier_norm_history.push(a.frobenius_norm());
        out.low_rank_step_history.push(x_step);
        out.sparse_step_history.push(b_step.sqrt());

        if residual <= p.tol {
            out.converged = true;
            out.low_rank = x;
            out.sparse = b;
            return Ok(out);
        }
        if best.as_ref().is_none_or(|(r, _, _)| residual < *r) {
            best = Some((residual, x.clone(), b.clone()));
        }
    }

    out.converged = false;
    if let Some((_, bx, bb)) = best {
        out.low_rank = bx;
        out.sparse = bb;
    }
    Ok(out)
}

/// Decomposes `y` into low-rank and sparse parts under indicator `omega`.
///
/// Non-convergence within `cfg.max_iter` is not an error: the iterate with
/// the smallest residual is returned with `converged == false`.
pub fn ncwlrd_decompose(y: &Matrix, omega: &MaskGrid, cfg: &SolverConfig) -> Result<Decomposition> {
    cfg.validate()?;
    check_indicator(y, omega)?;
    let sigma1 = if y.is_zero() {
        0.0
    } else {
        singular_values(y)?[0]
    };
    let mu0 = cfg.initial_mu(sigma1);
    let gamma = GammaValue::new(sigma1, omega.missing_fraction(), cfg.eta, mu0);
    if sigma1 == 0.0 {
        return Ok(Decomposition::zero(y.shape(), Some(gamma)));
    }
    run_admm(Problem {
        y,
        omega,
        lambda: cfg.lambda,
        sigma1,
        mu0,
        rho: cfg.rho,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        penalty: LowRankPenalty::Adaptive { gamma: gamma.gamma },
        gamma: Some(gamma),
    })
}

/// Nuclear-norm baseline: same ADMM loop, singular values soft-thresholded
/// at `1/mu`. `lambda` overrides `cfg.lambda`.
pub fn nnm_complete(
    y: &Matrix,
    omega: &MaskGrid,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<Decomposition> {
    let cfg = SolverConfig {
        lambda,
        ..cfg.clone()
    };
    cfg.validate()?;
    check_indicator(y, omega)?;
    let sigma1 = if y.is_zero() {
        0.0
    } else {
        singular_values(y)?[0]
    };
    if sigma1 == 0.0 {
        return Ok(Decomposition::zero(y.shape(), None));
    }
    run_admm(Problem {
        y,
        omega,
        lambda,
        sigma1,
        mu0: cfg.initial_mu(sigma1),
        rho: cfg.rho,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        penalty: LowRankPenalty::Nuclear,
        gamma: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use proptest::prelude::*;

    #[test]
    fn gamma_examples() {
        let g = GammaValue::new(10.0, 0.3, 0.1, 1.0);
        assert!((g.gamma - 4.0).abs() < 1e-12);
        let g = GammaValue::new(0.0, 0.0, 0.1, 1.0);
        assert_eq!(g.gamma, 2.0 + 1e-6);
        let g = GammaValue::new(100.0, 0.0, 0.1, 1.0);
        assert!((g.gamma - 10.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_from_counts_missing_entries() {
        let y = Matrix::diagonal(4, 5, &[10.0, 3.0]);
        let omega = MaskGrid::from_fn(4, 5, |r, c| !(r == 0 && c < 3 || r == 3 && c == 4));
        let g = gamma_from(&y, &omega, 0.1, 1.0).unwrap();
        assert!((g.alpha - 0.2).abs() < 1e-15);
        assert!((g.sigma1 - 10.0).abs() < 1e-12);
        assert!((g.gamma - 3.0).abs() < 1e-12);
        let zero = gamma_from(
            &Matrix::zeros(2, 2),
            &MaskGrid::all_observed(2, 2),
            0.1,
            1.0,
        )
        .unwrap();
        assert_eq!(zero.gamma, 2.0 + 1e-6);
        assert!(gamma_from(&y, &MaskGrid::all_observed(5, 4), 0.1, 1.0).is_err());
    }

    #[test]
    fn phi_branches_are_continuous() {
        assert_eq!(phi(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(phi(1.0, 3.0).unwrap(), 1.0);
        let middle_at_one = (-1.0 + 2.0 * 3.0 - 1.0) / (2.0 * 2.0);
        assert_eq!(middle_at_one, 1.0);
        assert_eq!(phi(3.0, 3.0).unwrap(), 2.0);
        assert_eq!(phi(3.0 + 1e-9, 3.0).unwrap(), 2.0);
        assert!(phi(1.0, 1.0).is_err());
        assert!(phi(1.0, 0.5).is_err());
    }

    #[test]
    fn shrink_examples() {
        let out = shrink_singular_values(&[4.0, 2.5, 0.5], 1.0, 3.0).unwrap();
        assert_eq!(out, vec![4.0, 2.0, 0.0]);
        // Boundaries: s = (mu+1)/mu goes to the first branch, s = gamma passes through.
        let out = shrink_singular_values(&[3.0, 2.0], 1.0, 3.0).unwrap();
        assert_eq!(out, vec![3.0, 1.0]);
        assert!(shrink_singular_values(&[1.0], 0.5, 3.0).is_err());
        assert!(shrink_singular_values(&[1.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_input_short_circuits() {
        let y = Matrix::zeros(6, 4);
        let omega = MaskGrid::from_fn(6, 4, |r, _| r % 2 == 0);
        let d = ncwlrd_decompose(&y, &omega, &SolverConfig::default()).unwrap();
        assert!(d.low_rank.is_zero() && d.sparse.is_zero());
        assert_eq!(d.iterations, 0);
        assert!(d.converged);
        let d = nnm_complete(&y, &omega, 1.0, &SolverConfig::default()).unwrap();
        assert!(d.low_rank.is_zero() && d.sparse.is_zero());
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let y = Matrix::identity(3);
        let omega = MaskGrid::all_observed(3, 3);
        for cfg in [
            SolverConfig {
                rho: 1.0,
                ..Default::default()
            },
            SolverConfig {
                lambda: 0.0,
                ..Default::default()
            },
            SolverConfig {
                eta: -1.0,
                ..Default::default()
            },
            SolverConfig {
                tol: 0.0,
                ..Default::default()
            },
            SolverConfig {
                mu0: Some(0.0),
                ..Default::default()
            },
        ] {
            assert!(matches!(
                ncwlrd_decompose(&y, &omega, &cfg),
                Err(Error::InvalidParameter(_))
            ));
        }
        let wrong = MaskGrid::all_observed(3, 4);
        assert!(matches!(
            ncwlrd_decompose(&y, &wrong, &SolverConfig::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn unobserved_entries_pass_through_after_first_step() {
        let l = synthetic::planted_low_rank(12, 10, 2, 3);
        let omega = synthetic::random_indicator(12, 10, 0.3, 4);
        let y = Matrix::from_fn(12, 10, |r, c| {
            if omega.is_observed(r, c) {
                l.get(r, c)
            } else {
                0.0
            }
        });
        let cfg = SolverConfig {
            max_iter: 1,
            ..Default::default()
        };
        let d = ncwlrd_decompose(&y, &omega, &cfg).unwrap();
        // First step from X = 0, A = Y / ||Y||_2: E = A/mu0 + Y.
        let sigma1 = singular_values(&y).unwrap()[0];
        let mu0 = MU0_SCALE / sigma1;
        for r in 0..12 {
            for c in 0..10 {
                let e = y.get(r, c) / sigma1 / mu0 + y.get(r, c);
                if !omega.is_observed(r, c) {
                    assert_eq!(d.sparse.get(r, c), e);
                } else {
                    assert_eq!(d.sparse.get(r, c), soft_shrink(e, 1.0 / mu0));
                }
            }
        }
    }

    #[test]
    fn max_iter_reports_not_converged() {
        let l = synthetic::planted_low_rank(20, 20, 2, 8);
        let omega = synthetic::random_indicator(20, 20, 0.2, 9);
        let cfg = SolverConfig {
            max_iter: 3,
            ..Default::default()
        };
        let d = ncwlrd_decompose(&l, &omega, &cfg).unwrap();
        assert!(!d.converged);
        assert_eq!(d.iterations, 3);
        let best = d
            .residual_history
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let returned = l.sub(&d.low_rank).sub(&d.sparse).frobenius_norm() / l.frobenius_norm();
        assert!((returned - best).abs() <= 1e-12 * (1.0 + best));
    }

    #[test]
    fn recovers_rank_one_with_twenty_percent_missing() {
        let l = synthetic::planted_low_rank(50, 50, 1, 21);
        let omega = synthetic::random_indicator(50, 50, 0.2, 22);
        let y = synthetic::observe(&l, &omega);
        let d = ncwlrd_decompose(&y, &omega, &SolverConfig::default()).unwrap();
        assert!(d.converged);
        let err = d.low_rank.distance(&l) / l.frobenius_norm();
        assert!(err <= 1e-3, "relative error {err}");
    }

    #[test]
    fn nnm_recovers_rank_one_with_ten_percent_missing() {
        let l = synthetic::planted_low_rank(50, 50, 1, 31);
        let omega = synthetic::random_indicator(50, 50, 0.1, 32);
        let y = synthetic::observe(&l, &omega);
        let d = nnm_complete(&y, &omega, 1.0, &SolverConfig::default()).unwrap();
        let err = d.low_rank.distance(&l) / l.frobenius_norm();
        assert!(err <= 1e-2, "relative error {err}");
    }

    #[test]
    fn sparse_part_captures_planted_spikes() {
        let l = synthetic::planted_low_rank(50, 50, 3, 41);
        let (y, spikes) = synthetic::with_spikes(&l, 0.05, 100.0, 42);
        let omega = MaskGrid::all_observed(50, 50);
        let cfg = SolverConfig {
            lambda: 1.0 / 50f64.sqrt(),
            ..Default::default()
        };
        let d = ncwlrd_decompose(&y, &omega, &cfg).unwrap();
        let hit = spikes
            .iter()
            .filter(|&&(r, c)| d.sparse.get(r, c).abs() > 1.0)
            .count();
        assert!(
            hit as f64 >= 0.95 * spikes.len() as f64,
            "{hit} of {} spikes found",
            spikes.len()
        );
    }

    /// Grid minimizer of `mu/2 (sigma - s)^2 + phi(sigma)`, step 1e-4.
    fn grid_argmin(s: f64, mu: f64, gamma: f64) -> f64 {
        let step = 1e-4;
        let steps = ((s.max(0.0) + 1e-3) / step).ceil() as usize;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..=steps {
            let sigma = j as f64 * step;
            let f = 0.5 * mu * (sigma - s) * (sigma - s) + phi(sigma, gamma).unwrap();
            if f < best.0 {
                best = (f, sigma);
            }
        }
        best.1
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_form_matches_grid_search(
            mu in 0.2f64..5.0,
            margin in 0.05f64..4.0,
            frac in 0.0f64..1.3,
        ) {
            let gamma = 1.0 + 1.0 / mu + margin;
            let s = frac * (gamma + 1.0);
            let closed = shrink_singular_values(&[s], mu, gamma).unwrap()[0];
            prop_assert!((closed - grid_argmin(s, mu, gamma)).abs() <= 1e-4);
        }

        #[test]
        fn shrink_preserves_order_and_sign(
            mut s in proptest::collection::vec(0f64..50.0, 1..20),
            mu in 0.05f64..10.0,
            margin in 1e-3f64..30.0,
        ) {
            s.sort_by(|a, b| b.total_cmp(a));
            let gamma = 1.0 + 1.0 / mu + margin;
            let out = shrink_singular_values(&s, mu, gamma).unwrap();
            prop_assert!(out.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(out.iter().all(|&x| x >= 0.0));
            prop_assert!(out.iter().zip(&s).all(|(o, i)| o <= i));
        }
    }
}
