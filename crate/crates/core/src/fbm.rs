//! Quadratic variation of fractional Brownian motion increments as a
//! second-chaos quadratic form, with its exact total-variation bound.
//!
//! For unit-variance stationary increments `X_k` with covariance `Σ_n`, the
//! statistic `(1/s) Σ_k (X_k² - 1)` has the law of `Σ_i λ_i (N_i² - 1)`
//! where `λ` are the eigenvalues of `Σ_n / s` and `N_i` are i.i.d. N(0,1).
//! Everything below is read off that spectrum.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian_algebra::Polynomial;
use crate::rng;
use crate::stein::{dkw_error, kolmogorov_distance, wasserstein_distance, DistanceReport};

/// Lag from which [`autocovariance`] switches to its power series, which
/// avoids the cancellation in the second difference of `r^{2H}`.
const SERIES_LAG: f64 = 50.0;

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Hurst parameter must lie in (0, 1), got {h}"
        )))
    }
}

/// Generalized binomial coefficient `C(a, k)`.
fn gen_binomial(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (a - j as f64) / (j + 1) as f64)
}

/// `ρ_H(r) = ½(|r+1|^{2H} - 2|r|^{2H} + |r-1|^{2H})`, the correlation of
/// fBm increments at lag `r`.
pub fn autocovariance(h: f64, r: f64) -> f64 {
    let r = r.abs();
    let a = 2.0 * h;
    if r < SERIES_LAG {
        return 0.5 * ((r + 1.0).powf(a) - 2.0 * r.powf(a) + (r - 1.0).abs().powf(a));
    }
    // r^{2H} Σ_{k>=1} C(2H, 2k) r^{-2k}
    let inv2 = 1.0 / (r * r);
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..=7 {
        term *= inv2;
        sum += gen_binomial(a, 2 * k) * term;
    }
    r.powf(a) * sum
}

/// Increments `B_{k+1} - B_k`, `k = 1..n`, of fBm with Hurst index `H`.
#[derive(Debug, Clone)]
pub struct FbmIncrementModel {
    hurst: f64,
    n: usize,
    rho: Vec<f64>,
    /// Eigenvalues of `Σ_n`, increasing.
    spectrum: Vec<f64>,
}

impl FbmIncrementModel {
    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `ρ_H(0), …, ρ_H(n-1)`.
    pub fn autocovariances(&self) -> &[f64] {
        &self.rho
    }

    /// The Toeplitz matrix `Σ_n[i, j] = ρ_H(i - j)`.
    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.rho[i.abs_diff(j)])
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum[0]
    }

    /// `tr(Σ_n²) = Σ_{i,j} ρ_H(i-j)²`, straight from the autocovariances.
    pub fn trace_of_square(&self) -> f64 {
        let n = self.n;
        self.rho[0] * self.rho[0] * n as f64
            + 2.0
                * (1..n)
                    .map(|r| (n - r) as f64 * self.rho[r] * self.rho[r])
                    .sum::<f64>()
    }
}

/// Assembles `Σ_n`, computes its spectrum with a dense symmetric eigensolver
/// and checks it is positive semidefinite up to `1e-8·n`.
pub fn build_model(h: f64, n: usize) -> Result<FbmIncrementModel> {
    check_hurst(h)?;
    if n < 2 {
        return Err(Error::Domain(format!(
            "horizon must be at least 2, got {n}"
        )));
    }
    let rho: Vec<f64> = (0..n).map(|r| autocovariance(h, r as f64)).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| rho[i.abs_diff(j)]);
    let mut spectrum: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    if spectrum.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver(format!(
            "non-finite eigenvalue for H = {h}, n = {n}"
        )));
    }
    spectrum.sort_by(f64::total_cmp);
    if spectrum[0] < -1e-8 * n as f64 {
        return Err(Error::Invariant(format!(
            "covariance not positive semidefinite: min eigenvalue {}",
            spectrum[0]
        )));
    }
    Ok(FbmIncrementModel {
        hurst: h,
        n,
        rho,
        spectrum,
    })
}

/// Truncation used when the Breuer-Major constant is needed implicitly.
pub const DEFAULT_TRUNCATION: usize = 100_000;

/// `σ_H² = 2 Σ_{r∈Z} ρ_H(r)²`, summed to `R` with the remainder estimated
/// from the large-lag expansion
/// `ρ_H(r) ≈ H(2H-1) r^{2H-2} (1 + (2H-2)(2H-3)/(12 r²))`.
/// Returns `σ_H`. The series diverges for `H ≥ 3/4`.
pub fn breuer_major_sigma(h: f64, truncation: usize) -> Result<f64> {
    check_hurst(h)?;
    if h >= 0.75 {
        return Err(Error::Domain(format!(
            "sum of squared autocovariances diverges for H >= 3/4 (got {h})"
        )));
    }
    if truncation < 1000 {
        return Err(Error::Domain(format!(
            "truncation must be at least 1000, got {truncation}"
        )));
    }
    let head: f64 = (1..=truncation)
        .map(|r| autocovariance(h, r as f64).powi(2))
        .sum();
    // ∫_{R+1/2}^∞ c² r^{2α} (1 + 2β/r²) dr, midpoint rule for the sum
    let c = h * (2.0 * h - 1.0);
    let alpha = 2.0 * h - 2.0;
    let beta = (2.0 * h - 2.0) * (2.0 * h - 3.0) / 12.0;
    let a = truncation as f64 + 0.5;
    let tail = c
        * c
        * (a.powf(2.0 * alpha + 1.0) / (-2.0 * alpha - 1.0)
            + 2.0 * beta * a.powf(2.0 * alpha - 1.0) / (1.0 - 2.0 * alpha));
    Ok((2.0 * (1.0 + 2.0 * (head + tail))).sqrt())
}

/// The normalized quadratic variation and its exact second-chaos data.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticVariationStatistic {
    pub hurst: f64,
    pub n: usize,
    /// `σ_H`, or the fitted `σ_{3/4}` at `H = 3/4`.
    pub sigma: f64,
    /// `σ√n`, or `σ√(n log n)` at `H = 3/4`.
    pub normalization: f64,
    /// Eigenvalues of `Σ_n / normalization`.
    pub eigenvalues: Vec<f64>,
    /// `2 Σ λ_i²`.
    pub variance: f64,
    /// `48 Σ λ_i⁴`.
    pub fourth_cumulant: f64,
    /// `2 √(8 Σ λ̂_i⁴)` for the eigenvalues rescaled to unit variance.
    pub tv_bound: f64,
}

impl QuadraticVariationStatistic {
    /// Eigenvalues after rescaling to exact unit variance.
    pub fn unit_variance_eigenvalues(&self) -> Vec<f64> {
        let s = self.variance.sqrt();
        self.eigenvalues.iter().map(|l| l / s).collect()
    }

    /// `E F⁴ = κ₄ + 3 (E F²)²` before rescaling.
    pub fn fourth_moment(&self) -> f64 {
        self.fourth_cumulant + 3.0 * self.variance * self.variance
    }
}

fn statistic_from_model(model: &FbmIncrementModel) -> Result<QuadraticVariationStatistic> {
    let h = model.hurst;
    let n = model.n as f64;
    if h > 0.75 {
        return Err(Error::Domain(format!(
            "the quadratic variation has a non-Gaussian limit for H > 3/4 (got {h})"
        )));
    }
    let (sigma, normalization) = if h == 0.75 {
        // σ_{3/4}² matched to the exact variance 2 tr(Σ_n²) / (n log n)
        let s2 = 2.0 * model.trace_of_square() / (n * n.ln());
        (s2.sqrt(), (s2 * n * n.ln()).sqrt())
    } else {
        let s = breuer_major_sigma(h, DEFAULT_TRUNCATION)?;
        (s, s * n.sqrt())
    };
    let eigenvalues: Vec<f64> = model.spectrum.iter().map(|m| m / normalization).collect();
    let sum2: f64 = eigenvalues.iter().map(|l| l * l).sum();
    let sum4: f64 = eigenvalues.iter().map(|l| l.powi(4)).sum();
    let m2: f64 = model.spectrum.iter().map(|m| m * m).sum();
    let m4: f64 = model.spectrum.iter().map(|m| m.powi(4)).sum();
    Ok(QuadraticVariationStatistic {
        hurst: h,
        n: model.n,
        sigma,
        normalization,
        eigenvalues,
        variance: 2.0 * sum2,
        fourth_cumulant: 48.0 * sum4,
        // scale free: Σλ̂⁴ = Σμ⁴ / (4 (Σμ²)²)
        tv_bound: 2.0 * (2.0 * m4).sqrt() / m2,
    })
}

/// Exact `d_TV` bound for the unit-variance quadratic variation at `(H, n)`,
/// `H ∈ (0, 3/4]`.
pub fn exact_tv_bound(h: f64, n: usize) -> Result<QuadraticVariationStatistic> {
    if h > 0.75 {
        return Err(Error::Domain(format!("H must be at most 3/4, got {h}")));
    }
    statistic_from_model(&build_model(h, n)?)
}

/// Same as [`exact_tv_bound`] for an already assembled model.
pub fn statistic(model: &FbmIncrementModel) -> Result<QuadraticVariationStatistic> {
    statistic_from_model(model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual of the fit.
    pub residual: f64,
}

/// Fits `log tv = slope·log n + intercept`, or at `H = 3/4` the line
/// `tv = slope / log n` through the origin.
pub fn fit_rate(h: f64, points: &[(usize, f64)]) -> Result<RateFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientGrid(format!(
            "need at least 5 grid points, got {}",
            points.len()
        )));
    }
    let ratio = points[1].0 as f64 / points[0].0 as f64;
    let geometric = ratio > 1.0
        && points
            .windows(2)
            .all(|w| ((w[1].0 as f64 / w[0].0 as f64) / ratio - 1.0).abs() < 1e-9);
    if !geometric {
        return Err(Error::InsufficientGrid(
            "grid must be increasing and geometric".into(),
        ));
    }
    if points.iter().any(|&(_, tv)| tv <= 0.0 || !tv.is_finite()) {
        return Err(Error::Domain(
            "bounds must be positive to fit a rate".into(),
        ));
    }
    let m = points.len() as f64;
    if h == 0.75 {
        let xs: Vec<f64> = points.iter().map(|&(n, _)| 1.0 / (n as f64).ln()).collect();
        let sxy: f64 = xs.iter().zip(points).map(|(x, p)| x * p.1).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let slope = sxy / sxx;
        let rss: f64 = xs
            .iter()
            .zip(points)
            .map(|(x, p)| (p.1 - slope * x).powi(2))
            .sum();
        return Ok(RateFit {
            slope,
            intercept: 0.0,
            residual: (rss / m).sqrt(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, tv)| tv.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept,
        residual: (rss / m).sqrt(),
    })
}

/// Computes the exact bound on every grid point and fits its rate.
pub fn rate_regression(h: f64, n_grid: &[usize]) -> Result<RateFit> {
    if n_grid.len() < 5 {
        return Err(Error::InsufficientGrid(format!(
            "need at least 5 grid points, got {}",
            n_grid.len()
        )));
    }
    let points = n_grid
        .iter()
        .map(|&n| Ok((n, exact_tv_bound(h, n)?.tv_bound)))
        .collect::<Result<Vec<_>>>()?;
    fit_rate(h, &points)
}

/// `samples` draws of the unit-variance statistic `Σ_i λ̂_i (N_i² - 1)`.
pub fn sample_statistic(
    stat: &QuadraticVariationStatistic,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if samples == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let lambda = stat.unit_variance_eigenvalues();
    Ok(rng::chunked(samples, seed, |rng, _, count| {
        (0..count)
            .map(|_| {
                lambda
                    .iter()
                    .map(|l| {
                        let z: f64 = StandardNormal.sample(rng);
                        l * (z * z - 1.0)
                    })
                    .sum()
            })
            .collect()
    }))
}

/// Empirical distances of the unit-variance statistic to N(0,1), reported
/// next to the exact TV bound.
pub fn monte_carlo_distance(h: f64, n: usize, samples: usize, seed: u64) -> Result<DistanceReport> {
    let stat = exact_tv_bound(h, n)?;
    distance_for(&stat, samples, seed)
}

/// Same as [`monte_carlo_distance`] for an already computed statistic.
pub fn distance_for(
    stat: &QuadraticVariationStatistic,
    samples: usize,
    seed: u64,
) -> Result<DistanceReport> {
    let draws = sample_statistic(stat, samples, seed)?;
    Ok(DistanceReport {
        kolmogorov: kolmogorov_distance(&draws)?,
        wasserstein: wasserstein_distance(&draws)?,
        tv_upper_bound: stat.tv_bound,
        monte_carlo_error: dkw_error(samples),
        sample_size: samples,
    })
}

/// `(1/s) Σ_k (X_k² - 1)` written as a polynomial in i.i.d. coordinates
/// `N`, with `X = Σ_n^{1/2} N` through the symmetric square root. Meant for
/// small `n`.
pub fn explicit_quadratic_form(
    model: &FbmIncrementModel,
    normalization: f64,
) -> Result<Polynomial> {
    let n = model.n;
    let eig = SymmetricEigen::try_new(model.covariance(), 1e-14, 10_000)
        .ok_or_else(|| Error::Eigensolver(format!("no convergence at n = {n}")))?;
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
    let mut out = Polynomial::constant(n, -(n as f64) / normalization);
    for k in 0..n {
        let mut xk = Polynomial::zero(n);
        for j in 0..n {
            xk = &xk + &(&Polynomial::variable(n, j) * root[(k, j)]);
        }
        out = &out + &(&xk.mul(&xk)? * (1.0 / normalization));
    }
    Ok(out.pruned(1e-15))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_algebra::gaussian_expectation;

    #[test]
    fn autocovariance_examples() {
        assert_eq!(autocovariance(0.3, 0.0), 1.0);
        for r in 1..200 {
            assert_eq!(autocovariance(0.5, r as f64), 0.0);
        }
        assert!((autocovariance(0.75, 1.0) - 0.5 * (2f64.powf(1.5) - 2.0)).abs() < 1e-15);
        assert!(autocovariance(0.1, 1000.0) < 0.0);
        // series and direct forms agree where both are accurate
        for &h in &[0.1, 0.55, 0.7, 0.75] {
            let direct = |r: f64| {
                0.5 * ((r + 1.0).powf(2.0 * h) - 2.0 * r.powf(2.0 * h) + (r - 1.0).powf(2.0 * h))
            };
            let r = 60.0;
            assert!((autocovariance(h, r) - direct(r)).abs() < 1e-12);
        }
    }

    #[test]
    fn model_examples() {
        let m = build_model(0.5, 16).unwrap();
        assert_eq!(m.covariance(), DMatrix::identity(16, 16));
        assert!(build_model(1.0, 8).is_err());
        assert!(build_model(0.5, 1).is_err());
        let m = build_model(0.7, 40).unwrap();
        let direct: f64 = m.spectrum().iter().map(|v| v * v).sum();
        assert!((direct - m.trace_of_square()).abs() < 1e-9 * direct);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(breuer_major_sigma(0.5, 1000).unwrap(), 2f64.sqrt());
        let a = breuer_major_sigma(0.55, 1000).unwrap();
        let b = breuer_major_sigma(0.55, 2000).unwrap();
        assert!(((a - b) / b).abs() < 1e-6);
        let a = breuer_major_sigma(0.7, 10_000).unwrap();
        let b = breuer_major_sigma(0.7, 20_000).unwrap();
        assert!(((a * a - b * b) / (b * b)).abs() < 1e-6);
        assert!(breuer_major_sigma(0.75, 1000).is_err());
        assert!(breuer_major_sigma(0.6, 10).is_err());
    }

    #[test]
    fn closed_form_at_half() {
        for &n in &[8usize, 128, 256] {
            let s = exact_tv_bound(0.5, n).unwrap();
            assert!((s.tv_bound - 2.0 * (2.0 / n as f64).sqrt()).abs() < 1e-12);
            assert!((s.variance - 1.0).abs() < 1e-12);
        }
        let a = exact_tv_bound(0.5, 64).unwrap().tv_bound;
        let b = exact_tv_bound(0.5, 128).unwrap().tv_bound;
        assert!((b / a - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn explicit_form_matches_spectrum() {
        for &h in &[0.3, 0.5, 0.7, 0.75] {
            for n in 2..=5 {
                let model = build_model(h, n).unwrap();
                let stat = statistic(&model).unwrap();
                let poly = explicit_quadratic_form(&model, stat.normalization).unwrap();
                let m2 = gaussian_expectation(&poly.pow(2).unwrap()).unwrap();
                let m4 = gaussian_expectation(&poly.pow(4).unwrap()).unwrap();
                assert!((m2 - stat.variance).abs() < 1e-8, "H={h} n={n}");
                assert!((m4 - stat.fourth_moment()).abs() < 1e-8, "H={h} n={n}");
            }
        }
    }

    #[test]
    fn fit_rejects_short_or_irregular_grids() {
        let pts: Vec<(usize, f64)> = [8, 16, 32, 64]
            .iter()
            .map(|&n| (n, 1.0 / n as f64))
            .collect();
        assert!(matches!(
            fit_rate(0.5, &pts),
            Err(Error::InsufficientGrid(_))
        ));
        let pts: Vec<(usize, f64)> = [8, 16, 32, 64, 100]
            .iter()
            .map(|&n| (n, 1.0 / n as f64))
            .collect();
        assert!(matches!(
            fit_rate(0.5, &pts),
            Err(Error::InsufficientGrid(_))
        ));
        let pts: Vec<(usize, f64)> = [8, 16, 32, 64, 128]
            .iter()
            .map(|&n| (n, 3.0 / (n as f64).sqrt()))
            .collect();
        let fit = fit_rate(0.5, &pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12 && fit.residual < 1e-12);
    }

    #[test]
    fn sampling_is_reproducible() {
        let stat = exact_tv_bound(0.7, 32).unwrap();
        let a = sample_statistic(&stat, 5000, 7).unwrap();
        let b = sample_statistic(&stat, 5000, 7).unwrap();
        assert_eq!(a, b);
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 0.1);
    }
}
