//! Stein's method for normal approximation in one dimension: the bounded
//! solution of `f'(w) - w f(w) = h(w) - E[h(Z)]`, the classical sup-norm
//! bounds on it, and empirical/analytic distances to N(0,1).

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::gaussian_algebra::{gaussian_expectation, Polynomial};
use crate::malliavin::stein_kernel_term;
use crate::quadrature::integrate;
use crate::wiener_chaos::{second_moment, ChaosElement};

/// Absolute tolerance for every quadrature in this module.
const QUAD_TOL: f64 = 1e-13;
/// `∫_0^S` stands in for `∫_0^∞` in the solution formula; `e^{-S²/2} ≈ 5e-32`.
const TAIL_CUTOFF: f64 = 12.0;
/// Half-width of the window used for `E[h(Z)]`.
const GAUSS_WINDOW: f64 = 14.0;
/// Slack on every certified inequality.
pub const BOUND_SLACK: f64 = 1e-6;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionClass {
    Bounded,
    AbsolutelyContinuous,
    Indicator,
}

impl fmt::Display for FunctionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FunctionClass::Bounded => "bounded",
            FunctionClass::AbsolutelyContinuous => "absolutely-continuous",
            FunctionClass::Indicator => "indicator",
        })
    }
}

/// A test function `h` together with its declared class.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    class: FunctionClass,
    h: RealFn,
    dh: Option<RealFn>,
    jumps: Vec<f64>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("class", &self.class)
            .field("jumps", &self.jumps)
            .finish()
    }
}

impl TestFunction {
    /// A bounded measurable `h`; `jumps` lists its discontinuities.
    pub fn bounded(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        jumps: Vec<f64>,
    ) -> Self {
        Self {
            name: name.into(),
            class: FunctionClass::Bounded,
            h: Arc::new(h),
            dh: None,
            jumps,
        }
    }

    /// An absolutely continuous `h` with bounded a.e. derivative `dh`. Kinks
    /// of `h` may be listed in `kinks` to help the quadrature.
    pub fn absolutely_continuous(
        name: impl Into<String>,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dh: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kinks: Vec<f64>,
    ) -> Self {
        Self {
            name: name.into(),
            class: FunctionClass::AbsolutelyContinuous,
            h: Arc::new(h),
            dh: Some(Arc::new(dh)),
            jumps: kinks,
        }
    }

    /// `1_{(-∞, x]}`.
    pub fn indicator(x: f64) -> Self {
        Self {
            name: format!("1(-inf,{x}]"),
            class: FunctionClass::Indicator,
            h: Arc::new(move |t| if t <= x { 1.0 } else { 0.0 }),
            dh: None,
            jumps: vec![x],
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn class(&self) -> FunctionClass {
        self.class
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.h)(t)
    }

    pub fn derivative(&self, t: f64) -> Option<f64> {
        self.dh.as_ref().map(|d| d(t))
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// `E[h(Z)]` by quadrature against the Gaussian density.
    pub fn gaussian_mean(&self) -> Result<f64> {
        integrate(
            |t| self.eval(t) * normal_pdf(t),
            -GAUSS_WINDOW,
            GAUSS_WINDOW,
            &self.jumps,
            QUAD_TOL,
        )
    }
}

/// The bounded solution `f_h` of the Stein equation for a fixed `h`.
#[derive(Debug, Clone)]
pub struct SteinSolution {
    h: TestFunction,
    mean: f64,
}

impl SteinSolution {
    pub fn new(h: TestFunction) -> Result<Self> {
        let mean = h.gaussian_mean()?;
        Ok(Self { h, mean })
    }

    pub fn test_function(&self) -> &TestFunction {
        &self.h
    }

    /// Cached `E[h(Z)]`.
    pub fn gaussian_mean(&self) -> f64 {
        self.mean
    }

    /// `f_h(w) = e^{w²/2} ∫_{-∞}^w (h(t) - E h(Z)) e^{-t²/2} dt`.
    ///
    /// Substituting `t = w ∓ s` folds the `e^{w²/2}` factor into the integrand,
    /// `e^{(w² - t²)/2} = e^{±ws - s²/2}`, so nothing overflows. For `w > 0` the
    /// equivalent upper-tail form `-∫_w^∞` is used.
    pub fn value(&self, w: f64) -> Result<f64> {
        let g = |t: f64| self.h.eval(t) - self.mean;
        let breaks: Vec<f64> = self.h.jumps.iter().map(|&x| (w - x).abs()).collect();
        if w <= 0.0 {
            integrate(
                |s| g(w - s) * (w * s - 0.5 * s * s).exp(),
                0.0,
                TAIL_CUTOFF,
                &breaks,
                QUAD_TOL,
            )
        } else {
            integrate(
                |s| -g(w + s) * (-w * s - 0.5 * s * s).exp(),
                0.0,
                TAIL_CUTOFF,
                &breaks,
                QUAD_TOL,
            )
        }
    }

    /// `f_h'(w)`, read off the equation. At a jump of `h` this is the value
    /// for `h(w)` as defined there.
    pub fn derivative(&self, w: f64) -> Result<f64> {
        Ok(w * self.value(w)? + self.h.eval(w) - self.mean)
    }

    /// `f_h''(w) = f_h + w f_h' + h'(w)`, available when `h` is absolutely
    /// continuous.
    pub fn second_derivative(&self, w: f64) -> Result<Option<f64>> {
        let Some(dh) = self.h.derivative(w) else {
            return Ok(None);
        };
        let f = self.value(w)?;
        let fp = w * f + self.h.eval(w) - self.mean;
        Ok(Some(f + w * fp + dh))
    }

    /// `f'(w) - w f(w) - h(w) + E h(Z)` with `f'` taken by a five-point
    /// finite difference of [`Self::value`], so the check does not reuse the
    /// equation. Meaningful only away from jumps of `h`.
    pub fn residual(&self, w: f64) -> Result<f64> {
        let step = 1e-3;
        let f = |x: f64| self.value(x);
        let fd = (-f(w + 2.0 * step)? + 8.0 * f(w + step)? - 8.0 * f(w - step)?
            + f(w - 2.0 * step)?)
            / (12.0 * step);
        Ok(fd - w * f(w)? - self.h.eval(w) + self.mean)
    }
}

/// `f_h(w)`.
pub fn solve_stein(h: &TestFunction, w: f64) -> Result<f64> {
    SteinSolution::new(h.clone())?.value(w)
}

/// One certified inequality `observed <= bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub observed: f64,
    pub bound: f64,
}

impl BoundCheck {
    pub fn margin(&self) -> f64 {
        self.bound - self.observed
    }

    pub fn holds(&self) -> bool {
        self.observed <= self.bound + BOUND_SLACK
    }
}

#[derive(Debug, Clone)]
pub struct BoundCertificate {
    pub function: String,
    pub class: FunctionClass,
    pub checks: Vec<BoundCheck>,
}

impl BoundCertificate {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(BoundCheck::holds)
    }

    pub fn min_margin(&self) -> f64 {
        self.checks
            .iter()
            .map(BoundCheck::margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Turns a violated certificate into an error listing the failures.
    pub fn into_result(self) -> Result<Self> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.holds())
            .map(|c| format!("{}: {} > {}", c.name, c.observed, c.bound))
            .collect();
        if failed.is_empty() {
            Ok(self)
        } else {
            Err(Error::Invariant(format!(
                "Stein solution bounds violated for {}: {}",
                self.function,
                failed.join("; ")
            )))
        }
    }
}

/// Grid used by [`verify_solution_bounds`].
pub const CERTIFICATE_GRID: (f64, f64, usize) = (-10.0, 10.0, 2001);

fn sup_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| m.max(v.abs()))
}

/// Evaluates `f_h`, `f_h'` (and `f_h''` for absolutely continuous `h`) on a
/// grid over `[-10, 10]` and checks the sup-norm bounds for the class of `h`.
/// Norms of `h` and `h'` are taken on a finer grid over `[-20, 20]`.
pub fn verify_solution_bounds(h: &TestFunction) -> Result<BoundCertificate> {
    let sol = SteinSolution::new(h.clone())?;
    let (lo, hi, n) = CERTIFICATE_GRID;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let fine = || (0..=400_000).map(|i| -20.0 + 1e-4 * i as f64);

    let mut f = Vec::with_capacity(n);
    let mut fp = Vec::with_capacity(n);
    for &w in &grid {
        let v = sol.value(w)?;
        f.push(v);
        fp.push(w * v + h.eval(w) - sol.mean);
    }
    let sup_f = sup_abs(f.iter().copied());
    let sup_fp = sup_abs(fp.iter().copied());

    let mut checks = Vec::new();
    match h.class {
        FunctionClass::Bounded => {
            let sup_h = sup_abs(fine().map(|t| h.eval(t)));
            checks.push(BoundCheck {
                name: "|f_h|_inf <= sqrt(2 pi) |h|_inf",
                observed: sup_f,
                bound: (2.0 * PI).sqrt() * sup_h,
            });
            checks.push(BoundCheck {
                name: "|f_h'|_inf <= 4 |h|_inf",
                observed: sup_fp,
                bound: 4.0 * sup_h,
            });
        }
        FunctionClass::AbsolutelyContinuous => {
            let sup_dh = sup_abs(fine().map(|t| h.derivative(t).unwrap_or(0.0)));
            let mut sup_fpp = 0.0f64;
            for (i, &w) in grid.iter().enumerate() {
                let fpp = f[i] + w * fp[i] + h.derivative(w).unwrap_or(0.0);
                sup_fpp = sup_fpp.max(fpp.abs());
            }
            checks.push(BoundCheck {
                name: "|f_h|_inf <= 2 |h'|_inf",
                observed: sup_f,
                bound: 2.0 * sup_dh,
            });
            checks.push(BoundCheck {
                name: "|f_h'|_inf <= sqrt(2/pi) |h'|_inf",
                observed: sup_fp,
                bound: (2.0 / PI).sqrt() * sup_dh,
            });
            checks.push(BoundCheck {
                name: "|f_h''|_inf <= 2 |h'|_inf",
                observed: sup_fpp,
                bound: 2.0 * sup_dh,
            });
        }
        FunctionClass::Indicator => {
            let min_f = f.iter().copied().fold(f64::INFINITY, f64::min);
            let max_f = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sup_wf = sup_abs(grid.iter().zip(&f).map(|(w, v)| w * v));
            let off_jump: Vec<f64> = grid
                .iter()
                .zip(&fp)
                .filter(|(w, _)| h.jumps.iter().all(|x| (*w - x).abs() > 1e-9))
                .map(|(_, d)| *d)
                .collect();
            let spread = off_jump.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - off_jump.iter().copied().fold(f64::INFINITY, f64::min);
            checks.push(BoundCheck {
                name: "0 <= f_h",
                observed: -min_f,
                bound: 0.0,
            });
            checks.push(BoundCheck {
                name: "f_h <= sqrt(2 pi)/4",
                observed: max_f,
                bound: (2.0 * PI).sqrt() / 4.0,
            });
            checks.push(BoundCheck {
                name: "|w f_h(w)| <= 1",
                observed: sup_wf,
                bound: 1.0,
            });
            checks.push(BoundCheck {
                name: "|f_h'| <= 1",
                observed: sup_fp,
                bound: 1.0,
            });
            checks.push(BoundCheck {
                name: "|f_h'(w) - f_h'(v)| <= 1",
                observed: spread,
                bound: 1.0,
            });
        }
    }
    Ok(BoundCertificate {
        function: h.name.clone(),
        class: h.class,
        checks,
    })
}

/// Ten test functions per class, used by the certificate suite.
pub fn shipped_family(class: FunctionClass) -> Vec<TestFunction> {
    use FunctionClass::*;
    match class {
        Bounded => vec![
            TestFunction::bounded(
                "sign",
                |t: f64| {
                    if t > 0.0 {
                        1.0
                    } else if t < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                },
                vec![0.0],
            ),
            TestFunction::bounded("cos", f64::cos, vec![]),
            TestFunction::bounded("sin(3t)", |t: f64| (3.0 * t).sin(), vec![]),
            TestFunction::bounded("tanh(2t)", |t: f64| (2.0 * t).tanh(), vec![]),
            TestFunction::bounded(
                "1[-1,1]",
                |t: f64| if t.abs() <= 1.0 { 1.0 } else { 0.0 },
                vec![-1.0, 1.0],
            ),
            TestFunction::bounded(
                "2*1(t>0.5)-1",
                |t: f64| if t > 0.5 { 1.0 } else { -1.0 },
                vec![0.5],
            ),
            TestFunction::bounded("exp(-t^2)", |t: f64| (-t * t).exp(), vec![]),
            TestFunction::bounded("1/(1+t^2)", |t: f64| 1.0 / (1.0 + t * t), vec![]),
            TestFunction::bounded(
                "sign(t)exp(-|t|)",
                |t: f64| t.signum() * (-t.abs()).exp() * (t != 0.0) as u8 as f64,
                vec![0.0],
            ),
            TestFunction::bounded(
                "0.5sin(t)+0.5cos(5t)",
                |t: f64| 0.5 * t.sin() + 0.5 * (5.0 * t).cos(),
                vec![],
            ),
        ],
        AbsolutelyContinuous => vec![
            TestFunction::absolutely_continuous("sin", f64::sin, f64::cos, vec![]),
            TestFunction::absolutely_continuous(
                "cos(2t)",
                |t: f64| (2.0 * t).cos(),
                |t: f64| -2.0 * (2.0 * t).sin(),
                vec![],
            ),
            TestFunction::absolutely_continuous("t", |t| t, |_| 1.0, vec![]),
            TestFunction::absolutely_continuous(
                "|t|",
                f64::abs,
                |t: f64| if t >= 0.0 { 1.0 } else { -1.0 },
                vec![0.0],
            ),
            TestFunction::absolutely_continuous(
                "tanh",
                f64::tanh,
                |t: f64| 1.0 - t.tanh().powi(2),
                vec![],
            ),
            TestFunction::absolutely_continuous(
                "atan",
                f64::atan,
                |t: f64| 1.0 / (1.0 + t * t),
                vec![],
            ),
            TestFunction::absolutely_continuous(
                "sqrt(1+t^2)",
                |t: f64| (1.0 + t * t).sqrt(),
                |t: f64| t / (1.0 + t * t).sqrt(),
                vec![],
            ),
            TestFunction::absolutely_continuous(
                "softplus",
                |t: f64| if t > 30.0 { t } else { t.exp().ln_1p() },
                |t: f64| 1.0 / (1.0 + (-t).exp()),
                vec![],
            ),
            TestFunction::absolutely_continuous(
                "max(t,0)",
                |t: f64| t.max(0.0),
                |t: f64| if t >= 0.0 { 1.0 } else { 0.0 },
                vec![0.0],
            ),
            TestFunction::absolutely_continuous(
                "0.5sin(2t)+0.3t",
                |t: f64| 0.5 * (2.0 * t).sin() + 0.3 * t,
                |t: f64| (2.0 * t).cos() + 0.3,
                vec![],
            ),
        ],
        Indicator => [-3.0, -2.0, -1.3, -0.5, 0.0, 0.25, 0.8, 1.3, 2.0, 3.0]
            .into_iter()
            .map(TestFunction::indicator)
            .collect(),
    }
}

/// `sup_x |F_n(x) - Φ(x)|` for the empirical CDF of `samples`.
pub fn kolmogorov_distance(samples: &[f64]) -> Result<f64> {
    Ok(kolmogorov_witness(samples)?.0)
}

/// Kolmogorov distance together with the sample point where it is attained.
fn kolmogorov_witness(samples: &[f64]) -> Result<(f64, f64)> {
    let sorted = sorted_samples(samples)?;
    let n = sorted.len() as f64;
    let mut best = (0.0, sorted[0]);
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let phi = normal_cdf(x);
        let d = (j as f64 / n - phi).abs().max((i as f64 / n - phi).abs());
        if d > best.0 {
            best = (d, x);
        }
        i = j;
    }
    Ok(best)
}

fn sorted_samples(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Step of the trapezoidal grid used by [`wasserstein_distance`].
pub const WASSERSTEIN_STEP: f64 = 1e-3;

/// `∫ |F_n(x) - Φ(x)| dx` by the trapezoidal rule on a uniform grid covering
/// `[-10, 10]` and the sample range.
pub fn wasserstein_distance(samples: &[f64]) -> Result<f64> {
    let sorted = sorted_samples(samples)?;
    let n = sorted.len() as f64;
    let lo = sorted[0].min(-10.0);
    let hi = sorted[sorted.len() - 1].max(10.0);
    let steps = ((hi - lo) / WASSERSTEIN_STEP).ceil() as usize;
    let h = (hi - lo) / steps as f64;
    let mut below = 0usize;
    let mut prev = None;
    let mut total = 0.0;
    for i in 0..=steps {
        let x = lo + h * i as f64;
        while below < sorted.len() && sorted[below] <= x {
            below += 1;
        }
        let v = (below as f64 / n - normal_cdf(x)).abs();
        if let Some(p) = prev {
            total += 0.5 * h * (p + v);
        }
        prev = Some(v);
    }
    Ok(total)
}

/// Monte Carlo error unit for an empirical CDF built from `n` draws, `1/√n`.
/// By the Dvoretzky-Kiefer-Wolfowitz inequality the sup error exceeds three
/// units with probability at most `2 e^{-18}`.
pub fn dkw_error(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// Number of Φ-equiprobable cells in [`binned_tv_distance`].
pub const TV_BINS: usize = 20;

/// Empirical total-variation surrogate: `½ Σ |P_n(A) - Φ(A)|` over
/// Φ-equiprobable cells, refined at the Kolmogorov witness so that the
/// surrogate is never below [`kolmogorov_distance`].
pub fn binned_tv_distance(samples: &[f64]) -> Result<f64> {
    let sorted = sorted_samples(samples)?;
    let (_, witness) = kolmogorov_witness(samples)?;
    let mut edges: Vec<f64> = (1..TV_BINS)
        .map(|i| normal_quantile(i as f64 / TV_BINS as f64))
        .collect();
    // cells (-∞, w) and (-∞, w] both become unions of cells
    edges.push(witness);
    edges.push(f64::from_bits(witness.to_bits()).next_down_compat());
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let n = sorted.len() as f64;
    let count_le = |x: f64| sorted.partition_point(|&s| s <= x) as f64 / n;
    let mut total = 0.0;
    let mut prev_emp = 0.0;
    let mut prev_phi = 0.0;
    for &e in &edges {
        let emp = count_le(e);
        let phi = normal_cdf(e);
        total += ((emp - prev_emp) - (phi - prev_phi)).abs();
        prev_emp = emp;
        prev_phi = phi;
    }
    total += ((1.0 - prev_emp) - (1.0 - prev_phi)).abs();
    Ok(0.5 * total)
}

trait NextDown {
    fn next_down_compat(self) -> f64;
}

impl NextDown for f64 {
    fn next_down_compat(self) -> f64 {
        if self == 0.0 {
            -f64::from_bits(1)
        } else if self > 0.0 {
            f64::from_bits(self.to_bits() - 1)
        } else {
            f64::from_bits(self.to_bits() + 1)
        }
    }
}

/// Φ⁻¹ by bisection on [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Distances from the law of a sample to N(0,1), next to an analytic upper
/// bound on the total variation distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub kolmogorov: f64,
    pub wasserstein: f64,
    pub tv_upper_bound: f64,
    pub monte_carlo_error: f64,
    pub sample_size: usize,
}

impl DistanceReport {
    pub fn from_samples(samples: &[f64], tv_upper_bound: f64) -> Result<Self> {
        Ok(Self {
            kolmogorov: kolmogorov_distance(samples)?,
            wasserstein: wasserstein_distance(samples)?,
            tv_upper_bound,
            monte_carlo_error: dkw_error(samples.len()),
            sample_size: samples.len(),
        })
    }

    /// `d_K <= d_TV <= bound`, up to three Monte Carlo error units.
    pub fn sandwich_holds(&self) -> bool {
        self.kolmogorov <= self.tv_upper_bound + 3.0 * self.monte_carlo_error
    }
}

/// Bounds for a normalized sum of independent summands with third absolute
/// moments `γ_i`: `(3 Σγ_i, 4.1 Σγ_i)` for Wasserstein and Kolmogorov.
pub fn clt_bound_independent_sum(
    third_abs_moments: &[f64],
    variances: &[f64],
) -> Result<(f64, f64)> {
    if third_abs_moments.is_empty() {
        return Err(Error::Normalization("empty sum".into()));
    }
    if third_abs_moments.len() != variances.len() {
        return Err(Error::DimensionMismatch {
            expected: third_abs_moments.len(),
            found: variances.len(),
        });
    }
    let total_var: f64 = variances.iter().sum();
    if (total_var - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(format!(
            "variances must sum to 1, got {total_var}"
        )));
    }
    let s: f64 = third_abs_moments.iter().sum();
    Ok((3.0 * s, 4.1 * s))
}

/// Checks `E F = 0` and `E F² = 1` to within `1e-9`.
pub fn check_standardized(f: &ChaosElement) -> Result<()> {
    let mean = f.mean();
    let m2 = second_moment(f);
    if mean.abs() > 1e-9 || (m2 - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(format!(
            "expected E F = 0 and E F^2 = 1, got {mean} and {m2}"
        )));
    }
    Ok(())
}

/// `2 √Var(⟨DF, -DL⁻¹F⟩_H)`, an upper bound on `d_TV(F, N(0,1))`.
pub fn malliavin_stein_tv_bound(f: &ChaosElement) -> Result<f64> {
    check_standardized(f)?;
    let t = stein_kernel_term(f)?;
    Ok(2.0 * t.variance().max(0.0).sqrt())
}

/// `E[f'(Z_i) - Z_i f(Z)]` for a polynomial `f`, computed exactly; zero up
/// to rounding by Gaussian integration by parts.
pub fn stein_identity_residual(f: &Polynomial, i: usize) -> Result<f64> {
    if i >= f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: i + 1,
        });
    }
    gaussian_expectation(&(&f.partial(i) - &f.times_variable(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetric_tensor::SymmetricKernel;
    use crate::wiener_chaos::multiple_integral;

    #[test]
    fn solution_examples() {
        let id = TestFunction::absolutely_continuous("t", |t| t, |_| 1.0, vec![]);
        let sol = SteinSolution::new(id).unwrap();
        for &w in &[-8.0, -2.0, 0.0, 0.7, 5.0, 9.5] {
            assert!((sol.value(w).unwrap() + 1.0).abs() < 1e-10, "w={w}");
        }

        let ind = TestFunction::indicator(0.0);
        let v = solve_stein(&ind, 0.0).unwrap();
        assert!((v - (2.0 * PI).sqrt() / 4.0).abs() < 1e-12);

        let c = TestFunction::bounded("const", |_| 2.5, vec![]);
        let sol = SteinSolution::new(c).unwrap();
        assert!((sol.gaussian_mean() - 2.5).abs() < 1e-12);
        for &w in &[-3.0, 0.0, 4.0] {
            assert!(sol.value(w).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn indicator_matches_closed_form() {
        for &x in &[-1.3, 0.0, 0.8, 2.0] {
            let sol = SteinSolution::new(TestFunction::indicator(x)).unwrap();
            for &w in &[-6.0f64, -1.0, 0.0, 0.5, 1.7, 6.0] {
                // upper tails via Φ(-t) to avoid cancellation
                let k = (2.0 * PI).sqrt() * (0.5 * w * w).exp();
                let want = if w <= x {
                    k * normal_cdf(w) * normal_cdf(-x)
                } else {
                    k * normal_cdf(x) * normal_cdf(-w)
                };
                let got = sol.value(w).unwrap();
                assert!(
                    (got - want).abs() < 1e-10 * (1.0 + want.abs()),
                    "x={x} w={w}"
                );
            }
        }
    }

    #[test]
    fn residual_vanishes_away_from_jumps() {
        for class in [
            FunctionClass::Bounded,
            FunctionClass::AbsolutelyContinuous,
            FunctionClass::Indicator,
        ] {
            for h in shipped_family(class).into_iter().take(4) {
                let sol = SteinSolution::new(h.clone()).unwrap();
                for i in 0..=40 {
                    let w = -9.75 + 0.4875 * i as f64;
                    if h.jumps().iter().any(|x| (w - x).abs() < 0.01) {
                        continue;
                    }
                    let r = sol.residual(w).unwrap();
                    assert!(r.abs() < 1e-8, "{} at {w}: {r}", h.name());
                }
            }
        }
    }

    #[test]
    fn certificates_for_named_examples() {
        let sin = TestFunction::absolutely_continuous("sin", f64::sin, f64::cos, vec![]);
        let cert = verify_solution_bounds(&sin).unwrap();
        assert_eq!(cert.checks.len(), 3);
        assert!(cert.all_hold(), "{cert:?}");

        let cert = verify_solution_bounds(&TestFunction::indicator(1.3)).unwrap();
        assert_eq!(cert.checks.len(), 5);
        assert!(cert.all_hold(), "{cert:?}");

        let signed = TestFunction::bounded("cos(2t)", |t: f64| (2.0 * t).cos(), vec![]);
        let cert = verify_solution_bounds(&signed).unwrap();
        assert!(cert.checks[0].observed <= (2.0 * PI).sqrt());
        assert!(cert.into_result().is_ok());
    }

    #[test]
    fn violated_certificate_becomes_error() {
        let cert = BoundCertificate {
            function: "x".into(),
            class: FunctionClass::Bounded,
            checks: vec![BoundCheck {
                name: "|f_h'|_inf <= 4 |h|_inf",
                observed: 5.0,
                bound: 4.0,
            }],
        };
        assert!(!cert.all_hold());
        assert!(matches!(cert.into_result(), Err(Error::Invariant(_))));
    }

    #[test]
    fn kolmogorov_examples() {
        assert_eq!(kolmogorov_distance(&[0.0; 10]).unwrap(), 0.5);
        assert!(kolmogorov_distance(&[]).is_err());
        let one = kolmogorov_distance(&[1.0]).unwrap();
        assert!((one - normal_cdf(1.0)).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_of_point_mass() {
        // ∫ |1(x >= 0) - Φ(x)| dx = 2 φ(0)
        let d = wasserstein_distance(&[0.0; 5]).unwrap();
        assert!((d - 2.0 * normal_pdf(0.0)).abs() < 1e-3);
        let shifted = wasserstein_distance(&[3.0]).unwrap();
        // E|Z - 3|
        let want = 3.0 * (2.0 * normal_cdf(3.0) - 1.0) + 2.0 * normal_pdf(3.0);
        assert!((shifted - want).abs() < 2e-3);
    }

    #[test]
    fn binned_tv_dominates_kolmogorov() {
        let samples: Vec<f64> = (0..500)
            .map(|i| ((i * 37) % 101) as f64 / 30.0 - 1.5)
            .collect();
        let dk = kolmogorov_distance(&samples).unwrap();
        let tv = binned_tv_distance(&samples).unwrap();
        assert!(dk <= tv + 1e-15, "{dk} {tv}");
        assert!(tv <= 1.0);
    }

    #[test]
    fn stein_identity_on_polynomials() {
        let f = Polynomial::univariate(1, 0, &[0.3, -1.0, 2.0, 0.5, -0.25, 1.5]);
        assert!(stein_identity_residual(&f, 0).unwrap().abs() < 1e-10);
        let g = Polynomial::from_terms(2, [(vec![2, 1], 1.0), (vec![0, 3], -2.0)]).unwrap();
        assert!(stein_identity_residual(&g, 1).unwrap().abs() < 1e-10);
        assert!(stein_identity_residual(&g, 2).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[0.01, 0.3, 0.5, 0.9] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-14);
        }
    }

    #[test]
    fn clt_bounds() {
        let n = 64;
        let gammas = vec![(n as f64).powf(-1.5); n];
        let vars = vec![1.0 / n as f64; n];
        let (w, k) = clt_bound_independent_sum(&gammas, &vars).unwrap();
        assert!((w - 3.0 / 8.0).abs() < 1e-12);
        assert!((k - 4.1 / 8.0).abs() < 1e-12);

        let g = 2.0 * (2.0 / PI).sqrt();
        let (w, k) = clt_bound_independent_sum(&[g], &[1.0]).unwrap();
        assert!(w > 0.0 && k > w);

        assert!(clt_bound_independent_sum(&[], &[]).is_err());
        assert!(clt_bound_independent_sum(&[0.1], &[0.5]).is_err());
    }

    #[test]
    fn malliavin_tv_bound_examples() {
        let i1 = multiple_integral(&SymmetricKernel::basis_power(1, 0, 1));
        assert_eq!(malliavin_stein_tv_bound(&i1).unwrap(), 0.0);

        let x1x2 = multiple_integral(&SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap());
        assert!((malliavin_stein_tv_bound(&x1x2).unwrap() - 2.0).abs() < 1e-12);

        let h3 = multiple_integral(&SymmetricKernel::basis_power(1, 0, 3).scale(1.0 / 6f64.sqrt()));
        assert!((malliavin_stein_tv_bound(&h3).unwrap() - 2.0 * 14f64.sqrt()).abs() < 1e-9);

        let h2 = multiple_integral(&SymmetricKernel::basis_power(1, 0, 2));
        assert!(matches!(
            malliavin_stein_tv_bound(&h2),
            Err(Error::Normalization(_))
        ));
    }
}
