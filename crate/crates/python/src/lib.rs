use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use chaos_forge::dirichlet::verify_h2;
use chaos_forge::fbm;
use chaos_forge::fourth_moment::{dirichlet_fourth_moment_bound, fourth_moment_report};
use chaos_forge::gaussian_algebra::Polynomial;
use chaos_forge::laguerre::LaguerreStructure;
use chaos_forge::malliavin;
use chaos_forge::runner::{self, OutputFormat};
use chaos_forge::stein;
use chaos_forge::symmetric_tensor::SymmetricKernel;
use chaos_forge::wiener_chaos::{self, ChaosElement};
use chaos_forge::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_)
        | Error::DegreeCap { .. }
        | Error::DimensionMismatch { .. }
        | Error::ContractionRange { .. }
        | Error::Normalization(_)
        | Error::ConfigParse { .. }
        | Error::ConfigRange { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

type Terms = BTreeMap<Vec<usize>, f64>;

/// Python dicts need hashable keys, so index vectors become tuples.
fn tuple_keyed<'py, T, I>(py: Python<'py>, entries: I) -> PyResult<Bound<'py, PyDict>>
where
    T: IntoPyObject<'py> + Copy,
    I: IntoIterator<Item = (Vec<T>, f64)>,
{
    let d = PyDict::new(py);
    for (key, v) in entries {
        d.set_item(PyTuple::new(py, key)?, v)?;
    }
    Ok(d)
}

fn kernel(dim: usize, order: usize, entries: Terms) -> PyResult<SymmetricKernel> {
    SymmetricKernel::from_entries(dim, order, entries).map_err(to_py)
}

fn polynomial(dim: usize, terms: BTreeMap<Vec<u32>, f64>) -> PyResult<Polynomial> {
    Polynomial::from_terms(dim, terms).map_err(to_py)
}

/// An element of the finite Wiener chaos over `dim` standard Gaussians.
#[pyclass(name = "Chaos", module = "chaos_forge", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Chaos {
    inner: ChaosElement,
}

#[pymethods]
impl Chaos {
    /// The multiple integral `I_k(f)` of a symmetric kernel given as
    /// `{index tuple: value}`; tuples may be unsorted.
    #[staticmethod]
    fn multiple_integral(dim: usize, order: usize, entries: Terms) -> PyResult<Self> {
        Ok(Self {
            inner: wiener_chaos::multiple_integral(&kernel(dim, order, entries)?),
        })
    }

    /// Chaos expansion of a polynomial given as `{exponent tuple: coefficient}`.
    #[staticmethod]
    fn from_polynomial(dim: usize, terms: BTreeMap<Vec<u32>, f64>) -> PyResult<Self> {
        let p = polynomial(dim, terms)?;
        Ok(Self {
            inner: wiener_chaos::from_polynomial(&p).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn constant(dim: usize, c: f64) -> Self {
        Self {
            inner: ChaosElement::constant(dim, c),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn moment(&self, p: u32) -> PyResult<f64> {
        wiener_chaos::moment(&self.inner, p).map_err(to_py)
    }

    /// Stored kernel entries of order `k`, keyed by sorted index tuple.
    fn kernel<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyDict>> {
        let entries: Vec<(Vec<usize>, f64)> = self
            .inner
            .kernel(k)
            .map(|f| f.iter().map(|(idx, v)| (idx.to_vec(), v)).collect())
            .unwrap_or_default();
        tuple_keyed(py, entries)
    }

    /// Monomial coefficients keyed by exponent tuple.
    fn to_polynomial<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = wiener_chaos::to_polynomial(&self.inner);
        tuple_keyed(py, p.terms().map(|(e, c)| (e.clone(), c)))
    }

    fn __add__(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.add(&other.inner),
        }
    }

    fn __sub__(&self, other: &Self) -> Self {
        Self {
            inner: self.inner.sub(&other.inner),
        }
    }

    fn __mul__(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: wiener_chaos::chaos_product(&self.inner, &other.inner).map_err(to_py)?,
        })
    }

    fn scale(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scale(s),
        }
    }

    /// `LF`, the Ornstein–Uhlenbeck generator.
    fn generator(&self) -> Self {
        Self {
            inner: malliavin::ou_generator(&self.inner),
        }
    }

    /// `L⁻¹F` on the centered part.
    fn pseudo_inverse(&self) -> Self {
        Self {
            inner: malliavin::pseudo_inverse(&self.inner),
        }
    }

    /// The components `D_x F` of the Malliavin derivative.
    fn derivative(&self) -> Vec<Chaos> {
        malliavin::derivative(&self.inner)
            .components()
            .iter()
            .map(|c| Chaos { inner: c.clone() })
            .collect()
    }

    /// `Γ[F, G] = ⟨DF, DG⟩`.
    fn gamma(&self, other: &Self) -> PyResult<Self> {
        Ok(Self {
            inner: malliavin::gamma(&self.inner, &other.inner).map_err(to_py)?,
        })
    }

    /// `⟨DF, -DL⁻¹F⟩`.
    fn stein_kernel_term(&self) -> PyResult<Self> {
        Ok(Self {
            inner: malliavin::stein_kernel_term(&self.inner).map_err(to_py)?,
        })
    }

    /// `2 √Var⟨DF, -DL⁻¹F⟩` for centered `F` with unit variance.
    fn tv_bound(&self) -> PyResult<f64> {
        stein::malliavin_stein_tv_bound(&self.inner).map_err(to_py)
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        wiener_chaos::sample(&self.inner, n, seed).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Chaos(dim={}, orders={:?}, mean={})",
            self.inner.dim(),
            self.inner.support(),
            self.inner.mean()
        )
    }
}

/// Every quantity of the fourth moment inequality for `F = I_k(f)` with
/// `E F² = 1`. Raises if one of the identities fails.
#[pyfunction]
fn fourth_moment(py: Python<'_>, dim: usize, order: usize, entries: Terms) -> PyResult<Py<PyAny>> {
    let f = kernel(dim, order, entries)?;
    let r = fourth_moment_report(&f).map_err(to_py)?;
    r.check().map_err(to_py)?;
    let out: BTreeMap<&str, f64> = BTreeMap::from([
        ("fourth_moment", r.fourth_moment),
        ("var_stein_kernel", r.var_stein_kernel),
        ("step1", r.step1_value),
        ("step2", r.step2_value),
        ("bound_rhs", r.bound_rhs),
        ("margin", r.margin()),
        ("tv_bound", r.tv_bound),
    ]);
    Ok(out.into_pyobject(py)?.into_any().unbind())
}

/// Exact TV bound for the normalized quadratic variation of `n` fBm increments.
#[pyfunction]
fn fbm_tv_bound(h: f64, n: usize) -> PyResult<(f64, f64, f64)> {
    let s = fbm::exact_tv_bound(h, n).map_err(to_py)?;
    Ok((s.tv_bound, s.sigma, s.variance))
}

/// `(slope, intercept, residual)` of the rate fit over `n_grid`.
#[pyfunction]
fn fbm_rate(h: f64, n_grid: Vec<usize>) -> PyResult<(f64, f64, f64)> {
    let fit = fbm::rate_regression(h, &n_grid).map_err(to_py)?;
    Ok((fit.slope, fit.intercept, fit.residual))
}

#[pyfunction]
#[pyo3(signature = (h, truncation = fbm::DEFAULT_TRUNCATION))]
fn breuer_major_sigma(h: f64, truncation: usize) -> PyResult<f64> {
    fbm::breuer_major_sigma(h, truncation).map_err(to_py)
}

/// `(kolmogorov, wasserstein, tv_bound, dkw_error)` from a Monte Carlo run.
#[pyfunction]
fn fbm_distance(h: f64, n: usize, samples: usize, seed: u64) -> PyResult<(f64, f64, f64, f64)> {
    let r = fbm::monte_carlo_distance(h, n, samples, seed).map_err(to_py)?;
    Ok((
        r.kolmogorov,
        r.wasserstein,
        r.tv_upper_bound,
        r.monte_carlo_error,
    ))
}

#[pyfunction]
fn kolmogorov_distance(samples: Vec<f64>) -> PyResult<f64> {
    stein::kolmogorov_distance(&samples).map_err(to_py)
}

#[pyfunction]
fn wasserstein_distance(samples: Vec<f64>) -> PyResult<f64> {
    stein::wasserstein_distance(&samples).map_err(to_py)
}

/// Stein solution for `h = 1{· ≤ x}` at `w`.
#[pyfunction]
fn stein_solution_indicator(x: f64, w: f64) -> PyResult<f64> {
    stein::solve_stein(&stein::TestFunction::indicator(x), w).map_err(to_py)
}

/// `(var_gamma, rhs, tv_bound)` for the degree-`p` Laguerre eigenfunction
/// with the given weights on the basis of that degree, normalized to unit
/// variance. Also certifies that `X²` stays within eigenvalue `2p`.
#[pyfunction]
fn laguerre_fourth_moment(
    dim: usize,
    nu: f64,
    p: usize,
    weights: Vec<f64>,
) -> PyResult<(f64, f64, f64)> {
    let s = LaguerreStructure::new(dim, nu).map_err(to_py)?;
    let x = s.normalized_eigenfunction(p, &weights).map_err(to_py)?;
    verify_h2(&s, &x, p as f64).map_err(to_py)?;
    let b = dirichlet_fourth_moment_bound(&s, &x, p as f64).map_err(to_py)?;
    Ok((b.var_gamma, b.rhs, b.tv_bound))
}

/// Runs an experiment config given as text; returns `(passed, report)`.
#[pyfunction]
#[pyo3(signature = (config, format = "csv"))]
fn run_config(py: Python<'_>, config: &str, format: &str) -> PyResult<(bool, String)> {
    let format: OutputFormat = format.parse().map_err(PyValueError::new_err)?;
    let cfg = runner::parse_config(config).map_err(to_py)?;
    let report = py.detach(|| runner::run(&cfg)).map_err(to_py)?;
    Ok((report.passed(), report.render(format)))
}

#[pymodule]
#[pyo3(name = "chaos_forge")]
fn chaos_forge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", runner::VERSION)?;
    m.add_class::<Chaos>()?;
    m.add_function(wrap_pyfunction!(fourth_moment, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_tv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_rate, m)?)?;
    m.add_function(wrap_pyfunction!(breuer_major_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_distance, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein_distance, m)?)?;
    m.add_function(wrap_pyfunction!(stein_solution_indicator, m)?)?;
    m.add_function(wrap_pyfunction!(laguerre_fourth_moment, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
