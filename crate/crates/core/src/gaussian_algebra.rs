//! Multivariate polynomials over independent coordinates, with exact moment
//! oracles for standard Gaussian and Gamma product measures, plus the Hermite
//! and Laguerre families.
//!
//! The Gaussian moment oracle is deliberately the dumbest possible route:
//! expand, then replace every `z^p` by `(p-1)!!`. Every chaos-side identity in
//! the crate is checked against it.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Total degree beyond which polynomial multiplication is refused.
pub const POLY_DEGREE_CAP: usize = 32;

/// Exponent multi-index `(p_1, ..., p_d)`.
pub type Exponent = Vec<u32>;

/// A real polynomial in `d` variables, stored sparsely by exponent.
///
/// No zero coefficients are stored and every exponent has length `d`.
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Exponent, f64>,
}

/// A polynomial whose variables are read as i.i.d. standard Gaussians.
pub type GaussianPolynomial = Polynomial;

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate `x_i` (0-based).
    pub fn variable(dim: usize, i: usize) -> Self {
        assert!(
            i < dim,
            "variable index {i} out of range for dimension {dim}"
        );
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, 1.0);
        p
    }

    pub fn monomial(dim: usize, exponent: &[u32], coeff: f64) -> Result<Self> {
        let mut p = Self::zero(dim);
        p.checked_add_term(exponent, coeff)?;
        Ok(p)
    }

    /// Builds a polynomial by summing `(exponent, coefficient)` pairs.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, f64)>,
    {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            p.checked_add_term(&e, c)?;
        }
        Ok(p)
    }

    /// Embeds a univariate polynomial (coefficients in increasing degree) as a
    /// polynomial in coordinate `i`.
    pub fn univariate(dim: usize, i: usize, coeffs: &[f64]) -> Self {
        assert!(i < dim);
        let mut p = Self::zero(dim);
        for (n, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; dim];
            e[i] = n as u32;
            p.add_term(e, c);
        }
        p
    }

    fn checked_add_term(&mut self, exponent: &[u32], coeff: f64) -> Result<()> {
        if exponent.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: exponent.len(),
            });
        }
        self.add_term(exponent.to_vec(), coeff);
        Ok(())
    }

    fn add_term(&mut self, exponent: Exponent, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        match self.terms.entry(exponent) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> + '_ {
        self.terms.iter().map(|(e, c)| (e, *c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, exponent: &[u32]) -> f64 {
        self.terms.get(exponent).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&p| p as usize).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    /// Exact product, refusing results above [`POLY_DEGREE_CAP`].
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let degree = self.degree() + other.degree();
        if !self.is_zero() && !other.is_zero() && degree > POLY_DEGREE_CAP {
            return Err(Error::DegreeCap {
                degree,
                cap: POLY_DEGREE_CAP,
            });
        }
        let mut acc: BTreeMap<Exponent, f64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Exponent = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        acc.retain(|_, c| *c != 0.0);
        Ok(Self {
            dim: self.dim,
            terms: acc,
        })
    }

    pub fn pow(&self, p: u32) -> Result<Self> {
        let mut out = Self::constant(self.dim, 1.0);
        for _ in 0..p {
            out = out.mul(self)?;
        }
        Ok(out)
    }

    /// Partial derivative with respect to coordinate `i`.
    pub fn partial(&self, i: usize) -> Self {
        assert!(i < self.dim);
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    /// Multiplies by the coordinate `x_i`.
    pub fn times_variable(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, c) in &self.terms {
            let mut d = e.clone();
            d[i] += 1;
            out.add_term(d, *c);
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "evaluation point has wrong dimension");
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .zip(x)
                    .fold(*c, |acc, (&p, &xi)| acc * xi.powi(p as i32))
            })
            .sum()
    }

    /// Substitutes this polynomial into the univariate polynomial `outer`
    /// (coefficients in increasing degree), by Horner's scheme.
    pub fn compose_into(&self, outer: &[f64]) -> Result<Self> {
        let mut out = Self::zero(self.dim);
        for &c in outer.iter().rev() {
            out = out.mul(self)?;
            out = &out + &Self::constant(self.dim, c);
        }
        Ok(out)
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other)
            .terms
            .values()
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Drops coefficients with magnitude at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (i, p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "*x{}", i + 1)?,
                    _ => write!(f, "*x{}^{}", i + 1, p)?,
                }
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.dim, rhs.dim, "polynomial dimension mismatch");
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

/// `(p-1)!!` for even `p`, zero for odd `p`: the moments of N(0,1).
pub fn gaussian_moment(p: u32) -> f64 {
    if p % 2 == 1 {
        return 0.0;
    }
    (1..p).step_by(2).fold(1.0, |acc, m| acc * m as f64)
}

/// `E[P(Z_1, ..., Z_d)]` for i.i.d. standard Gaussians, term by term.
pub fn gaussian_expectation(p: &Polynomial) -> Result<f64> {
    let mut total = 0.0;
    for (e, c) in p.terms() {
        let mut m = c;
        for &k in e {
            let mk = gaussian_moment(k);
            if !mk.is_finite() {
                return Err(Error::Overflow(format!("Gaussian moment of order {k}")));
            }
            m *= mk;
            if m == 0.0 {
                break;
            }
        }
        total += m;
    }
    if !total.is_finite() {
        return Err(Error::Overflow("Gaussian expectation is not finite".into()));
    }
    Ok(total)
}

/// Rising factorial `a (a+1) ... (a+p-1)`, the `p`-th moment of Gamma(a, 1).
pub fn gamma_moment(shape: f64, p: u32) -> f64 {
    (0..p).fold(1.0, |acc, i| acc * (shape + i as f64))
}

/// Expectation under the product of Gamma(shape, scale 1) laws.
pub fn gamma_expectation(p: &Polynomial, shape: f64) -> Result<f64> {
    if shape.is_nan() || shape <= 0.0 {
        return Err(Error::Domain(format!(
            "Gamma shape must be > 0, got {shape}"
        )));
    }
    let total: f64 = p
        .terms()
        .map(|(e, c)| e.iter().fold(c, |acc, &k| acc * gamma_moment(shape, k)))
        .sum();
    if !total.is_finite() {
        return Err(Error::Overflow("Gamma expectation is not finite".into()));
    }
    Ok(total)
}

/// Probabilists' Hermite polynomial `H_k(x)` by the three-term recurrence.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return prev;
    }
    for n in 1..k {
        let next = x * cur - n as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Integer monomial coefficients of `H_0 ... H_K`.
#[derive(Debug, Clone)]
pub struct HermiteTable {
    rows: Vec<Vec<i128>>,
}

impl HermiteTable {
    pub fn new(max_order: usize) -> Self {
        let mut rows: Vec<Vec<i128>> = vec![vec![1]];
        if max_order >= 1 {
            rows.push(vec![0, 1]);
        }
        for k in 1..max_order {
            let mut next = vec![0i128; k + 2];
            for (i, &c) in rows[k].iter().enumerate() {
                next[i + 1] += c;
            }
            for (i, &c) in rows[k - 1].iter().enumerate() {
                next[i] -= k as i128 * c;
            }
            rows.push(next);
        }
        Self { rows }
    }

    pub fn max_order(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, k: usize) -> &[i128] {
        &self.rows[k]
    }

    pub fn coefficients_f64(&self, k: usize) -> Vec<f64> {
        self.rows[k].iter().map(|&c| c as f64).collect()
    }

    pub fn eval(&self, k: usize, x: f64) -> f64 {
        self.rows[k]
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c as f64)
    }
}

/// Coefficients `a_m` with `x^n = sum_m a_m H_m(x)`.
pub fn monomial_in_hermite(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    let fact = |m: usize| (1..=m).fold(1.0f64, |a, i| a * i as f64);
    for j in 0..=n / 2 {
        out[n - 2 * j] = fact(n) / (2f64.powi(j as i32) * fact(j) * fact(n - 2 * j));
    }
    out
}

fn check_laguerre_parameter(nu: f64) -> Result<()> {
    if nu.is_nan() || nu <= -1.0 {
        return Err(Error::Domain(format!(
            "Laguerre parameter must satisfy nu > -1, got {nu}"
        )));
    }
    Ok(())
}

/// Generalized Laguerre polynomial `L_n^{(nu)}(x)` by the three-term recurrence
/// `(n+1) L_{n+1} = (2n + 1 + nu - x) L_n - (n + nu) L_{n-1}`.
pub fn laguerre_eval(n: usize, nu: f64, x: f64) -> Result<f64> {
    check_laguerre_parameter(nu)?;
    let (mut prev, mut cur) = (1.0, 1.0 + nu - x);
    if n == 0 {
        return Ok(prev);
    }
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + nu - x) * cur - (m + nu) * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Monomial coefficients of `L_0^{(nu)} ... L_N^{(nu)}`.
#[derive(Debug, Clone)]
pub struct LaguerreTable {
    nu: f64,
    rows: Vec<Vec<f64>>,
}

impl LaguerreTable {
    pub fn new(max_order: usize, nu: f64) -> Result<Self> {
        check_laguerre_parameter(nu)?;
        let mut rows: Vec<Vec<f64>> = vec![vec![1.0]];
        if max_order >= 1 {
            rows.push(vec![1.0 + nu, -1.0]);
        }
        for m in 1..max_order {
            let mf = m as f64;
            let mut next = vec![0.0; m + 2];
            for (i, &c) in rows[m].iter().enumerate() {
                next[i] += (2.0 * mf + 1.0 + nu) * c;
                next[i + 1] -= c;
            }
            for (i, &c) in rows[m - 1].iter().enumerate() {
                next[i] -= (mf + nu) * c;
            }
            for c in next.iter_mut() {
                *c /= mf + 1.0;
            }
            rows.push(next);
        }
        Ok(Self { nu, rows })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn max_order(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    pub fn eval(&self, n: usize, x: f64) -> f64 {
        self.rows[n].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Coefficients `b_m` with `x^n = sum_{m <= n} b_m L_m^{(nu)}(x)`, by
    /// back-substitution on the triangular table.
    pub fn monomial_in_basis(&self, n: usize) -> Vec<f64> {
        assert!(n <= self.max_order());
        let mut residual = vec![0.0; n + 1];
        residual[n] = 1.0;
        let mut out = vec![0.0; n + 1];
        for m in (0..=n).rev() {
            let b = residual[m] / self.rows[m][m];
            out[m] = b;
            for (i, &c) in self.rows[m].iter().enumerate() {
                residual[i] -= b * c;
            }
        }
        out
    }
}
