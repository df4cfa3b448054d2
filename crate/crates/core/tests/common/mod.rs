//! Brute-force reference arithmetic for the integration tests.
//!
//! Everything here works on plain monomial maps and recomputes Hermite
//! polynomials, Gaussian moments and Gamma moments from scratch, so it shares
//! no code with the library beyond reading kernel entries.

#![allow(dead_code)]

use std::collections::BTreeMap;

use chaos_forge::gaussian_algebra::Polynomial;
use chaos_forge::symmetric_tensor::SymmetricKernel;
use chaos_forge::wiener_chaos::ChaosElement;

/// Exponent vector -> coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub dim: usize,
    pub terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.push(vec![0; dim], c);
        p
    }

    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.push(e, 1.0);
        p
    }

    pub fn push(&mut self, e: Vec<u32>, c: f64) {
        if c != 0.0 {
            *self.terms.entry(e).or_insert(0.0) += c;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.push(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(e, &c)| (e.clone(), c * s))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &other.terms {
                let e: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                out.push(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, p: u32) -> Self {
        (0..p).fold(Self::constant(self.dim, 1.0), |acc, _| acc.mul(self))
    }

    pub fn deriv(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.push(f, c * e[i] as f64);
            }
        }
        out
    }

    pub fn times_var(&self, i: usize) -> Self {
        self.mul(&Self::var(self.dim, i))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.add(&other.scale(-1.0))
            .terms
            .values()
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub fn from_library(p: &Polynomial) -> Poly {
    let mut out = Poly::zero(p.dim());
    for (e, c) in p.terms() {
        out.push(e.clone(), c);
    }
    out
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Coefficients of the probabilists' Hermite polynomial He_n, lowest first,
/// from He_{n+1} = x He_n - n He_{n-1}.
pub fn hermite_coeffs(n: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if n == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for m in 1..n {
        let mut next = vec![0.0; m + 2];
        for (j, &c) in cur.iter().enumerate() {
            next[j + 1] += c;
        }
        for (j, &c) in prev.iter().enumerate() {
            next[j] -= m as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

fn hermite_poly(dim: usize, i: usize, n: usize) -> Poly {
    let mut p = Poly::zero(dim);
    for (j, c) in hermite_coeffs(n).into_iter().enumerate() {
        let mut e = vec![0; dim];
        e[i] = j as u32;
        p.push(e, c);
    }
    p
}

/// `I_k(f) = Σ_α f_α · (#orderings of α) · Π_j He_{m_j}(x_j)` over sorted tuples.
pub fn kernel_poly(f: &SymmetricKernel) -> Poly {
    let dim = f.dim();
    let k = f.order();
    let mut out = Poly::zero(dim);
    for (idx, v) in f.iter() {
        let mut mult = vec![0usize; dim];
        for &i in idx {
            mult[i] += 1;
        }
        let arr = factorial(k) / mult.iter().map(|&m| factorial(m)).product::<f64>();
        let mut term = Poly::constant(dim, v * arr);
        for (i, &m) in mult.iter().enumerate() {
            if m > 0 {
                term = term.mul(&hermite_poly(dim, i, m));
            }
        }
        out = out.add(&term);
    }
    out
}

pub fn chaos_poly(f: &ChaosElement) -> Poly {
    let mut out = Poly::constant(f.dim(), f.mean());
    for (k, kernel) in f.kernels() {
        if k > 0 {
            out = out.add(&kernel_poly(kernel));
        }
    }
    out
}

/// `E Z^p` for standard normal `Z`: `(p-1)!!` for even `p`.
pub fn gauss_moment(p: u32) -> f64 {
    if p % 2 == 1 {
        return 0.0;
    }
    (1..p).step_by(2).map(|j| j as f64).product()
}

pub fn gauss_expect(p: &Poly) -> f64 {
    p.terms
        .iter()
        .map(|(e, &c)| c * e.iter().map(|&m| gauss_moment(m)).product::<f64>())
        .sum()
}

/// `E X^p` for `X ~ Gamma(shape, 1)`: the rising factorial `shape (shape+1) ⋯`.
pub fn gamma_moment(shape: f64, p: u32) -> f64 {
    (0..p).map(|j| shape + j as f64).product()
}

/// Expectation under the product of `Gamma(ν + 1, 1)` laws.
pub fn gamma_expect(p: &Poly, nu: f64) -> f64 {
    p.terms
        .iter()
        .map(|(e, &c)| {
            c * e
                .iter()
                .map(|&m| gamma_moment(nu + 1.0, m))
                .product::<f64>()
        })
        .sum()
}

/// `L P = Σ_i x_i ∂_ii P + (ν + 1 - x_i) ∂_i P`.
pub fn laguerre_l(p: &Poly, nu: f64) -> Poly {
    let mut out = Poly::zero(p.dim);
    for i in 0..p.dim {
        let d1 = p.deriv(i);
        let d2 = d1.deriv(i);
        out = out
            .add(&d2.times_var(i))
            .add(&d1.scale(nu + 1.0))
            .add(&d1.times_var(i).scale(-1.0));
    }
    out
}

/// `Γ[P, Q] = Σ_i x_i ∂_i P ∂_i Q`.
pub fn laguerre_gamma(p: &Poly, q: &Poly) -> Poly {
    let mut out = Poly::zero(p.dim);
    for i in 0..p.dim {
        out = out.add(&p.deriv(i).mul(&q.deriv(i)).times_var(i));
    }
    out
}

/// `Σ_i ∂_i P ∂_i Q`, the Gaussian carré du champ.
pub fn gauss_gamma(p: &Poly, q: &Poly) -> Poly {
    let mut out = Poly::zero(p.dim);
    for i in 0..p.dim {
        out = out.add(&p.deriv(i).mul(&q.deriv(i)));
    }
    out
}

/// `|a - b| / max(|b|, 1)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
