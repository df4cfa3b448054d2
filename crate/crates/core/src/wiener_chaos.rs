//! Finite Wiener chaos expansions over the isonormal process restricted to
//! an orthonormal basis `e_1 ... e_d`, i.e. over `d` i.i.d. standard Gaussians
//! `x_i = X(e_i)`.
//!
//! A [`ChaosElement`] is `c_0 + Σ_k I_k(f_k)`. The realization of `I_k(f)` as a
//! polynomial is `Σ_α c_α (k! / Π m_j!) Π_j H_{m_j}(x_{i_j})`, where the sum runs
//! over stored sorted tuples `α` with distinct indices `i_j` of multiplicity
//! `m_j`. The weight `k!/Π m_j!` counts the arrangements of `α`.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gaussian_algebra::{monomial_in_hermite, HermiteTable, Polynomial};
use crate::rng;
use crate::symmetric_tensor::{
    arrangement_count, binomial, factorial, multiplicities, sym_contract, SymmetricKernel,
};

/// Largest chaos order a product or power may reach.
pub const CHAOS_DEGREE_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosElement {
    dim: usize,
    constant: f64,
    kernels: BTreeMap<usize, SymmetricKernel>,
}

impl ChaosElement {
    pub fn zero(dim: usize) -> Self {
        Self::constant(dim, 0.0)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            constant: c,
            kernels: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `E[F]`, the constant term.
    pub fn mean(&self) -> f64 {
        self.constant
    }

    pub fn kernel(&self, k: usize) -> Option<&SymmetricKernel> {
        self.kernels.get(&k)
    }

    /// Nonzero kernels by increasing order.
    pub fn kernels(&self) -> impl Iterator<Item = (usize, &SymmetricKernel)> + '_ {
        self.kernels.iter().map(|(k, f)| (*k, f))
    }

    /// Highest order with a nonzero kernel, 0 for constants.
    pub fn max_order(&self) -> usize {
        self.kernels.keys().next_back().copied().unwrap_or(0)
    }

    /// Orders carrying nonzero mass, including 0 when the constant is nonzero.
    pub fn support(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if self.constant != 0.0 {
            out.push(0);
        }
        out.extend(self.kernels.keys().copied());
        out
    }

    /// `J_k F`.
    pub fn projection(&self, k: usize) -> Self {
        if k == 0 {
            return Self::constant(self.dim, self.constant);
        }
        let mut out = Self::zero(self.dim);
        if let Some(f) = self.kernels.get(&k) {
            out.kernels.insert(k, f.clone());
        }
        out
    }

    /// Adds `I_k(f)` (or a constant, for order 0).
    pub fn add_kernel(&mut self, f: &SymmetricKernel) {
        assert_eq!(f.dim(), self.dim, "kernel dimension mismatch");
        if f.order() == 0 {
            self.constant += f.scalar_value();
            return;
        }
        if f.is_zero() {
            return;
        }
        let sum = match self.kernels.get(&f.order()) {
            Some(g) => g.add(f).expect("shapes checked"),
            None => f.clone(),
        };
        if sum.is_zero() {
            self.kernels.remove(&f.order());
        } else {
            self.kernels.insert(f.order(), sum);
        }
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim, "chaos dimension mismatch");
        let mut out = Self::constant(self.dim, a * self.constant + b * other.constant);
        for f in self.kernels.values() {
            out.add_kernel(&f.scale(a));
        }
        for g in other.kernels.values() {
            out.add_kernel(&g.scale(b));
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::constant(self.dim, s * self.constant);
        for f in self.kernels.values() {
            out.add_kernel(&f.scale(s));
        }
        out
    }

    /// Maps each chaos component `J_k F` to `weight(k) · J_k F`.
    pub fn map_orders(&self, weight: impl Fn(usize) -> f64) -> Self {
        let mut out = Self::constant(self.dim, weight(0) * self.constant);
        for (&k, f) in &self.kernels {
            out.add_kernel(&f.scale(weight(k)));
        }
        out
    }

    pub fn variance(&self) -> f64 {
        second_moment(self) - self.constant * self.constant
    }

    /// Largest coefficient difference over the constant and every kernel.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m = (self.constant - other.constant).abs();
        let empty = |k: usize| SymmetricKernel::zero(self.dim, k);
        for (&k, f) in &self.kernels {
            m = m.max(f.max_abs_diff(other.kernels.get(&k).unwrap_or(&empty(k))));
        }
        for (&k, g) in &other.kernels {
            if !self.kernels.contains_key(&k) {
                m = m.max(g.max_abs_diff(&empty(k)));
            }
        }
        m
    }

    /// Drops kernel coefficients with magnitude at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = Self::constant(self.dim, self.constant);
        for f in self.kernels.values() {
            out.add_kernel(&f.pruned(tol));
        }
        out
    }
}

/// `I_k(f)` as a chaos element.
pub fn multiple_integral(f: &SymmetricKernel) -> ChaosElement {
    let mut out = ChaosElement::zero(f.dim());
    out.add_kernel(f);
    out
}

fn check_dims(f: &ChaosElement, g: &ChaosElement) -> Result<()> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: g.dim,
        });
    }
    Ok(())
}

/// Pointwise product via the multiplication formula
/// `I_p(f) I_q(g) = Σ_r r! C(p,r) C(q,r) I_{p+q-2r}(f ⊗̃_r g)`.
pub fn chaos_product(f: &ChaosElement, g: &ChaosElement) -> Result<ChaosElement> {
    check_dims(f, g)?;
    let degree = f.max_order() + g.max_order();
    if degree > CHAOS_DEGREE_CAP {
        return Err(Error::DegreeCap {
            degree,
            cap: CHAOS_DEGREE_CAP,
        });
    }
    let mut out = ChaosElement::constant(f.dim, f.constant * g.constant);
    if g.constant != 0.0 {
        for a in f.kernels.values() {
            out.add_kernel(&a.scale(g.constant));
        }
    }
    if f.constant != 0.0 {
        for b in g.kernels.values() {
            out.add_kernel(&b.scale(f.constant));
        }
    }
    for (&p, a) in &f.kernels {
        for (&q, b) in &g.kernels {
            for r in 0..=p.min(q) {
                let weight = factorial(r) * binomial(p, r) * binomial(q, r);
                let h = sym_contract(a, b, r)?;
                out.add_kernel(&h.scale(weight));
            }
        }
    }
    Ok(out)
}

/// `E[F G]` by orthogonality of chaoses and the isometry.
pub fn expectation_of_product(f: &ChaosElement, g: &ChaosElement) -> Result<f64> {
    check_dims(f, g)?;
    let mut total = f.constant * g.constant;
    for (&k, a) in &f.kernels {
        if let Some(b) = g.kernels.get(&k) {
            total += factorial(k) * a.inner(b)?;
        }
    }
    Ok(total)
}

/// `E[F²] = c_0² + Σ_k k! ‖f_k‖²`.
pub fn second_moment(f: &ChaosElement) -> f64 {
    f.kernels
        .iter()
        .map(|(&k, a)| factorial(k) * a.norm_sq())
        .sum::<f64>()
        + f.constant * f.constant
}

/// `F^p` by repeated chaos products.
pub fn chaos_power(f: &ChaosElement, p: u32) -> Result<ChaosElement> {
    let mut out = ChaosElement::constant(f.dim, 1.0);
    for _ in 0..p {
        out = chaos_product(&out, f)?;
    }
    Ok(out)
}

/// Exact `E[F^p]`.
pub fn moment(f: &ChaosElement, p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::Domain("moment order must be at least 1".into()));
    }
    let degree = p as usize * f.max_order();
    if degree > CHAOS_DEGREE_CAP {
        return Err(Error::DegreeCap {
            degree,
            cap: CHAOS_DEGREE_CAP,
        });
    }
    let half = chaos_power(f, p / 2)?;
    if p.is_multiple_of(2) {
        Ok(second_moment(&half))
    } else {
        expectation_of_product(&half, &chaos_product(&half, f)?)
    }
}

/// Polynomial realization in the coordinates `x_i = X(e_i)`.
pub fn to_polynomial(f: &ChaosElement) -> Polynomial {
    let dim = f.dim;
    let table = HermiteTable::new(f.max_order().max(1));
    let mut out = Polynomial::constant(dim, f.constant);
    for a in f.kernels.values() {
        for (alpha, c) in a.iter() {
            let mut term = Polynomial::constant(dim, c * arrangement_count(alpha));
            let mut pos = 0;
            for m in multiplicities(alpha) {
                let hm = Polynomial::univariate(dim, alpha[pos], &table.coefficients_f64(m));
                term = term.mul(&hm).expect("degree bounded by kernel order");
                pos += m;
            }
            out = &out + &term;
        }
    }
    out
}

/// Chaos decomposition of a polynomial by expansion in the product Hermite
/// basis; the kernels are the unique ones reproducing `p`.
pub fn from_polynomial(p: &Polynomial) -> Result<ChaosElement> {
    let degree = p.degree();
    if degree > CHAOS_DEGREE_CAP {
        return Err(Error::DegreeCap {
            degree,
            cap: CHAOS_DEGREE_CAP,
        });
    }
    let dim = p.dim();
    let expansions: Vec<Vec<f64>> = (0..=degree).map(monomial_in_hermite).collect();
    // Hermite multi-degree -> coefficient
    let mut hermite: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for (exp, c) in p.terms() {
        let mut partial: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(dim), c)];
        for &e in exp {
            let row = &expansions[e as usize];
            let mut next = Vec::with_capacity(partial.len() * row.len());
            for (prefix, w) in &partial {
                for (m, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        let mut idx = prefix.clone();
                        idx.push(m as u32);
                        next.push((idx, w * a));
                    }
                }
            }
            partial = next;
        }
        for (idx, w) in partial {
            *hermite.entry(idx).or_insert(0.0) += w;
        }
    }
    let mut out = ChaosElement::zero(dim);
    for (degrees, w) in hermite {
        if w == 0.0 {
            continue;
        }
        let alpha: Vec<usize> = degrees
            .iter()
            .enumerate()
            .flat_map(|(i, &m)| std::iter::repeat_n(i, m as usize))
            .collect();
        let coeff = w / arrangement_count(&alpha);
        let kernel = SymmetricKernel::from_entries(dim, alpha.len(), [(alpha, coeff)])?;
        out.add_kernel(&kernel);
    }
    Ok(out)
}

/// A realization of `(X(e_1), ..., X(e_d))` and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// `n` i.i.d. standard Gaussian vectors in `R^d`, deterministic given `seed`.
pub fn gaussian_samples(dim: usize, n: usize, seed: u64) -> Vec<GaussianSample> {
    rng::chunked(n, seed, |rng, chunk, count| {
        (0..count)
            .map(|_| GaussianSample {
                values: (0..dim).map(|_| StandardNormal.sample(rng)).collect(),
                seed,
                stream: chunk as u64,
            })
            .collect()
    })
}

/// `n` i.i.d. draws of `F`, evaluated through its polynomial realization.
pub fn sample(f: &ChaosElement, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("sample count must be at least 1".into()));
    }
    let poly = to_polynomial(f);
    let dim = f.dim;
    Ok(rng::chunked(n, seed, |rng, _, count| {
        let mut x = vec![0.0; dim];
        (0..count)
            .map(|_| {
                for xi in x.iter_mut() {
                    *xi = StandardNormal.sample(rng);
                }
                poly.eval(&x)
            })
            .collect()
    }))
}
