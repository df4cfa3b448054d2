//! The Laguerre structure on `(0, ∞)^d`: product Gamma measure of shape
//! `ν + 1`, generator `L = Σ_i x_i ∂_ii + (ν + 1 - x_i) ∂_i`, and
//! `Γ[X, Y] = Σ_i x_i ∂_iX ∂_iY`. Products of generalized Laguerre
//! polynomials diagonalize `L`, with eigenvalue minus the total degree.

use std::collections::BTreeMap;

use crate::dirichlet::{sorted_tuples, DirichletStructure};
use crate::error::{Error, Result};
use crate::gaussian_algebra::{gamma_expectation, Exponent, LaguerreTable, Polynomial};
use crate::symmetric_tensor::binomial;

/// Coefficient tolerance for the two routes to `Γ` to agree, relative to
/// the size of the result.
const GAMMA_ROUTE_TOL: f64 = 1e-9;

fn check_nu(nu: f64) -> Result<()> {
    if nu > -1.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "Laguerre parameter must satisfy nu > -1, got {nu}"
        )))
    }
}

/// A polynomial stored in the basis `∏_j L^{(ν)}_{i_j}(x_j)`.
#[derive(Clone, PartialEq)]
pub struct LaguerreElement {
    dim: usize,
    nu: f64,
    coeffs: BTreeMap<Exponent, f64>,
}

impl std::fmt::Debug for LaguerreElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LaguerreElement(d={}, nu={}; ", self.dim, self.nu)?;
        let mut first = true;
        for (e, c) in &self.coeffs {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{c}*L{e:?}")?;
        }
        if first {
            f.write_str("0")?;
        }
        f.write_str(")")
    }
}

impl LaguerreElement {
    pub fn zero(dim: usize, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        Ok(Self {
            dim,
            nu,
            coeffs: BTreeMap::new(),
        })
    }

    pub fn constant(dim: usize, nu: f64, c: f64) -> Result<Self> {
        let mut out = Self::zero(dim, nu)?;
        out.add_term(&vec![0; dim], c);
        Ok(out)
    }

    /// `c · ∏_j L^{(ν)}_{i_j}(x_j)`.
    pub fn basis(dim: usize, nu: f64, index: &[u32], c: f64) -> Result<Self> {
        if index.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index.len(),
            });
        }
        let mut out = Self::zero(dim, nu)?;
        out.add_term(index, c);
        Ok(out)
    }

    pub fn from_coefficients<I>(dim: usize, nu: f64, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, f64)>,
    {
        let mut out = Self::zero(dim, nu)?;
        for (e, c) in terms {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.len(),
                });
            }
            out.add_term(&e, c);
        }
        Ok(out)
    }

    fn add_term(&mut self, index: &[u32], c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.coeffs.entry(index.to_vec()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.coeffs.remove(index);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn coefficient(&self, index: &[u32]) -> f64 {
        self.coeffs.get(index).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, f64)> + '_ {
        self.coeffs.iter().map(|(e, &c)| (e, c))
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .keys()
            .map(|e| e.iter().map(|&i| i as usize).sum())
            .max()
            .unwrap_or(0)
    }

    fn max_index(&self) -> usize {
        self.coeffs
            .keys()
            .flat_map(|e| e.iter().map(|&i| i as usize))
            .max()
            .unwrap_or(0)
    }

    /// Monomial expansion.
    pub fn to_polynomial(&self) -> Result<Polynomial> {
        let table = LaguerreTable::new(self.max_index(), self.nu)?;
        let mut out = Polynomial::zero(self.dim);
        for (index, &c) in &self.coeffs {
            let mut term = Polynomial::constant(self.dim, c);
            for (j, &i) in index.iter().enumerate() {
                if i > 0 {
                    term = term.mul(&Polynomial::univariate(self.dim, j, table.row(i as usize)))?;
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Expansion of a monomial-basis polynomial in the Laguerre basis.
    pub fn from_polynomial(p: &Polynomial, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        let dim = p.dim();
        let max = p
            .terms()
            .flat_map(|(e, _)| e.iter().map(|&i| i as usize))
            .max()
            .unwrap_or(0);
        let table = LaguerreTable::new(max, nu)?;
        let rows: Vec<Vec<f64>> = (0..=max).map(|n| table.monomial_in_basis(n)).collect();
        let mut out = Self::zero(dim, nu)?;
        for (e, c) in p.terms() {
            // tensor product of the per-variable expansions
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(Vec::with_capacity(dim), c)];
            for &n in e {
                let mut next = Vec::new();
                for (idx, w) in &partial {
                    for (m, &b) in rows[n as usize].iter().enumerate() {
                        if b != 0.0 {
                            let mut i2 = idx.clone();
                            i2.push(m as u32);
                            next.push((i2, w * b));
                        }
                    }
                }
                partial = next;
            }
            for (idx, w) in partial {
                out.add_term(&idx, w);
            }
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let table = LaguerreTable::new(self.max_index(), self.nu)?;
        Ok(self
            .coeffs
            .iter()
            .map(|(index, &c)| {
                c * index
                    .iter()
                    .zip(x)
                    .map(|(&i, &xi)| table.eval(i as usize, xi))
                    .product::<f64>()
            })
            .sum())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.nu != other.nu {
            return Err(Error::Domain(format!(
                "Laguerre parameters differ: {} and {}",
                self.nu, other.nu
            )));
        }
        Ok(())
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = Self::zero(self.dim, self.nu)?;
        for (e, &c) in &self.coeffs {
            out.add_term(e, a * c);
        }
        for (e, &c) in &other.coeffs {
            out.add_term(e, b * c);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self {
            dim: self.dim,
            nu: self.nu,
            coeffs: BTreeMap::new(),
        };
        for (e, &c) in &self.coeffs {
            out.add_term(e, s * c);
        }
        out
    }

    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Self::from_polynomial(
            &self.to_polynomial()?.mul(&other.to_polynomial()?)?,
            self.nu,
        )
    }

    /// Exact expectation under the product Gamma(ν+1) law: the constant
    /// coefficient, since every nonconstant basis element has mean zero.
    pub fn expectation(&self) -> f64 {
        self.coefficient(&vec![0; self.dim])
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|_, c| c.abs() > tol);
        out
    }
}

/// `Σ_i x_i ∂_ii P + (ν + 1 - x_i) ∂_i P` on monomials.
pub fn laguerre_generator_polynomial(p: &Polynomial, nu: f64) -> Polynomial {
    let mut out = Polynomial::zero(p.dim());
    for i in 0..p.dim() {
        let d1 = p.partial(i);
        let d2 = d1.partial(i);
        out = &out + &d2.times_variable(i);
        out = &out + &(&d1 * (nu + 1.0));
        out = &out - &d1.times_variable(i);
    }
    out
}

/// `L_{d,ν} φ` by exact differentiation of the monomial form.
pub fn laguerre_generator(phi: &LaguerreElement) -> Result<LaguerreElement> {
    LaguerreElement::from_polynomial(
        &laguerre_generator_polynomial(&phi.to_polynomial()?, phi.nu),
        phi.nu,
    )
}

/// `Σ_i x_i ∂_iP ∂_iQ` on monomials.
pub fn laguerre_gamma_polynomial(p: &Polynomial, q: &Polynomial) -> Result<Polynomial> {
    let mut out = Polynomial::zero(p.dim());
    for i in 0..p.dim() {
        out = &out + &p.partial(i).mul(&q.partial(i))?.times_variable(i);
    }
    Ok(out)
}

/// `Γ[X, Y]`, computed both as `Σ_i x_i ∂_iX ∂_iY` and as
/// `½(L[XY] - Y L[X] - X L[Y])`; the two must agree.
pub fn laguerre_gamma(x: &LaguerreElement, y: &LaguerreElement) -> Result<LaguerreElement> {
    x.check_compatible(y)?;
    let nu = x.nu;
    let p = x.to_polynomial()?;
    let q = y.to_polynomial()?;
    let closed = laguerre_gamma_polynomial(&p, &q)?;
    let pq = p.mul(&q)?;
    let via_generator = &(&(&laguerre_generator_polynomial(&pq, nu)
        - &q.mul(&laguerre_generator_polynomial(&p, nu))?)
        - &p.mul(&laguerre_generator_polynomial(&q, nu))?)
        * 0.5;
    let diff = closed.max_abs_diff(&via_generator);
    let scale = closed.max_abs_coefficient().max(1.0);
    if diff > GAMMA_ROUTE_TOL * scale {
        return Err(Error::Invariant(format!(
            "carré du champ routes disagree by {diff:e}"
        )));
    }
    LaguerreElement::from_polynomial(&closed, nu)
}

/// Splits `φ` by total degree `p`; the component at `p` lies in
/// `Ker(L + p·Id)`.
pub fn eigen_project(phi: &LaguerreElement) -> BTreeMap<usize, LaguerreElement> {
    let mut out: BTreeMap<usize, LaguerreElement> = BTreeMap::new();
    for (e, &c) in &phi.coeffs {
        let p: usize = e.iter().map(|&i| i as usize).sum();
        out.entry(p)
            .or_insert_with(|| LaguerreElement {
                dim: phi.dim,
                nu: phi.nu,
                coeffs: BTreeMap::new(),
            })
            .add_term(e, c);
    }
    out
}

/// `E[P]` under the product Gamma(ν+1) law, from raw moments; an oracle
/// independent of the Laguerre basis.
pub fn gamma_mean(p: &Polynomial, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    gamma_expectation(p, nu + 1.0)
}

/// `E L_n^{(ν)}(x)² = C(n + ν, n)` under Gamma(ν+1).
pub fn basis_norm_sq(n: usize, nu: f64) -> f64 {
    (1..=n).map(|j| (j as f64 + nu) / j as f64).product()
}

/// Laguerre structure of dimension `d` with parameter `ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreStructure {
    dim: usize,
    nu: f64,
}

impl LaguerreStructure {
    pub fn new(dim: usize, nu: f64) -> Result<Self> {
        check_nu(nu)?;
        Ok(Self { dim, nu })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// All basis multi-indices of total degree exactly `p`.
    pub fn indices_of_degree(&self, p: usize) -> Vec<Exponent> {
        sorted_tuples(self.dim, p)
            .into_iter()
            .map(|t| {
                let mut e = vec![0u32; self.dim];
                for i in t {
                    e[i] += 1;
                }
                e
            })
            .collect()
    }

    /// `Σ_i c_i ∏ L_{α_i}` over the degree-`p` indices, rescaled to `E X² = 1`.
    pub fn normalized_eigenfunction(&self, p: usize, weights: &[f64]) -> Result<LaguerreElement> {
        let indices = self.indices_of_degree(p);
        if weights.len() != indices.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                found: weights.len(),
            });
        }
        let norm_sq: f64 = indices
            .iter()
            .zip(weights)
            .map(|(e, w)| {
                w * w
                    * e.iter()
                        .map(|&i| basis_norm_sq(i as usize, self.nu))
                        .product::<f64>()
            })
            .sum();
        if norm_sq <= 0.0 {
            return Err(Error::Normalization("zero eigenfunction".into()));
        }
        let s = norm_sq.sqrt();
        LaguerreElement::from_coefficients(
            self.dim,
            self.nu,
            indices.into_iter().zip(weights.iter().map(|w| w / s)),
        )
    }
}

impl DirichletStructure for LaguerreStructure {
    type Element = LaguerreElement;

    fn constant(&self, c: f64) -> LaguerreElement {
        LaguerreElement::constant(self.dim, self.nu, c).expect("nu checked on construction")
    }

    fn expectation(&self, x: &LaguerreElement) -> Result<f64> {
        Ok(x.expectation())
    }

    fn generator(&self, x: &LaguerreElement) -> Result<LaguerreElement> {
        laguerre_generator(x)
    }

    fn carre_du_champ(&self, x: &LaguerreElement, y: &LaguerreElement) -> Result<LaguerreElement> {
        laguerre_gamma(x, y)
    }

    fn product(&self, x: &LaguerreElement, y: &LaguerreElement) -> Result<LaguerreElement> {
        x.product(y)
    }

    fn linear_combination(
        &self,
        a: f64,
        x: &LaguerreElement,
        b: f64,
        y: &LaguerreElement,
    ) -> LaguerreElement {
        x.linear_combination(a, y, b)
            .expect("elements of one structure are compatible")
    }

    fn max_abs_coefficient(&self, x: &LaguerreElement) -> f64 {
        x.max_abs_coefficient()
    }

    fn eigen_decomposition(&self, x: &LaguerreElement) -> Result<Vec<(f64, LaguerreElement)>> {
        Ok(eigen_project(x)
            .into_iter()
            .map(|(p, c)| (p as f64, c))
            .collect())
    }

    fn eigenbasis(&self, max_degree: usize) -> Result<Vec<(f64, LaguerreElement)>> {
        let mut out = Vec::new();
        for p in 0..=max_degree {
            for e in self.indices_of_degree(p) {
                out.push((
                    p as f64,
                    LaguerreElement::basis(self.dim, self.nu, &e, 1.0)?,
                ));
            }
        }
        Ok(out)
    }

    fn polynomial_space_dim(&self, max_degree: usize) -> usize {
        binomial(self.dim + max_degree, max_degree) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::verify_h1_h2;
    use crate::fourth_moment::dirichlet_fourth_moment_bound;

    fn l1(dim: usize, nu: f64, j: usize) -> LaguerreElement {
        let mut e = vec![0; dim];
        e[j] = 1;
        LaguerreElement::basis(dim, nu, &e, 1.0).unwrap()
    }

    #[test]
    fn generator_examples() {
        for &nu in &[0.0, 0.5, 2.0] {
            let phi = l1(1, nu, 0);
            let want = Polynomial::univariate(1, 0, &[nu + 1.0, -1.0]);
            assert!(phi.to_polynomial().unwrap().max_abs_diff(&want) < 1e-15);
            let lphi = laguerre_generator(&phi).unwrap();
            assert!(
                lphi.linear_combination(1.0, &phi, 1.0)
                    .unwrap()
                    .max_abs_coefficient()
                    < 1e-12
            );

            let one = LaguerreElement::constant(2, nu, 1.0).unwrap();
            assert_eq!(laguerre_generator(&one).unwrap().max_abs_coefficient(), 0.0);

            let prod = LaguerreElement::basis(2, nu, &[1, 1], 1.0).unwrap();
            let lp = laguerre_generator(&prod).unwrap();
            assert!(
                lp.linear_combination(1.0, &prod, 2.0)
                    .unwrap()
                    .max_abs_coefficient()
                    < 1e-12
            );
        }
    }

    #[test]
    fn gamma_examples() {
        let nu = 0.5;
        let x = l1(1, nu, 0);
        let g = laguerre_gamma(&x, &x).unwrap().to_polynomial().unwrap();
        assert!(g.max_abs_diff(&Polynomial::variable(1, 0)) < 1e-12);

        let c = LaguerreElement::constant(1, nu, 3.0).unwrap();
        assert_eq!(laguerre_gamma(&c, &x).unwrap().max_abs_coefficient(), 0.0);

        // L_2^{(0)} = 1 - 2x + x²/2, derivative x - 2
        let l2 = LaguerreElement::basis(1, 0.0, &[2], 1.0).unwrap();
        let g = laguerre_gamma(&l2, &l2).unwrap().to_polynomial().unwrap();
        let want = Polynomial::univariate(1, 0, &[0.0, 4.0, -4.0, 1.0]);
        assert!(g.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn eigen_project_examples() {
        let x = LaguerreElement::from_polynomial(&Polynomial::variable(1, 0), 0.0).unwrap();
        let parts = eigen_project(&x);
        assert_eq!(parts.len(), 2);
        assert!((parts[&0].coefficient(&[0]) - 1.0).abs() < 1e-15);
        assert!((parts[&1].coefficient(&[1]) + 1.0).abs() < 1e-15);

        let sq = Polynomial::univariate(1, 0, &[1.0, -2.0, 1.0]);
        let parts = eigen_project(&LaguerreElement::from_polynomial(&sq, 0.0).unwrap());
        assert!(parts.keys().all(|&p| p <= 2));
        for (p, c) in &parts {
            let lc = laguerre_generator(c).unwrap();
            assert!(
                lc.linear_combination(1.0, c, *p as f64)
                    .unwrap()
                    .max_abs_coefficient()
                    < 1e-10
            );
        }
    }

    #[test]
    fn basis_round_trip() {
        let p = Polynomial::from_terms(
            2,
            [(vec![2, 1], 1.5), (vec![0, 3], -0.5), (vec![1, 0], 2.0)],
        )
        .unwrap();
        for &nu in &[0.0, 0.5, 2.0] {
            let e = LaguerreElement::from_polynomial(&p, nu).unwrap();
            assert!(e.to_polynomial().unwrap().max_abs_diff(&p) < 1e-12);
            for x in [[0.3, 1.7], [2.0, 0.1], [5.0, 4.0]] {
                assert!((e.eval(&x).unwrap() - p.eval(&x)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn expectation_matches_gamma_moments() {
        let p = Polynomial::from_terms(
            2,
            [(vec![2, 1], 1.5), (vec![0, 3], -0.5), (vec![0, 0], 2.0)],
        )
        .unwrap();
        for &nu in &[0.0, 0.5, 2.0] {
            let e = LaguerreElement::from_polynomial(&p, nu).unwrap();
            assert!((e.expectation() - gamma_mean(&p, nu).unwrap()).abs() < 1e-10);
        }
        for n in 0..4 {
            let b = LaguerreElement::basis(1, 2.0, &[n], 1.0)
                .unwrap()
                .to_polynomial()
                .unwrap();
            let m = gamma_mean(&b.mul(&b).unwrap(), 2.0).unwrap();
            assert!((m - basis_norm_sq(n as usize, 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn pinned_fourth_moment_example() {
        let s = LaguerreStructure::new(1, 0.0).unwrap();
        let x = l1(1, 0.0, 0);
        let b = dirichlet_fourth_moment_bound(&s, &x, 1.0).unwrap();
        assert!((b.var_gamma - 1.0).abs() < 1e-12);
        assert!((b.fourth_moment - 9.0).abs() < 1e-12);
        assert!((b.rhs - 2.0).abs() < 1e-12);
        assert!((b.tv_bound - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn h2_support_is_degree_bounded() {
        let s = LaguerreStructure::new(2, 0.5).unwrap();
        let x = s.normalized_eigenfunction(2, &[1.0, -0.5, 0.25]).unwrap();
        let c = verify_h1_h2(&s, &x, 2.0, 2).unwrap();
        assert_eq!(c.h2.support, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.h1.spectrum, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LaguerreStructure::new(1, -1.0).is_err());
        assert!(LaguerreElement::zero(1, f64::NAN).is_err());
        let a = l1(1, 0.0, 0);
        let b = l1(1, 0.5, 0);
        assert!(a.product(&b).is_err());
    }
}
