//! Abstract Dirichlet structures with a discrete spectrum, the Wiener space
//! instance, and certificates for the two spectral hypotheses used by the
//! fourth moment bound: (H1) `-L` is diagonal on the polynomial space with
//! spectrum `0 = λ₀ < λ₁ < …`, and (H2) squares of eigenfunctions stay in the
//! span of eigenspaces with eigenvalue at most twice as large.

use crate::error::{Error, Result};
use crate::malliavin::{gamma, ou_generator};
use crate::symmetric_tensor::SymmetricKernel;
use crate::wiener_chaos::{chaos_product, multiple_integral, ChaosElement};

/// Components below this size are treated as absent when reading off spectra.
pub const SPECTRAL_TOL: f64 = 1e-9;

/// A Dirichlet structure restricted to a space of polynomial-like elements
/// on which everything can be computed exactly.
pub trait DirichletStructure {
    type Element: Clone;

    fn constant(&self, c: f64) -> Self::Element;
    fn expectation(&self, x: &Self::Element) -> Result<f64>;
    fn generator(&self, x: &Self::Element) -> Result<Self::Element>;
    fn carre_du_champ(&self, x: &Self::Element, y: &Self::Element) -> Result<Self::Element>;
    fn product(&self, x: &Self::Element, y: &Self::Element) -> Result<Self::Element>;
    fn linear_combination(
        &self,
        a: f64,
        x: &Self::Element,
        b: f64,
        y: &Self::Element,
    ) -> Self::Element;
    fn max_abs_coefficient(&self, x: &Self::Element) -> f64;
    /// Components of `x` in the eigenspaces of `-L`, by increasing eigenvalue;
    /// zero components are omitted.
    fn eigen_decomposition(&self, x: &Self::Element) -> Result<Vec<(f64, Self::Element)>>;
    /// A basis of eigenfunctions spanning the polynomial space of degree at
    /// most `max_degree`, each tagged with its eigenvalue.
    fn eigenbasis(&self, max_degree: usize) -> Result<Vec<(f64, Self::Element)>>;
    /// Dimension of the polynomial space of degree at most `max_degree`.
    fn polynomial_space_dim(&self, max_degree: usize) -> usize;

    /// Errors unless `‖LX + λX‖ ≤ 1e-9 · max(1, ‖X‖)` coefficient-wise.
    fn check_eigenfunction(&self, x: &Self::Element, eigenvalue: f64) -> Result<()> {
        let lx = self.generator(x)?;
        let residual = self.max_abs_coefficient(&self.linear_combination(1.0, &lx, eigenvalue, x));
        let scale = self.max_abs_coefficient(x).max(1.0);
        if residual > SPECTRAL_TOL * scale {
            return Err(Error::NotEigenfunction {
                eigenvalue,
                residual,
            });
        }
        Ok(())
    }
}

/// Certificate for (H1) on the polynomial space of bounded degree.
#[derive(Debug, Clone, PartialEq)]
pub struct H1Certificate {
    pub max_degree: usize,
    pub basis_size: usize,
    /// Distinct eigenvalues, strictly increasing from 0.
    pub spectrum: Vec<f64>,
    pub max_residual: f64,
}

/// Certificate for (H2) on a single eigenfunction.
#[derive(Debug, Clone, PartialEq)]
pub struct H2Certificate {
    pub eigenvalue: f64,
    /// Eigenvalues carrying a nonzero component of `X²`.
    pub support: Vec<f64>,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCertificate {
    pub h1: H1Certificate,
    pub h2: H2Certificate,
}

/// Exhibits an eigenbasis of the polynomial space of degree at most
/// `max_degree` and checks every element is an eigenfunction.
pub fn verify_h1<S: DirichletStructure>(structure: &S, max_degree: usize) -> Result<H1Certificate> {
    let basis = structure.eigenbasis(max_degree)?;
    let expected = structure.polynomial_space_dim(max_degree);
    if basis.len() != expected {
        return Err(Error::Invariant(format!(
            "eigenbasis has {} elements, the polynomial space has dimension {expected}",
            basis.len()
        )));
    }
    let mut max_residual = 0.0f64;
    let mut spectrum: Vec<f64> = Vec::new();
    for (lambda, x) in &basis {
        let lx = structure.generator(x)?;
        let r = structure.max_abs_coefficient(&structure.linear_combination(1.0, &lx, *lambda, x));
        if r > SPECTRAL_TOL * structure.max_abs_coefficient(x).max(1.0) {
            return Err(Error::NotEigenfunction {
                eigenvalue: *lambda,
                residual: r,
            });
        }
        max_residual = max_residual.max(r);
        if !spectrum.iter().any(|s| (s - lambda).abs() <= SPECTRAL_TOL) {
            spectrum.push(*lambda);
        }
    }
    spectrum.sort_by(f64::total_cmp);
    if spectrum.first().is_some_and(|&l| l.abs() > SPECTRAL_TOL)
        || spectrum.iter().any(|&l| l < -SPECTRAL_TOL)
    {
        return Err(Error::Invariant(format!(
            "spectrum must start at 0 and be nonnegative, got {spectrum:?}"
        )));
    }
    Ok(H1Certificate {
        max_degree,
        basis_size: basis.len(),
        spectrum,
        max_residual,
    })
}

/// Checks that `X²` has no component on eigenvalues above `2λ`.
pub fn verify_h2<S: DirichletStructure>(
    structure: &S,
    x: &S::Element,
    eigenvalue: f64,
) -> Result<H2Certificate> {
    structure.check_eigenfunction(x, eigenvalue)?;
    let sq = structure.product(x, x)?;
    let limit = 2.0 * eigenvalue;
    let mut support = Vec::new();
    for (lambda, component) in structure.eigen_decomposition(&sq)? {
        if structure.max_abs_coefficient(&component) <= SPECTRAL_TOL {
            continue;
        }
        if lambda > limit + SPECTRAL_TOL {
            return Err(Error::H2Violation {
                eigenvalue: lambda,
                limit,
            });
        }
        support.push(lambda);
    }
    Ok(H2Certificate {
        eigenvalue,
        support,
        limit,
    })
}

/// (H1) on polynomials up to twice the degree of `X` (enough to contain
/// `X²`) and (H2) for `X`.
pub fn verify_h1_h2<S: DirichletStructure>(
    structure: &S,
    x: &S::Element,
    eigenvalue: f64,
    degree: usize,
) -> Result<SpectralCertificate> {
    let h2 = verify_h2(structure, x, eigenvalue)?;
    let h1 = verify_h1(structure, 2 * degree)?;
    Ok(SpectralCertificate { h1, h2 })
}

/// Gaussian space over `R^d` with the Ornstein-Uhlenbeck generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WienerStructure {
    dim: usize,
}

impl WienerStructure {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// All nondecreasing index tuples of length `k` over `0..dim`.
pub(crate) fn sorted_tuples(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(dim: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..dim {
            cur.push(i);
            rec(dim, k, i, cur, out);
            cur.pop();
        }
    }
    rec(dim, k, 0, &mut cur, &mut out);
    out
}

impl DirichletStructure for WienerStructure {
    type Element = ChaosElement;

    fn constant(&self, c: f64) -> ChaosElement {
        ChaosElement::constant(self.dim, c)
    }

    fn expectation(&self, x: &ChaosElement) -> Result<f64> {
        Ok(x.mean())
    }

    fn generator(&self, x: &ChaosElement) -> Result<ChaosElement> {
        Ok(ou_generator(x))
    }

    fn carre_du_champ(&self, x: &ChaosElement, y: &ChaosElement) -> Result<ChaosElement> {
        gamma(x, y)
    }

    fn product(&self, x: &ChaosElement, y: &ChaosElement) -> Result<ChaosElement> {
        chaos_product(x, y)
    }

    fn linear_combination(
        &self,
        a: f64,
        x: &ChaosElement,
        b: f64,
        y: &ChaosElement,
    ) -> ChaosElement {
        x.linear_combination(a, y, b)
    }

    fn max_abs_coefficient(&self, x: &ChaosElement) -> f64 {
        x.max_abs_diff(&ChaosElement::zero(self.dim))
    }

    fn eigen_decomposition(&self, x: &ChaosElement) -> Result<Vec<(f64, ChaosElement)>> {
        let mut out = Vec::new();
        if x.mean() != 0.0 {
            out.push((0.0, x.projection(0)));
        }
        for k in x.support() {
            if k > 0 {
                out.push((k as f64, x.projection(k)));
            }
        }
        Ok(out)
    }

    fn eigenbasis(&self, max_degree: usize) -> Result<Vec<(f64, ChaosElement)>> {
        let mut out = vec![(0.0, self.constant(1.0))];
        for k in 1..=max_degree {
            for idx in sorted_tuples(self.dim, k) {
                out.push((
                    k as f64,
                    multiple_integral(&SymmetricKernel::symmetrized_basis(self.dim, &idx)?),
                ));
            }
        }
        Ok(out)
    }

    fn polynomial_space_dim(&self, max_degree: usize) -> usize {
        crate::symmetric_tensor::binomial(self.dim + max_degree, max_degree) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h2_on_second_chaos() {
        let w = WienerStructure::new(2);
        let x = multiple_integral(&SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap());
        let c = verify_h1_h2(&w, &x, 2.0, 2).unwrap();
        assert_eq!(c.h2.support, vec![0.0, 2.0, 4.0]);
        assert_eq!(c.h1.spectrum, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.h1.basis_size, 15);
    }

    #[test]
    fn constants_have_trivial_spectrum() {
        let w = WienerStructure::new(3);
        let c = verify_h2(&w, &w.constant(2.0), 0.0).unwrap();
        assert_eq!(c.support, vec![0.0]);
    }

    #[test]
    fn eigenfunction_check() {
        let w = WienerStructure::new(1);
        let x = multiple_integral(&SymmetricKernel::basis_power(1, 0, 3));
        assert!(w.check_eigenfunction(&x, 3.0).is_ok());
        assert!(matches!(
            w.check_eigenfunction(&x, 2.0),
            Err(Error::NotEigenfunction { .. })
        ));
    }

    #[test]
    fn tuples_enumerate_multisets() {
        assert_eq!(sorted_tuples(3, 2).len(), 6);
        assert_eq!(
            sorted_tuples(2, 3),
            vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 1], vec![1, 1, 1]]
        );
    }
}
