//! Quantitative fourth moment theorem: the contraction expansions of
//! `Var⟨DF, -DL⁻¹F⟩` and of the fourth cumulant of a single chaos element,
//! the inequality between them, and its Dirichlet-structure analogue.

use std::collections::BTreeMap;

use crate::dirichlet::DirichletStructure;
use crate::error::{Error, Result};
use crate::malliavin::{gamma, stein_kernel_term};
use crate::symmetric_tensor::{binomial, factorial, kernel_norm_sq, sym_contract, SymmetricKernel};
use crate::wiener_chaos::{
    chaos_product, expectation_of_product, moment, multiple_integral, second_moment,
};

/// Tolerance, relative to `max(1, |value|)`, for agreement between two
/// independent computations of the same quantity.
pub const IDENTITY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= IDENTITY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// A sum over contraction orders `r = 1..k-1`, with its terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSum {
    pub total: f64,
    pub terms: BTreeMap<usize, f64>,
}

/// `r ↦ ‖f ⊗̃_r f‖²` for `r = 1..k-1`.
pub fn contraction_norms(f: &SymmetricKernel) -> Result<BTreeMap<usize, f64>> {
    let k = f.order();
    let mut out = BTreeMap::new();
    for r in 1..k {
        out.insert(r, kernel_norm_sq(&sym_contract(f, f, r)?));
    }
    Ok(out)
}

fn weighted_sum(
    f: &SymmetricKernel,
    weight: impl Fn(usize, usize) -> f64,
) -> Result<ContractionSum> {
    let k = f.order();
    let mut terms = BTreeMap::new();
    for (r, norm) in contraction_norms(f)? {
        let common = factorial(r).powi(2) * binomial(k, r).powi(4) * factorial(2 * k - 2 * r);
        terms.insert(r, weight(k, r) * common * norm);
    }
    Ok(ContractionSum {
        total: terms.values().sum(),
        terms,
    })
}

/// `Var⟨DF, -DL⁻¹F⟩ = Σ_r (r²/k²) (r!)² C(k,r)⁴ (2k-2r)! ‖f ⊗̃_r f‖²` for
/// `F = I_k(f)`.
pub fn step1_variance(f: &SymmetricKernel) -> Result<ContractionSum> {
    weighted_sum(f, |k, r| (r * r) as f64 / (k * k) as f64)
}

/// `E F⁴ - 3 (E F²)² = (3/k) Σ_r r (r!)² C(k,r)⁴ (2k-2r)! ‖f ⊗̃_r f‖²` for
/// `F = I_k(f)`.
pub fn step2_cumulant(f: &SymmetricKernel) -> Result<ContractionSum> {
    weighted_sum(f, |k, r| 3.0 * r as f64 / k as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourthMomentReport {
    pub order: usize,
    pub second_moment: f64,
    pub fourth_moment: f64,
    /// `Var⟨DF, -DL⁻¹F⟩` from chaos algebra.
    pub var_stein_kernel: f64,
    /// The same variance from the contraction expansion.
    pub step1_value: f64,
    /// `E F⁴ - 3 (E F²)²` from the contraction expansion.
    pub step2_value: f64,
    /// `(k-1)/(3k) · step2_value`.
    pub bound_rhs: f64,
    /// `2 √var_stein_kernel`.
    pub tv_bound: f64,
    /// `E[F² Γ[F,F]]`, which equals `(k/3) E F⁴`.
    pub mixed_moment: f64,
    pub contraction_norms: BTreeMap<usize, f64>,
}

impl FourthMomentReport {
    /// `bound_rhs - var_stein_kernel`; nonnegative when the inequality holds.
    pub fn margin(&self) -> f64 {
        self.bound_rhs - self.var_stein_kernel
    }

    /// `E F⁴ - 3 (E F²)²` from the moments.
    pub fn moment_cumulant(&self) -> f64 {
        self.fourth_moment - 3.0 * self.second_moment * self.second_moment
    }

    pub fn check(&self) -> Result<()> {
        if !close(self.var_stein_kernel, self.step1_value) {
            return Err(Error::Invariant(format!(
                "contraction expansion of the Stein kernel variance gives {} but chaos algebra gives {}",
                self.step1_value, self.var_stein_kernel
            )));
        }
        if !close(self.moment_cumulant(), self.step2_value) {
            return Err(Error::Invariant(format!(
                "contraction expansion of the fourth cumulant gives {} but moments give {}",
                self.step2_value,
                self.moment_cumulant()
            )));
        }
        let k = self.order as f64;
        if !close(self.mixed_moment, k / 3.0 * self.fourth_moment) {
            return Err(Error::Invariant(format!(
                "E[F^2 Gamma[F,F]] = {}, expected (k/3) E F^4 = {}",
                self.mixed_moment,
                k / 3.0 * self.fourth_moment
            )));
        }
        if self.margin() < -IDENTITY_TOL {
            return Err(Error::Invariant(format!(
                "Var<DF,-DL^-1 F> = {} exceeds (k-1)/(3k)(E F^4 - 3) = {}",
                self.var_stein_kernel, self.bound_rhs
            )));
        }
        Ok(())
    }
}

/// Computes every quantity of the report for `F = I_k(f)` with `E F² = 1`,
/// without judging them; see [`FourthMomentReport::check`].
pub fn fourth_moment_report(f: &SymmetricKernel) -> Result<FourthMomentReport> {
    let k = f.order();
    if k < 2 {
        return Err(Error::Domain(format!(
            "chaos order must be at least 2, got {k}"
        )));
    }
    let big_f = multiple_integral(f);
    let m2 = second_moment(&big_f);
    if (m2 - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(format!(
            "expected E F^2 = 1, got {m2}"
        )));
    }
    let m4 = moment(&big_f, 4)?;
    let var_stein = stein_kernel_term(&big_f)?.variance();
    let step1 = step1_variance(f)?;
    let step2 = step2_cumulant(f)?;
    let f_sq = chaos_product(&big_f, &big_f)?;
    let mixed = expectation_of_product(&f_sq, &gamma(&big_f, &big_f)?)?;
    Ok(FourthMomentReport {
        order: k,
        second_moment: m2,
        fourth_moment: m4,
        var_stein_kernel: var_stein,
        step1_value: step1.total,
        step2_value: step2.total,
        bound_rhs: (k - 1) as f64 / (3.0 * k as f64) * step2.total,
        tv_bound: 2.0 * var_stein.max(0.0).sqrt(),
        mixed_moment: mixed,
        contraction_norms: contraction_norms(f)?,
    })
}

/// The report for `F = I_k(f)`, `E F² = 1`, after checking every identity
/// along the way: both step expansions against chaos moments,
/// `E[F² Γ[F,F]] = (k/3) E F⁴`, and `Var⟨DF,-DL⁻¹F⟩ ≤ (k-1)/(3k)(E F⁴ - 3)`.
pub fn fundamental_inequality(f: &SymmetricKernel) -> Result<FourthMomentReport> {
    let report = fourth_moment_report(f)?;
    report.check()?;
    Ok(report)
}

/// Output of [`dirichlet_fourth_moment_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBound {
    pub eigenvalue: f64,
    pub mean_gamma: f64,
    pub var_gamma: f64,
    pub fourth_moment: f64,
    /// `(λ²/3)(E X⁴ - 3)`.
    pub rhs: f64,
    /// `√(E X⁴/3 - 1)`.
    pub tv_bound: f64,
}

impl DirichletBound {
    pub fn margin(&self) -> f64 {
        self.rhs - self.var_gamma
    }
}

/// For an eigenfunction `X` of `-L` with eigenvalue `λ` and `E X² = 1`:
/// `Var Γ[X,X] ≤ (λ²/3)(E X⁴ - 3)`, and `d_TV(X, N(0,1)) ≤ √(E X⁴/3 - 1)`.
pub fn dirichlet_fourth_moment_bound<S: DirichletStructure>(
    structure: &S,
    x: &S::Element,
    eigenvalue: f64,
) -> Result<DirichletBound> {
    structure.check_eigenfunction(x, eigenvalue)?;
    let x2 = structure.product(x, x)?;
    let m2 = structure.expectation(&x2)?;
    if (m2 - 1.0).abs() > 1e-9 {
        return Err(Error::Normalization(format!(
            "expected E X^2 = 1, got {m2}"
        )));
    }
    let m4 = structure.expectation(&structure.product(&x2, &x2)?)?;
    let g = structure.carre_du_champ(x, x)?;
    let mean_gamma = structure.expectation(&g)?;
    let var_gamma = structure.expectation(&structure.product(&g, &g)?)? - mean_gamma * mean_gamma;
    if !close(mean_gamma, eigenvalue) {
        return Err(Error::Invariant(format!(
            "E Gamma[X,X] = {mean_gamma}, expected the eigenvalue {eigenvalue}"
        )));
    }
    let rhs = eigenvalue * eigenvalue / 3.0 * (m4 - 3.0);
    let bound = DirichletBound {
        eigenvalue,
        mean_gamma,
        var_gamma,
        fourth_moment: m4,
        rhs,
        tv_bound: (m4 / 3.0 - 1.0).max(0.0).sqrt(),
    };
    if bound.margin() < -IDENTITY_TOL * rhs.abs().max(1.0) {
        return Err(Error::Invariant(format!(
            "Var Gamma[X,X] = {var_gamma} exceeds (lambda^2/3)(E X^4 - 3) = {rhs}"
        )));
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::WienerStructure;

    fn x1x2() -> SymmetricKernel {
        SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap()
    }

    fn h3() -> SymmetricKernel {
        SymmetricKernel::basis_power(1, 0, 3).scale(1.0 / 6f64.sqrt())
    }

    #[test]
    fn step_examples() {
        assert_eq!(
            step1_variance(&SymmetricKernel::basis_power(3, 1, 1))
                .unwrap()
                .total,
            0.0
        );
        assert_eq!(
            step2_cumulant(&SymmetricKernel::basis_power(3, 1, 1))
                .unwrap()
                .total,
            0.0
        );

        let s1 = step1_variance(&x1x2()).unwrap();
        assert!((s1.total - 1.0).abs() < 1e-12);
        assert!((contraction_norms(&x1x2()).unwrap()[&1] - 0.125).abs() < 1e-15);
        assert!((step2_cumulant(&x1x2()).unwrap().total - 6.0).abs() < 1e-12);

        assert!((step1_variance(&h3()).unwrap().total - 14.0).abs() < 1e-9);
        assert!((step2_cumulant(&h3()).unwrap().total - 90.0).abs() < 1e-9);
    }

    #[test]
    fn fundamental_inequality_examples() {
        let r = fundamental_inequality(&x1x2()).unwrap();
        assert!((r.fourth_moment - 9.0).abs() < 1e-9);
        assert!((r.var_stein_kernel - 1.0).abs() < 1e-9);
        assert!(r.margin().abs() < 1e-9);

        let h2 = SymmetricKernel::basis_power(1, 0, 2).scale(1.0 / 2f64.sqrt());
        let r = fundamental_inequality(&h2).unwrap();
        assert!((r.fourth_moment - 15.0).abs() < 1e-9);
        assert!((r.var_stein_kernel - 2.0).abs() < 1e-9);
        assert!((r.bound_rhs - 2.0).abs() < 1e-9);

        let r = fundamental_inequality(&h3()).unwrap();
        assert!((r.fourth_moment - 93.0).abs() < 1e-9);
        assert!((r.var_stein_kernel - 14.0).abs() < 1e-9);
        assert!((r.bound_rhs - 20.0).abs() < 1e-9);
        assert!((r.tv_bound - 2.0 * 14f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn fundamental_inequality_rejects_bad_input() {
        let unnormalized = SymmetricKernel::basis_power(1, 0, 2);
        assert!(matches!(
            fundamental_inequality(&unnormalized),
            Err(Error::Normalization(_))
        ));
        assert!(matches!(
            fundamental_inequality(&SymmetricKernel::basis_power(1, 0, 1)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dirichlet_bound_on_wiener_examples() {
        let w = WienerStructure::new(2);
        let x = multiple_integral(&x1x2());
        let b = dirichlet_fourth_moment_bound(&w, &x, 2.0).unwrap();
        assert!((b.var_gamma - 4.0).abs() < 1e-12);
        assert!((b.rhs - 8.0).abs() < 1e-12);
        assert!((b.tv_bound - 2f64.sqrt()).abs() < 1e-12);

        let g = multiple_integral(&SymmetricKernel::basis_power(2, 0, 1));
        let b = dirichlet_fourth_moment_bound(&w, &g, 1.0).unwrap();
        assert!(b.var_gamma.abs() < 1e-15 && b.rhs.abs() < 1e-12);

        assert!(matches!(
            dirichlet_fourth_moment_bound(&w, &x, 1.0),
            Err(Error::NotEigenfunction { .. })
        ));
    }
}
