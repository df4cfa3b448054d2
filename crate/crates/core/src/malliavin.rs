//! Malliavin derivative, Ornstein-Uhlenbeck generator and its pseudo-inverse,
//! carré du champ and the Stein kernel term, as exact maps on chaos
//! expansions.
//!
//! The divergence only appears through `δD = -L`: a vector field is accepted
//! when it is a gradient `u = DG`, and then `δu = -LG`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gaussian_algebra::Polynomial;
use crate::symmetric_tensor::SymmetricKernel;
use crate::wiener_chaos::{
    chaos_product, expectation_of_product, from_polynomial, to_polynomial, ChaosElement,
};

/// Tolerance used when deciding whether a vector field is a gradient.
const GRADIENT_TOL: f64 = 1e-10;

/// `H`-valued random variable: coordinate `x` is `⟨u, e_x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct HValuedChaos {
    components: Vec<ChaosElement>,
}

impl HValuedChaos {
    pub fn new(components: Vec<ChaosElement>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::Domain(
                "an H-valued element needs d >= 1 components".into(),
            ));
        }
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: c.dim(),
            });
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, x: usize) -> &ChaosElement {
        &self.components[x]
    }

    pub fn components(&self) -> &[ChaosElement] {
        &self.components
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `⟨u, v⟩_H = Σ_x u_x v_x`.
pub fn h_inner(u: &HValuedChaos, v: &HValuedChaos) -> Result<ChaosElement> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let mut out = ChaosElement::zero(u.dim());
    for (a, b) in u.components.iter().zip(&v.components) {
        out = out.add(&chaos_product(a, b)?);
    }
    Ok(out)
}

/// `D_x F = Σ_k k I_{k-1}(f_k(·, x))`.
pub fn derivative(f: &ChaosElement) -> HValuedChaos {
    let dim = f.dim();
    let components = (0..dim)
        .map(|x| {
            let mut c = ChaosElement::zero(dim);
            for (k, kernel) in f.kernels() {
                c.add_kernel(&kernel.slice(x).scale(k as f64));
            }
            c
        })
        .collect();
    HValuedChaos { components }
}

/// `L F = Σ_k (-k) J_k F`.
pub fn ou_generator(f: &ChaosElement) -> ChaosElement {
    f.map_orders(|k| -(k as f64))
}

/// `L⁻¹ F = Σ_{k>=1} (-1/k) J_k F`; constants are annihilated.
pub fn pseudo_inverse(f: &ChaosElement) -> ChaosElement {
    f.map_orders(|k| if k == 0 { 0.0 } else { -1.0 / k as f64 })
}

/// `Γ[F, G] = ⟨DF, DG⟩_H`.
pub fn gamma(f: &ChaosElement, g: &ChaosElement) -> Result<ChaosElement> {
    h_inner(&derivative(f), &derivative(g))
}

/// `⟨DF, -DL⁻¹F⟩_H`.
pub fn stein_kernel_term(f: &ChaosElement) -> Result<ChaosElement> {
    let minus_inv = pseudo_inverse(f).scale(-1.0);
    h_inner(&derivative(f), &derivative(&minus_inv))
}

/// Recovers the centered `G` with `DG = u`, or reports that `u` is not a
/// gradient of a finite chaos expansion.
pub fn integrate_gradient(u: &HValuedChaos) -> Result<ChaosElement> {
    let dim = u.dim();
    // order k of G -> sorted tuple -> candidate kernel value
    let mut candidates: BTreeMap<usize, BTreeMap<Vec<usize>, f64>> = BTreeMap::new();
    for (x, comp) in u.components.iter().enumerate() {
        if comp.mean() != 0.0 {
            insert_candidate(&mut candidates, 1, vec![x], comp.mean())?;
        }
        for (m, kernel) in comp.kernels() {
            let k = m + 1;
            for (beta, v) in kernel.iter() {
                let mut alpha = beta.to_vec();
                alpha.push(x);
                alpha.sort_unstable();
                insert_candidate(&mut candidates, k, alpha, v / k as f64)?;
            }
        }
    }
    let mut g = ChaosElement::zero(dim);
    for (k, entries) in candidates {
        g.add_kernel(&SymmetricKernel::from_entries(dim, k, entries)?);
    }
    let residual = derivative(&g).max_abs_diff(u);
    if residual > GRADIENT_TOL {
        return Err(Error::NotAGradient(format!(
            "components are not the slices of one symmetric kernel (residual {residual:e})"
        )));
    }
    Ok(g)
}

fn insert_candidate(
    candidates: &mut BTreeMap<usize, BTreeMap<Vec<usize>, f64>>,
    k: usize,
    alpha: Vec<usize>,
    value: f64,
) -> Result<()> {
    let slot = candidates.entry(k).or_default();
    match slot.get(&alpha) {
        Some(&prev) if (prev - value).abs() > GRADIENT_TOL * (1.0 + prev.abs()) => {
            Err(Error::NotAGradient(format!(
                "inconsistent kernel values {prev} and {value} at {alpha:?}"
            )))
        }
        Some(_) => Ok(()),
        None => {
            slot.insert(alpha, value);
            Ok(())
        }
    }
}

/// Divergence of a gradient field, `δ(DG) = -LG`.
pub fn divergence(u: &HValuedChaos) -> Result<ChaosElement> {
    Ok(ou_generator(&integrate_gradient(u)?).scale(-1.0))
}

/// `E[F δu] - E[⟨DF, u⟩_H]` for `u` in the range of `D`.
pub fn duality_check(f: &ChaosElement, u: &HValuedChaos) -> Result<f64> {
    if f.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: u.dim(),
        });
    }
    let lhs = expectation_of_product(f, &divergence(u)?)?;
    let rhs = h_inner(&derivative(f), u)?.mean();
    Ok(lhs - rhs)
}

/// Largest coefficient gap between `D_x` of `P` (through its chaos
/// expansion) and `∂P/∂x_x`, over all directions.
pub fn chain_rule_residual(p: &Polynomial) -> Result<f64> {
    let f = from_polynomial(p)?;
    let df = derivative(&f);
    Ok((0..p.dim())
        .map(|x| to_polynomial(df.component(x)).max_abs_diff(&p.partial(x)))
        .fold(0.0, f64::max))
}

/// Largest coefficient gap in `2Γ[F,G] = L(FG) - F·LG - G·LF`.
pub fn carre_du_champ_residual(f: &ChaosElement, g: &ChaosElement) -> Result<f64> {
    let lhs = gamma(f, g)?.scale(2.0);
    let rhs = ou_generator(&chaos_product(f, g)?)
        .sub(&chaos_product(f, &ou_generator(g))?)
        .sub(&chaos_product(g, &ou_generator(f))?);
    Ok(lhs.max_abs_diff(&rhs))
}
