//! Random test objects shared by the experiment suites: sparse kernels,
//! chaos elements and polynomials with coefficients in `[-1, 1]`.

use rand::Rng;

use crate::dirichlet::sorted_tuples;
use crate::error::Result;
use crate::gaussian_algebra::Polynomial;
use crate::symmetric_tensor::{arrangement_count, factorial, SymmetricKernel};
use crate::wiener_chaos::{multiple_integral, ChaosElement};

/// A kernel of the given order with up to `max_nnz` random stored entries.
pub fn random_kernel<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    order: usize,
    max_nnz: usize,
) -> SymmetricKernel {
    let tuples = sorted_tuples(dim, order);
    let nnz = rng.random_range(1..=max_nnz.max(1).min(tuples.len()));
    let mut f = SymmetricKernel::zero(dim, order);
    for _ in 0..nnz {
        let idx = &tuples[rng.random_range(0..tuples.len())];
        f.add_entry(idx, rng.random_range(-1.0..1.0))
            .expect("tuple drawn from the kernel's own index set");
    }
    if f.is_zero() {
        f.add_entry(&tuples[0], 1.0).expect("valid tuple");
    }
    f
}

/// A nonzero kernel rescaled so that `E[I_k(f)²] = k! ‖f‖² = 1`.
pub fn random_unit_kernel<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    order: usize,
    max_nnz: usize,
) -> SymmetricKernel {
    let f = random_kernel(rng, dim, order, max_nnz);
    let norm_sq: f64 = f
        .iter()
        .map(|(idx, v)| arrangement_count(idx) * v * v)
        .sum();
    f.scale(1.0 / (factorial(order) * norm_sq).sqrt())
}

/// A chaos element with a random constant and a random kernel in each of
/// a random nonempty subset of the orders `1..=max_order`.
pub fn random_chaos<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_order: usize,
    max_nnz: usize,
) -> ChaosElement {
    let mut f = ChaosElement::constant(dim, rng.random_range(-1.0..1.0));
    let mut any = false;
    for k in 1..=max_order {
        if rng.random_bool(0.6) || (k == max_order && !any) {
            f.add_kernel(&random_kernel(rng, dim, k, max_nnz));
            any = true;
        }
    }
    f
}

/// A chaos element supported on exactly one order.
pub fn random_pure_chaos<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    order: usize,
    max_nnz: usize,
) -> ChaosElement {
    multiple_integral(&random_kernel(rng, dim, order, max_nnz))
}

/// A polynomial with up to `terms` random monomials of total degree at most
/// `max_degree`.
pub fn random_polynomial<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_degree: usize,
    terms: usize,
) -> Result<Polynomial> {
    let mut p = Polynomial::zero(dim);
    for _ in 0..terms.max(1) {
        let deg = rng.random_range(0..=max_degree);
        let mut e = vec![0u32; dim];
        for _ in 0..deg {
            e[rng.random_range(0..dim)] += 1;
        }
        p = &p + &Polynomial::monomial(dim, &e, rng.random_range(-1.0..1.0))?;
    }
    Ok(p)
}
