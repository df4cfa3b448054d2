//! Symmetric tensors over `R^d` stored by sorted index tuple, with
//! symmetrization and contractions.
//!
//! A [`SymmetricKernel`] of order `k` stores, for every sorted tuple
//! `i_1 <= ... <= i_k`, the common value of the tensor on all permutations of
//! that tuple. A sorted tuple with index multiplicities `m_j` stands for
//! `k! / prod m_j!` distinct entries of the full tensor, and that count is the
//! weight used by every norm and inner product below.
//!
//! Indices are 0-based throughout.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Run lengths of equal indices in a sorted tuple.
pub(crate) fn multiplicities(sorted: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push(j - i);
        i = j;
    }
    out
}

/// Number of distinct arrangements of a sorted tuple, `k! / prod m_j!`.
pub(crate) fn arrangement_count(sorted: &[usize]) -> f64 {
    multiplicities(sorted)
        .iter()
        .fold(factorial(sorted.len()), |acc, &m| acc / factorial(m))
}

/// All distinct permutations of a sorted tuple, in lexicographic order.
pub(crate) fn distinct_permutations(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = sorted.to_vec();
    let mut out = vec![cur.clone()];
    loop {
        let n = cur.len();
        if n < 2 {
            return out;
        }
        let mut i = n - 1;
        while i > 0 && cur[i - 1] >= cur[i] {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        let mut j = n - 1;
        while cur[j] <= cur[i - 1] {
            j -= 1;
        }
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// Every distinct sub-multiset of size `r`, paired with its complement.
pub(crate) fn sub_multisets(sorted: &[usize], r: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut values = Vec::new();
    let mut counts = Vec::new();
    for (v, m) in sorted
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .zip(multiplicities(sorted))
    {
        values.push(v);
        counts.push(m);
    }
    let mut out = Vec::new();
    let mut take = vec![0usize; values.len()];
    fn rec(
        pos: usize,
        left: usize,
        values: &[usize],
        counts: &[usize],
        take: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, Vec<usize>)>,
    ) {
        if pos == values.len() {
            if left == 0 {
                let mut sub = Vec::new();
                let mut rest = Vec::new();
                for (i, &v) in values.iter().enumerate() {
                    sub.extend(std::iter::repeat_n(v, take[i]));
                    rest.extend(std::iter::repeat_n(v, counts[i] - take[i]));
                }
                out.push((sub, rest));
            }
            return;
        }
        for t in 0..=counts[pos].min(left) {
            take[pos] = t;
            rec(pos + 1, left - t, values, counts, take, out);
        }
        take[pos] = 0;
    }
    rec(0, r, &values, &counts, &mut take, &mut out);
    out
}

/// Removes the multiset `sub` from the sorted tuple `from`, if contained.
fn multiset_difference(from: &[usize], sub: &[usize]) -> Option<Vec<usize>> {
    let mut rest = Vec::with_capacity(from.len());
    let mut j = 0;
    for &v in from {
        if j < sub.len() && sub[j] == v {
            j += 1;
        } else {
            if j < sub.len() && sub[j] < v {
                return None;
            }
            rest.push(v);
        }
    }
    (j == sub.len()).then_some(rest)
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    out
}

/// Element of the symmetric tensor power `H^{⊙k}`, `H = R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel {
    dim: usize,
    order: usize,
    coeffs: BTreeMap<Vec<usize>, f64>,
}

impl SymmetricKernel {
    pub fn zero(dim: usize, order: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            dim,
            order,
            coeffs: BTreeMap::new(),
        }
    }

    /// Order-0 kernel, i.e. a scalar.
    pub fn scalar(dim: usize, c: f64) -> Self {
        let mut k = Self::zero(dim, 0);
        k.accumulate(Vec::new(), c);
        k
    }

    /// Sums the given `(index tuple, value)` pairs; tuples may be unsorted.
    pub fn from_entries<I>(dim: usize, order: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut k = Self::zero(dim, order);
        for (idx, v) in entries {
            k.add_entry(&idx, v)?;
        }
        Ok(k)
    }

    /// `e_i^{⊗k}`.
    pub fn basis_power(dim: usize, i: usize, k: usize) -> Self {
        assert!(i < dim);
        let mut out = Self::zero(dim, k);
        out.accumulate(vec![i; k], 1.0);
        out
    }

    /// `sym(e_{i_1} ⊗ ... ⊗ e_{i_k})`.
    pub fn symmetrized_basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        let w = 1.0 / arrangement_count(&sorted);
        Self::from_entries(dim, indices.len(), [(sorted, w)])
    }

    pub fn add_entry(&mut self, idx: &[usize], value: f64) -> Result<()> {
        if idx.len() != self.order {
            return Err(Error::Domain(format!(
                "index tuple of length {} for a kernel of order {}",
                idx.len(),
                self.order
            )));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.dim) {
            return Err(Error::Domain(format!(
                "index {bad} out of range for dimension {}",
                self.dim
            )));
        }
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        self.accumulate(sorted, value);
        Ok(())
    }

    fn accumulate(&mut self, sorted: Vec<usize>, value: f64) {
        if value == 0.0 {
            return;
        }
        let slot = self.coeffs.entry(sorted.clone()).or_insert(0.0);
        *slot += value;
        if *slot == 0.0 {
            self.coeffs.remove(&sorted);
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Value of the tensor at any arrangement of `idx`.
    pub fn get(&self, idx: &[usize]) -> f64 {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        self.coeffs.get(&sorted).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.coeffs.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    /// Scalar value of an order-0 kernel.
    pub fn scalar_value(&self) -> f64 {
        debug_assert_eq!(self.order, 0);
        self.coeffs.get(&Vec::new()).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.dim, self.order);
        for (k, v) in &self.coeffs {
            out.accumulate(k.clone(), v * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            out.accumulate(k.clone(), *v);
        }
        Ok(out)
    }

    /// `<f, g>_{H^{⊗k}}`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .filter_map(|(k, v)| other.coeffs.get(k).map(|w| v * w * arrangement_count(k)))
            .sum())
    }

    /// `‖f‖²_{H^{⊗k}}`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(k, v)| v * v * arrangement_count(k))
            .sum()
    }

    /// `f(·, x)`: the order `k-1` kernel obtained by fixing one slot to `x`.
    ///
    /// Stored values are tensor entries, so the slice keeps them unchanged;
    /// it only drops one occurrence of `x` from each tuple containing it.
    pub fn slice(&self, x: usize) -> Self {
        assert!(self.order >= 1, "cannot slice an order-0 kernel");
        let mut out = Self::zero(self.dim, self.order - 1);
        for (k, v) in &self.coeffs {
            if let Some(pos) = k.iter().position(|&i| i == x) {
                let mut rest = k.clone();
                rest.remove(pos);
                out.accumulate(rest, *v);
            }
        }
        out
    }

    /// Largest coefficient difference between two kernels of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m = 0.0f64;
        for (k, v) in &self.coeffs {
            m = m.max((v - other.coeffs.get(k).copied().unwrap_or(0.0)).abs());
        }
        for (k, v) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|_, v| v.abs() > tol);
        out
    }

    /// Full (unsymmetrized) expansion over every arrangement.
    pub fn to_plain(&self) -> PlainTensor {
        let mut entries = BTreeMap::new();
        for (k, v) in &self.coeffs {
            for p in distinct_permutations(k) {
                entries.insert(p, *v);
            }
        }
        PlainTensor {
            dim: self.dim,
            order: self.order,
            entries,
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.order != other.order {
            return Err(Error::Domain(format!(
                "kernel orders differ: {} vs {}",
                self.order, other.order
            )));
        }
        Ok(())
    }
}

/// A not-necessarily-symmetric tensor in `H^{⊗m}`, stored sparsely by full
/// index tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainTensor {
    dim: usize,
    order: usize,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl PlainTensor {
    pub fn zero(dim: usize, order: usize) -> Self {
        Self {
            dim,
            order,
            entries: BTreeMap::new(),
        }
    }

    /// `e_{i_1} ⊗ ... ⊗ e_{i_m}`.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut t = Self::zero(dim, indices.len());
        t.add_entry(indices, 1.0)?;
        Ok(t)
    }

    /// Row-major dense array of length `d^m`, first index most significant.
    pub fn from_dense(dim: usize, order: usize, data: &[f64]) -> Result<Self> {
        let len = dim.pow(order as u32);
        if data.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                found: data.len(),
            });
        }
        let mut t = Self::zero(dim, order);
        for (flat, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain("non-finite tensor entry".into()));
            }
            if v != 0.0 {
                let mut idx = vec![0; order];
                let mut rem = flat;
                for slot in idx.iter_mut().rev() {
                    *slot = rem % dim;
                    rem /= dim;
                }
                t.entries.insert(idx, v);
            }
        }
        Ok(t)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim.pow(self.order as u32)];
        for (idx, v) in &self.entries {
            let flat = idx.iter().fold(0, |acc, &i| acc * self.dim + i);
            out[flat] = *v;
        }
        out
    }

    pub fn add_entry(&mut self, idx: &[usize], value: f64) -> Result<()> {
        if idx.len() != self.order || idx.iter().any(|&i| i >= self.dim) {
            return Err(Error::Domain(format!("bad index tuple {idx:?}")));
        }
        if !value.is_finite() {
            return Err(Error::Domain("non-finite tensor entry".into()));
        }
        *self.entries.entry(idx.to_vec()).or_insert(0.0) += value;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries.get(idx).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.entries.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    /// `<self, s>_{H^{⊗m}}` against a symmetric kernel of the same order.
    pub fn inner_symmetric(&self, s: &SymmetricKernel) -> f64 {
        self.entries.iter().map(|(k, v)| v * s.get(k)).sum()
    }
}

/// Orthogonal projection onto symmetric tensors, `(1/m!) Σ_σ t∘σ`.
pub fn symmetrize(t: &PlainTensor) -> SymmetricKernel {
    let mut raw: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (idx, v) in &t.entries {
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        *raw.entry(sorted).or_insert(0.0) += v;
    }
    let mut out = SymmetricKernel::zero(t.dim, t.order);
    for (k, v) in raw {
        let c = v / arrangement_count(&k);
        out.accumulate(k, c);
    }
    out
}

fn check_contraction(f: &SymmetricKernel, g: &SymmetricKernel, r: usize) -> Result<()> {
    if f.dim != g.dim {
        return Err(Error::DimensionMismatch {
            expected: f.dim,
            found: g.dim,
        });
    }
    if r > f.order.min(g.order) {
        return Err(Error::ContractionRange {
            r,
            k: f.order,
            j: g.order,
        });
    }
    Ok(())
}

/// Visits every `(A, B, weight)` with `A = α − C`, `B = β − C` for each stored
/// pair `(α, β)` and each size-`r` sub-multiset `C` shared by both. The weight
/// is `c_α c_β` times the number of arrangements of `C`.
fn for_each_contraction_term<F>(f: &SymmetricKernel, g: &SymmetricKernel, r: usize, mut visit: F)
where
    F: FnMut(&[usize], &[usize], f64),
{
    let r_fact = factorial(r);
    for (alpha, ca) in &f.coeffs {
        let subs = sub_multisets(alpha, r);
        for (beta, cb) in &g.coeffs {
            for (c, a_rest) in &subs {
                if let Some(b_rest) = multiset_difference(beta, c) {
                    let c_arrangements = multiplicities(c)
                        .iter()
                        .fold(r_fact, |acc, &m| acc / factorial(m));
                    visit(a_rest, &b_rest, ca * cb * c_arrangements);
                }
            }
        }
    }
}

/// `f ⊗_r g`: sum over `r` paired basis indices. The first `k-r` slots of the
/// result carry `f`'s free indices, the last `j-r` carry `g`'s.
pub fn contract(f: &SymmetricKernel, g: &SymmetricKernel, r: usize) -> Result<PlainTensor> {
    check_contraction(f, g, r)?;
    let mut out = PlainTensor::zero(f.dim, f.order + g.order - 2 * r);
    for_each_contraction_term(f, g, r, |a, b, w| {
        for pa in distinct_permutations(a) {
            for pb in distinct_permutations(b) {
                let mut idx = pa.clone();
                idx.extend_from_slice(&pb);
                *out.entries.entry(idx).or_insert(0.0) += w;
            }
        }
    });
    out.entries.retain(|_, v| *v != 0.0);
    Ok(out)
}

/// `f ⊗̃_r g`, the symmetrized contraction.
///
/// Computed on sorted tuples: the full contraction depends on a free-index
/// arrangement only through the multisets `(A, B)`, and the symmetrization of
/// those entries onto `A + B` counts `arr(A) arr(B) / arr(A + B)` of them.
pub fn sym_contract(f: &SymmetricKernel, g: &SymmetricKernel, r: usize) -> Result<SymmetricKernel> {
    check_contraction(f, g, r)?;
    let mut raw: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for_each_contraction_term(f, g, r, |a, b, w| {
        let gamma = merge_sorted(a, b);
        *raw.entry(gamma).or_insert(0.0) += w * arrangement_count(a) * arrangement_count(b);
    });
    let mut out = SymmetricKernel::zero(f.dim, f.order + g.order - 2 * r);
    for (k, v) in raw {
        let c = v / arrangement_count(&k);
        out.accumulate(k, c);
    }
    Ok(out)
}

/// `‖f‖²_{H^{⊗k}}` (callers multiply by `k!` for the chaos isometry).
pub fn kernel_norm_sq(f: &SymmetricKernel) -> f64 {
    f.norm_sq()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_helpers() {
        assert_eq!(multiplicities(&[0, 0, 1, 2, 2, 2]), vec![2, 1, 3]);
        assert_eq!(arrangement_count(&[0, 0, 1]), 3.0);
        assert_eq!(distinct_permutations(&[0, 0, 1]).len(), 3);
        assert_eq!(distinct_permutations(&[0, 1, 2, 3]).len(), 24);
        assert_eq!(distinct_permutations(&[]).len(), 1);
        let subs = sub_multisets(&[0, 0, 1], 2);
        assert_eq!(subs.len(), 2);
        assert!(subs.contains(&(vec![0, 0], vec![1])));
        assert!(subs.contains(&(vec![0, 1], vec![0])));
        assert_eq!(
            multiset_difference(&[0, 1, 1, 2], &[1, 2]),
            Some(vec![0, 1])
        );
        assert_eq!(multiset_difference(&[0, 1], &[2]), None);
    }

    #[test]
    fn symmetrize_examples() {
        let t = PlainTensor::basis(2, &[0, 1]).unwrap();
        let s = symmetrize(&t);
        assert_eq!(s.get(&[0, 1]), 0.5);
        assert_eq!(s.nnz(), 1);

        let s = symmetrize(&PlainTensor::basis(2, &[0, 0]).unwrap());
        assert_eq!(s.get(&[0, 0]), 1.0);

        let s = symmetrize(&PlainTensor::basis(2, &[0, 1, 0]).unwrap());
        assert!((s.get(&[0, 0, 1]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let f = SymmetricKernel::from_entries(3, 3, [(vec![0, 1, 2], 0.7), (vec![1, 1, 0], -0.2)])
            .unwrap();
        let again = symmetrize(&f.to_plain());
        assert!(again.max_abs_diff(&f) < 1e-15);
    }

    #[test]
    fn contract_examples() {
        let e11 = SymmetricKernel::basis_power(2, 0, 2);
        let full = contract(&e11, &e11, 2).unwrap();
        assert_eq!(full.order(), 0);
        assert_eq!(full.get(&[]), 1.0);

        let one = contract(&e11, &e11, 1).unwrap();
        assert_eq!(one.get(&[0, 0]), 1.0);
        assert_eq!(one.iter().count(), 1);

        let f = SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap();
        let g = SymmetricKernel::basis_power(2, 1, 1);
        let prod = contract(&f, &g, 0).unwrap();
        assert_eq!(prod.get(&[0, 1, 1]), 0.5);
        assert_eq!(prod.get(&[1, 0, 1]), 0.5);
        assert_eq!(prod.iter().count(), 2);

        assert!(matches!(
            contract(&f, &g, 2),
            Err(Error::ContractionRange { r: 2, k: 2, j: 1 })
        ));
    }

    #[test]
    fn sym_contract_examples() {
        let f = SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap();
        let s = sym_contract(&f, &f, 1).unwrap();
        assert!((s.get(&[0, 0]) - 0.25).abs() < 1e-15);
        assert!((s.get(&[1, 1]) - 0.25).abs() < 1e-15);
        assert_eq!(s.get(&[0, 1]), 0.0);
        assert!((s.norm_sq() - 0.125).abs() < 1e-15);

        let e11 = SymmetricKernel::basis_power(2, 0, 2);
        assert_eq!(sym_contract(&e11, &e11, 1).unwrap(), e11);

        let s = sym_contract(&f, &f, 2).unwrap();
        assert!((s.scalar_value() - f.norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn kernel_norm_examples() {
        assert_eq!(kernel_norm_sq(&SymmetricKernel::basis_power(3, 0, 2)), 1.0);
        let f = SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap();
        assert_eq!(kernel_norm_sq(&f), 0.5);
        assert_eq!(kernel_norm_sq(&SymmetricKernel::zero(2, 3)), 0.0);
        assert!((f.to_plain().norm_sq() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order_zero_kernels_scale() {
        let a = SymmetricKernel::scalar(2, 3.0);
        let f = SymmetricKernel::symmetrized_basis(2, &[0, 1]).unwrap();
        let out = sym_contract(&a, &f, 0).unwrap();
        assert!(out.max_abs_diff(&f.scale(3.0)) < 1e-15);
    }

    #[test]
    fn slice_keeps_entries() {
        let f = SymmetricKernel::from_entries(2, 3, [(vec![0, 0, 1], 0.3), (vec![1, 1, 1], 2.0)])
            .unwrap();
        let s0 = f.slice(0);
        assert_eq!(s0.get(&[0, 1]), 0.3);
        assert_eq!(s0.nnz(), 1);
        let s1 = f.slice(1);
        assert_eq!(s1.get(&[0, 0]), 0.3);
        assert_eq!(s1.get(&[1, 1]), 2.0);
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(SymmetricKernel::from_entries(2, 2, [(vec![0, 2], 1.0)]).is_err());
        assert!(SymmetricKernel::from_entries(2, 2, [(vec![0], 1.0)]).is_err());
        assert!(PlainTensor::from_dense(2, 2, &[1.0, 2.0]).is_err());
    }
}
