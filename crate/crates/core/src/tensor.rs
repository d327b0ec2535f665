//! Sparse order-k tensors over `[n]^k`, their asymmetrized form, and the
//! matrix views (even flattening, odd slices) the certificates are built from.
//!
//! Indices are 0-based in memory. The text format is 1-based:
//!
//! ```text
//! tensor <k> <n>
//! i1 i2 ... ik value
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{distinct_permutations, orbit_size};
use crate::error::{invalid, Error, Result};

/// Matrices at or below this many entries may be stored densely.
pub const DENSE_THRESHOLD: usize = 4_000_000;

/// Structural flag carried by a [`Tensor`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symmetry {
    General,
    /// Invariant under every permutation of the index positions.
    Symmetric,
    /// Nonzero only at non-decreasing index tuples.
    LexFirst,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    entries: BTreeMap<Vec<usize>, f64>,
    symmetry: Symmetry,
}

impl Tensor {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        if order == 0 || dim == 0 {
            return invalid(format!("tensor needs order >= 1 and dimension >= 1 (got {order}, {dim})"));
        }
        Ok(Tensor { order, dim, entries: BTreeMap::new(), symmetry: Symmetry::General })
    }

    /// Builds a general tensor from `(index, value)` pairs; repeated indices accumulate.
    pub fn from_entries<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut t = Tensor::new(order, dim)?;
        for (idx, v) in entries {
            t.add(&idx, v)?;
        }
        Ok(t)
    }

    /// Builds a tensor and checks that it is symmetric.
    pub fn symmetric_from_entries<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        Tensor::from_entries(order, dim, entries)?.into_symmetric()
    }

    /// `v^{⊗k}`.
    pub fn rank_one(v: &[f64], order: usize) -> Result<Self> {
        let mut t = Tensor::new(order, v.len())?;
        let support: Vec<usize> = (0..v.len()).filter(|&i| v[i] != 0.0).collect();
        let mut idx = vec![0usize; order];
        for_each_tuple(support.len(), order, |pos| {
            let mut val = 1.0;
            for (slot, &p) in idx.iter_mut().zip(pos) {
                *slot = support[p];
                val *= v[support[p]];
            }
            t.entries.insert(idx.clone(), val);
        });
        t.symmetry = Symmetry::Symmetric;
        Ok(t)
    }

    /// Symmetrization of an order-k tensor with i.i.d. standard normal
    /// entries: each multiset orbit `O` receives one value `g / sqrt(|O|)`,
    /// which has the law of the orbit average of `|O|` independent normals.
    pub fn gaussian_symmetric<R: Rng + ?Sized>(order: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let mut t = Tensor::new(order, dim)?;
        let mut sorted = vec![0usize; order];
        loop {
            let g: f64 = rng.sample(StandardNormal);
            let val = g / (orbit_size(&sorted) as f64).sqrt();
            for p in distinct_permutations(&sorted) {
                t.entries.insert(p, val);
            }
            if !next_multiset(&mut sorted, dim) {
                break;
            }
        }
        t.symmetry = Symmetry::Symmetric;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|&v| v == 0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries.get(idx).copied().unwrap_or(0.0)
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.order {
            return Err(Error::DimensionMismatch { expected: self.order, actual: idx.len() });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.dim) {
            return invalid(format!("index component {bad} out of range for dimension {}", self.dim));
        }
        Ok(())
    }

    /// Adds `value` at `idx`. Clears any structural flag.
    pub fn add(&mut self, idx: &[usize], value: f64) -> Result<()> {
        self.check_index(idx)?;
        if !value.is_finite() {
            return invalid(format!("non-finite tensor entry at {idx:?}"));
        }
        let slot = self.entries.entry(idx.to_vec()).or_insert(0.0);
        *slot += value;
        if *slot == 0.0 {
            self.entries.remove(idx);
        }
        self.symmetry = Symmetry::General;
        Ok(())
    }

    /// Verifies symmetry and flags the tensor as symmetric.
    pub fn into_symmetric(mut self) -> Result<Self> {
        for (idx, &v) in &self.entries {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            for p in distinct_permutations(&sorted) {
                let other = self.entries.get(&p).copied().unwrap_or(0.0);
                if other != v {
                    return Err(Error::NotSymmetric { index: idx.clone(), other: p });
                }
            }
        }
        self.symmetry = Symmetry::Symmetric;
        Ok(self)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    /// `<T, x^{⊗k}>`.
    pub fn form(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        Ok(self.entries.iter().map(|(idx, v)| v * idx.iter().map(|&i| x[i]).product::<f64>()).sum())
    }

    /// The gradient `k * T(x, ..., x, ·)` of the form, assuming `T` symmetric.
    /// For general tensors this is the sum over all positions.
    pub fn form_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        for (idx, v) in &self.entries {
            for pos in 0..idx.len() {
                let rest: f64 =
                    idx.iter().enumerate().filter(|&(q, _)| q != pos).map(|(_, &i)| x[i]).product();
                g[idx[pos]] += v * rest;
            }
        }
        g
    }

    /// Moves the mass of every permutation orbit onto its non-decreasing
    /// representative, so that `<T, x^{⊗k}> = <A', x^{⊗k}>` for every `x`.
    pub fn asymmetrize(&self) -> Result<Tensor> {
        if self.symmetry != Symmetry::Symmetric {
            return invalid("asymmetrize requires a tensor flagged symmetric");
        }
        if self.order < 2 {
            return invalid("asymmetrize requires order >= 2");
        }
        let mut out = BTreeMap::new();
        for (idx, &v) in &self.entries {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            *out.entry(sorted).or_insert(0.0) += v;
        }
        out.retain(|_, v| *v != 0.0);
        Ok(Tensor { order: self.order, dim: self.dim, entries: out, symmetry: Symmetry::LexFirst })
    }

    /// The `n^{k/2} x n^{k/2}` matrix with rows indexed by the first half of the tuple.
    pub fn flatten_even(&self) -> Result<FlatMatrix> {
        if self.order % 2 != 0 {
            return invalid(format!("flatten_even needs an even order, got {}", self.order));
        }
        let half = self.order / 2;
        let side = checked_pow(self.dim, half)?;
        let triplets = self.entries.iter().map(|(idx, &v)| {
            (flat_index(&idx[..half], self.dim), flat_index(&idx[half..], self.dim), v)
        });
        FlatMatrix::from_triplets(side, side, triplets)
    }

    /// `T_{i, I, J}` as an `n^κ x n^κ` matrix, for odd order `2κ+1`.
    pub fn slice(&self, i: usize) -> Result<FlatMatrix> {
        if self.order % 2 == 0 {
            return invalid(format!("slice needs an odd order, got {}", self.order));
        }
        if i >= self.dim {
            return invalid(format!("slice index {i} out of range for dimension {}", self.dim));
        }
        let kappa = self.order / 2;
        let side = checked_pow(self.dim, kappa)?;
        let lo = vec![i];
        let triplets = self
            .entries
            .range(lo.clone()..)
            .take_while(|(idx, _)| idx[0] == i)
            .map(|(idx, &v)| {
                (flat_index(&idx[1..=kappa], self.dim), flat_index(&idx[kappa + 1..], self.dim), v)
            });
        FlatMatrix::from_triplets(side, side, triplets)
    }

    /// All slices along the first index as sparse triplet lists.
    pub(crate) fn slices_first(&self) -> Vec<Vec<(usize, usize, f64)>> {
        let kappa = self.order / 2;
        let mut out = vec![Vec::new(); self.dim];
        for (idx, &v) in &self.entries {
            out[idx[0]].push((flat_index(&idx[1..=kappa], self.dim), flat_index(&idx[kappa + 1..], self.dim), v));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("tensor {} {}\n", self.order, self.dim);
        for (idx, v) in &self.entries {
            for i in idx {
                let _ = write!(s, "{} ", i + 1);
            }
            let _ = writeln!(s, "{v:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        });
        let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "tensor" {
            return Err(Error::Parse { line: hline + 1, msg: "expected header `tensor k n`".into() });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| Error::Parse { line, msg: e.to_string() })
        };
        let order = parse_usize(parts[1], hline + 1)?;
        let dim = parse_usize(parts[2], hline + 1)?;
        let mut t = Tensor::new(order, dim)?;
        for (ln, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != order + 1 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("expected {} fields, found {}", order + 1, fields.len()),
                });
            }
            let mut idx = Vec::with_capacity(order);
            for f in &fields[..order] {
                let i = parse_usize(f, ln + 1)?;
                if i == 0 || i > dim {
                    return Err(Error::Parse { line: ln + 1, msg: format!("index {i} outside 1..={dim}") });
                }
                idx.push(i - 1);
            }
            let v: f64 = fields[order].parse().map_err(|e: std::num::ParseFloatError| Error::Parse {
                line: ln + 1,
                msg: e.to_string(),
            })?;
            t.add(&idx, v).map_err(|e| Error::Parse { line: ln + 1, msg: e.to_string() })?;
        }
        Ok(t)
    }
}

/// Row-major index of a tuple over `[n]`.
pub fn flat_index(tuple: &[usize], n: usize) -> usize {
    tuple.iter().fold(0, |acc, &i| acc * n + i)
}

/// Inverse of [`flat_index`] for a tuple of length `len`.
pub fn unflatten(mut f: usize, n: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = f % n;
        f /= n;
    }
    out
}

pub fn checked_pow(n: usize, e: usize) -> Result<usize> {
    n.checked_pow(e as u32)
        .ok_or_else(|| Error::Resource(format!("{n}^{e} does not fit in the address space")))
}

/// Advances a non-decreasing tuple over `[n]` to its lexicographic successor.
pub(crate) fn next_multiset(t: &mut [usize], n: usize) -> bool {
    let mut pos = t.len();
    while pos > 0 {
        pos -= 1;
        if t[pos] + 1 < n {
            let v = t[pos] + 1;
            for slot in &mut t[pos..] {
                *slot = v;
            }
            return true;
        }
    }
    false
}

/// Calls `f` on every tuple in `[n]^len`, in row-major order.
pub(crate) fn for_each_tuple(n: usize, len: usize, mut f: impl FnMut(&[usize])) {
    if n == 0 && len > 0 {
        return;
    }
    let mut t = vec![0usize; len];
    loop {
        f(&t);
        let mut pos = len;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            t[pos] += 1;
            if t[pos] < n {
                break;
            }
            t[pos] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse { indptr: Vec<usize>, indices: Vec<usize>, values: Vec<f64> },
}

/// A real matrix, dense (row-major) or CSR.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatMatrix {
    rows: usize,
    cols: usize,
    storage: Storage,
}

impl FlatMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FlatMatrix { rows, cols, storage: Storage::Sparse { indptr: vec![0; rows + 1], indices: vec![], values: vec![] } }
    }

    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(FlatMatrix { rows, cols, storage: Storage::Dense(data) })
    }

    /// Duplicate coordinates accumulate. Picks dense storage when the matrix
    /// is small enough and at least a quarter full.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return invalid(format!("entry ({r}, {c}) outside a {rows}x{cols} matrix"));
            }
            *map.entry((r, c)).or_insert(0.0) += v;
        }
        map.retain(|_, v| *v != 0.0);
        let total = rows.saturating_mul(cols);
        if total <= DENSE_THRESHOLD && map.len() * 4 >= total {
            let mut data = vec![0.0; total];
            for ((r, c), v) in map {
                data[r * cols + c] = v;
            }
            return Ok(FlatMatrix { rows, cols, storage: Storage::Dense(data) });
        }
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(map.len());
        let mut values = Vec::with_capacity(map.len());
        for ((r, c), v) in map {
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(FlatMatrix { rows, cols, storage: Storage::Sparse { indptr, indices, values } })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d[r * self.cols + c],
            Storage::Sparse { indptr, indices, values } => {
                let row = &indices[indptr[r]..indptr[r + 1]];
                row.binary_search(&c).map(|p| values[indptr[r] + p]).unwrap_or(0.0)
            }
        }
    }

    /// Nonzero entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> Vec<(usize, f64)> {
        match &self.storage {
            Storage::Dense(d) => d[r * self.cols..(r + 1) * self.cols]
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(c, &v)| (c, v))
                .collect(),
            Storage::Sparse { indptr, indices, values } => (indptr[r]..indptr[r + 1])
                .map(|p| (indices[p], values[p]))
                .collect(),
        }
    }

    /// All nonzero entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows).flat_map(|r| self.row(r).into_iter().map(move |(c, v)| (r, c, v))).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(d) => d.clone(),
            Storage::Sparse { .. } => {
                let mut d = vec![0.0; self.rows * self.cols];
                for (r, c, v) in self.triplets() {
                    d[r * self.cols + c] = v;
                }
                d
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        match &self.storage {
            Storage::Dense(d) => d.iter().map(|v| v * v).sum(),
            Storage::Sparse { values, .. } => values.iter().map(|v| v * v).sum(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        let mut y = vec![0.0; self.rows];
        for (r, slot) in y.iter_mut().enumerate() {
            *slot = self.row(r).iter().map(|&(c, v)| v * x[c]).sum();
        }
        Ok(y)
    }

    pub fn transpose(&self) -> FlatMatrix {
        let t = self.triplets().into_iter().map(|(r, c, v)| (c, r, v));
        FlatMatrix::from_triplets(self.cols, self.rows, t).expect("transposed coordinates are in range")
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self.triplets().iter().all(|&(r, c, v)| (self.get(c, r) - v).abs() <= tol)
    }

    /// Debug dump in the tensor text format, as an order-2 tensor.
    pub fn to_text(&self) -> String {
        let mut s = format!("tensor 2 {}\n", self.rows.max(self.cols));
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {v:?}", r + 1, c + 1);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(order: usize, dim: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::gaussian_symmetric(order, dim, &mut rng).unwrap()
    }

    #[test]
    fn asymmetrize_two_tensor() {
        let t = Tensor::symmetric_from_entries(2, 2, vec![(vec![0, 1], 1.0), (vec![1, 0], 1.0)]).unwrap();
        let a = t.asymmetrize().unwrap();
        assert_eq!(a.get(&[0, 1]), 2.0);
        assert_eq!(a.get(&[1, 0]), 0.0);
        assert_eq!(a.symmetry(), Symmetry::LexFirst);
    }

    #[test]
    fn asymmetrize_zero() {
        let t = Tensor::new(3, 4).unwrap().into_symmetric().unwrap();
        assert!(t.asymmetrize().unwrap().is_zero());
    }

    #[test]
    fn asymmetrize_rejects_general() {
        let t = Tensor::from_entries(2, 2, vec![(vec![0, 1], 1.0)]).unwrap();
        assert!(t.clone().into_symmetric().is_err());
        assert!(t.asymmetrize().is_err());
    }

    #[test]
    fn asymmetrize_preserves_form_on_ones() {
        let t = random_symmetric(3, 5, 11);
        let a = t.asymmetrize().unwrap();
        let x = vec![1.0; 5];
        let lhs = t.form(&x).unwrap();
        let rhs = a.form(&x).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn asymmetrize_preserves_form_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for seed in 0..5 {
            let t = random_symmetric(4, 4, seed);
            let a = t.asymmetrize().unwrap();
            for _ in 0..100 {
                let x: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
                let lhs = t.form(&x).unwrap();
                let rhs = a.form(&x).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            }
        }
    }

    #[test]
    fn flatten_order_two_is_identity_view() {
        let t = Tensor::from_entries(2, 3, vec![(vec![0, 2], 4.0), (vec![1, 1], -1.0)]).unwrap();
        let m = t.flatten_even().unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 3));
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.get(1, 1), -1.0);
        assert_eq!(m.get(2, 0), 0.0);
    }

    #[test]
    fn flatten_order_four_single_entry() {
        // (1,2,3,4) in 1-based terms
        let t = Tensor::from_entries(4, 4, vec![(vec![0, 1, 2, 3], 5.0)]).unwrap();
        let m = t.flatten_even().unwrap();
        assert_eq!(m.get(flat_index(&[0, 1], 4), flat_index(&[2, 3], 4)), 5.0);
        assert_eq!(m.triplets().len(), 1);
    }

    #[test]
    fn flatten_preserves_frobenius() {
        let t = random_symmetric(4, 3, 5);
        let m = t.flatten_even().unwrap();
        assert!((t.frobenius_sq() - m.frobenius_sq()).abs() < 1e-12);
        assert!(Tensor::new(3, 2).unwrap().flatten_even().is_err());
    }

    #[test]
    fn slices_of_order_three() {
        let t = random_symmetric(3, 4, 9);
        for i in 0..4 {
            let s = t.slice(i).unwrap();
            for a in 0..4 {
                for b in 0..4 {
                    assert_eq!(s.get(a, b), t.get(&[i, a, b]));
                }
            }
        }
        let total: f64 = (0..4).map(|i| t.slice(i).unwrap().frobenius_sq()).sum();
        assert!((total - t.frobenius_sq()).abs() < 1e-12);
        assert!(t.slice(4).is_err());
        assert!(Tensor::new(2, 3).unwrap().slice(0).is_err());
    }

    #[test]
    fn zero_slice() {
        let t = Tensor::new(5, 2).unwrap();
        let s = t.slice(1).unwrap();
        assert_eq!(s.frobenius_sq(), 0.0);
        assert_eq!((s.rows(), s.cols()), (4, 4));
    }

    #[test]
    fn rank_one_form() {
        let v = [0.6, 0.0, 0.8];
        let t = Tensor::rank_one(&v, 3).unwrap();
        assert!((t.form(&v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(t.symmetry(), Symmetry::Symmetric);
    }

    #[test]
    fn text_round_trip() {
        let t = random_symmetric(3, 3, 1);
        let back = Tensor::from_text(&t.to_text()).unwrap();
        assert_eq!(back.entries().count(), t.entries().count());
        for (idx, v) in t.entries() {
            assert_eq!(back.get(idx), v);
        }
        assert!(Tensor::from_text("tensor 2 2\n0 1 1.0\n").is_err());
        assert!(Tensor::from_text("matrix 2 2\n").is_err());
    }
}
