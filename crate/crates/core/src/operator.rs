//! Certificate operators: symmetrized, multiplicity-masked Kronecker powers of
//! a base matrix, acting on the compressed symmetric basis.
//!
//! For a base matrix `M` over `[n]^b` and level `d`, the operator is
//! `B^T M^{⊗d} B` where `B` lifts the capped multiset basis of length `b·d`
//! into `(R^n)^{⊗bd}`. Applying it never forms `M^{⊗d}`: the lifted vector
//! is pushed through `d` mode products with the sparse base.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{distinct_permutations, MultisetBasis, MASKED};
use crate::error::{invalid, Error, Result};
use crate::spectral::LinearOperator;
use crate::tensor::{checked_pow, flat_index, unflatten, FlatMatrix, Symmetry, Tensor};
use crate::xor::XorInstance;

/// Default limit on `n^{b·d}`, the length of a lifted vector.
pub const DEFAULT_MAX_FULL_LEN: usize = 1 << 24;
/// Default limit on the compressed dimension for dense materialization.
pub const DEFAULT_MAX_DENSE_DIM: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    EvenTensor,
    OddTensor,
    EvenXor,
    OddXor,
}

/// Which entries of `Σ_i A_i ⊗ A_i` are discarded as "squares".
///
/// With row `(a, b)` and column `(c, d)` the entry pairs `A_i(a, c)` with
/// `A_i(b, d)`. `OrderedPair` drops it when `(a, c) = (b, d)`;
/// `Multiset` drops it when `a ∪ c` and `b ∪ d` are equal as multisets.
/// Both only remove terms whose monomial is a perfect square.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterVariant {
    #[default]
    OrderedPair,
    Multiset,
}

impl FilterVariant {
    pub fn removes(self, a: &[usize], c: &[usize], b: &[usize], d: &[usize]) -> bool {
        match self {
            FilterVariant::OrderedPair => a == b && c == d,
            FilterVariant::Multiset => multiset_key(a, c) == multiset_key(b, d),
        }
    }
}

fn multiset_key(a: &[usize], c: &[usize]) -> Vec<usize> {
    let mut k: Vec<usize> = a.iter().chain(c).copied().collect();
    k.sort_unstable();
    k
}

#[derive(Clone, Debug)]
pub struct OperatorConfig {
    pub level: usize,
    /// Multiplicity cap for row/column multisets (and center tuples for odd XOR).
    pub cap: Option<usize>,
    pub filter: FilterVariant,
    pub max_full_len: usize,
}

impl OperatorConfig {
    pub fn new(level: usize) -> Self {
        OperatorConfig { level, cap: None, filter: FilterVariant::default(), max_full_len: DEFAULT_MAX_FULL_LEN }
    }

    pub fn with_cap(mut self, cap: Option<usize>) -> Self {
        self.cap = cap;
        self
    }

    pub fn with_filter(mut self, filter: FilterVariant) -> Self {
        self.filter = filter;
        self
    }
}

/// Square CSR matrix with its transpose kept alongside.
#[derive(Clone, Debug)]
pub(crate) struct SparseSquare {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSquare {
    pub(crate) fn from_triplets(dim: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; dim + 1];
        let mut indices: Vec<usize> = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut rows: Vec<usize> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            values.push(v);
        }
        // Drop exact cancellations so sparsity reflects the true support.
        let mut keep_r = Vec::with_capacity(rows.len());
        let mut keep_c = Vec::with_capacity(rows.len());
        let mut keep_v = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != 0.0 {
                keep_r.push(r);
                keep_c.push(c);
                keep_v.push(v);
            }
        }
        for &r in &keep_r {
            indptr[r + 1] += 1;
        }
        for r in 0..dim {
            indptr[r + 1] += indptr[r];
        }
        SparseSquare { dim, indptr, indices: keep_c, values: keep_v }
    }

    fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.values.len());
        for r in 0..self.dim {
            for p in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[p], self.values[p]));
            }
        }
        out
    }

    fn transpose(&self) -> Self {
        SparseSquare::from_triplets(self.dim, self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect())
    }

    fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[r]..self.indptr[r + 1]).map(move |p| (self.indices[p], self.values[p]))
    }

    /// Multiplies mode `mode` (of `modes`) of the tensor `x` by this matrix.
    fn mode_product(&self, x: &[f64], mode: usize, modes: usize) -> Vec<f64> {
        let n = self.dim;
        let inner = n.pow((modes - mode - 1) as u32);
        let mut out = vec![0.0; x.len()];
        let min_len = (4096 / inner.max(1)).max(1);
        out.par_chunks_mut(inner).with_min_len(min_len).enumerate().for_each(|(chunk, dst)| {
            let outer = chunk / n;
            let i = chunk % n;
            for (j, v) in self.row(i) {
                let start = (outer * n + j) * inner;
                for (o, s) in dst.iter_mut().zip(&x[start..start + inner]) {
                    *o += v * s;
                }
            }
        });
        out
    }
}

#[derive(Clone, Debug)]
enum Base {
    /// `M^{⊗d}` with the same `M` on every mode.
    Kron { m: SparseSquare, mt: SparseSquare },
    /// `Σ_U ⊗_ℓ G_{u_ℓ}` over center tuples `U` with per-symbol count at most `cap`.
    Centered { slices: Vec<SparseSquare>, slices_t: Vec<SparseSquare>, cap: usize },
}

#[derive(Clone, Debug)]
pub struct CertificateOperator {
    kind: OperatorKind,
    level: usize,
    arity: usize,
    block: usize,
    base_dim: usize,
    basis: MultisetBasis,
    map: Vec<u32>,
    base: Base,
    filter: Option<FilterVariant>,
}

/// Extra data the odd certificates need to turn a norm into a bound.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OddCorrection {
    /// Largest total weight of the removed square terms at a single position.
    pub max_slice_energy: f64,
    /// Clause count `m` of the source instance (XOR kind).
    pub clauses: usize,
    /// `m'`: ordered pairs of distinct clauses sharing their last variable.
    pub pair_clauses: usize,
    /// Sum of all removed entries of `Σ_u T_u ⊗ T_u`.
    pub removed_mass: f64,
}

impl CertificateOperator {
    fn assemble(
        kind: OperatorKind,
        arity: usize,
        block: usize,
        dim: usize,
        base: Base,
        filter: Option<FilterVariant>,
        cfg: &OperatorConfig,
    ) -> Result<Self> {
        if cfg.level == 0 {
            return invalid("level d must be at least 1");
        }
        let len = block * cfg.level;
        let full = checked_pow(dim, len)?;
        if full > cfg.max_full_len {
            return Err(Error::Resource(format!(
                "n^(b*d) = {dim}^{len} = {full} exceeds the budget of {}",
                cfg.max_full_len
            )));
        }
        let basis = MultisetBasis::new(dim, len, cfg.cap)?;
        let map = basis.full_index_map()?;
        let base_dim = checked_pow(dim, block)?;
        Ok(CertificateOperator { kind, level: cfg.level, arity, block, base_dim, basis, map, base, filter })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn basis(&self) -> &MultisetBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn filter(&self) -> Option<FilterVariant> {
        self.filter
    }

    /// Whether every base entry is zero.
    pub fn base_is_zero(&self) -> bool {
        match &self.base {
            Base::Kron { m, .. } => m.nnz() == 0,
            Base::Centered { slices, .. } => slices.iter().all(|s| s.nnz() == 0),
        }
    }

    /// Dense base matrix for `d = 1` style inspection (`n^b x n^b`).
    pub fn base_matrix(&self) -> Result<FlatMatrix> {
        let t = match &self.base {
            Base::Kron { m, .. } => m.triplets(),
            Base::Centered { slices, .. } => slices.iter().flat_map(|s| s.triplets()).collect(),
        };
        FlatMatrix::from_triplets(self.base_dim, self.base_dim, t)
    }

    fn run(&self, v: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: v.len() });
        }
        let x = self.basis.lift_with(&self.map, v)?;
        let y = match &self.base {
            Base::Kron { m, mt } => {
                let mat = if transpose { mt } else { m };
                let mut x = x;
                for mode in 0..self.level {
                    x = mat.mode_product(&x, mode, self.level);
                }
                x
            }
            Base::Centered { slices, slices_t, cap } => {
                let mats = if transpose { slices_t } else { slices };
                let mut acc = vec![0.0; x.len()];
                let mut counts = vec![0usize; mats.len()];
                self.centered(mats, *cap, &x, 0, &mut counts, &mut acc);
                acc
            }
        };
        self.basis.compress_with(&self.map, &y)
    }

    fn centered(
        &self,
        mats: &[SparseSquare],
        cap: usize,
        x: &[f64],
        mode: usize,
        counts: &mut [usize],
        acc: &mut [f64],
    ) {
        if mode == self.level {
            for (a, b) in acc.iter_mut().zip(x) {
                *a += b;
            }
            return;
        }
        for u in 0..mats.len() {
            if counts[u] >= cap || mats[u].nnz() == 0 {
                continue;
            }
            let y = mats[u].mode_product(x, mode, self.level);
            counts[u] += 1;
            self.centered(mats, cap, &y, mode + 1, counts, acc);
            counts[u] -= 1;
        }
    }

    /// `B^T M^{⊗d} B v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.run(v, false)
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.run(v, true)
    }

    /// Dense matrix in the compressed basis (row-major, `dim x dim`).
    pub fn materialize_dense(&self, max_dim: usize) -> Result<FlatMatrix> {
        let dim = self.dim();
        if dim > max_dim {
            return Err(Error::Resource(format!("compressed dimension {dim} exceeds the dense limit {max_dim}")));
        }
        let columns: Vec<Vec<f64>> = match &self.base {
            Base::Kron { mt, .. } => (0..dim).into_par_iter().map(|u| self.kron_column(mt, u)).collect(),
            Base::Centered { slices_t, cap, .. } => {
                (0..dim).into_par_iter().map(|u| self.centered_column(slices_t, *cap, u)).collect()
            }
        };
        let mut data = vec![0.0; dim * dim];
        for (c, col) in columns.iter().enumerate() {
            for (r, &v) in col.iter().enumerate() {
                data[r * dim + c] = v;
            }
        }
        FlatMatrix::from_dense(dim, dim, data)
    }

    /// Column `u` via the orbit of its tuple and the sparse columns of `M`
    /// (rows of `mt`).
    fn kron_column(&self, mt: &SparseSquare, u: usize) -> Vec<f64> {
        let dim = self.dim();
        let mut col = vec![0.0; dim];
        let tuple = self.basis.tuple(u);
        let scale = 1.0 / (self.basis.orbit(u) as f64).sqrt();
        let mut blocks = vec![0usize; self.level];
        for perm in distinct_permutations(&tuple) {
            for (l, slot) in blocks.iter_mut().enumerate() {
                *slot = flat_index(&perm[l * self.block..(l + 1) * self.block], self.basis.dim());
            }
            self.expand_rows(mt, &blocks, 0, 0, scale, &mut col);
        }
        col
    }

    /// Column `u` of the center-restricted operator: like [`Self::kron_column`],
    /// with every mode choosing its own slice subject to the cap.
    fn centered_column(&self, slices_t: &[SparseSquare], cap: usize, u: usize) -> Vec<f64> {
        let mut col = vec![0.0; self.dim()];
        let tuple = self.basis.tuple(u);
        let scale = 1.0 / (self.basis.orbit(u) as f64).sqrt();
        let mut blocks = vec![0usize; self.level];
        let mut counts = vec![0usize; slices_t.len()];
        for perm in distinct_permutations(&tuple) {
            for (l, slot) in blocks.iter_mut().enumerate() {
                *slot = flat_index(&perm[l * self.block..(l + 1) * self.block], self.basis.dim());
            }
            self.expand_centered(slices_t, cap, &blocks, 0, 0, scale, &mut counts, &mut col);
        }
        col
    }

    #[allow(clippy::too_many_arguments)]
    fn expand_centered(
        &self,
        slices_t: &[SparseSquare],
        cap: usize,
        blocks: &[usize],
        mode: usize,
        f: usize,
        w: f64,
        counts: &mut [usize],
        col: &mut [f64],
    ) {
        if mode == self.level {
            let r = self.map[f];
            if r != MASKED {
                col[r as usize] += w / (self.basis.orbit(r as usize) as f64).sqrt();
            }
            return;
        }
        for (s, mt) in slices_t.iter().enumerate() {
            if counts[s] >= cap {
                continue;
            }
            counts[s] += 1;
            for (i, v) in mt.row(blocks[mode]) {
                self.expand_centered(slices_t, cap, blocks, mode + 1, f * self.base_dim + i, w * v, counts, col);
            }
            counts[s] -= 1;
        }
    }

    fn expand_rows(&self, mt: &SparseSquare, blocks: &[usize], mode: usize, f: usize, w: f64, col: &mut [f64]) {
        if mode == self.level {
            let r = self.map[f];
            if r != MASKED {
                col[r as usize] += w / (self.basis.orbit(r as usize) as f64).sqrt();
            }
            return;
        }
        for (i, v) in mt.row(blocks[mode]) {
            self.expand_rows(mt, blocks, mode + 1, f * self.base_dim + i, w * v, col);
        }
    }
}

impl LinearOperator for CertificateOperator {
    fn nrows(&self) -> usize {
        self.dim()
    }

    fn ncols(&self) -> usize {
        self.dim()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        CertificateOperator::apply(self, v)
    }

    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        CertificateOperator::apply_transpose(self, v)
    }

    fn materialize(&self, max_dim: usize) -> Result<FlatMatrix> {
        self.materialize_dense(max_dim)
    }
}

fn kron_base(dim: usize, t: Vec<(usize, usize, f64)>) -> Base {
    let m = SparseSquare::from_triplets(dim, t);
    let mt = m.transpose();
    Base::Kron { m, mt }
}

/// `A^{⊗d}` certificate for an even-order symmetric tensor, with
/// `A = flatten_even(asymmetrize(T))`.
pub fn build_even_tensor_certificate(t: &Tensor, cfg: &OperatorConfig) -> Result<CertificateOperator> {
    if t.order() % 2 != 0 {
        return invalid(format!("even tensor certificate needs an even order, got {}", t.order()));
    }
    let a = t.asymmetrize()?.flatten_even()?;
    let side = a.rows();
    let base = kron_base(side, a.triplets());
    CertificateOperator::assemble(OperatorKind::EvenTensor, t.order(), t.order() / 2, t.dim(), base, None, cfg)
}

/// `C_(d)` for an even-arity XOR instance: the flattened instance tensor
/// (duplicate tuples summed), no asymmetrization.
pub fn build_even_xor_certificate(inst: &XorInstance, cfg: &OperatorConfig) -> Result<CertificateOperator> {
    let k = inst.arity();
    if k % 2 != 0 {
        return invalid(format!("even XOR certificate needs even arity, got {k}"));
    }
    let n = inst.num_vars();
    let half = k / 2;
    let side = checked_pow(n, half)?;
    let t: Vec<_> = inst
        .clauses()
        .iter()
        .map(|c| (flat_index(&c.vars[..half], n), flat_index(&c.vars[half..], n), c.sign as f64))
        .collect();
    CertificateOperator::assemble(OperatorKind::EvenXor, k, half, n, kron_base(side, t), None, cfg)
}

/// Pairs each slice with itself: `G_i = A_i ⊗ A_i` minus the filtered
/// squares. Returns the filtered slices, the per-position removed weight
/// maximum, and the total removed mass.
fn pair_slices(
    slices: &[Vec<(usize, usize, f64)>],
    n: usize,
    kappa: usize,
    filter: FilterVariant,
) -> Result<(Vec<Vec<(usize, usize, f64)>>, f64, f64)> {
    let side = checked_pow(n, kappa)?;
    let mut removed_mass = 0.0;
    let mut energy: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut out = Vec::with_capacity(slices.len());
    for entries in slices {
        let mut merged: HashMap<(usize, usize), f64> = HashMap::new();
        for &(a, c, v) in entries {
            *merged.entry((a, c)).or_insert(0.0) += v;
        }
        let mut list: Vec<((usize, usize), f64)> = merged.into_iter().filter(|(_, v)| *v != 0.0).collect();
        list.sort_unstable_by(|x, y| x.0.cmp(&y.0));
        let keys: Vec<Vec<usize>> = list
            .iter()
            .map(|&((a, c), _)| match filter {
                FilterVariant::OrderedPair => vec![a, c],
                FilterVariant::Multiset => multiset_key(&unflatten(a, n, kappa), &unflatten(c, n, kappa)),
            })
            .collect();
        let mut group: HashMap<&[usize], f64> = HashMap::new();
        for (key, &(_, v)) in keys.iter().zip(&list) {
            *group.entry(key.as_slice()).or_insert(0.0) += v;
        }
        for (key, s) in group {
            *energy.entry(key.to_vec()).or_insert(0.0) += s * s;
        }
        let mut g = Vec::new();
        for (p, &((a, c), v1)) in list.iter().enumerate() {
            for (q, &((b, d), v2)) in list.iter().enumerate() {
                if keys[p] == keys[q] {
                    removed_mass += v1 * v2;
                } else {
                    g.push((a * side + b, c * side + d, v1 * v2));
                }
            }
        }
        out.push(g);
    }
    let max_energy = energy.values().copied().fold(0.0, f64::max);
    Ok((out, max_energy, removed_mass))
}

/// Certificate for an odd-order symmetric tensor via the slices of its
/// asymmetrized form. The tensor-norm bound is
/// `(‖op‖^{1/d} + correction.max_slice_energy)^{1/2}`.
pub fn build_odd_tensor_certificate(
    t: &Tensor,
    cfg: &OperatorConfig,
) -> Result<(CertificateOperator, OddCorrection)> {
    if t.order() % 2 == 0 {
        return invalid(format!("odd tensor certificate needs an odd order, got {}", t.order()));
    }
    if t.symmetry() != Symmetry::Symmetric {
        return invalid("odd tensor certificate requires a symmetric tensor");
    }
    let kappa = t.order() / 2;
    let a = t.asymmetrize()?;
    let (paired, energy, removed) = pair_slices(&a.slices_first(), t.dim(), kappa, cfg.filter)?;
    let side = checked_pow(t.dim(), 2 * kappa)?;
    let base = kron_base(side, paired.into_iter().flatten().collect());
    let op =
        CertificateOperator::assemble(OperatorKind::OddTensor, t.order(), 2 * kappa, t.dim(), base, Some(cfg.filter), cfg)?;
    Ok((op, OddCorrection { max_slice_energy: energy, clauses: 0, pair_clauses: 0, removed_mass: removed }))
}

/// `Γ_(d)` for an odd-arity XOR instance, slicing on the last variable.
/// When `d` is at most the cap, the center restriction is vacuous and a
/// single summed base is used.
pub fn build_odd_xor_certificate(
    inst: &XorInstance,
    cfg: &OperatorConfig,
) -> Result<(CertificateOperator, OddCorrection)> {
    let k = inst.arity();
    if k % 2 == 0 {
        return invalid(format!("odd XOR certificate needs odd arity, got {k}"));
    }
    let n = inst.num_vars();
    let kappa = k / 2;
    let mut slices = vec![Vec::new(); n];
    for c in inst.clauses() {
        slices[c.vars[k - 1]].push((
            flat_index(&c.vars[..kappa], n),
            flat_index(&c.vars[kappa..2 * kappa], n),
            c.sign as f64,
        ));
    }
    let (paired, energy, removed) = pair_slices(&slices, n, kappa, cfg.filter)?;
    let side = checked_pow(n, 2 * kappa)?;
    let base = match cfg.cap {
        Some(cap) if cap < cfg.level => {
            let mats: Vec<SparseSquare> = paired.into_iter().map(|g| SparseSquare::from_triplets(side, g)).collect();
            let mats_t = mats.iter().map(SparseSquare::transpose).collect();
            Base::Centered { slices: mats, slices_t: mats_t, cap }
        }
        _ => kron_base(side, paired.into_iter().flatten().collect()),
    };
    let op = CertificateOperator::assemble(OperatorKind::OddXor, k, 2 * kappa, n, base, Some(cfg.filter), cfg)?;
    let stats = inst.stats();
    Ok((
        op,
        OddCorrection {
            max_slice_energy: energy,
            clauses: inst.len(),
            pair_clauses: stats.pair.map_or(0, |p| p.m_prime),
            removed_mass: removed,
        },
    ))
}
