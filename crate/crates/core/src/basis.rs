//! Orthonormal basis of the symmetric subspace of `(R^n)^{⊗r}`, restricted to
//! multisets in which no symbol repeats more than a cap.
//!
//! Basis vector `U` (a non-decreasing tuple) is the normalized indicator of
//! its permutation orbit: `e_U = |O_U|^{-1/2} Σ_{I ∈ O_U} e_I`.

use crate::error::{invalid, Error, Result};
use crate::tensor::checked_pow;

/// Marker in the full-index map for tuples that violate the cap.
pub const MASKED: u32 = u32::MAX;

/// `r! / Π mult!` for a tuple (any order).
pub fn orbit_size(tuple: &[usize]) -> u64 {
    let mut sorted = tuple.to_vec();
    sorted.sort_unstable();
    let mut total: u64 = 1;
    let mut run = 0u64;
    for (pos, w) in sorted.iter().enumerate() {
        if pos > 0 && sorted[pos - 1] == *w {
            run += 1;
        } else {
            run = 1;
        }
        // Multiply by (pos+1) then divide by run keeps everything integral.
        total = total * (pos as u64 + 1) / run;
    }
    total
}

/// All distinct rearrangements of `tuple`, in lexicographic order.
pub fn distinct_permutations(tuple: &[usize]) -> Vec<Vec<usize>> {
    let mut cur = tuple.to_vec();
    cur.sort_unstable();
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Largest multiplicity of any symbol in the tuple.
pub fn max_multiplicity(tuple: &[usize]) -> usize {
    let mut sorted = tuple.to_vec();
    sorted.sort_unstable();
    let mut best = 0;
    let mut run = 0;
    for (pos, w) in sorted.iter().enumerate() {
        run = if pos > 0 && sorted[pos - 1] == *w { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

#[derive(Clone, Debug)]
pub struct MultisetBasis {
    dim: usize,
    len: usize,
    cap: Option<usize>,
    tuples: Vec<u32>,
    orbits: Vec<u64>,
}

impl MultisetBasis {
    /// Non-decreasing `len`-tuples over `[dim]` with every multiplicity at most `cap`.
    pub fn new(dim: usize, len: usize, cap: Option<usize>) -> Result<Self> {
        if dim == 0 || len == 0 {
            return invalid(format!("basis needs n >= 1 and r >= 1 (got {dim}, {len})"));
        }
        if len > 20 {
            return invalid(format!("tuple length {len} exceeds the supported maximum of 20"));
        }
        if dim > MASKED as usize {
            return invalid("dimension does not fit in 32 bits");
        }
        if cap == Some(0) {
            return invalid("multiplicity cap must be at least 1");
        }
        let limit = cap.unwrap_or(len).min(len);
        let mut tuples = Vec::new();
        let mut orbits = Vec::new();
        let mut t = vec![0usize; len];
        // Odometer over non-decreasing tuples, skipping ones that break the cap.
        loop {
            if max_multiplicity(&t) <= limit {
                tuples.extend(t.iter().map(|&x| x as u32));
                orbits.push(orbit_size(&t));
            }
            if !crate::tensor::next_multiset(&mut t, dim) {
                break;
            }
        }
        Ok(MultisetBasis { dim, len, cap, tuples, orbits })
    }

    /// Size without enumerating: number of capped multisets of size `len` over `[dim]`.
    pub fn count(dim: usize, len: usize, cap: Option<usize>) -> u128 {
        let c = cap.unwrap_or(len).min(len);
        // dp[s] = number of ways to reach total size s using the symbols seen so far.
        let mut dp = vec![0u128; len + 1];
        dp[0] = 1;
        for _ in 0..dim {
            let mut next = vec![0u128; len + 1];
            for s in 0..=len {
                if dp[s] == 0 {
                    continue;
                }
                for m in 0..=c.min(len - s) {
                    next[s + m] = next[s + m].saturating_add(dp[s]);
                }
            }
            dp = next;
        }
        dp[len]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tuple_len(&self) -> usize {
        self.len
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn tuple(&self, i: usize) -> Vec<usize> {
        self.tuples[i * self.len..(i + 1) * self.len].iter().map(|&x| x as usize).collect()
    }

    pub fn orbit(&self, i: usize) -> u64 {
        self.orbits[i]
    }

    pub fn obeys_cap(&self, tuple: &[usize]) -> bool {
        self.cap.map_or(true, |c| max_multiplicity(tuple) <= c)
    }

    /// Position of the basis element whose multiset matches `tuple` (any order).
    pub fn position(&self, tuple: &[usize]) -> Option<usize> {
        if tuple.len() != self.len {
            return None;
        }
        let mut key: Vec<u32> = tuple.iter().map(|&x| x as u32).collect();
        key.sort_unstable();
        let (mut lo, mut hi) = (0usize, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let probe = &self.tuples[mid * self.len..(mid + 1) * self.len];
            match probe.cmp(key.as_slice()) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// `n^r`, the dimension of the full tensor space.
    pub fn full_len(&self) -> Result<usize> {
        checked_pow(self.dim, self.len)
    }

    /// For every row-major index of `[n]^r`, the basis position of its
    /// multiset, or [`MASKED`].
    pub fn full_index_map(&self) -> Result<Vec<u32>> {
        let total = self.full_len()?;
        if self.len() >= MASKED as usize {
            return Err(Error::Resource("basis too large for a 32-bit index map".into()));
        }
        let mut map = Vec::with_capacity(total);
        let mut t = vec![0usize; self.len];
        let mut sorted = vec![0usize; self.len];
        for _ in 0..total {
            sorted.copy_from_slice(&t);
            sorted.sort_unstable();
            map.push(self.position(&sorted).map_or(MASKED, |p| p as u32));
            for pos in (0..self.len).rev() {
                t[pos] += 1;
                if t[pos] < self.dim {
                    break;
                }
                t[pos] = 0;
            }
        }
        Ok(map)
    }

    /// `B^T v`: projects a full-space vector onto the basis coordinates.
    pub fn compress(&self, v: &[f64]) -> Result<Vec<f64>> {
        let map = self.full_index_map()?;
        self.compress_with(&map, v)
    }

    /// `B w`: the symmetric full-space vector with the given coordinates.
    pub fn lift(&self, w: &[f64]) -> Result<Vec<f64>> {
        let map = self.full_index_map()?;
        self.lift_with(&map, w)
    }

    pub(crate) fn compress_with(&self, map: &[u32], v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != map.len() {
            return Err(Error::DimensionMismatch { expected: map.len(), actual: v.len() });
        }
        let mut w = vec![0.0; self.len()];
        for (&u, &x) in map.iter().zip(v) {
            if u != MASKED {
                w[u as usize] += x;
            }
        }
        for (slot, &o) in w.iter_mut().zip(&self.orbits) {
            *slot /= (o as f64).sqrt();
        }
        Ok(w)
    }

    pub(crate) fn lift_with(&self, map: &[u32], w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: w.len() });
        }
        let scaled: Vec<f64> = w.iter().zip(&self.orbits).map(|(&x, &o)| x / (o as f64).sqrt()).collect();
        Ok(map.iter().map(|&u| if u == MASKED { 0.0 } else { scaled[u as usize] }).collect())
    }
}
