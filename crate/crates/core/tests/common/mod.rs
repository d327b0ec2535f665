//! Independent dense constructions used as test oracles. Everything here is
//! built in the full tensor space by brute force: explicit permutation
//! averaging, explicit masks, explicit squares removal.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num::rational::BigRational;
use num::{BigInt, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcert_core::{FilterVariant, Tensor, XorInstance};

pub fn all_tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out.into_iter().flat_map(|t| (0..n).map(move |i| [t.clone(), vec![i]].concat())).collect();
    }
    out
}

pub fn flat(t: &[usize], n: usize) -> usize {
    t.iter().fold(0, |a, &i| a * n + i)
}

pub fn max_mult(t: &[usize]) -> usize {
    let mut s = t.to_vec();
    s.sort_unstable();
    let mut best = 0;
    let mut run = 0;
    for i in 0..s.len() {
        run = if i > 0 && s[i] == s[i - 1] { run + 1 } else { 1 };
        best = best.max(run);
    }
    best
}

pub fn permutations(len: usize) -> Vec<Vec<usize>> {
    if len == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(len - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, len - 1);
            out.push(q);
        }
    }
    out
}

/// `E_σ[P_σ]` over all permutations of `len` positions.
pub fn symmetrizer(n: usize, len: usize) -> DMatrix<f64> {
    let size = n.pow(len as u32);
    let perms = permutations(len);
    let w = 1.0 / perms.len() as f64;
    let mut p = DMatrix::zeros(size, size);
    for t in all_tuples(n, len) {
        for s in &perms {
            let moved: Vec<usize> = s.iter().map(|&i| t[i]).collect();
            p[(flat(&moved, n), flat(&t, n))] += w;
        }
    }
    p
}

pub fn mask(n: usize, len: usize, cap: Option<usize>) -> DMatrix<f64> {
    let size = n.pow(len as u32);
    let mut d = DMatrix::zeros(size, size);
    for t in all_tuples(n, len) {
        if cap.map_or(true, |r| max_mult(&t) <= r) {
            let f = flat(&t, n);
            d[(f, f)] = 1.0;
        }
    }
    d
}

/// Orthonormal basis of capped symmetric vectors, columns ordered by the
/// non-decreasing representative in lexicographic order.
pub fn sym_basis(n: usize, len: usize, cap: Option<usize>) -> DMatrix<f64> {
    let reps: Vec<Vec<usize>> = all_tuples(n, len)
        .into_iter()
        .filter(|t| t.windows(2).all(|w| w[0] <= w[1]))
        .filter(|t| cap.map_or(true, |r| max_mult(t) <= r))
        .collect();
    let size = n.pow(len as u32);
    let mut b = DMatrix::zeros(size, reps.len());
    for (c, rep) in reps.iter().enumerate() {
        let members: Vec<Vec<usize>> = all_tuples(n, len)
            .into_iter()
            .filter(|t| {
                let mut s = t.clone();
                s.sort_unstable();
                &s == rep
            })
            .collect();
        let w = 1.0 / (members.len() as f64).sqrt();
        for t in members {
            b[(flat(&t, n), c)] = w;
        }
    }
    b
}

pub fn kron_power(m: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut out = m.clone();
    for _ in 1..d {
        out = out.kronecker(m);
    }
    out
}

/// Orbit mass moved onto the sorted tuple.
pub fn asym_entries(t: &Tensor) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    for idx in all_tuples(t.dim(), t.order()) {
        let v = t.get(&idx);
        if v != 0.0 {
            let mut s = idx.clone();
            s.sort_unstable();
            out.push((s, v));
        }
    }
    out
}

pub fn even_tensor_base(t: &Tensor) -> DMatrix<f64> {
    let (n, h) = (t.dim(), t.order() / 2);
    let side = n.pow(h as u32);
    let mut m = DMatrix::zeros(side, side);
    for (s, v) in asym_entries(t) {
        m[(flat(&s[..h], n), flat(&s[h..], n))] += v;
    }
    m
}

pub fn even_xor_base(inst: &XorInstance) -> DMatrix<f64> {
    let (n, h) = (inst.num_vars(), inst.arity() / 2);
    let side = n.pow(h as u32);
    let mut m = DMatrix::zeros(side, side);
    for c in inst.clauses() {
        m[(flat(&c.vars[..h], n), flat(&c.vars[h..], n))] += c.sign as f64;
    }
    m
}

/// `A ⊗ A` with the entries whose factors form a square removed.
pub fn paired(a: &DMatrix<f64>, n: usize, kappa: usize, filter: FilterVariant) -> DMatrix<f64> {
    let side = a.nrows();
    let mut g = a.kronecker(a);
    for x in 0..side {
        for y in 0..side {
            for z in 0..side {
                for w in 0..side {
                    // row (x, y), column (z, w): A[x, z] A[y, w]
                    let drop = match filter {
                        FilterVariant::OrderedPair => x == y && z == w,
                        FilterVariant::Multiset => {
                            let un = |f: usize| {
                                let mut t = vec![0; kappa];
                                let mut f = f;
                                for i in (0..kappa).rev() {
                                    t[i] = f % n;
                                    f /= n;
                                }
                                t
                            };
                            let mut l: Vec<usize> = [un(x), un(z)].concat();
                            let mut r: Vec<usize> = [un(y), un(w)].concat();
                            l.sort_unstable();
                            r.sort_unstable();
                            l == r
                        }
                    };
                    if drop {
                        g[(x * side + y, z * side + w)] = 0.0;
                    }
                }
            }
        }
    }
    g
}

/// Slices `A_u` of an odd XOR instance along the last variable.
pub fn odd_xor_slices(inst: &XorInstance) -> Vec<DMatrix<f64>> {
    let (n, k) = (inst.num_vars(), inst.arity());
    let kappa = k / 2;
    let side = n.pow(kappa as u32);
    let mut out = vec![DMatrix::zeros(side, side); n];
    for c in inst.clauses() {
        out[c.vars[k - 1]][(flat(&c.vars[..kappa], n), flat(&c.vars[kappa..2 * kappa], n))] += c.sign as f64;
    }
    out
}

/// Slices of the asymmetrized tensor along the first index.
pub fn odd_tensor_slices(t: &Tensor) -> Vec<DMatrix<f64>> {
    let (n, kappa) = (t.dim(), t.order() / 2);
    let side = n.pow(kappa as u32);
    let mut out = vec![DMatrix::zeros(side, side); n];
    for (s, v) in asym_entries(t) {
        out[s[0]][(flat(&s[1..=kappa], n), flat(&s[kappa + 1..], n))] += v;
    }
    out
}

/// Full-space `D P Base P D` for a level-`d` Kronecker power of `m`.
pub fn full_kron_operator(m: &DMatrix<f64>, n: usize, len: usize, d: usize, cap: Option<usize>) -> DMatrix<f64> {
    let p = symmetrizer(n, len);
    let dm = mask(n, len, cap);
    &dm * &p * kron_power(m, d) * &p * &dm
}

/// Full-space operator with center tuples `U` restricted by the cap.
pub fn full_centered_operator(slices: &[DMatrix<f64>], n: usize, len: usize, d: usize, cap: usize) -> DMatrix<f64> {
    let side = slices[0].nrows().pow(d as u32);
    let mut sum = DMatrix::zeros(side, side);
    for u in all_tuples(slices.len(), d) {
        if max_mult(&u) > cap {
            continue;
        }
        let mut term = slices[u[0]].clone();
        for &x in &u[1..] {
            term = term.kronecker(&slices[x]);
        }
        sum += term;
    }
    let p = symmetrizer(n, len);
    let dm = mask(n, len, Some(cap));
    &dm * &p * sum * &p * &dm
}

pub fn random_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(a.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_tensor(order: usize, n: usize, seed: u64) -> Tensor {
    Tensor::gaussian_symmetric(order, n, &mut seeded(seed)).unwrap()
}

/// Exact count of ordered `j`-tuples of clauses whose combined row halves
/// and column halves each repeat no variable more than `cap` times.
pub fn exact_low_count(inst: &XorInstance, j: usize, cap: usize) -> usize {
    let h = inst.arity() / 2;
    let cl = inst.clauses();
    all_tuples(cl.len(), j)
        .into_iter()
        .filter(|idx| {
            let row: Vec<usize> = idx.iter().flat_map(|&c| cl[c].vars[..h].to_vec()).collect();
            let col: Vec<usize> = idx.iter().flat_map(|&c| cl[c].vars[h..].to_vec()).collect();
            max_mult(&row) <= cap && max_mult(&col) <= cap
        })
        .count()
}

type Q = BigRational;

/// Solves `a x = b` exactly for square `a`; `None` when singular.
fn solve_exact(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let delta = &f * &a[col][c];
                    a[r][c] -= delta;
                }
                let delta = &f * &b[col];
                b[r] -= delta;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Largest `E_μ[P]` over distributions on `{±1}^k` whose characters of
/// degree `1..=t` vanish, by enumerating every basic feasible solution.
/// Returns `1 - max` (the margin) exactly.
pub fn margin_by_vertex_enumeration(table: &[bool], k: usize, t: usize) -> Q {
    let points = 1usize << k;
    let masks: Vec<usize> = (1..points).filter(|m| (m.count_ones() as usize) <= t).collect();
    let rows = 1 + masks.len();
    let chi = |s: usize, z: usize| if (s & z).count_ones() % 2 == 0 { 1i64 } else { -1 };
    let col = |z: usize| -> Vec<Q> {
        let mut c = vec![Q::one()];
        c.extend(masks.iter().map(|&s| Q::from_integer(BigInt::from(chi(s, z)))));
        c
    };
    let mut best: Option<Q> = None;
    // Supports of size 1..=rows; a vertex is the unique solution on its support.
    let mut support = Vec::new();
    fn subsets(points: usize, max: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == max {
            return;
        }
        for z in start..points {
            cur.push(z);
            subsets(points, max, z + 1, cur, out);
            cur.pop();
        }
    }
    let mut all = Vec::new();
    subsets(points, rows, 0, &mut support, &mut all);
    let mut rhs = vec![Q::zero(); rows];
    rhs[0] = Q::one();
    for s in all {
        let cols: Vec<Vec<Q>> = s.iter().map(|&z| col(z)).collect();
        // Least-squares style square system: pick |s| independent rows by trying
        // the normal equations A^T A x = A^T b, then verify A x = b exactly.
        let size = s.len();
        let ata: Vec<Vec<Q>> = (0..size)
            .map(|i| (0..size).map(|j| (0..rows).map(|r| &cols[i][r] * &cols[j][r]).sum()).collect())
            .collect();
        let atb: Vec<Q> = (0..size).map(|i| (0..rows).map(|r| &cols[i][r] * &rhs[r]).sum()).collect();
        let Some(x) = solve_exact(ata, atb) else { continue };
        if x.iter().any(|v| v.is_negative()) {
            continue;
        }
        let feasible = (0..rows).all(|r| (0..size).map(|i| &cols[i][r] * &x[i]).sum::<Q>() == rhs[r]);
        if !feasible {
            continue;
        }
        let value: Q = s.iter().zip(&x).filter(|(&z, _)| table[z]).map(|(_, v)| v.clone()).sum();
        if best.as_ref().map_or(true, |b| value > *b) {
            best = Some(value);
        }
    }
    Q::one() - best.expect("the uniform distribution is feasible, so some vertex exists")
}
