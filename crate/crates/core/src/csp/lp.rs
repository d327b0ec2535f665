//! The t-wise margin of a predicate, solved exactly over the rationals.
//!
//! Primal: minimize `u` subject to `u + Σ_{1 ≤ |S| ≤ t} q_S χ_S(z) ≥ P(z)`
//! for every `z`; the margin is `δ = 1 - u`. The simplex runs on the dual
//! (maximize `E_μ[P]` over distributions `μ` whose characters of degree
//! `1..=t` vanish) and reads `u` and `q` off the final multipliers.

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::predicate::{character, Predicate};
use crate::error::{invalid, Error, Result};

type Q = BigRational;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwiseMargin {
    pub t: usize,
    pub margin: f64,
    /// Exact margin as `p/q`.
    pub margin_exact: String,
    /// `(mask, Q̂(S))` for every `S` with `1 ≤ |S| ≤ t`.
    pub coeffs: Vec<(usize, f64)>,
    /// Upper bound on `Σ_S |Q̂(S) - float(Q̂(S))| + |δ - float(δ)|`.
    pub rounding_slack: f64,
}

impl TwiseMargin {
    pub fn constant(&self) -> f64 {
        1.0 - self.margin
    }

    /// `(1 - δ) + Σ_S Q̂(S) χ_S(z)` at the pattern with index `b`.
    pub fn eval_index(&self, b: usize) -> f64 {
        self.constant() + self.coeffs.iter().map(|&(s, c)| c * character(s, b) as f64).sum::<f64>()
    }
}

/// Masks of all subsets of `[k]` with size in `1..=t`, by size then value.
pub fn low_degree_masks(k: usize, t: usize) -> Vec<usize> {
    let mut masks: Vec<usize> = (1..1usize << k).filter(|m| (m.count_ones() as usize) <= t).collect();
    masks.sort_by_key(|&m| (m.count_ones(), m));
    masks
}

fn to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `|q - float(q)|` rounded up to a float.
fn rounding_error(q: &Q) -> f64 {
    let f = to_f64(q);
    let back = Q::from_float(f).unwrap_or_else(Q::zero);
    let err = to_f64(&(q - back).abs());
    if err == 0.0 {
        0.0
    } else {
        err * (1.0 + 1e-12) + f64::MIN_POSITIVE
    }
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + 1)`, last column is the right-hand side.
    a: Vec<Vec<Q>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c].clone();
        for x in self.a[r].iter_mut() {
            *x = &*x / &p;
        }
        let pivot_row = self.a[r].clone();
        for i in 0..self.rows {
            if i == r || self.a[i][c].is_zero() {
                continue;
            }
            let f = self.a[i][c].clone();
            for (x, y) in self.a[i].iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x = &*x - &f * y;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `c_B B^{-1} A_j - c_j` for a maximization objective.
    fn reduced(&self, cost: &[Q]) -> Vec<Q> {
        (0..self.cols)
            .map(|j| {
                let mut s = -cost[j].clone();
                for i in 0..self.rows {
                    if !self.a[i][j].is_zero() {
                        s += &cost[self.basis[i]] * &self.a[i][j];
                    }
                }
                s
            })
            .collect()
    }

    /// Maximizes `cost · x` over columns in `allowed` with Bland's rule.
    fn optimize(&mut self, cost: &[Q], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        for _ in 0..100_000 {
            let red = self.reduced(cost);
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && red[j].is_negative()) else {
                return Ok(());
            };
            let mut leave: Option<(usize, Q)> = None;
            for i in 0..self.rows {
                if self.a[i][enter].is_positive() {
                    let ratio = &self.a[i][self.cols] / &self.a[i][enter];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::Numerical("margin LP unbounded".into()));
            };
            self.pivot(r, enter);
        }
        Err(Error::Numerical("margin LP did not terminate".into()))
    }
}

/// Maximal `δ` with `P ≤ (1 - δ) + Q` for a mean-zero `Q` of degree at most `t`.
pub fn twise_margin_lp(p: &Predicate, t: usize) -> Result<TwiseMargin> {
    let k = p.arity();
    if t == 0 || t > k {
        return invalid(format!("t = {t} outside 1..={k}"));
    }
    if k > 10 {
        return invalid(format!("margin LP supports arity up to 10, got {k}"));
    }
    let masks = low_degree_masks(k, t);
    let points = 1usize << k;
    let rows = 1 + masks.len();
    // Columns: one per point, then one artificial per row.
    let cols = points + rows;
    let mut a = vec![vec![Q::zero(); cols + 1]; rows];
    for z in 0..points {
        a[0][z] = Q::one();
        for (r, &s) in masks.iter().enumerate() {
            a[r + 1][z] = Q::from_integer(BigInt::from(character(s, z)));
        }
    }
    for r in 0..rows {
        a[r][points + r] = Q::one();
    }
    a[0][cols] = Q::one();
    let mut tab = Tableau { rows, cols, a, basis: (points..points + rows).collect() };

    // Phase 1: drive the artificials to zero.
    let mut phase1 = vec![Q::zero(); cols];
    for c in phase1.iter_mut().skip(points) {
        *c = -Q::one();
    }
    tab.optimize(&phase1, &|j| j < points)?;
    let infeasibility: Q = (0..rows).filter(|&i| tab.basis[i] >= points).map(|i| tab.a[i][cols].clone()).sum();
    if !infeasibility.is_zero() {
        return Err(Error::Numerical("margin LP dual infeasible".into()));
    }
    for r in 0..rows {
        if tab.basis[r] >= points {
            if let Some(c) = (0..points).find(|&c| !tab.a[r][c].is_zero()) {
                tab.pivot(r, c);
            }
        }
    }

    // Phase 2: maximize E_μ[P]; artificials stay out.
    let mut cost = vec![Q::zero(); cols];
    for (z, c) in cost.iter_mut().enumerate().take(points) {
        if p.table()[z] {
            *c = Q::one();
        }
    }
    tab.optimize(&cost, &|j| j < points)?;
    let red = tab.reduced(&cost);
    let y: Vec<Q> = (0..rows).map(|r| red[points + r].clone()).collect();

    // Exact feasibility of the primal read-off.
    for z in 0..points {
        let mut lhs = y[0].clone();
        for (r, &s) in masks.iter().enumerate() {
            if character(s, z) > 0 {
                lhs += &y[r + 1];
            } else {
                lhs -= &y[r + 1];
            }
        }
        let rhs = if p.table()[z] { Q::one() } else { Q::zero() };
        if lhs < rhs {
            return Err(Error::Numerical("margin LP multipliers are not primal feasible".into()));
        }
    }
    let delta = Q::one() - &y[0];
    let mut slack = rounding_error(&delta);
    let coeffs = masks
        .iter()
        .zip(&y[1..])
        .map(|(&s, q)| {
            slack += rounding_error(q);
            (s, to_f64(q))
        })
        .collect();
    Ok(TwiseMargin { t, margin: to_f64(&delta), margin_exact: delta.to_string(), coeffs, rounding_slack: slack })
}
