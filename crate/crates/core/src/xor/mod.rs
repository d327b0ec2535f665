//! Random k-XOR instances and the refutation certificates built from them.

mod refute;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::max_multiplicity;
use crate::error::{invalid, Error, Result};
use crate::tensor::{checked_pow, unflatten, Tensor};

pub(crate) use refute::{reassemble_xor, unary_extremes};
pub use refute::{
    default_level, low_mult_count_lower, refute, refute_even, refute_odd, CapRule, LowMultProfile, RefuteOptions,
};

/// One constraint `Π_{i ∈ vars} x_i = sign`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct XorClause {
    pub vars: Vec<usize>,
    pub sign: i8,
}

impl XorClause {
    pub fn new(vars: Vec<usize>, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return invalid(format!("clause sign must be +1 or -1, got {sign}"));
        }
        Ok(XorClause { vars, sign })
    }

    pub fn satisfied(&self, x: &[i8]) -> bool {
        self.vars.iter().map(|&v| x[v] as i32).product::<i32>() == self.sign as i32
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub p: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XorInstance {
    n: usize,
    k: usize,
    clauses: Vec<XorClause>,
    provenance: Option<Provenance>,
}

/// Clause counts used by the bound assembly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub k: usize,
    pub m: usize,
    /// Largest number of clauses containing a single variable.
    pub m_max: usize,
    /// `half_mult[r]` = clauses whose halves have largest multiplicity `r`.
    pub half_mult: Vec<usize>,
    pub pair: Option<PairStats>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    /// `m'`: ordered pairs of distinct clauses with the same last variable.
    pub m_prime: usize,
    /// Largest number of pair clauses containing a variable among their `2(k-1)` variables.
    pub o_max: usize,
}

/// Draws the gap before the next success of a Bernoulli(p) sequence.
fn geometric_gap<R: Rng + ?Sized>(rng: &mut R, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    let g = (u.ln() / (1.0 - p).ln()).floor();
    if g.is_finite() && g < u64::MAX as f64 {
        g as u64
    } else {
        u64::MAX
    }
}

impl XorInstance {
    pub fn new(n: usize, k: usize, clauses: Vec<XorClause>) -> Result<Self> {
        if n == 0 || k == 0 {
            return invalid(format!("XOR instance needs n >= 1 and k >= 1 (got {n}, {k})"));
        }
        for c in &clauses {
            if c.vars.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: c.vars.len() });
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v >= n) {
                return invalid(format!("clause variable {v} out of range for n = {n}"));
            }
            if c.sign != 1 && c.sign != -1 {
                return invalid(format!("clause sign must be +1 or -1, got {}", c.sign));
            }
        }
        Ok(XorInstance { n, k, clauses, provenance: None })
    }

    /// Each ordered k-tuple becomes a clause independently with probability
    /// `p`, with a uniform sign.
    pub fn sample<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("probability {p} outside [0, 1]"));
        }
        let total = checked_pow(n, k)? as u64;
        let mut clauses = Vec::new();
        if p > 0.0 {
            let mut pos = geometric_gap(rng, p);
            while pos < total {
                let sign = if rng.gen::<bool>() { 1 } else { -1 };
                clauses.push(XorClause { vars: unflatten(pos as usize, n, k), sign });
                pos = pos.saturating_add(1).saturating_add(geometric_gap(rng, p));
            }
        }
        let mut inst = XorInstance::new(n, k, clauses)?;
        inst.provenance = Some(Provenance { p, seed: 0 });
        Ok(inst)
    }

    /// [`XorInstance::sample`] with a ChaCha8 stream seeded by `seed`.
    pub fn generate(n: usize, k: usize, p: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut inst = XorInstance::sample(n, k, p, &mut rng)?;
        inst.provenance = Some(Provenance { p, seed });
        Ok(inst)
    }

    pub fn with_provenance(mut self, provenance: Option<Provenance>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn clauses(&self) -> &[XorClause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn provenance(&self) -> Option<Provenance> {
        self.provenance
    }

    /// `T_Φ`: sign at every clause tuple, duplicates summed.
    pub fn tensor(&self) -> Result<Tensor> {
        Tensor::from_entries(self.k, self.n, self.clauses.iter().map(|c| (c.vars.clone(), c.sign as f64)))
    }

    pub fn satisfied_count(&self, x: &[i8]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: x.len() });
        }
        if let Some(&bad) = x.iter().find(|&&s| s != 1 && s != -1) {
            return invalid(format!("assignment entries must be +1 or -1, got {bad}"));
        }
        Ok(self.clauses.iter().filter(|c| c.satisfied(x)).count())
    }

    /// Fraction of satisfied clauses; 1 for the empty instance.
    pub fn evaluate(&self, x: &[i8]) -> Result<f64> {
        let sat = self.satisfied_count(x)?;
        if self.clauses.is_empty() {
            return Ok(1.0);
        }
        Ok(sat as f64 / self.clauses.len() as f64)
    }

    /// Same tuples with every sign negated.
    pub fn flipped(&self) -> Self {
        let clauses = self.clauses.iter().map(|c| XorClause { vars: c.vars.clone(), sign: -c.sign }).collect();
        XorInstance { n: self.n, k: self.k, clauses, provenance: self.provenance }
    }

    /// Renames variable `v` to `perm[v]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        check_perm(perm, self.n)?;
        let clauses = self
            .clauses
            .iter()
            .map(|c| XorClause { vars: c.vars.iter().map(|&v| perm[v]).collect(), sign: c.sign })
            .collect();
        Ok(XorInstance { n: self.n, k: self.k, clauses, provenance: self.provenance })
    }

    pub fn stats(&self) -> InstanceStats {
        let h = self.k / 2;
        let mut deg = vec![0usize; self.n];
        let mut half_mult = vec![0usize; self.k + 1];
        for c in &self.clauses {
            let mut seen = c.vars.clone();
            seen.sort_unstable();
            seen.dedup();
            for v in seen {
                deg[v] += 1;
            }
            let r = max_multiplicity(&c.vars[..h]).max(max_multiplicity(&c.vars[self.k - h..]));
            half_mult[r] += 1;
        }
        let pair = if self.k % 2 == 1 { Some(self.pair_stats()) } else { None };
        InstanceStats { k: self.k, m: self.clauses.len(), m_max: deg.into_iter().max().unwrap_or(0), half_mult, pair }
    }

    fn by_last_variable(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n];
        for (i, c) in self.clauses.iter().enumerate() {
            groups[c.vars[self.k - 1]].push(i);
        }
        groups
    }

    fn pair_stats(&self) -> PairStats {
        let mut m_prime = 0;
        let mut occ = vec![0usize; self.n];
        for group in self.by_last_variable() {
            let g = group.len();
            m_prime += g * g.saturating_sub(1);
            if g < 2 {
                continue;
            }
            // Pair (a, b) contains v iff a or b does among its first k-1 variables.
            let mut touch: BTreeMap<usize, usize> = BTreeMap::new();
            for &a in &group {
                let mut vs = self.clauses[a].vars[..self.k - 1].to_vec();
                vs.sort_unstable();
                vs.dedup();
                for v in vs {
                    *touch.entry(v).or_insert(0) += 1;
                }
            }
            for (v, t) in touch {
                // Ordered pairs of distinct clauses with at least one touching v.
                occ[v] += g * (g - 1) - (g - t) * (g - t).saturating_sub(1);
            }
        }
        PairStats { m_prime, o_max: occ.into_iter().max().unwrap_or(0) }
    }

    /// The `2(k-1)`-XOR instance `Ψ` of ordered pairs of distinct clauses
    /// sharing their last variable: variables are the first `k-1` of each
    /// clause, sign the product of the two signs.
    pub fn pair_instance(&self) -> Result<(XorInstance, PairStats)> {
        if self.k % 2 == 0 || self.k < 3 {
            return invalid(format!("pair construction needs odd arity of at least 3, got {}", self.k));
        }
        let k1 = self.k - 1;
        let mut clauses = Vec::new();
        for group in self.by_last_variable() {
            for &a in &group {
                for &b in &group {
                    if a == b {
                        continue;
                    }
                    let (ca, cb) = (&self.clauses[a], &self.clauses[b]);
                    let vars = ca.vars[..k1].iter().chain(&cb.vars[..k1]).copied().collect();
                    clauses.push(XorClause { vars, sign: ca.sign * cb.sign });
                }
            }
        }
        let psi = XorInstance::new(self.n, 2 * k1, clauses)?;
        Ok((psi, self.pair_stats()))
    }

    pub(crate) fn groups_by_last(&self) -> Vec<Vec<usize>> {
        self.by_last_variable()
    }
}

pub(crate) fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: perm.len() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return invalid("relabeling is not a permutation");
        }
        seen[p] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_edge_cases() {
        assert!(XorInstance::generate(5, 3, 0.0, 1).unwrap().is_empty());
        let all = XorInstance::generate(2, 2, 1.0, 1).unwrap();
        assert_eq!(all.len(), 4);
        let tuples: Vec<_> = all.clauses().iter().map(|c| c.vars.clone()).collect();
        assert_eq!(tuples, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert!(XorInstance::generate(2, 2, 1.5, 1).is_err());
    }

    #[test]
    fn sampling_mean() {
        // E[m] = 1000 * 0.01 = 10, Var = 9.9
        let seeds = 200;
        let total: usize = (0..seeds).map(|s| XorInstance::generate(10, 3, 0.01, s).unwrap().len()).sum();
        let mean = total as f64 / seeds as f64;
        let se = (1000.0 * 0.01 * 0.99 / seeds as f64).sqrt();
        assert!((mean - 10.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(XorInstance::generate(8, 3, 0.1, 7).unwrap(), XorInstance::generate(8, 3, 0.1, 7).unwrap());
    }

    #[test]
    fn tensor_identity() {
        let single = XorInstance::new(3, 3, vec![XorClause::new(vec![0, 1, 2], -1).unwrap()]).unwrap();
        assert_eq!(single.tensor().unwrap().form(&[1.0, 1.0, 1.0]).unwrap(), -1.0);
        assert!(XorInstance::new(3, 2, vec![]).unwrap().tensor().unwrap().is_zero());

        let inst = XorInstance::generate(6, 3, 0.2, 3).unwrap();
        let t = inst.tensor().unwrap();
        for mask in 0u32..64 {
            let x: Vec<i8> = (0..6).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            let xf: Vec<f64> = x.iter().map(|&s| s as f64).collect();
            let sat = inst.satisfied_count(&x).unwrap() as f64;
            let m = inst.len() as f64;
            assert_eq!(t.form(&xf).unwrap(), 2.0 * sat - m);
        }
    }

    #[test]
    fn evaluate_cases() {
        let inst = XorInstance::new(2, 2, vec![XorClause::new(vec![0, 1], 1).unwrap()]).unwrap();
        assert_eq!(inst.evaluate(&[1, 1]).unwrap(), 1.0);
        assert_eq!(inst.evaluate(&[1, -1]).unwrap(), 0.0);
        assert!(inst.evaluate(&[1]).is_err());
        assert_eq!(XorInstance::new(2, 2, vec![]).unwrap().evaluate(&[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn pair_instance_small() {
        let inst = XorInstance::new(
            5,
            3,
            vec![XorClause::new(vec![0, 1, 4], 1).unwrap(), XorClause::new(vec![2, 3, 4], -1).unwrap()],
        )
        .unwrap();
        let (psi, stats) = inst.pair_instance().unwrap();
        assert_eq!(stats.m_prime, 2);
        assert_eq!(psi.len(), 2);
        assert_eq!(psi.clauses()[0].vars, vec![0, 1, 2, 3]);
        assert_eq!(psi.clauses()[1].vars, vec![2, 3, 0, 1]);
        assert!(psi.clauses().iter().all(|c| c.sign == -1));
        assert_eq!(stats.o_max, 2);
        let none = XorInstance::new(
            5,
            3,
            vec![XorClause::new(vec![0, 1, 2], 1).unwrap(), XorClause::new(vec![2, 3, 4], -1).unwrap()],
        )
        .unwrap();
        assert_eq!(none.pair_instance().unwrap().1.m_prime, 0);
        assert!(XorInstance::new(3, 2, vec![]).unwrap().pair_instance().is_err());
    }

    #[test]
    fn pair_degree_formula() {
        for seed in 0..10 {
            let inst = XorInstance::generate(8, 3, 0.1, seed).unwrap();
            let (psi, stats) = inst.pair_instance().unwrap();
            let mut mi = vec![0usize; 8];
            for c in inst.clauses() {
                mi[c.vars[2]] += 1;
            }
            let expect: usize = mi.iter().map(|&x| x * x.saturating_sub(1)).sum();
            assert_eq!(stats.m_prime, expect);
            assert_eq!(psi.len(), expect);
            let mut occ = vec![0usize; 8];
            for c in psi.clauses() {
                let mut vs = c.vars.clone();
                vs.sort_unstable();
                vs.dedup();
                for v in vs {
                    occ[v] += 1;
                }
            }
            assert_eq!(stats.o_max, occ.into_iter().max().unwrap_or(0));
        }
    }

    #[test]
    fn stats_degree() {
        let inst = XorInstance::new(
            3,
            2,
            vec![
                XorClause::new(vec![0, 0], 1).unwrap(),
                XorClause::new(vec![0, 1], 1).unwrap(),
                XorClause::new(vec![2, 1], -1).unwrap(),
            ],
        )
        .unwrap();
        let s = inst.stats();
        assert_eq!(s.m, 3);
        assert_eq!(s.m_max, 2);
        assert_eq!(s.half_mult, vec![0, 3, 0]);
        assert!(s.pair.is_none());
    }
}
