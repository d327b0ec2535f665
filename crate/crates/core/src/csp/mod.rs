//! Random Boolean CSPs: decomposition of the satisfied fraction into
//! weighted XOR instances, and a bound built from XOR certificates.

mod lp;
mod predicate;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::report::{
    binary_entropy, CspSection, CspTerm, Problem, RefutationReport, ReportConfig, Timings, LIBRARY_VERSION,
    SCHEMA_VERSION,
};
use crate::tensor::{checked_pow, unflatten};
use crate::xor::{self, RefuteOptions, XorClause, XorInstance};

pub use lp::{low_degree_masks, twise_margin_lp, TwiseMargin};
pub use predicate::{character, pattern, pattern_index, FourierExpansion, Predicate, MAX_ARITY};

/// `P(x_I ∘ neg) = 1`, where `∘` is the coordinatewise product.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CspClause {
    pub vars: Vec<usize>,
    pub neg: Vec<i8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspInstance {
    n: usize,
    predicate: Predicate,
    clauses: Vec<CspClause>,
    provenance: Option<xor::Provenance>,
}

impl CspInstance {
    pub fn new(n: usize, predicate: Predicate, clauses: Vec<CspClause>) -> Result<Self> {
        if n == 0 {
            return invalid("CSP instance needs n >= 1");
        }
        let k = predicate.arity();
        for c in &clauses {
            if c.vars.len() != k || c.neg.len() != k {
                return Err(Error::DimensionMismatch { expected: k, actual: c.vars.len().min(c.neg.len()) });
            }
            if let Some(&v) = c.vars.iter().find(|&&v| v >= n) {
                return invalid(format!("clause variable {v} out of range for n = {n}"));
            }
            if c.neg.iter().any(|&s| s != 1 && s != -1) {
                return invalid("negation pattern entries must be +1 or -1");
            }
        }
        Ok(CspInstance { n, predicate, clauses, provenance: None })
    }

    /// Each ordered k-tuple becomes a clause with probability `p` and a
    /// uniform negation pattern.
    pub fn generate(predicate: Predicate, n: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("probability {p} outside [0, 1]"));
        }
        let k = predicate.arity();
        let total = checked_pow(n, k)? as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gap = |rng: &mut ChaCha8Rng| -> u64 {
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
        };
        let mut clauses = Vec::new();
        if p > 0.0 {
            let mut pos = gap(&mut rng);
            while pos < total {
                let neg = (0..k).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
                clauses.push(CspClause { vars: unflatten(pos as usize, n, k), neg });
                pos = pos.saturating_add(1).saturating_add(gap(&mut rng));
            }
        }
        let mut inst = CspInstance::new(n, predicate, clauses)?;
        inst.provenance = Some(xor::Provenance { p, seed });
        Ok(inst)
    }

    pub fn with_provenance(mut self, provenance: Option<xor::Provenance>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn arity(&self) -> usize {
        self.predicate.arity()
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    pub fn clauses(&self) -> &[CspClause] {
        &self.clauses
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn provenance(&self) -> Option<xor::Provenance> {
        self.provenance
    }

    pub fn clause_satisfied(&self, c: &CspClause, x: &[i8]) -> bool {
        let b: usize =
            c.vars.iter().zip(&c.neg).enumerate().filter(|(_, (&v, &s))| x[v] * s < 0).map(|(i, _)| 1 << i).sum();
        self.predicate.table()[b]
    }

    pub fn satisfied_count(&self, x: &[i8]) -> Result<usize> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: x.len() });
        }
        if x.iter().any(|&s| s != 1 && s != -1) {
            return invalid("assignment entries must be +1 or -1");
        }
        Ok(self.clauses.iter().filter(|c| self.clause_satisfied(c, x)).count())
    }

    /// Fraction satisfied; 1 for the empty instance.
    pub fn evaluate(&self, x: &[i8]) -> Result<f64> {
        let s = self.satisfied_count(x)?;
        if self.clauses.is_empty() {
            return Ok(1.0);
        }
        Ok(s as f64 / self.clauses.len() as f64)
    }
}

/// `Ψ_S(x) = Σ_L c_L Π_{v ∈ L} x_v`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedXor {
    pub subset: usize,
    pub arity: usize,
    pub coeffs: BTreeMap<Vec<usize>, i64>,
}

impl WeightedXor {
    pub fn eval(&self, x: &[i8]) -> i64 {
        self.coeffs.iter().map(|(l, &c)| c * l.iter().map(|&v| x[v] as i64).product::<i64>()).sum()
    }

    /// `Σ_L |c_L|`.
    pub fn weight(&self) -> u64 {
        self.coeffs.values().map(|c| c.unsigned_abs()).sum()
    }

    pub fn max_coefficient(&self) -> u64 {
        self.coeffs.values().map(|c| c.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn is_unweighted(&self) -> bool {
        self.coeffs.values().all(|c| c.abs() <= 1)
    }
}

/// `Ψ_S` for every nonempty subset mask in `masks`: `c_L` sums
/// `Π_{i ∈ S} neg_i` over clauses whose `S`-positions spell `L`.
pub fn decompose(inst: &CspInstance, masks: &[usize]) -> Vec<WeightedXor> {
    masks
        .iter()
        .filter(|&&s| s != 0)
        .map(|&s| {
            let positions: Vec<usize> = (0..inst.arity()).filter(|i| s >> i & 1 == 1).collect();
            let mut coeffs: BTreeMap<Vec<usize>, i64> = BTreeMap::new();
            for c in inst.clauses() {
                let l: Vec<usize> = positions.iter().map(|&i| c.vars[i]).collect();
                let sign: i64 = positions.iter().map(|&i| c.neg[i] as i64).product();
                *coeffs.entry(l).or_insert(0) += sign;
            }
            coeffs.retain(|_, c| *c != 0);
            WeightedXor { subset: s, arity: positions.len(), coeffs }
        })
        .collect()
}

/// Distributes each unit of `|c_L|` to a uniformly chosen one of `r`
/// sub-instances, with sign `sgn(c_L)`.
pub fn split_unweighted(psi: &WeightedXor, n: usize, r: usize, seed: u64) -> Result<Vec<XorInstance>> {
    if r == 0 {
        return invalid("split count must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<Vec<XorClause>> = vec![Vec::new(); r];
    for (l, &c) in &psi.coeffs {
        let sign = if c > 0 { 1 } else { -1 };
        for _ in 0..c.unsigned_abs() {
            let i = if r == 1 { 0 } else { rng.gen_range(0..r) };
            parts[i].push(XorClause { vars: l.clone(), sign });
        }
    }
    parts.into_iter().map(|cl| XorInstance::new(n, psi.arity, cl)).collect()
}

/// `ceil(ln² n)`, at least 1.
pub fn default_splits(n: usize) -> usize {
    let l = (n.max(1) as f64).ln();
    ((l * l).ceil() as usize).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspOptions {
    pub xor: RefuteOptions,
    /// Use the t-wise margin polynomial instead of the Fourier expansion.
    pub twise: Option<usize>,
    /// Number of unweighted sub-instances; `None` uses [`default_splits`].
    pub splits: Option<usize>,
    pub seed: u64,
}

impl Default for CspOptions {
    fn default() -> Self {
        CspOptions { xor: RefuteOptions::default(), twise: None, splits: None, seed: 0 }
    }
}

fn derive_seed(master: u64, mask: usize) -> u64 {
    master.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(mask as u64).rotate_left(17) ^ 0xD1B5_4A32_D192_ED03
}

/// `γ_S = min(W, Σ_i m_i (2 B_i - 1)) / m` from `(m_i, B_i)` of the split sub-certificates.
pub(crate) fn split_gamma(weight: u64, m: usize, subs: impl IntoIterator<Item = (usize, f64)>) -> f64 {
    let spectral: f64 = subs.into_iter().map(|(mi, b)| mi as f64 * (2.0 * b - 1.0).max(0.0)).sum();
    (weight as f64).min(spectral) / m as f64
}

pub(crate) fn csp_total(section: &CspSection) -> f64 {
    section.constant
        + section.terms.iter().map(|t| t.coefficient.abs() * t.gamma).sum::<f64>()
        + section.rounding_slack
}

/// Certified upper bound on the satisfied fraction of a CSP instance.
pub fn refute_csp(inst: &CspInstance, opts: &CspOptions) -> Result<RefutationReport> {
    let start = Instant::now();
    let n = inst.num_vars();
    let k = inst.arity();
    let m = inst.len();
    let p = inst.predicate();
    let d = opts.xor.level.unwrap_or(1);
    let cap = opts.xor.cap.resolve(n);
    let splits = opts.splits.unwrap_or_else(|| default_splits(n)).max(1);

    let (constant, coeffs, margin, slack): (f64, Vec<(usize, f64)>, f64, f64) = match opts.twise {
        Some(t) if t < k => {
            let lp = twise_margin_lp(p, t)?;
            (lp.constant(), lp.coeffs.clone(), lp.margin, lp.rounding_slack)
        }
        _ => {
            let f = p.fourier();
            let c = (1..1usize << k).map(|s| (s, f.coef(s))).filter(|&(_, c)| c != 0.0).collect();
            (f.coef(0), c, 0.0, 0.0)
        }
    };

    let mut report = RefutationReport {
        schema_version: SCHEMA_VERSION,
        library_version: LIBRARY_VERSION.into(),
        problem: Problem::Csp,
        n,
        k,
        m,
        m_max: 0,
        config: ReportConfig {
            level: d,
            level_rule: "given".into(),
            delta: opts.xor.delta,
            cap,
            cap_rule: opts.xor.cap.describe(),
            epsilon_constant: opts.xor.epsilon_constant,
            filter: opts.xor.filter,
            spectral: opts.xor.spectral.clone(),
            log_base: "e".into(),
        },
        cutoff: (opts.xor.delta * d as f64).floor() as usize,
        entropy: binary_entropy(opts.xor.delta),
        epsilon: 0.0,
        levels: Vec::new(),
        level_sum: 1.0,
        odd: None,
        csp: None,
        upper_bound: 1.0,
        lower_bound: 0.0,
        vacuous: true,
        heuristic: false,
        timings: Timings { build_ms: 0.0, norm_ms: 0.0, total_ms: 0.0 },
        soundness: None,
    };
    let mut section = CspSection {
        predicate: p.to_bits(),
        expectation: p.expectation(),
        twise: opts.twise.filter(|&t| t < k),
        margin,
        constant,
        splits,
        terms: Vec::new(),
        rounding_slack: slack,
    };
    if m == 0 || constant >= 1.0 {
        report.upper_bound = if m == 0 { 1.0 } else { constant.min(1.0) };
        report.vacuous = true;
        report.csp = Some(section);
        report.timings.total_ms = ms(start);
        return Ok(report);
    }

    let masks: Vec<usize> = coeffs.iter().map(|&(s, _)| s).collect();
    let psis = decompose(inst, &masks);
    let sub_opts = RefuteOptions { level: Some(d), ..opts.xor.clone() };
    let terms: Vec<CspTerm> = psis
        .par_iter()
        .zip(&coeffs)
        .map(|(psi, &(s, coef))| -> Result<CspTerm> {
            let weight = psi.weight();
            let subset: Vec<usize> = (0..k).filter(|i| s >> i & 1 == 1).collect();
            if psi.arity == 1 || weight == 0 {
                // max_x |Σ_ℓ c_ℓ x_ℓ| = Σ_ℓ |c_ℓ|
                return Ok(CspTerm {
                    subset,
                    coefficient: coef,
                    gamma: weight as f64 / m as f64,
                    method: "direct".into(),
                    weight,
                    max_coefficient: psi.max_coefficient(),
                    sub_reports: Vec::new(),
                });
            }
            let r = if psi.is_unweighted() { 1 } else { splits };
            let parts = split_unweighted(psi, n, r, derive_seed(opts.seed, s))?;
            let subs: Vec<RefutationReport> =
                parts.iter().filter(|x| !x.is_empty()).map(|x| xor::refute(x, &sub_opts)).collect::<Result<_>>()?;
            Ok(CspTerm {
                subset,
                coefficient: coef,
                gamma: split_gamma(weight, m, subs.iter().map(|r| (r.m, r.upper_bound))),
                method: format!("split-{r}"),
                weight,
                max_coefficient: psi.max_coefficient(),
                sub_reports: subs,
            })
        })
        .collect::<Result<_>>()?;
    report.heuristic = terms.iter().flat_map(|t| &t.sub_reports).any(|r| r.heuristic);
    section.terms = terms;
    let total = csp_total(&section);
    report.vacuous = !(total < 1.0);
    report.upper_bound = total.clamp(0.0, 1.0);
    if section.twise.is_none() {
        let spread: f64 = section.terms.iter().map(|t| t.coefficient.abs() * t.gamma).sum();
        report.lower_bound = (constant - spread).clamp(0.0, 1.0);
    }
    report.csp = Some(section);
    report.timings.total_ms = ms(start);
    Ok(report)
}

/// Recomputes the bound of a CSP report from its stored data.
pub(crate) fn reassemble_csp(r: &RefutationReport) -> Option<f64> {
    let section = r.csp.as_ref()?;
    if r.m == 0 {
        return Some(1.0);
    }
    if section.terms.is_empty() && section.constant >= 1.0 {
        return Some(section.constant.min(1.0));
    }
    let mut rebuilt = section.clone();
    for term in &mut rebuilt.terms {
        term.gamma = if term.method == "direct" {
            term.weight as f64 / r.m as f64
        } else {
            let subs: Option<Vec<(usize, f64)>> =
                term.sub_reports.iter().map(|s| xor::reassemble_xor(s).map(|b| (s.m, b))).collect();
            split_gamma(term.weight, r.m, subs?)
        };
    }
    Some(csp_total(&rebuilt).clamp(0.0, 1.0))
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_x(n: usize, rng: &mut ChaCha8Rng) -> Vec<i8> {
        (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect()
    }

    #[test]
    fn sampling_and_evaluation() {
        let p = Predicate::builtin("kSAT", 3).unwrap();
        let empty = CspInstance::generate(p.clone(), 6, 0.0, 1).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.evaluate(&[1; 6]).unwrap(), 1.0);
        // σ making the all-ones assignment satisfy the clause.
        let one = CspInstance::new(3, p, vec![CspClause { vars: vec![0, 1, 2], neg: vec![1, -1, 1] }]).unwrap();
        assert_eq!(one.evaluate(&[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(one.evaluate(&[-1, 1, -1]).unwrap(), 0.0);
    }

    #[test]
    fn uniform_assignment_expectation() {
        // Clauses on distinct variables are satisfied by exactly 7/8 of all assignments.
        let p = Predicate::builtin("kSAT", 3).unwrap();
        let raw = CspInstance::generate(p.clone(), 8, 0.1, 3).unwrap();
        let distinct: Vec<CspClause> = raw
            .clauses()
            .iter()
            .filter(|c| c.vars[0] != c.vars[1] && c.vars[0] != c.vars[2] && c.vars[1] != c.vars[2])
            .cloned()
            .collect();
        let inst = CspInstance::new(8, p, distinct).unwrap();
        assert!(!inst.is_empty());
        let total: usize = (0..256u32)
            .map(|code| {
                let x: Vec<i8> = (0..8).map(|v| if code >> v & 1 == 1 { -1 } else { 1 }).collect();
                inst.satisfied_count(&x).unwrap()
            })
            .sum();
        assert_eq!(8 * total, 7 * 256 * inst.len());
    }

    #[test]
    fn decomposition_identity() {
        for name in ["kSAT", "NAE", "Majority"] {
            let p = Predicate::builtin(name, 3).unwrap();
            let f = p.fourier();
            let inst = CspInstance::generate(p, 8, 0.05, 7).unwrap();
            let masks: Vec<usize> = (1..8).collect();
            let psis = decompose(&inst, &masks);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            for _ in 0..100 {
                let x = random_x(8, &mut rng);
                // scale by 8 so everything is an integer
                let lhs: i64 = 8 * inst.satisfied_count(&x).unwrap() as i64;
                let rhs: i64 = (8.0 * f.coef(0)) as i64 * inst.len() as i64
                    + psis.iter().map(|psi| (8.0 * f.coef(psi.subset)) as i64 * psi.eval(&x)).sum::<i64>();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn single_clause_full_subset() {
        let p = Predicate::builtin("kSAT", 3).unwrap();
        let inst = CspInstance::new(4, p, vec![CspClause { vars: vec![3, 0, 2], neg: vec![-1, 1, -1] }]).unwrap();
        let psi = &decompose(&inst, &[7])[0];
        assert_eq!(psi.coeffs.get(&vec![3, 0, 2]), Some(&1));
        assert!(decompose(&CspInstance::new(4, inst.predicate().clone(), vec![]).unwrap(), &[7])[0].coeffs.is_empty());
    }

    #[test]
    fn split_identity() {
        let mut coeffs = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..30 {
            let l = vec![rng.gen_range(0..6), rng.gen_range(0..6)];
            let c: i64 = rng.gen_range(-5..=5);
            if c != 0 {
                coeffs.insert(l, c);
            }
        }
        let psi = WeightedXor { subset: 3, arity: 2, coeffs };
        let parts = split_unweighted(&psi, 6, 4, 9).unwrap();
        assert_eq!(parts.len(), 4);
        for _ in 0..50 {
            let x = random_x(6, &mut rng);
            let sum: i64 = parts
                .iter()
                .map(|p| p.clauses().iter().map(|c| c.sign as i64 * c.vars.iter().map(|&v| x[v] as i64).product::<i64>()).sum::<i64>())
                .sum();
            assert_eq!(sum, psi.eval(&x));
        }
        let unit = WeightedXor { subset: 3, arity: 2, coeffs: [(vec![0, 1], 1), (vec![2, 3], -1)].into() };
        let single = split_unweighted(&unit, 6, 1, 0).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].len(), 2);
        let empty = WeightedXor { subset: 3, arity: 2, coeffs: BTreeMap::new() };
        assert!(split_unweighted(&empty, 6, 3, 0).unwrap().iter().all(|p| p.is_empty()));
    }

    #[test]
    fn trivial_refutations() {
        let all = Predicate::from_fn(3, |_| true).unwrap();
        let inst = CspInstance::generate(all, 6, 0.2, 1).unwrap();
        let r = refute_csp(&inst, &CspOptions::default()).unwrap();
        assert_eq!(r.upper_bound, 1.0);
        assert!(r.csp.unwrap().terms.is_empty());
        let empty = CspInstance::new(6, Predicate::builtin("kSAT", 3).unwrap(), vec![]).unwrap();
        let r = refute_csp(&empty, &CspOptions::default()).unwrap();
        assert!(r.vacuous && r.upper_bound == 1.0);
    }
}
