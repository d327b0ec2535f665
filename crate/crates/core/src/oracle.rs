//! Ground truth at desk scale: exhaustive optimization, injective-norm lower
//! bounds and report audits.
//!
//! Assignments are encoded as integers, bit `v` set meaning `x_v = -1`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csp::{reassemble_csp, CspInstance};
use crate::error::{Error, Result};
use crate::report::{Problem, RefutationReport, SoundnessCheck};
use crate::tensor::Tensor;
use crate::xor::{reassemble_xor, unary_extremes, XorInstance};

/// Hard cap on the number of variables for exhaustive enumeration.
pub const MAX_BRUTE_FORCE_VARS: usize = 24;

/// Low bits enumerated sequentially inside one parallel chunk.
const CHUNK_BITS: usize = 12;

#[derive(Clone, Copy, Debug)]
pub enum InstanceRef<'a> {
    Xor(&'a XorInstance),
    Csp(&'a CspInstance),
}

impl<'a> From<&'a XorInstance> for InstanceRef<'a> {
    fn from(i: &'a XorInstance) -> Self {
        InstanceRef::Xor(i)
    }
}

impl<'a> From<&'a CspInstance> for InstanceRef<'a> {
    fn from(i: &'a CspInstance) -> Self {
        InstanceRef::Csp(i)
    }
}

impl InstanceRef<'_> {
    pub fn num_vars(&self) -> usize {
        match self {
            InstanceRef::Xor(i) => i.num_vars(),
            InstanceRef::Csp(i) => i.num_vars(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            InstanceRef::Xor(i) => i.len(),
            InstanceRef::Csp(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn arity(&self) -> usize {
        match self {
            InstanceRef::Xor(i) => i.arity(),
            InstanceRef::Csp(i) => i.arity(),
        }
    }

    pub fn satisfied_count(&self, x: &[i8]) -> Result<usize> {
        match self {
            InstanceRef::Xor(i) => i.satisfied_count(x),
            InstanceRef::Csp(i) => i.satisfied_count(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Largest satisfied fraction; 1 for the empty instance.
    pub opt: f64,
    pub min: f64,
    pub opt_count: usize,
    pub min_count: usize,
    pub argmax: Vec<i8>,
    pub argmin: Vec<i8>,
    /// Number of assignments enumerated.
    pub size: u64,
    pub runtime_ms: f64,
}

pub fn decode(code: u64, n: usize) -> Vec<i8> {
    (0..n).map(|v| if code >> v & 1 == 1 { -1 } else { 1 }).collect()
}

/// Each clause is a local state `b` (bit `i` set when its `i`-th literal is
/// -1) and a satisfaction test on `b`.
struct Compiled {
    n: usize,
    /// Per variable: `(clause, toggle mask)`, masks of repeated occurrences
    /// combined.
    touch: Vec<Vec<(u32, u32)>>,
    clause_vars: Vec<Vec<usize>>,
    sat: Sat,
}

enum Sat {
    /// Satisfied iff the parity of `b` matches.
    Xor(Vec<u32>),
    /// Per clause negation mask and the shared table.
    Csp(Vec<u32>, Vec<bool>),
}

impl Compiled {
    fn new(inst: InstanceRef<'_>) -> Self {
        let n = inst.num_vars();
        let (clause_vars, sat): (Vec<Vec<usize>>, Sat) = match inst {
            InstanceRef::Xor(i) => (
                i.clauses().iter().map(|c| c.vars.clone()).collect(),
                Sat::Xor(i.clauses().iter().map(|c| u32::from(c.sign < 0)).collect()),
            ),
            InstanceRef::Csp(i) => (
                i.clauses().iter().map(|c| c.vars.clone()).collect(),
                Sat::Csp(
                    i.clauses()
                        .iter()
                        .map(|c| c.neg.iter().enumerate().filter(|(_, &s)| s < 0).map(|(p, _)| 1u32 << p).sum())
                        .collect(),
                    i.predicate().table().to_vec(),
                ),
            ),
        };
        let mut touch: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n];
        for (c, vars) in clause_vars.iter().enumerate() {
            let mut masks: Vec<(usize, u32)> = vars.iter().enumerate().map(|(p, &v)| (v, 1u32 << p)).collect();
            masks.sort_unstable();
            let mut i = 0;
            while i < masks.len() {
                let v = masks[i].0;
                let mut mask = 0;
                while i < masks.len() && masks[i].0 == v {
                    mask |= masks[i].1;
                    i += 1;
                }
                touch[v].push((c as u32, mask));
            }
        }
        Compiled { n, touch, clause_vars, sat }
    }

    fn state(&self, c: usize, code: u64) -> u32 {
        self.clause_vars[c].iter().enumerate().filter(|(_, &v)| code >> v & 1 == 1).map(|(p, _)| 1u32 << p).sum()
    }

    fn satisfied(&self, c: usize, b: u32) -> bool {
        match &self.sat {
            Sat::Xor(parity) => b.count_ones() & 1 == parity[c],
            Sat::Csp(neg, table) => table[(b ^ neg[c]) as usize],
        }
    }

    /// Extremes over the assignments `prefix << low + g` for `g < 2^low`,
    /// visited in Gray-code order. Returns `(best, best_code, worst, worst_code)`.
    fn scan(&self, prefix: u64, low: usize) -> (usize, u64, usize, u64) {
        let base = prefix << low;
        let mut states: Vec<u32> = (0..self.clause_vars.len()).map(|c| self.state(c, base)).collect();
        let mut count = states.iter().enumerate().filter(|&(c, &b)| self.satisfied(c, b)).count();
        let (mut best, mut best_code, mut worst, mut worst_code) = (count, base, count, base);
        let mut code = base;
        for g in 1u64..(1u64 << low) {
            let v = g.trailing_zeros() as usize;
            code ^= 1 << v;
            for &(c, mask) in &self.touch[v] {
                let c = c as usize;
                let before = self.satisfied(c, states[c]);
                states[c] ^= mask;
                let after = self.satisfied(c, states[c]);
                if before != after {
                    if after {
                        count += 1;
                    } else {
                        count -= 1;
                    }
                }
            }
            if count > best {
                best = count;
                best_code = code;
            }
            if count < worst {
                worst = count;
                worst_code = code;
            }
        }
        (best, best_code, worst, worst_code)
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(Error::Resource(format!(
            "exhaustive enumeration refused: n = {n} exceeds the cap of {MAX_BRUTE_FORCE_VARS}"
        )));
    }
    Ok(())
}

fn finish(n: usize, m: usize, best: (usize, u64), worst: (usize, u64), start: Instant) -> OracleResult {
    let frac = |s: usize| if m == 0 { 1.0 } else { s as f64 / m as f64 };
    OracleResult {
        opt: frac(best.0),
        min: frac(worst.0),
        opt_count: best.0,
        min_count: worst.0,
        argmax: decode(best.1, n),
        argmin: decode(worst.1, n),
        size: 1u64 << n,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Exact extremes of the satisfied fraction over all `2^n` assignments.
///
/// The space is split into chunks on the high bits; each chunk is scanned
/// in Gray-code order with incremental clause updates. Ties resolve to the
/// earliest chunk, so the result does not depend on scheduling.
pub fn brute_force_opt<'a>(inst: impl Into<InstanceRef<'a>>) -> Result<OracleResult> {
    let inst = inst.into();
    let n = inst.num_vars();
    check_cap(n)?;
    let start = Instant::now();
    let compiled = Compiled::new(inst);
    let low = n.min(CHUNK_BITS);
    let chunks = 1u64 << (n - low);
    let parts: Vec<(usize, u64, usize, u64)> =
        (0..chunks).into_par_iter().map(|prefix| compiled.scan(prefix, low)).collect();
    let mut best = (parts[0].0, parts[0].1);
    let mut worst = (parts[0].2, parts[0].3);
    for &(b, bc, w, wc) in &parts[1..] {
        if b > best.0 {
            best = (b, bc);
        }
        if w < worst.0 {
            worst = (w, wc);
        }
    }
    debug_assert_eq!(compiled.n, n);
    Ok(finish(n, inst.len(), best, worst, start))
}

/// Straightforward enumeration that evaluates every clause at every
/// assignment. Used to cross-check [`brute_force_opt`].
pub fn naive_opt<'a>(inst: impl Into<InstanceRef<'a>>) -> Result<OracleResult> {
    let inst = inst.into();
    let n = inst.num_vars();
    check_cap(n)?;
    let start = Instant::now();
    let mut best = (0usize, 0u64);
    let mut worst = (usize::MAX, 0u64);
    for code in 0u64..(1u64 << n) {
        let s = inst.satisfied_count(&decode(code, n))?;
        if s > best.0 || code == 0 {
            best = (s, code);
        }
        if s < worst.0 {
            worst = (s, code);
        }
    }
    Ok(finish(n, inst.len(), best, worst, start))
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// Best value of `|<T, x^{⊗k}>|` over unit `x` found by multi-restart power
/// iteration. Every returned value is attained, hence a lower bound on the
/// injective norm. Restart `i` uses the same start for any `restarts > i`,
/// so the result is non-decreasing in `restarts`.
pub fn injective_norm_lower(t: &Tensor, restarts: usize, seed: u64) -> f64 {
    if t.is_zero() {
        return 0.0;
    }
    let n = t.dim();
    let k = t.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // The Hessian of the form on the unit sphere is bounded by k(k-1)‖T‖_F;
    // shifting by that much makes each step non-decreasing.
    let shift = (k * k.saturating_sub(1)) as f64 * t.frobenius_sq().sqrt();
    let form = |x: &[f64]| t.form(x).unwrap_or(0.0);
    let mut best = 0.0f64;
    let signs: &[f64] = if k % 2 == 0 { &[1.0, -1.0] } else { &[1.0] };
    for _ in 0..restarts.max(1) {
        let mut start: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        if normalize(&mut start) == 0.0 {
            start[0] = 1.0;
        }
        for &s in signs {
            let mut x = start.clone();
            let mut val = s * form(&x);
            if val < 0.0 && k % 2 == 1 {
                x.iter_mut().for_each(|v| *v = -*v);
                val = -val;
            }
            best = best.max(val.abs());
            for _ in 0..500 {
                let g = t.form_gradient(&x);
                let mut plain: Vec<f64> = g.iter().map(|gi| s * gi).collect();
                let mut next = if normalize(&mut plain) > 0.0 { Some(plain) } else { None };
                let accept = |y: &Vec<f64>| s * form(y) >= val;
                if !next.as_ref().is_some_and(accept) {
                    let mut shifted: Vec<f64> = g.iter().zip(&x).map(|(gi, xi)| s * gi + shift * xi).collect();
                    normalize(&mut shifted);
                    next = Some(shifted);
                }
                let y = next.unwrap_or_else(|| x.clone());
                let new_val = s * form(&y);
                best = best.max(new_val.abs());
                let gain = new_val - val;
                if new_val >= val {
                    x = y;
                    val = new_val;
                }
                if gain.abs() <= 1e-15 * val.abs().max(1e-300) {
                    break;
                }
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub pass: bool,
    /// `Some(true)` when the reassembled bound matches the stored one.
    pub assembly_ok: Option<bool>,
    pub reassembled: Option<f64>,
    pub stored: f64,
    pub soundness: Option<SoundnessCheck>,
    pub details: Vec<String>,
}

/// Tolerance for the reassembly comparison.
pub const AUDIT_TOLERANCE: f64 = 1e-12;
/// Tolerance for the soundness comparison.
pub const SOUNDNESS_TOLERANCE: f64 = 1e-9;

/// Redoes the bound arithmetic from the stored data and, when the instance
/// is small enough, checks the bounds against the exhaustive optimum.
pub fn audit_report<'a>(report: &RefutationReport, inst: impl Into<InstanceRef<'a>>) -> AuditVerdict {
    let inst = inst.into();
    let mut details = Vec::new();
    let mut pass = true;
    let shape_ok = report.n == inst.num_vars() && report.k == inst.arity() && report.m == inst.len();
    if !shape_ok {
        pass = false;
        details.push(format!(
            "instance shape (n={}, k={}, m={}) differs from report (n={}, k={}, m={})",
            inst.num_vars(),
            inst.arity(),
            inst.len(),
            report.n,
            report.k,
            report.m
        ));
    }
    let reassembled = match (report.problem, inst) {
        (Problem::EvenXor | Problem::OddXor, InstanceRef::Xor(_)) => reassemble_xor(report),
        (Problem::UnaryXor, InstanceRef::Xor(x)) => {
            if x.is_empty() {
                Some(1.0)
            } else {
                Some(unary_extremes(x).0 as f64 / x.len() as f64)
            }
        }
        (Problem::Csp, InstanceRef::Csp(_)) => reassemble_csp(report),
        _ => {
            details.push("report problem type does not match the instance".into());
            None
        }
    };
    let assembly_ok = reassembled.map(|r| (r - report.upper_bound).abs() <= AUDIT_TOLERANCE);
    match (reassembled, assembly_ok) {
        (Some(r), Some(false)) => {
            pass = false;
            details.push(format!("assembly mismatch: stored {} vs recomputed {r}", report.upper_bound));
        }
        (None, _) => {
            pass = false;
            details.push("stored data insufficient to reassemble the bound".into());
        }
        _ => details.push("assembly matches".into()),
    }
    let soundness = if inst.num_vars() <= MAX_BRUTE_FORCE_VARS && shape_ok {
        match brute_force_opt(inst) {
            Ok(o) => {
                let check = SoundnessCheck {
                    opt: o.opt,
                    min: o.min,
                    upper_ok: report.upper_bound >= o.opt - SOUNDNESS_TOLERANCE,
                    lower_ok: report.lower_bound <= o.min + SOUNDNESS_TOLERANCE,
                };
                if !check.upper_ok {
                    pass = false;
                    details.push(format!("unsound: upper bound {} < opt {}", report.upper_bound, o.opt));
                }
                if !check.lower_ok {
                    pass = false;
                    details.push(format!("unsound: lower bound {} > min {}", report.lower_bound, o.min));
                }
                Some(check)
            }
            Err(e) => {
                details.push(format!("soundness check skipped: {e}"));
                None
            }
        }
    } else {
        details.push("soundness check skipped".into());
        None
    };
    AuditVerdict { pass, assembly_ok, reassembled, stored: report.upper_bound, soundness, details }
}
