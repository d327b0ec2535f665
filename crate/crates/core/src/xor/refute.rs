//! Bound assembly for even and odd arity.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InstanceStats, XorInstance};
use crate::basis::max_multiplicity;
use crate::error::{invalid, Result};
use crate::operator::{build_even_xor_certificate, build_odd_xor_certificate, FilterVariant, OperatorConfig};
use crate::report::{
    binary_entropy, level_sum, level_term, odd_back_conversion, root_bound, slack, LevelRecord, OddSection, Problem,
    RefutationReport, ReportConfig, Timings, LIBRARY_VERSION, SCHEMA_VERSION,
};
use crate::spectral::{operator_norm, SpectralConfig};

/// How the multiplicity cap `R` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapRule {
    /// `ceil(c · ln n)`.
    Log { constant: f64 },
    Fixed(usize),
    Unbounded,
}

impl Default for CapRule {
    fn default() -> Self {
        CapRule::Log { constant: 100.0 }
    }
}

impl CapRule {
    pub fn resolve(&self, n: usize) -> Option<usize> {
        match *self {
            CapRule::Log { constant } => Some(((constant * (n.max(2) as f64).ln()).ceil() as usize).max(1)),
            CapRule::Fixed(r) => Some(r.max(1)),
            CapRule::Unbounded => None,
        }
    }

    pub(crate) fn describe(&self) -> String {
        match *self {
            CapRule::Log { constant } => format!("ceil({constant} ln n)"),
            CapRule::Fixed(r) => format!("fixed {r}"),
            CapRule::Unbounded => "unbounded".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefuteOptions {
    /// Level `d`; `None` uses [`default_level`].
    pub level: Option<usize>,
    /// Ceiling for the automatically chosen level.
    pub max_default_level: usize,
    /// Cutoff fraction `δ`; levels `j ≤ floor(δ d)` are bounded trivially.
    pub delta: f64,
    pub cap: CapRule,
    /// The constant `c` in `ε = d·k·m_max / (c·m·ln n)`.
    pub epsilon_constant: f64,
    pub filter: FilterVariant,
    pub spectral: SpectralConfig,
    pub max_full_len: usize,
}

impl Default for RefuteOptions {
    fn default() -> Self {
        RefuteOptions {
            level: None,
            max_default_level: 2,
            delta: 0.25,
            cap: CapRule::default(),
            epsilon_constant: 200.0,
            filter: FilterVariant::default(),
            spectral: SpectralConfig::default(),
            max_full_len: crate::operator::DEFAULT_MAX_FULL_LEN,
        }
    }
}

impl RefuteOptions {
    pub fn with_level(mut self, d: usize) -> Self {
        self.level = Some(d);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_cap(mut self, cap: CapRule) -> Self {
        self.cap = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.delta) {
            return invalid(format!("cutoff fraction δ = {} outside [0, 1)", self.delta));
        }
        if self.level == Some(0) {
            return invalid("level d must be at least 1");
        }
        if !(self.epsilon_constant > 0.0) {
            return invalid("slack constant must be positive");
        }
        self.spectral.validate()
    }
}

/// Level from the density/level trade-off `m/n ≈ n^{(k/2-1)(1-δ)}` with
/// `d = n^δ`, clamped to `[1, max_level]`.
pub fn default_level(n: usize, k: usize, m: usize, max_level: usize) -> (usize, String) {
    let rule = "d = n^δ* with m/n = n^((k/2-1)(1-δ*)), clamped".to_string();
    let h = k as f64 / 2.0 - 1.0;
    if h <= 0.0 || m == 0 || n < 2 {
        return (1, rule);
    }
    let ln_n = (n as f64).ln();
    let rho = m as f64 / n as f64;
    let delta = (1.0 - rho.ln() / (h * ln_n)).clamp(0.0, 1.0);
    let d = (n as f64).powf(delta).round() as usize;
    (d.clamp(1, max_level.max(1)), rule)
}

/// What the sequential counting argument needs to know about the items
/// (clauses, or kept clause pairs) that are multiplied together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowMultProfile {
    pub items: usize,
    /// Length of each item's row half (equal to its column half).
    pub half_len: usize,
    /// Largest number of items containing one variable.
    pub max_degree: usize,
    /// Whether items also carry one center symbol subject to the cap.
    pub centered: bool,
    /// `half_mult[r]` = items whose halves have largest multiplicity `r`.
    pub half_mult: Vec<usize>,
}

impl LowMultProfile {
    pub fn from_stats(stats: &InstanceStats) -> Self {
        LowMultProfile {
            items: stats.m,
            half_len: stats.k / 2,
            max_degree: stats.m_max,
            centered: false,
            half_mult: stats.half_mult.clone(),
        }
    }
}

/// Certified lower bound on the number of ordered `j`-tuples of items whose
/// combined row multiset and column multiset (and center multiset) repeat no
/// symbol more than `cap` times.
///
/// After `t` items are chosen, at most `floor(t·h / g)` row symbols (and as
/// many column symbols) have multiplicity at least `g = R - h + 1`, and only
/// those can overflow; each is touched by at most `max_degree` items. Items
/// whose own halves break the cap are never counted.
pub fn low_mult_count_lower(p: &LowMultProfile, j: usize, cap: Option<usize>) -> f64 {
    let m = p.items as f64;
    let Some(r) = cap else {
        return m.powi(j as i32);
    };
    let h = p.half_len;
    if j * h <= r && (!p.centered || j <= r) {
        return m.powi(j as i32);
    }
    let ok: usize = p.half_mult.iter().take(r + 1).sum();
    let g = (r + 1).saturating_sub(h).max(1);
    let mut prod = 1.0f64;
    for t in 0..j {
        let mut danger = 2 * (t * h / g);
        if p.centered {
            danger += t / r;
        }
        let avail = ok.saturating_sub(p.max_degree.saturating_mul(danger));
        prod *= avail as f64;
        if prod == 0.0 {
            break;
        }
    }
    prod
}

fn report_config(opts: &RefuteOptions, d: usize, rule: String, cap: Option<usize>) -> ReportConfig {
    ReportConfig {
        level: d,
        level_rule: rule,
        delta: opts.delta,
        cap,
        cap_rule: opts.cap.describe(),
        epsilon_constant: opts.epsilon_constant,
        filter: opts.filter,
        spectral: opts.spectral.clone(),
        log_base: "e".into(),
    }
}

fn empty_report(problem: Problem, inst: &XorInstance, config: ReportConfig, m_max: usize) -> RefutationReport {
    let d = config.level;
    let t = (config.delta * d as f64).floor() as usize;
    RefutationReport {
        schema_version: SCHEMA_VERSION,
        library_version: LIBRARY_VERSION.into(),
        problem,
        n: inst.num_vars(),
        k: inst.arity(),
        m: inst.len(),
        m_max,
        entropy: binary_entropy(config.delta),
        config,
        cutoff: t,
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
    }
}

fn resolve_level(inst: &XorInstance, opts: &RefuteOptions) -> (usize, String) {
    match opts.level {
        Some(d) => (d, "given".into()),
        None => default_level(inst.num_vars(), inst.arity(), inst.len(), opts.max_default_level),
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Certificate for even arity.
pub fn refute_even(inst: &XorInstance, opts: &RefuteOptions) -> Result<RefutationReport> {
    let k = inst.arity();
    if k % 2 != 0 {
        return invalid(format!("refute_even needs even arity, got {k}"));
    }
    opts.validate()?;
    let start = Instant::now();
    let n = inst.num_vars();
    let (d, rule) = resolve_level(inst, opts);
    let cap = opts.cap.resolve(n);
    let stats = inst.stats();
    let mut report = empty_report(Problem::EvenXor, inst, report_config(opts, d, rule, cap), stats.m_max);
    if inst.is_empty() {
        report.timings.total_ms = ms(start);
        return Ok(report);
    }
    let m = stats.m;
    let t = report.cutoff;
    let profile = LowMultProfile::from_stats(&stats);
    let levels: Vec<(LevelRecord, f64, f64)> = ((t + 1)..=d)
        .into_par_iter()
        .map(|j| -> Result<(LevelRecord, f64, f64)> {
            let b = Instant::now();
            let cfg = OperatorConfig { level: j, cap, filter: opts.filter, max_full_len: opts.max_full_len };
            let op = build_even_xor_certificate(inst, &cfg)?;
            let built = ms(b);
            let nb = Instant::now();
            let norm = operator_norm(&op, &opts.spectral)?;
            let low = low_mult_count_lower(&profile, j, cap);
            let term = level_term(n, k / 2, m, j, norm.value, low);
            let rec = LevelRecord {
                level: j,
                norm: norm.value,
                mode: norm.mode,
                dim: op.dim(),
                low_count_lower: low,
                term,
                diagnostics: norm.diagnostics,
            };
            Ok((rec, built, ms(nb)))
        })
        .collect::<Result<_>>()?;
    finish_levels(&mut report, levels);
    let terms: Vec<f64> = report.levels.iter().map(|l| l.term).collect();
    report.level_sum = level_sum(d, t, &terms);
    report.epsilon = slack(d, k, stats.m_max, opts.epsilon_constant, m, n);
    let b = root_bound(report.level_sum, d, report.epsilon);
    set_bounds(&mut report, b);
    report.timings.total_ms = ms(start);
    Ok(report)
}

fn finish_levels(report: &mut RefutationReport, levels: Vec<(LevelRecord, f64, f64)>) {
    for (rec, built, normed) in levels {
        report.timings.build_ms += built;
        report.timings.norm_ms += normed;
        report.heuristic |= !rec.mode.is_certified();
        report.levels.push(rec);
    }
}

fn set_bounds(report: &mut RefutationReport, b: f64) {
    report.vacuous = !(b < 1.0);
    report.upper_bound = b.clamp(0.0, 1.0);
    report.lower_bound = (1.0 - b).clamp(0.0, 1.0);
}

/// Kept-pair statistics for the squares filter.
struct KeptPairs {
    kept: usize,
    degree: usize,
    half_mult: Vec<usize>,
}

fn kept_pairs(inst: &XorInstance, filter: FilterVariant) -> KeptPairs {
    let k = inst.arity();
    let kappa = k / 2;
    let n = inst.num_vars();
    let mut kept = 0usize;
    let mut deg = vec![0usize; n];
    let mut half_mult = vec![0usize; k];
    let clauses = inst.clauses();
    for group in inst.groups_by_last() {
        for &a in &group {
            let ca = &clauses[a].vars;
            for &b in &group {
                if a == b {
                    continue;
                }
                let cb = &clauses[b].vars;
                let (ia, ka) = (&ca[..kappa], &ca[kappa..2 * kappa]);
                let (ib, kb) = (&cb[..kappa], &cb[kappa..2 * kappa]);
                if filter.removes(ia, ka, ib, kb) {
                    continue;
                }
                kept += 1;
                let row: Vec<usize> = ia.iter().chain(ib).copied().collect();
                let col: Vec<usize> = ka.iter().chain(kb).copied().collect();
                half_mult[max_multiplicity(&row).max(max_multiplicity(&col))] += 1;
                let mut vs: Vec<usize> = row.into_iter().chain(col).chain([ca[k - 1]]).collect();
                vs.sort_unstable();
                vs.dedup();
                for v in vs {
                    deg[v] += 1;
                }
            }
        }
    }
    KeptPairs { kept, degree: deg.into_iter().max().unwrap_or(0), half_mult }
}

/// Arity one: the optimum is attained per variable, so it is computed exactly.
fn refute_unary(inst: &XorInstance, opts: &RefuteOptions) -> Result<RefutationReport> {
    let start = Instant::now();
    let n = inst.num_vars();
    let (d, rule) = resolve_level(inst, opts);
    let stats = inst.stats();
    let mut report =
        empty_report(Problem::UnaryXor, inst, report_config(opts, d, rule, opts.cap.resolve(n)), stats.m_max);
    if inst.is_empty() {
        return Ok(report);
    }
    let (best, worst) = unary_extremes(inst);
    let m = inst.len() as f64;
    report.upper_bound = best as f64 / m;
    report.lower_bound = worst as f64 / m;
    report.vacuous = best == inst.len();
    report.level_sum = report.upper_bound;
    report.timings.total_ms = ms(start);
    Ok(report)
}

pub(crate) fn unary_extremes(inst: &XorInstance) -> (usize, usize) {
    let mut pos = vec![0usize; inst.num_vars()];
    let mut neg = vec![0usize; inst.num_vars()];
    for c in inst.clauses() {
        if c.sign > 0 {
            pos[c.vars[0]] += 1;
        } else {
            neg[c.vars[0]] += 1;
        }
    }
    let best = pos.iter().zip(&neg).map(|(a, b)| a.max(b)).sum();
    let worst = pos.iter().zip(&neg).map(|(a, b)| a.min(b)).sum();
    (best, worst)
}

/// Certificate for odd arity through the pair instance and Cauchy–Schwarz.
pub fn refute_odd(inst: &XorInstance, opts: &RefuteOptions) -> Result<RefutationReport> {
    let k = inst.arity();
    if k % 2 == 0 {
        return invalid(format!("refute_odd needs odd arity, got {k}"));
    }
    opts.validate()?;
    if k == 1 {
        return refute_unary(inst, opts);
    }
    let start = Instant::now();
    let n = inst.num_vars();
    let (d, rule) = resolve_level(inst, opts);
    let cap = opts.cap.resolve(n);
    let stats = inst.stats();
    let mut report = empty_report(Problem::OddXor, inst, report_config(opts, d, rule, cap), stats.m_max);
    if inst.is_empty() {
        report.timings.total_ms = ms(start);
        return Ok(report);
    }
    let m = inst.len();
    let t = report.cutoff;
    let pair = stats.pair.expect("odd arity has pair stats");
    let kp = kept_pairs(inst, opts.filter);
    let profile =
        LowMultProfile { items: kp.kept, half_len: k - 1, max_degree: kp.degree, centered: true, half_mult: kp.half_mult };
    let mut removed = 0.0;
    let levels: Vec<(LevelRecord, f64, f64, f64)> = ((t + 1)..=d)
        .into_par_iter()
        .map(|j| -> Result<(LevelRecord, f64, f64, f64)> {
            let b = Instant::now();
            let cfg = OperatorConfig { level: j, cap, filter: opts.filter, max_full_len: opts.max_full_len };
            let (op, corr) = build_odd_xor_certificate(inst, &cfg)?;
            let built = ms(b);
            let nb = Instant::now();
            let norm = operator_norm(&op, &opts.spectral)?;
            let low = low_mult_count_lower(&profile, j, cap);
            let term = level_term(n, k - 1, kp.kept, j, norm.value, low);
            let rec = LevelRecord {
                level: j,
                norm: norm.value,
                mode: norm.mode,
                dim: op.dim(),
                low_count_lower: low,
                term,
                diagnostics: norm.diagnostics,
            };
            Ok((rec, built, ms(nb), corr.removed_mass))
        })
        .collect::<Result<_>>()?;
    let mut plain = Vec::with_capacity(levels.len());
    for (rec, b, nb, r) in levels {
        removed = r;
        plain.push((rec, b, nb));
    }
    if plain.is_empty() {
        // All levels fall under the cutoff; the removed mass is still needed.
        let (_, corr) = build_odd_xor_certificate(
            inst,
            &OperatorConfig { level: 1, cap, filter: opts.filter, max_full_len: opts.max_full_len },
        )?;
        removed = corr.removed_mass;
    }
    finish_levels(&mut report, plain);
    let terms: Vec<f64> = report.levels.iter().map(|l| l.term).collect();
    report.level_sum = level_sum(d, t, &terms);
    report.epsilon = slack(d, 2 * k - 1, pair.o_max, opts.epsilon_constant, pair.m_prime, n);
    let kept_bound = if kp.kept == 0 { 1.0 } else { root_bound(report.level_sum, d, report.epsilon).min(1.0) };
    let (pair_bound, b) = odd_back_conversion(n, m, pair.m_prime, kp.kept, removed, kept_bound);
    report.odd = Some(OddSection {
        m_prime: pair.m_prime,
        o_max: pair.o_max,
        kept_pairs: kp.kept,
        kept_degree: kp.degree,
        removed_mass: removed,
        filter: opts.filter,
        kept_bound,
        pair_bound,
    });
    set_bounds(&mut report, b);
    report.timings.total_ms = ms(start);
    Ok(report)
}

/// Dispatches on the parity of the arity.
pub fn refute(inst: &XorInstance, opts: &RefuteOptions) -> Result<RefutationReport> {
    if inst.arity() % 2 == 0 {
        refute_even(inst, opts)
    } else {
        refute_odd(inst, opts)
    }
}

/// Recomputes the bound of an XOR report from its stored data.
pub(crate) fn reassemble_xor(r: &RefutationReport) -> Option<f64> {
    let d = r.config.level;
    let t = r.cutoff;
    if r.m == 0 {
        return Some(1.0);
    }
    if r.levels.len() != d.saturating_sub(t) || r.levels.iter().enumerate().any(|(i, l)| l.level != t + 1 + i) {
        return None;
    }
    match r.problem {
        Problem::EvenXor => {
            let terms: Vec<f64> =
                r.levels.iter().map(|l| level_term(r.n, r.k / 2, r.m, l.level, l.norm, l.low_count_lower)).collect();
            let sum = level_sum(d, t, &terms);
            let eps = slack(d, r.k, r.m_max, r.config.epsilon_constant, r.m, r.n);
            Some(root_bound(sum, d, eps).clamp(0.0, 1.0))
        }
        Problem::OddXor => {
            let odd = r.odd.as_ref()?;
            let terms: Vec<f64> = r
                .levels
                .iter()
                .map(|l| level_term(r.n, r.k - 1, odd.kept_pairs, l.level, l.norm, l.low_count_lower))
                .collect();
            let sum = level_sum(d, t, &terms);
            let eps = slack(d, 2 * r.k - 1, odd.o_max, r.config.epsilon_constant, odd.m_prime, r.n);
            let kept_bound = if odd.kept_pairs == 0 { 1.0 } else { root_bound(sum, d, eps).min(1.0) };
            let (_, b) = odd_back_conversion(r.n, r.m, odd.m_prime, odd.kept_pairs, odd.removed_mass, kept_bound);
            Some(b.clamp(0.0, 1.0))
        }
        _ => None,
    }
}
