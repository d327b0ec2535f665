//! Refutation reports and the arithmetic that turns per-level norms into a
//! bound. Everything needed to redo the arithmetic is stored in the report.

use num::rational::BigRational;
use num::{BigInt, BigUint, One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::operator::FilterVariant;
use crate::spectral::{Diagnostics, NormMode, SpectralConfig};

pub const SCHEMA_VERSION: u32 = 1;
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    EvenXor,
    OddXor,
    /// Arity-one XOR, bounded exactly by per-variable majorities.
    UnaryXor,
    Csp,
}

/// One level `j` of the binomial expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub norm: f64,
    pub mode: NormMode,
    pub dim: usize,
    /// Certified lower bound on the number of low-multiplicity `j`-tuples.
    pub low_count_lower: f64,
    /// The level's contribution before binomial weighting, in `[0, 1]`.
    pub term: f64,
    pub diagnostics: Diagnostics,
}

/// Data for the pairing step of odd arity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddSection {
    /// `m'`: ordered pairs of distinct clauses sharing their last variable.
    pub m_prime: usize,
    pub o_max: usize,
    /// Pairs whose entry survives the squares filter.
    pub kept_pairs: usize,
    /// Variable degree over kept pairs, counting the shared variable.
    pub kept_degree: usize,
    /// Sum of the filtered entries of `Σ_u T_u ⊗ T_u` (each a square monomial).
    pub removed_mass: f64,
    pub filter: FilterVariant,
    /// Certified bound on the satisfied fraction of the kept pairs.
    pub kept_bound: f64,
    /// Certified bound on the satisfied fraction of all pairs.
    pub pair_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspTerm {
    /// Positions of the subset `S`, 0-based.
    pub subset: Vec<usize>,
    pub coefficient: f64,
    /// Certified bound on `|Ψ_S(x)| / m`.
    pub gamma: f64,
    pub method: String,
    /// `Σ_L |c_L|`.
    pub weight: u64,
    pub max_coefficient: u64,
    pub sub_reports: Vec<RefutationReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CspSection {
    pub predicate: String,
    pub expectation: f64,
    /// `t` when a t-wise margin polynomial replaced the Fourier expansion.
    pub twise: Option<usize>,
    pub margin: f64,
    /// Constant term: `E[P]`, or `1 - δ` for the margin route.
    pub constant: f64,
    pub splits: usize,
    pub terms: Vec<CspTerm>,
    /// Absolute slack added for the floating conversion of the margin polynomial.
    pub rounding_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub build_ms: f64,
    pub norm_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessCheck {
    pub opt: f64,
    pub min: f64,
    pub upper_ok: bool,
    pub lower_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub level: usize,
    pub level_rule: String,
    pub delta: f64,
    pub cap: Option<usize>,
    pub cap_rule: String,
    pub epsilon_constant: f64,
    pub filter: FilterVariant,
    pub spectral: SpectralConfig,
    pub log_base: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefutationReport {
    pub schema_version: u32,
    pub library_version: String,
    pub problem: Problem,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub m_max: usize,
    pub config: ReportConfig,
    /// `t = floor(δ d)`.
    pub cutoff: usize,
    /// `H(δ)` in nats.
    pub entropy: f64,
    pub epsilon: f64,
    pub levels: Vec<LevelRecord>,
    /// Bracketed binomial sum whose `d`-th root gives the bound before slack.
    pub level_sum: f64,
    pub odd: Option<OddSection>,
    pub csp: Option<CspSection>,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub vacuous: bool,
    pub heuristic: bool,
    pub timings: Timings,
    pub soundness: Option<SoundnessCheck>,
}

impl RefutationReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let mode = if self.heuristic {
            "heuristic"
        } else if self.vacuous {
            "vacuous"
        } else {
            "certified"
        };
        format!("certified opt(Φ) ≤ {} [{mode}]", self.upper_bound)
    }
}

pub fn binary_entropy(delta: f64) -> f64 {
    let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    h(delta) + h(1.0 - delta)
}

/// `C(d, j) / 2^d` for `j = 0..=d`, computed exactly and then rounded.
pub fn binomial_weights(d: usize) -> Vec<f64> {
    let denom = BigInt::one() << d;
    let mut c = BigUint::one();
    let mut out = Vec::with_capacity(d + 1);
    for j in 0..=d {
        let r = BigRational::new(BigInt::from(c.clone()), denom.clone());
        out.push(r.to_f64().unwrap_or(0.0));
        c = c * BigUint::from(d - j) / BigUint::from(j + 1);
    }
    out
}

/// `min(1, n^{j·e} ‖C_(j)‖ / items^j + (1 - low / items^j))`.
///
/// Bounds the average of `Π_ℓ s_ℓ` over all ordered `j`-tuples of items,
/// where `s = ±1` marks satisfied/violated: the low-multiplicity tuples sum
/// to a quadratic form of the certificate, the rest contribute at most one
/// each.
pub fn level_term(n: usize, exponent: usize, items: usize, j: usize, norm: f64, low: f64) -> f64 {
    if items == 0 {
        return 1.0;
    }
    let lm = (items as f64).ln();
    let spectral = if norm > 0.0 {
        ((j * exponent) as f64 * (n as f64).ln() + norm.ln() - j as f64 * lm).exp()
    } else {
        0.0
    };
    let covered = if low > 0.0 { (low.ln() - j as f64 * lm).exp().min(1.0) } else { 0.0 };
    (spectral + (1.0 - covered)).min(1.0)
}

/// `Σ_{j ≤ t} C(d,j)/2^d + Σ_{j > t} C(d,j)/2^d · term_j`.
/// `terms[i]` is the term of level `t + 1 + i`.
pub fn level_sum(d: usize, t: usize, terms: &[f64]) -> f64 {
    let w = binomial_weights(d);
    let head: f64 = w[..=t.min(d)].iter().sum();
    let tail: f64 = terms.iter().enumerate().map(|(i, &x)| w[t + 1 + i] * x).sum();
    head + tail
}

/// `sum^{1/d} + ε`, unclamped.
pub fn root_bound(sum: f64, d: usize, epsilon: f64) -> f64 {
    sum.max(0.0).powf(1.0 / d as f64) + epsilon
}

/// `ε = d · width · degree / (c · items · ln n)`, zero without items.
pub fn slack(d: usize, width: usize, degree: usize, constant: f64, items: usize, n: usize) -> f64 {
    if items == 0 {
        return 0.0;
    }
    let ln_n = (n.max(2) as f64).ln();
    (d * width * degree) as f64 / (constant * items as f64 * ln_n)
}

/// The Cauchy–Schwarz back-conversion for odd arity.
///
/// `kept_bound` bounds the satisfied fraction of the kept pairs. Returns the
/// bound on pairs and the bound on the original instance.
pub fn odd_back_conversion(
    n: usize,
    m: usize,
    m_prime: usize,
    kept: usize,
    removed_mass: f64,
    kept_bound: f64,
) -> (f64, f64) {
    if m == 0 {
        return (1.0, 1.0);
    }
    if m_prime == 0 {
        // Only the diagonal survives: Σ_i y_i² = m.
        return (0.5, 0.5 + 0.5 * (n as f64 / m as f64).sqrt());
    }
    let kept_excess = kept as f64 * (2.0 * kept_bound - 1.0);
    let pair_bound = 0.5 + (kept_excess + removed_mass - m as f64) / (2.0 * m_prime as f64);
    let inner = n as f64 * (kept_excess + removed_mass);
    let bound = 0.5 + inner.max(0.0).sqrt() / (2.0 * m as f64);
    (pair_bound, bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for d in [1, 2, 5, 30, 80] {
            let s: f64 = binomial_weights(d).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(binomial_weights(2), vec![0.25, 0.5, 0.25]);
        // no overflow at large d
        let w = binomial_weights(200);
        assert!(w[100] > 0.0 && w[100].is_finite());
    }

    #[test]
    fn level_sum_classical_case() {
        // d = 1, t = 0: 1/2 + term/2
        assert_eq!(level_sum(1, 0, &[0.2]), 0.6);
        assert_eq!(level_sum(3, 3, &[]), 1.0);
    }

    #[test]
    fn level_term_behaviour() {
        assert_eq!(level_term(10, 1, 0, 1, 1.0, 0.0), 1.0);
        // full coverage: only the spectral part remains
        let t = level_term(10, 1, 100, 1, 2.0, 100.0);
        assert!((t - 0.2).abs() < 1e-12);
        assert!(level_term(10, 1, 100, 1, 2.0, 50.0) > t);
        assert_eq!(level_term(10, 1, 100, 1, 500.0, 100.0), 1.0);
    }

    #[test]
    fn back_conversion_without_pairs() {
        let (_, b) = odd_back_conversion(12, 30, 0, 0, 30.0, 1.0);
        assert_eq!(b, 0.5 + 0.5 * (12.0f64 / 30.0).sqrt());
        assert_eq!(odd_back_conversion(5, 0, 0, 0, 0.0, 1.0).1, 1.0);
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-15);
    }
}
