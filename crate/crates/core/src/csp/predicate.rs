//! Boolean predicates on `{±1}^k` and their Fourier expansions.
//!
//! A sign pattern `z` is stored at table index `Σ_i [z_i = -1] 2^i`. A subset
//! `S ⊆ [k]` is a bitmask over positions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest supported arity.
pub const MAX_ARITY: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    k: usize,
    table: Vec<bool>,
}

/// Sign pattern at table index `b`.
pub fn pattern(k: usize, b: usize) -> Vec<i8> {
    (0..k).map(|i| if b >> i & 1 == 1 { -1 } else { 1 }).collect()
}

/// Table index of a sign pattern.
pub fn pattern_index(z: &[i8]) -> usize {
    z.iter().enumerate().filter(|(_, &s)| s < 0).map(|(i, _)| 1 << i).sum()
}

/// `χ_S(z)` for the pattern at index `b`.
pub fn character(mask: usize, b: usize) -> i8 {
    if (mask & b).count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

impl Predicate {
    pub fn from_table(k: usize, table: Vec<bool>) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return invalid(format!("predicate arity must be in 1..={MAX_ARITY}, got {k}"));
        }
        if table.len() != 1 << k {
            return invalid(format!("truth table needs {} entries, got {}", 1usize << k, table.len()));
        }
        Ok(Predicate { k, table })
    }

    pub fn from_fn(k: usize, f: impl Fn(&[i8]) -> bool) -> Result<Self> {
        if k == 0 || k > MAX_ARITY {
            return invalid(format!("predicate arity must be in 1..={MAX_ARITY}, got {k}"));
        }
        Predicate::from_table(k, (0..1usize << k).map(|b| f(&pattern(k, b))).collect())
    }

    /// Parses a `2^k` character string of `0`/`1`, character `b` giving the value at index `b`.
    pub fn from_bits(bits: &str) -> Result<Self> {
        let len = bits.len();
        if len < 2 || !len.is_power_of_two() {
            return invalid(format!("bit string length {len} is not 2^k with k >= 1"));
        }
        let table = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => invalid(format!("bad character {other:?} in bit string")),
            })
            .collect::<Result<Vec<bool>>>()?;
        Predicate::from_table(len.trailing_zeros() as usize, table)
    }

    /// Builtins: `kSAT` (false only when every literal is -1), `kXOR`
    /// (product is +1), `NAE` (not all equal), `Majority` (positive sum).
    pub fn builtin(name: &str, k: usize) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "ksat" | "sat" | "or" => Predicate::from_fn(k, |z| z.iter().any(|&s| s > 0)),
            "kxor" | "xor" => Predicate::from_fn(k, |z| z.iter().map(|&s| s as i32).product::<i32>() == 1),
            "nae" => Predicate::from_fn(k, |z| z.iter().any(|&s| s != z[0])),
            "majority" | "maj" => Predicate::from_fn(k, |z| z.iter().map(|&s| s as i32).sum::<i32>() > 0),
            _ => invalid(format!("unknown predicate {name:?}")),
        }
    }

    /// Builtin name or bit string.
    pub fn parse(spec: &str, k: usize) -> Result<Self> {
        if spec.chars().all(|c| c == '0' || c == '1') {
            let p = Predicate::from_bits(spec)?;
            if p.k != k {
                return invalid(format!("bit string has arity {}, expected {k}", p.k));
            }
            Ok(p)
        } else {
            Predicate::builtin(spec, k)
        }
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn to_bits(&self) -> String {
        self.table.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn eval(&self, z: &[i8]) -> bool {
        self.table[pattern_index(z)]
    }

    pub fn expectation(&self) -> f64 {
        self.table.iter().filter(|&&b| b).count() as f64 / self.table.len() as f64
    }

    /// Exact Fourier coefficients by a Walsh–Hadamard transform. Every
    /// coefficient is a multiple of `2^{-k}`, so the result is exact in f64.
    pub fn fourier(&self) -> FourierExpansion {
        let size = self.table.len();
        let mut a: Vec<i64> = self.table.iter().map(|&b| b as i64).collect();
        let mut h = 1;
        while h < size {
            for block in (0..size).step_by(2 * h) {
                for i in block..block + h {
                    let (x, y) = (a[i], a[i + h]);
                    a[i] = x + y;
                    a[i + h] = x - y;
                }
            }
            h *= 2;
        }
        let scale = 1.0 / size as f64;
        FourierExpansion { k: self.k, coeffs: a.into_iter().map(|v| v as f64 * scale).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierExpansion {
    k: usize,
    /// Indexed by subset mask.
    coeffs: Vec<f64>,
}

impl FourierExpansion {
    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn coef(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `Σ_S coef(S) χ_S(z)`.
    pub fn eval(&self, z: &[i8]) -> f64 {
        let b = pattern_index(z);
        self.coeffs.iter().enumerate().map(|(s, &c)| c * character(s, b) as f64).sum()
    }
}
