//! Benchmarks live in `benches/`. This crate only hosts shared fixtures.

use symcert_core::{CspInstance, Predicate, XorInstance};

/// A k-XOR instance with about `clauses_per_var · n` clauses.
pub fn xor_fixture(n: usize, k: usize, clauses_per_var: f64, seed: u64) -> XorInstance {
    let p = (clauses_per_var * n as f64 / (n as f64).powi(k as i32)).min(1.0);
    XorInstance::generate(n, k, p, seed).expect("valid fixture parameters")
}

pub fn sat_fixture(n: usize, k: usize, clauses_per_var: f64, seed: u64) -> CspInstance {
    let p = (clauses_per_var * n as f64 / (n as f64).powi(k as i32)).min(1.0);
    let pred = Predicate::builtin("kSAT", k).expect("builtin predicate");
    CspInstance::generate(pred, n, p, seed).expect("valid fixture parameters")
}
