//! Certified upper bounds on `‖T‖_inj = max_{‖x‖=1} |⟨T, x^{⊗k}⟩|`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::operator::{build_even_tensor_certificate, build_odd_tensor_certificate, FilterVariant, OperatorConfig};
use crate::spectral::{operator_norm, Diagnostics, NormMode, SpectralConfig};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorNormCertificate {
    pub order: usize,
    pub dim: usize,
    pub level: usize,
    /// Upper bound on the injective norm (certified unless `mode` is heuristic).
    pub bound: f64,
    /// Norm of the level-`d` certificate operator.
    pub operator_norm: f64,
    pub operator_dim: usize,
    /// Odd order only: the square-term correction added before the root.
    pub max_slice_energy: Option<f64>,
    pub mode: NormMode,
    pub diagnostics: Diagnostics,
    pub elapsed_ms: f64,
}

/// Even order: `‖C_(d)‖^{1/d}`. Odd order (symmetric tensors):
/// `(‖Γ_(d)‖^{1/d} + max slice energy)^{1/2}`. No multiplicity cap is used,
/// so the bound holds for every unit vector.
pub fn certify_injective_norm(
    t: &Tensor,
    level: usize,
    filter: FilterVariant,
    spectral: &SpectralConfig,
) -> Result<TensorNormCertificate> {
    let start = Instant::now();
    let cfg = OperatorConfig::new(level).with_filter(filter);
    let d = level as f64;
    let (op, energy) = if t.order() % 2 == 0 {
        (build_even_tensor_certificate(t, &cfg)?, None)
    } else {
        let (op, corr) = build_odd_tensor_certificate(t, &cfg)?;
        (op, Some(corr.max_slice_energy))
    };
    let norm = operator_norm(&op, spectral)?;
    let root = norm.value.max(0.0).powf(1.0 / d);
    let bound = match energy {
        None => root,
        Some(e) => (root + e).sqrt(),
    };
    Ok(TensorNormCertificate {
        order: t.order(),
        dim: t.dim(),
        level,
        bound,
        operator_norm: norm.value,
        operator_dim: op.dim(),
        max_slice_energy: energy,
        mode: norm.mode,
        diagnostics: norm.diagnostics,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::injective_norm_lower;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_even_is_sound() {
        let v = [0.6, 0.8, 0.0];
        let t = Tensor::rank_one(&v, 4).unwrap();
        for d in [1, 2] {
            let c = certify_injective_norm(&t, d, FilterVariant::default(), &SpectralConfig::default()).unwrap();
            assert!(c.bound >= 1.0 - 1e-9, "d = {d}: {}", c.bound);
        }
    }

    #[test]
    fn sandwich_on_gaussian_tensors() {
        for (k, n) in [(3, 5), (4, 4), (3, 6)] {
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64 * 10 + n as u64);
            let t = Tensor::gaussian_symmetric(k, n, &mut rng).unwrap();
            let lower = injective_norm_lower(&t, 10, 3);
            for d in [1, 2] {
                let c = certify_injective_norm(&t, d, FilterVariant::default(), &SpectralConfig::default()).unwrap();
                assert!(lower <= c.bound + 1e-9, "k={k} n={n} d={d}: {lower} > {}", c.bound);
            }
        }
    }
}
