//! Operator norms: dense eigensolve, the trace-moment upper bound, and a
//! power-iteration lower estimate.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::FlatMatrix;

/// A real linear map given by its action and the action of its transpose.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>>;

    /// Dense row-major form. The default builds it column by column.
    fn materialize(&self, max_dim: usize) -> Result<FlatMatrix> {
        let (r, c) = (self.nrows(), self.ncols());
        if r.max(c) > max_dim {
            return Err(Error::Resource(format!("{r}x{c} operator exceeds the dense limit {max_dim}")));
        }
        let cols: Vec<Vec<f64>> = (0..c)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; c];
                e[j] = 1.0;
                self.apply(&e)
            })
            .collect::<Result<_>>()?;
        let mut data = vec![0.0; r * c];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * c + j] = v;
            }
        }
        FlatMatrix::from_dense(r, c, data)
    }
}

impl LinearOperator for FlatMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.matvec(v)
    }

    fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows() {
            return Err(Error::DimensionMismatch { expected: self.rows(), actual: v.len() });
        }
        let mut y = vec![0.0; self.cols()];
        for (r, &x) in v.iter().enumerate() {
            if x != 0.0 {
                for (c, a) in self.row(r) {
                    y[c] += a * x;
                }
            }
        }
        Ok(y)
    }

    fn materialize(&self, _max_dim: usize) -> Result<FlatMatrix> {
        Ok(self.clone())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMode {
    /// Dense when materializable, otherwise the trace-moment bound.
    #[default]
    Auto,
    Exact,
    Trace,
    /// Power iteration; a lower estimate, never certified.
    Heuristic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    CertifiedExact,
    CertifiedTrace,
    HeuristicEstimate,
}

impl NormMode {
    pub fn is_certified(self) -> bool {
        !matches!(self, NormMode::HeuristicEstimate)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dim: usize,
    pub iterations: usize,
    pub residual: f64,
    pub trace_exponent: Option<usize>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub mode: NormMode,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub mode: SpectralMode,
    /// Trace exponent ℓ; `None` picks `ceil(log2(dim))`.
    pub trace_exponent: Option<usize>,
    pub power_max_iter: usize,
    pub power_tol: f64,
    /// Largest dimension solved densely.
    pub dense_max_dim: usize,
    /// Upper limit on the number of matvecs a trace bound may spend.
    pub trace_max_matvecs: usize,
    pub seed: u64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            mode: SpectralMode::Auto,
            trace_exponent: None,
            power_max_iter: 2000,
            power_tol: 1e-12,
            dense_max_dim: 4096,
            trace_max_matvecs: 2_000_000,
            seed: 0,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trace_exponent == Some(0) {
            return invalid("trace exponent must be at least 1");
        }
        if !(self.power_tol > 0.0) {
            return invalid("power-iteration tolerance must be positive");
        }
        Ok(())
    }
}

fn to_faer(m: &FlatMatrix) -> Mat<f64> {
    let cols = m.cols();
    let data = m.to_dense();
    Mat::from_fn(m.rows(), cols, |i, j| data[i * cols + j])
}

/// Largest singular value of a dense matrix via the Gram matrix on the smaller side.
pub fn matrix_norm(m: &FlatMatrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 || m.frobenius_sq() == 0.0 {
        return Ok(0.0);
    }
    let a = to_faer(m);
    let gram = if m.rows() <= m.cols() { &a * a.transpose() } else { a.transpose() * &a };
    let ev = gram
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let top = ev.iter().copied().fold(0.0f64, f64::max);
    Ok(top.max(0.0).sqrt())
}

pub fn dense_norm<O: LinearOperator + ?Sized>(op: &O, max_dim: usize) -> Result<NormResult> {
    let m = op.materialize(max_dim)?;
    let value = matrix_norm(&m)?;
    Ok(NormResult {
        value,
        mode: NormMode::CertifiedExact,
        diagnostics: Diagnostics {
            dim: op.nrows().max(op.ncols()),
            iterations: 0,
            residual: 0.0,
            trace_exponent: None,
            converged: true,
        },
    })
}

/// Neumaier summation in the given order.
fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `ceil(log2(dim))`, at least 1.
pub fn default_trace_exponent(dim: usize) -> usize {
    let mut l = 0;
    while (1usize << l) < dim {
        l += 1;
    }
    l.max(1)
}

/// `Tr((C C^T)^ℓ)^{1/(2ℓ)}`, an upper bound on `‖C‖`.
///
/// Uses the Gram side with the smaller dimension. Each diagonal term is
/// `‖(G)^{ℓ/2} e_i‖²` (even ℓ) or `‖C^T G^{(ℓ-1)/2} e_i‖²` (odd ℓ).
pub fn trace_moment_bound<O: LinearOperator + ?Sized>(op: &O, ell: usize, max_matvecs: usize) -> Result<NormResult> {
    if ell == 0 {
        return invalid("trace exponent must be at least 1");
    }
    let rows_side = op.nrows() <= op.ncols();
    let dim = op.nrows().min(op.ncols());
    let cost = dim.saturating_mul(ell);
    if cost > max_matvecs {
        return Err(Error::Resource(format!(
            "trace bound needs {cost} operator applications, budget is {max_matvecs}"
        )));
    }
    // Forward and backward maps such that G = fwd(bwd(.)) lives on the small side.
    let fwd = |v: &[f64]| if rows_side { op.apply(v) } else { op.apply_transpose(v) };
    let bwd = |v: &[f64]| if rows_side { op.apply_transpose(v) } else { op.apply(v) };
    let terms: Vec<f64> = (0..dim)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            for _ in 0..ell / 2 {
                v = fwd(&bwd(&v)?)?;
            }
            if ell % 2 == 1 {
                v = bwd(&v)?;
            }
            Ok(v.iter().map(|x| x * x).sum())
        })
        .collect::<Result<_>>()?;
    let trace = compensated_sum(&terms);
    let value = trace.max(0.0).powf(1.0 / (2.0 * ell as f64));
    Ok(NormResult {
        value,
        mode: NormMode::CertifiedTrace,
        diagnostics: Diagnostics {
            dim,
            iterations: cost,
            residual: 0.0,
            trace_exponent: Some(ell),
            converged: true,
        },
    })
}

/// Power iteration on the smaller Gram matrix from a seeded Gaussian start.
/// The value `‖C v‖` for a unit `v` is always at most `‖C‖`.
pub fn power_estimate<O: LinearOperator + ?Sized>(op: &O, cfg: &SpectralConfig) -> Result<NormResult> {
    let rows_side = op.nrows() <= op.ncols();
    let dim = op.nrows().min(op.ncols());
    let fwd = |v: &[f64]| if rows_side { op.apply(v) } else { op.apply_transpose(v) };
    let bwd = |v: &[f64]| if rows_side { op.apply_transpose(v) } else { op.apply(v) };
    let mut diag = Diagnostics { dim, iterations: 0, residual: 0.0, trace_exponent: None, converged: false };
    if dim == 0 {
        diag.converged = true;
        return Ok(NormResult { value: 0.0, mode: NormMode::HeuristicEstimate, diagnostics: diag });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut v);
    let mut best = 0.0f64;
    let mut prev = 0.0f64;
    for it in 0..cfg.power_max_iter {
        diag.iterations = it + 1;
        let w = bwd(&v)?;
        let sigma = norm(&w);
        best = best.max(sigma);
        if sigma == 0.0 {
            diag.converged = true;
            break;
        }
        let mut next = fwd(&w)?;
        let lambda = norm(&next);
        if lambda == 0.0 {
            diag.converged = true;
            break;
        }
        for x in &mut next {
            *x /= lambda;
        }
        let residual: f64 = next.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        diag.residual = residual;
        v = next;
        if it > 0 && (sigma - prev).abs() <= cfg.power_tol * sigma.max(1e-300) && residual <= cfg.power_tol.sqrt() {
            diag.converged = true;
            break;
        }
        prev = sigma;
    }
    let last = norm(&bwd(&v)?);
    Ok(NormResult { value: best.max(last), mode: NormMode::HeuristicEstimate, diagnostics: diag })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

/// Norm by the configured route. `Auto` never returns a heuristic value.
pub fn operator_norm<O: LinearOperator + ?Sized>(op: &O, cfg: &SpectralConfig) -> Result<NormResult> {
    cfg.validate()?;
    let dim = op.nrows().max(op.ncols());
    let ell = || cfg.trace_exponent.unwrap_or_else(|| default_trace_exponent(dim));
    match cfg.mode {
        SpectralMode::Exact => dense_norm(op, cfg.dense_max_dim),
        SpectralMode::Trace => trace_moment_bound(op, ell(), cfg.trace_max_matvecs),
        SpectralMode::Heuristic => power_estimate(op, cfg),
        SpectralMode::Auto => {
            if dim <= cfg.dense_max_dim {
                dense_norm(op, cfg.dense_max_dim)
            } else {
                trace_moment_bound(op, ell(), cfg.trace_max_matvecs)
            }
        }
    }
}
