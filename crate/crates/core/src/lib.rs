//! Symmetrized Kronecker-power spectral certificates.
//!
//! Upper bounds on injective tensor norms and strong refutation of random
//! k-XOR and Boolean k-CSP instances. The certificate at level `d` is the
//! `d`-th Kronecker power of a flattened tensor restricted to the symmetric
//! subspace; its spectral norm bounds `⟨T, x^{⊗k}⟩^d` for unit `x`.
//!
//! ```
//! use symcert_core::{refute_xor, RefuteOptions, XorInstance};
//!
//! let inst = XorInstance::generate(10, 4, 0.05, 1).unwrap();
//! let report = refute_xor(&inst, &RefuteOptions::default().with_level(1)).unwrap();
//! assert!(report.upper_bound <= 1.0);
//! ```

pub mod basis;
pub mod csp;
pub mod error;
pub mod io;
pub mod operator;
pub mod oracle;
pub mod report;
pub mod spectral;
pub mod sweep;
pub mod tensor;
pub mod xor;

mod norm;

pub use basis::MultisetBasis;
pub use csp::{
    decompose, refute_csp, split_unweighted, twise_margin_lp, CspClause, CspInstance, CspOptions, FourierExpansion,
    Predicate, TwiseMargin, WeightedXor,
};
pub use error::{Error, Result};
pub use io::Instance;
pub use norm::{certify_injective_norm, TensorNormCertificate};
pub use operator::{
    build_even_tensor_certificate, build_even_xor_certificate, build_odd_tensor_certificate,
    build_odd_xor_certificate, CertificateOperator, FilterVariant, OddCorrection, OperatorConfig, OperatorKind,
};
pub use oracle::{audit_report, brute_force_opt, injective_norm_lower, AuditVerdict, InstanceRef, OracleResult};
pub use report::{Problem, RefutationReport};
pub use spectral::{
    dense_norm, operator_norm, power_estimate, trace_moment_bound, LinearOperator, NormMode, NormResult,
    SpectralConfig, SpectralMode,
};
pub use sweep::{Cell, SweepRow, SweepSpec};
pub use tensor::{FlatMatrix, Symmetry, Tensor};
pub use xor::{refute as refute_xor, CapRule, RefuteOptions, XorClause, XorInstance};
