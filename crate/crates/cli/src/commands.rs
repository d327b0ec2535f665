use std::io::ErrorKind;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use symcert_core::io::{read_instance, write_atomic, xor_to_text};
use symcert_core::{
    audit_report, brute_force_opt, certify_injective_norm, injective_norm_lower, CspInstance,
    CspOptions, Error, Instance, NormMode, Predicate, RefutationReport, SpectralConfig, SweepSpec, Tensor,
    XorInstance,
};

use crate::{AuditArgs, Format, GenArgs, InstanceType, OracleArgs, RefuteCspArgs, RefuteXorArgs, SweepArgs, TensorNormArgs};

pub const OK: u8 = 0;
pub const VACUOUS: u8 = 1;
pub const USAGE: u8 = 2;
pub const RESOURCE: u8 = 3;

pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: USAGE, msg: msg.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(io) if matches!(io.kind(), ErrorKind::NotFound | ErrorKind::PermissionDenied) => USAGE,
            Error::Resource(_) | Error::Io(_) | Error::Numerical(_) => RESOURCE,
            _ => USAGE,
        };
        Failure { code, msg: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

/// Writes `text` to `out`, or to stdout when there is no path.
fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => Ok(write_atomic(p, text)?),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

/// The summary goes to stdout, unless stdout already carries the document.
fn summarize(out: Option<&Path>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn finish_report(report: &RefutationReport, out: Option<&Path>) -> Outcome {
    emit(out, &report.to_json()?)?;
    summarize(out, &report.summary());
    Ok(if report.vacuous { VACUOUS } else { OK })
}

pub fn gen(a: GenArgs) -> Outcome {
    if a.n == 0 || a.k == 0 {
        return Err(Failure::usage("--n and --k must be positive"));
    }
    let p = match (a.p, a.m) {
        (Some(p), _) => p,
        (None, Some(m)) => {
            if !(m >= 0.0) {
                return Err(Failure::usage("--m must be non-negative"));
            }
            (m / (a.n as f64).powi(a.k as i32)).min(1.0)
        }
        (None, None) => unreachable!("clap requires --p or --m"),
    };
    let text = match (a.kind, a.format) {
        (InstanceType::Xor, Format::Jsonl) => Instance::Xor(XorInstance::generate(a.n, a.k, p, a.seed)?).to_jsonl(),
        (InstanceType::Xor, Format::Text) => xor_to_text(&XorInstance::generate(a.n, a.k, p, a.seed)?),
        (InstanceType::Csp, Format::Jsonl) => {
            let pred = Predicate::parse(&a.pred, a.k)?;
            Instance::Csp(CspInstance::generate(pred, a.n, p, a.seed)?).to_jsonl()
        }
        (InstanceType::Csp, Format::Text) => return Err(Failure::usage("CSP instances are written as jsonl only")),
    };
    emit(a.out.as_deref(), &text)?;
    Ok(OK)
}

fn load_xor(path: &Path) -> Result<XorInstance, Failure> {
    match read_instance(path)? {
        Instance::Xor(i) => Ok(i),
        Instance::Csp(_) => Err(Failure::usage(format!("{} is a CSP instance; use refute-csp", path.display()))),
    }
}

pub fn refute_xor(a: RefuteXorArgs) -> Outcome {
    let inst = load_xor(&a.instance)?;
    let report = symcert_core::refute_xor(&inst, &a.cert.refute_options())?;
    finish_report(&report, a.out.as_deref())
}

pub fn refute_csp(a: RefuteCspArgs) -> Outcome {
    let inst = match read_instance(&a.instance)? {
        Instance::Csp(i) => i,
        Instance::Xor(i) => {
            // an XOR instance is the CSP of its parity predicate
            let pred = Predicate::builtin("kXOR", i.arity())?;
            let clauses = i
                .clauses()
                .iter()
                .map(|c| {
                    let mut neg = vec![1i8; c.vars.len()];
                    neg[0] = c.sign;
                    symcert_core::CspClause { vars: c.vars.clone(), neg }
                })
                .collect();
            CspInstance::new(i.num_vars(), pred, clauses)?
        }
    };
    let opts = CspOptions { xor: a.cert.refute_options(), twise: a.twise, splits: a.splits, seed: a.cert.seed };
    let report = symcert_core::refute_csp(&inst, &opts)?;
    finish_report(&report, a.out.as_deref())
}

fn mode_name(m: NormMode) -> &'static str {
    match m {
        NormMode::CertifiedExact => "certified-exact",
        NormMode::CertifiedTrace => "certified-trace",
        NormMode::HeuristicEstimate => "heuristic",
    }
}

pub fn tensor_norm(a: TensorNormArgs) -> Outcome {
    let t = match (&a.tensor, a.n, a.k) {
        (Some(path), _, _) => Tensor::from_text(&std::fs::read_to_string(path).map_err(Error::from)?)?.into_symmetric()?,
        (None, Some(n), Some(k)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            Tensor::gaussian_symmetric(k, n, &mut rng)?
        }
        _ => return Err(Failure::usage("give --tensor or both --n and --k")),
    };
    if a.d == 0 {
        return Err(Failure::usage("--d must be at least 1"));
    }
    let spectral = SpectralConfig { mode: a.mode.into(), trace_exponent: a.trace_l, seed: a.seed, ..Default::default() };
    let cert = certify_injective_norm(&t, a.d, a.filter.into(), &spectral)?;
    let mut doc = serde_json::to_value(&cert)?;
    let lower = if a.lower_restarts > 0 { Some(injective_norm_lower(&t, a.lower_restarts, a.seed)) } else { None };
    doc["lower_bound"] = json!(lower);
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
    let mut line = format!("certified ‖T‖_inj ≤ {} [{}]", cert.bound, mode_name(cert.mode));
    if let Some(l) = lower {
        line.push_str(&format!(", lower estimate {l}"));
    }
    summarize(a.out.as_deref(), &line);
    Ok(OK)
}

pub fn oracle(a: OracleArgs) -> Outcome {
    let inst = read_instance(&a.instance)?;
    let r = brute_force_opt(inst.as_ref())?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&r)?)?;
    summarize(a.out.as_deref(), &format!("opt = {}, min = {} over {} assignments", r.opt, r.min, r.size));
    Ok(OK)
}

pub fn audit(a: AuditArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.report).map_err(Error::from)?;
    let report = RefutationReport::from_json(&text)?;
    let inst = read_instance(&a.instance)?;
    let verdict = audit_report(&report, inst.as_ref());
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&verdict)?)?;
    let line = if verdict.pass { "audit passed".to_string() } else { format!("audit FAILED: {}", verdict.details.join("; ")) };
    summarize(a.out.as_deref(), &line);
    Ok(if verdict.pass { OK } else { VACUOUS })
}

pub fn sweep(a: SweepArgs) -> Outcome {
    let spec = SweepSpec {
        k: a.k,
        ns: a.n,
        densities: a.c,
        levels: a.d,
        seeds: a.seeds,
        master_seed: a.seed,
        delta: a.delta,
        cap: a.cap,
        spectral: SpectralConfig { mode: a.mode.into(), trace_exponent: a.trace_l, ..Default::default() },
        oracle: !a.no_oracle,
    };
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = spec.run(workers)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Failure { code: RESOURCE, msg: e.to_string() })?;
    }
    let bytes = w.into_inner().map_err(|e| Failure { code: RESOURCE, msg: e.to_string() })?;
    let text = String::from_utf8(bytes).map_err(|e| Failure { code: RESOURCE, msg: e.to_string() })?;
    emit(a.out.as_deref(), &text)?;
    Ok(OK)
}
