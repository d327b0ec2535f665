use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use symcert_core::{CapRule, FilterVariant, RefuteOptions, SpectralConfig, SpectralMode};

mod commands;

/// Spectral certificates for injective tensor norms and random CSP refutation.
///
/// Exit codes: 0 success, 1 vacuous certificate (or failed audit), 2 usage
/// or input error, 3 resource error.
#[derive(Parser, Debug)]
#[command(name = "symcert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a random instance.
    Gen(GenArgs),
    /// Certify an upper bound on the satisfiable fraction of a k-XOR instance.
    RefuteXor(RefuteXorArgs),
    /// Certify an upper bound on the satisfiable fraction of a k-CSP instance.
    RefuteCsp(RefuteCspArgs),
    /// Certify an upper bound on the injective norm of a symmetric tensor.
    TensorNorm(TensorNormArgs),
    /// Exhaustive optimum of a small instance.
    Oracle(OracleArgs),
    /// Recheck a stored report against its instance.
    Audit(AuditArgs),
    /// Run a density/level grid and write one CSV row per cell.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InstanceType {
    Xor,
    Csp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Jsonl,
    Text,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Auto,
    Exact,
    Trace,
    Heuristic,
}

impl From<Mode> for SpectralMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Auto => SpectralMode::Auto,
            Mode::Exact => SpectralMode::Exact,
            Mode::Trace => SpectralMode::Trace,
            Mode::Heuristic => SpectralMode::Heuristic,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Filter {
    OrderedPair,
    Multiset,
}

impl From<Filter> for FilterVariant {
    fn from(f: Filter) -> Self {
        match f {
            Filter::OrderedPair => FilterVariant::OrderedPair,
            Filter::Multiset => FilterVariant::Multiset,
        }
    }
}

/// `log` (ceil(100 ln n)), `log:<c>`, `unbounded`, or a fixed integer.
fn parse_cap(s: &str) -> Result<CapRule, String> {
    match s {
        "log" => Ok(CapRule::default()),
        "unbounded" | "none" => Ok(CapRule::Unbounded),
        _ => {
            if let Some(c) = s.strip_prefix("log:") {
                let constant: f64 = c.parse().map_err(|e| format!("bad log constant: {e}"))?;
                if !(constant > 0.0) {
                    return Err("log constant must be positive".into());
                }
                return Ok(CapRule::Log { constant });
            }
            let r: usize = s.parse().map_err(|_| format!("expected log, log:<c>, unbounded or an integer, got {s:?}"))?;
            if r == 0 {
                return Err("cap must be at least 1".into());
            }
            Ok(CapRule::Fixed(r))
        }
    }
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("density").required(true).args(["p", "m"])))]
struct GenArgs {
    #[arg(long = "type", value_enum, default_value = "xor")]
    kind: InstanceType,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Probability that each ordered k-tuple becomes a clause.
    #[arg(long)]
    p: Option<f64>,
    /// Expected clause count; sets p = m / n^k.
    #[arg(long)]
    m: Option<f64>,
    /// Predicate for CSP instances: a builtin (kSAT, kXOR, NAE, Majority) or a truth-table bit string.
    #[arg(long, default_value = "kSAT")]
    pred: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct CertArgs {
    /// Level d; chosen from the instance size when absent.
    #[arg(long)]
    d: Option<usize>,
    /// Cutoff fraction δ in [0, 1).
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Multiplicity cap: log, log:<c>, unbounded, or an integer.
    #[arg(long = "cap-R", value_parser = parse_cap, default_value = "log")]
    cap: CapRule,
    /// Trace exponent ℓ for the trace-moment bound.
    #[arg(long = "trace-l")]
    trace_l: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Seed of the spectral routines (and of the CSP splits).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "ordered-pair")]
    filter: Filter,
}

impl CertArgs {
    fn spectral(&self) -> SpectralConfig {
        SpectralConfig { mode: self.mode.into(), trace_exponent: self.trace_l, seed: self.seed, ..Default::default() }
    }

    fn refute_options(&self) -> RefuteOptions {
        RefuteOptions {
            level: self.d,
            delta: self.delta,
            cap: self.cap,
            filter: self.filter.into(),
            spectral: self.spectral(),
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
struct RefuteXorArgs {
    instance: PathBuf,
    #[command(flatten)]
    cert: CertArgs,
    /// Report path; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RefuteCspArgs {
    instance: PathBuf,
    #[command(flatten)]
    cert: CertArgs,
    /// Use the t-wise margin polynomial of order t instead of the Fourier expansion.
    #[arg(long)]
    twise: Option<usize>,
    /// Number of unweighted sub-instances per Fourier term.
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["tensor", "n"])))]
struct TensorNormArgs {
    /// Tensor text file (`tensor k n` header, then `i1 .. ik value` lines).
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Dimension of a sampled symmetric Gaussian tensor.
    #[arg(long, requires = "k")]
    n: Option<usize>,
    /// Order of the sampled tensor.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long = "trace-l")]
    trace_l: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "ordered-pair")]
    filter: Filter,
    /// Seed of the sampled tensor and of the spectral routines.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run this many restarts of projected power iteration for a lower bound.
    #[arg(long, default_value_t = 0)]
    lower_restarts: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    report: PathBuf,
    instance: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 10, 12])]
    n: Vec<usize>,
    /// Density multipliers c of n · n^{(k/2-1)(1-δ)} expected clauses.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0f64])]
    c: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize])]
    d: Vec<usize>,
    /// Seeds per cell.
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// Master seed; instance and spectral seeds are derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    #[arg(long = "cap-R", value_parser = parse_cap, default_value = "log")]
    cap: CapRule,
    #[arg(long = "trace-l")]
    trace_l: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Skip the exhaustive optimum column.
    #[arg(long)]
    no_oracle: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::RefuteXor(a) => commands::refute_xor(a),
        Command::RefuteCsp(a) => commands::refute_csp(a),
        Command::TensorNorm(a) => commands::tensor_norm(a),
        Command::Oracle(a) => commands::oracle(a),
        Command::Audit(a) => commands::audit(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
