//! Instance files.
//!
//! Variables are 1-based in every file format and 0-based in memory.
//!
//! JSON-lines: a header record, then one record per clause.
//!
//! ```text
//! {"type":"xor","k":3,"n":10,"p":0.05,"seed":7}
//! {"vars":[1,5,10],"sign":-1}
//! ```
//!
//! ```text
//! {"type":"csp","k":3,"n":10,"pred":"11111110"}
//! {"vars":[1,5,10],"neg":[1,-1,1]}
//! ```
//!
//! XOR text format:
//!
//! ```text
//! p xor <n> <k>
//! x v1 ... vk s
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csp::{CspClause, CspInstance, Predicate};
use crate::error::{Error, Result};
use crate::oracle::InstanceRef;
use crate::xor::{Provenance, XorClause, XorInstance};

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Header {
    Xor {
        k: usize,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Csp {
        k: usize,
        n: usize,
        pred: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct XorRecord {
    vars: Vec<usize>,
    sign: i8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CspRecord {
    vars: Vec<usize>,
    neg: Vec<i8>,
}

/// Either kind of instance, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum Instance {
    Xor(XorInstance),
    Csp(CspInstance),
}

impl Instance {
    pub fn as_ref(&self) -> InstanceRef<'_> {
        match self {
            Instance::Xor(i) => InstanceRef::Xor(i),
            Instance::Csp(i) => InstanceRef::Csp(i),
        }
    }

    pub fn to_jsonl(&self) -> String {
        match self {
            Instance::Xor(i) => xor_to_jsonl(i),
            Instance::Csp(i) => csp_to_jsonl(i),
        }
    }
}

fn json_line<T: Serialize>(s: &mut String, v: &T) {
    // serialization of these plain structs cannot fail
    s.push_str(&serde_json::to_string(v).expect("serializable record"));
    s.push('\n');
}

fn parse_err(line: usize, e: impl std::fmt::Display) -> Error {
    Error::Parse { line, msg: e.to_string() }
}

fn provenance(p: Option<f64>, seed: Option<u64>) -> Option<Provenance> {
    match (p, seed) {
        (Some(p), Some(seed)) => Some(Provenance { p, seed }),
        _ => None,
    }
}

fn to_file_vars(vars: &[usize]) -> Vec<usize> {
    vars.iter().map(|v| v + 1).collect()
}

fn from_file_vars(line: usize, n: usize, vars: Vec<usize>) -> Result<Vec<usize>> {
    vars.into_iter()
        .map(|v| if v == 0 || v > n { Err(parse_err(line, format!("variable {v} outside 1..={n}"))) } else { Ok(v - 1) })
        .collect()
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

pub fn xor_to_jsonl(inst: &XorInstance) -> String {
    let mut s = String::new();
    let prov = inst.provenance();
    json_line(
        &mut s,
        &Header::Xor { k: inst.arity(), n: inst.num_vars(), p: prov.map(|p| p.p), seed: prov.map(|p| p.seed) },
    );
    for c in inst.clauses() {
        json_line(&mut s, &XorRecord { vars: to_file_vars(&c.vars), sign: c.sign });
    }
    s
}

pub fn csp_to_jsonl(inst: &CspInstance) -> String {
    let mut s = String::new();
    let prov = inst.provenance();
    json_line(
        &mut s,
        &Header::Csp {
            k: inst.arity(),
            n: inst.num_vars(),
            pred: inst.predicate().to_bits(),
            p: prov.map(|p| p.p),
            seed: prov.map(|p| p.seed),
        },
    );
    for c in inst.clauses() {
        json_line(&mut s, &CspRecord { vars: to_file_vars(&c.vars), neg: c.neg.clone() });
    }
    s
}

/// Reads either JSON-lines format, dispatching on the header type.
pub fn instance_from_jsonl(text: &str) -> Result<Instance> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, "empty instance file"))?;
    let header: Header = serde_json::from_str(header).map_err(|e| parse_err(hl, e))?;
    match header {
        Header::Xor { k, n, p, seed } => {
            let mut clauses = Vec::new();
            for (ln, l) in it {
                let r: XorRecord = serde_json::from_str(l).map_err(|e| parse_err(ln, e))?;
                clauses.push(XorClause::new(from_file_vars(ln, n, r.vars)?, r.sign).map_err(|e| parse_err(ln, e))?);
            }
            Ok(Instance::Xor(XorInstance::new(n, k, clauses)?.with_provenance(provenance(p, seed))))
        }
        Header::Csp { k, n, pred, p, seed } => {
            let predicate = Predicate::parse(&pred, k).map_err(|e| parse_err(hl, e))?;
            let mut clauses = Vec::new();
            for (ln, l) in it {
                let r: CspRecord = serde_json::from_str(l).map_err(|e| parse_err(ln, e))?;
                clauses.push(CspClause { vars: from_file_vars(ln, n, r.vars)?, neg: r.neg });
            }
            Ok(Instance::Csp(CspInstance::new(n, predicate, clauses)?.with_provenance(provenance(p, seed))))
        }
    }
}

pub fn xor_from_jsonl(text: &str) -> Result<XorInstance> {
    match instance_from_jsonl(text)? {
        Instance::Xor(i) => Ok(i),
        Instance::Csp(_) => Err(parse_err(1, "expected an xor instance, found csp")),
    }
}

pub fn csp_from_jsonl(text: &str) -> Result<CspInstance> {
    match instance_from_jsonl(text)? {
        Instance::Csp(i) => Ok(i),
        Instance::Xor(_) => Err(parse_err(1, "expected a csp instance, found xor")),
    }
}

pub fn xor_to_text(inst: &XorInstance) -> String {
    let mut s = format!("p xor {} {}\n", inst.num_vars(), inst.arity());
    for c in inst.clauses() {
        s.push('x');
        for v in &c.vars {
            let _ = write!(s, " {}", v + 1);
        }
        let _ = writeln!(s, " {}", c.sign);
    }
    s
}

pub fn xor_from_text(text: &str) -> Result<XorInstance> {
    let mut it = lines(text).filter(|(_, l)| !l.starts_with('c') && !l.starts_with('#'));
    let (hl, header) = it.next().ok_or_else(|| parse_err(1, "empty instance file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "p" || h[1] != "xor" {
        return Err(parse_err(hl, "expected header `p xor <n> <k>`"));
    }
    let n: usize = h[2].parse().map_err(|e| parse_err(hl, e))?;
    let k: usize = h[3].parse().map_err(|e| parse_err(hl, e))?;
    let mut clauses = Vec::new();
    for (ln, l) in it {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != k + 2 || f[0] != "x" {
            return Err(parse_err(ln, format!("expected `x v1 .. v{k} s`")));
        }
        let mut vars = Vec::with_capacity(k);
        for v in &f[1..=k] {
            let v: usize = v.parse().map_err(|e| parse_err(ln, e))?;
            if v == 0 || v > n {
                return Err(parse_err(ln, format!("variable {v} outside 1..={n}")));
            }
            vars.push(v - 1);
        }
        let sign: i8 = f[k + 1].parse().map_err(|e| parse_err(ln, e))?;
        clauses.push(XorClause::new(vars, sign).map_err(|e| parse_err(ln, e))?);
    }
    XorInstance::new(n, k, clauses)
}

/// Reads any instance file: JSON-lines when the first line is an object,
/// the XOR text format otherwise.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        instance_from_jsonl(&text)
    } else {
        xor_from_text(&text).map(Instance::Xor)
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("bad output path {path:?}")))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
