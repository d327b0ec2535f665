use std::path::Path;
use std::process::{Command, Output};

fn symcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symcert")).args(args).output().expect("run symcert")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        let o = symcert(&["gen", "--type", "xor", "--n", "10", "--k", "3", "--p", "0.05", "--seed", "7", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn empty_instance_is_vacuous() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("empty.jsonl");
    std::fs::write(&inst, "{\"type\":\"xor\",\"k\":4,\"n\":6}\n").unwrap();
    let report = dir.path().join("r.json");
    let o = symcert(&["refute-xor", path(&inst), "--out", path(&report)]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.starts_with("certified opt(Φ) ≤ 1 "), "{stdout}");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["upper_bound"].as_f64(), Some(1.0));
    assert_eq!(json["vacuous"].as_bool(), Some(true));
}

#[test]
fn usage_and_resource_exit_codes() {
    assert_eq!(symcert(&["refute-xor", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(symcert(&["gen", "--n", "5", "--k", "2"]).status.code(), Some(2));
    assert_eq!(symcert(&["oracle", "/definitely/not/here.jsonl"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.jsonl");
    let o = symcert(&["gen", "--n", "30", "--k", "2", "--p", "0.01", "--seed", "1", "--out", path(&big)]);
    assert!(o.status.success());
    assert_eq!(symcert(&["oracle", path(&big)]).status.code(), Some(3));
}

#[test]
fn refute_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.jsonl");
    let report = dir.path().join("r.json");
    let o = symcert(&["gen", "--n", "10", "--k", "4", "--m", "3000", "--seed", "3", "--out", path(&inst)]);
    assert!(o.status.success());
    let o = symcert(&["refute-xor", path(&inst), "--d", "1", "--out", path(&report)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8(o.stdout).unwrap().contains("[certified]"));
    let o = symcert(&["audit", path(&report), path(&inst)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let verdict: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(verdict["pass"].as_bool(), Some(true));

    // a tampered bound fails the audit
    let mut json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    json["upper_bound"] = serde_json::json!(0.01);
    std::fs::write(&report, serde_json::to_string(&json).unwrap()).unwrap();
    assert_eq!(symcert(&["audit", path(&report), path(&inst)]).status.code(), Some(1));
}

#[test]
fn refute_csp_and_tensor_norm() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("c.jsonl");
    let o = symcert(&["gen", "--type", "csp", "--pred", "kSAT", "--n", "8", "--k", "3", "--p", "0.2", "--seed", "5", "--out", path(&inst)]);
    assert!(o.status.success());
    let o = symcert(&["refute-csp", path(&inst), "--d", "1"]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["problem"].as_str(), Some("csp"));

    let tensor = dir.path().join("t.txt");
    std::fs::write(&tensor, "tensor 2 2\n1 1 3.0\n2 2 -1.0\n").unwrap();
    let o = symcert(&["tensor-norm", "--tensor", path(&tensor)]);
    assert!(o.status.success());
    let cert: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((cert["bound"].as_f64().unwrap() - 3.0).abs() < 1e-9);
}

#[test]
fn sweep_cells_rerun_standalone() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("s.csv");
    let o = symcert(&[
        "sweep", "--k", "4", "--n", "8,10,12", "--c", "60", "--seeds", "5", "--seed", "11", "--workers", "2", "--out",
        path(&csv_path),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["n", "k", "p", "d", "seed", "bound", "opt", "time_ms", "mode"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 15);

    for row in [&rows[0], &rows[7], &rows[14]] {
        let (n, p, d, seed) = (&row[0], &row[2], &row[3], &row[4]);
        let bound: f64 = row[5].parse().unwrap();
        let inst = dir.path().join(format!("cell{seed}.jsonl"));
        let report = dir.path().join(format!("cell{seed}.json"));
        let o = symcert(&["gen", "--n", n, "--k", "4", "--p", p, "--seed", seed, "--out", path(&inst)]);
        assert!(o.status.success());
        symcert(&["refute-xor", path(&inst), "--d", d, "--seed", seed, "--out", path(&report)]);
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        let again = json["upper_bound"].as_f64().unwrap();
        assert!((again - bound).abs() <= 1e-12, "cell seed {seed}: {again} vs {bound}");
        if let Ok(opt) = row[6].parse::<f64>() {
            assert!(opt <= bound + 1e-9);
        }
    }
}
