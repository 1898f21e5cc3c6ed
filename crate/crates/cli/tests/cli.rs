use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sparsest(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsest"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn report(dir: &Path, instance: &str, extra: &[&str]) -> Value {
    fs::write(dir.join("in.txt"), instance).unwrap();
    let mut args = vec!["run", "in.txt", "--report", "out.json"];
    args.extend_from_slice(extra);
    let out = sparsest(&args, dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&fs::read_to_string(dir.join("out.json")).unwrap()).unwrap()
}

const CYCLE: &str = "\
# 4-cycle cost, complete unit demand
n 4
c 1 2 1
c 2 3 1
c 3 4 1
c 4 1 1
d 1 2 1
d 1 3 1
d 1 4 1
d 2 3 1
d 2 4 1
d 3 4 1
";

#[test]
fn cycle_report_has_the_exact_optimum() {
    let dir = TempDir::new().unwrap();
    let r = report(dir.path(), CYCLE, &[]);
    assert_eq!(r["phi_star"], 0.5);
    assert_eq!(r["phi_alg"], 0.5);
    assert!(r["phi_sdp"].as_f64().unwrap() <= 0.5 + 1e-4);
    assert_eq!(r["instance"]["n"], 4);
    assert_eq!(r["lambda"].as_array().unwrap().len(), 3);
    assert!(r["courant_fisher"]["holds"].as_bool().unwrap());
}

#[test]
fn cost_equal_to_demand_gives_one() {
    let dir = TempDir::new().unwrap();
    let text = "n 3\nc 1 2 2\nc 2 3 0.5\nd 1 2 2\nd 2 3 0.5\n";
    let r = report(dir.path(), text, &[]);
    for key in ["phi_sdp", "phi_alg", "phi_star"] {
        assert!((r[key].as_f64().unwrap() - 1.0).abs() < 1e-6, "{key}");
    }
}

#[test]
fn report_goes_to_stdout_without_a_path() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in.txt"), CYCLE).unwrap();
    let out = sparsest(&["run", "in.txt", "--oracle-max", "3"], dir.path());
    assert_eq!(code(&out), 0);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(r["phi_star"].is_null());
}

#[test]
fn reports_repeat_apart_from_timing() {
    let dir = TempDir::new().unwrap();
    let gen = sparsest(&["generate", "planted", "9", "4", "-o", "g.txt"], dir.path());
    assert_eq!(code(&gen), 0);
    let text = fs::read_to_string(dir.path().join("g.txt")).unwrap();
    let mut a = report(dir.path(), &text, &[]);
    let mut b = report(dir.path(), &text, &[]);
    a["solver"]["wall_time_seconds"] = Value::Null;
    b["solver"]["wall_time_seconds"] = Value::Null;
    assert_eq!(a.to_string(), b.to_string());
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = sparsest(&["generate", "uniform", "6", "1"], dir.path());
    let b = sparsest(&["generate", "uniform", "6", "1"], dir.path());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("n 6\n"));

    let small = sparsest(&["generate", "uniform", "2", "1"], dir.path());
    assert_eq!(code(&small), 0);
    assert!(String::from_utf8_lossy(&small.stdout).starts_with("n 2\n"));
}

#[test]
fn dumped_gram_passes_the_audit() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("in.txt"), CYCLE).unwrap();
    let run = sparsest(&["run", "in.txt", "--dump-gram", "g.txt", "--report", "r.json"], dir.path());
    assert_eq!(code(&run), 0);
    let audit = sparsest(&["audit", "g.txt", "in.txt"], dir.path());
    assert_eq!(code(&audit), 0, "{}", String::from_utf8_lossy(&audit.stderr));
    let a: Value = serde_json::from_slice(&audit.stdout).unwrap();
    assert_eq!(a["failures"].as_array().unwrap().len(), 0);

    // Doubling the Gram matrix breaks the normalization.
    let doubled: String = fs::read_to_string(dir.path().join("g.txt"))
        .unwrap()
        .lines()
        .map(|l| {
            let row: Vec<String> = l
                .split_whitespace()
                .map(|v| (2.0 * v.parse::<f64>().unwrap()).to_string())
                .collect();
            row.join(" ") + "\n"
        })
        .collect();
    fs::write(dir.path().join("g2.txt"), doubled).unwrap();
    let bad = sparsest(&["audit", "g2.txt", "in.txt"], dir.path());
    assert_eq!(code(&bad), 4);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("loop.txt"), "n 3\nc 1 1 2.0\nd 1 2 1\n").unwrap();
    let out = sparsest(&["run", "loop.txt"], p);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(code(&sparsest(&["run", "missing.txt"], p)), 2);
    assert_eq!(code(&sparsest(&["generate", "nope", "4", "1"], p)), 2);
    assert_eq!(code(&sparsest(&["frobnicate"], p)), 5);
    assert_eq!(code(&sparsest(&["run"], p)), 5);
    assert_eq!(code(&sparsest(&["--help"], p)), 0);

    sparsest(&["generate", "planted", "10", "1", "-o", "p.txt"], p);
    assert_eq!(code(&sparsest(&["run", "p.txt", "--max-outer", "1"], p)), 3);

    fs::write(p.join("g.txt"), "1 0\n0\n").unwrap();
    fs::write(p.join("in.txt"), CYCLE).unwrap();
    assert_eq!(code(&sparsest(&["audit", "g.txt", "in.txt"], p)), 2);
}
