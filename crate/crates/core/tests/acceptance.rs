//! Acceptance criteria, one status line each, run in sequence so that the
//! timing budgets are measured without interference. Runs without the test
//! harness so the lines are always printed.

use std::process::Command;

use hjb_pi::checks::{find, run_check};

const CRITERIA: [(u32, &str); 13] = [
    (1, "stencil-certification"),
    (2, "fixed-point-identity"),
    (3, "resolvent-contraction"),
    (4, "geometric-envelope"),
    (5, "monotone-decrease"),
    (6, "uniform-bound"),
    (7, "manufactured-exactness"),
    (8, "solver-oracles"),
    (9, "viscosity-rate"),
    (10, "decay-then-plateau"),
    (11, "manufactured-relaxed"),
    (12, "lq-oracle"),
    (13, "determinism"),
];

/// Two separate processes with identical flags must write identical CSVs.
fn binary_determinism() -> (bool, String) {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut bodies = Vec::new();
    for dir in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_hjb-pi"))
            .args(["run1d", "--out-dir"])
            .arg(dir.path())
            .output()
            .expect("spawn hjb-pi");
        if !status.status.success() {
            return (false, format!("run1d exited with {}", status.status));
        }
        bodies.push(std::fs::read(dir.path().join("run1d.csv")).unwrap());
    }
    let same = bodies[0] == bodies[1];
    (
        same,
        format!(
            "two processes, {} bytes each, identical: {same}",
            bodies[0].len()
        ),
    )
}

fn main() {
    let mut failed = Vec::new();
    for (n, id) in CRITERIA {
        let check = find(id).expect("criterion is registered");
        let mut outcome = run_check(&check);
        if id == "determinism" {
            let (ok, detail) = binary_determinism();
            outcome.passed &= ok;
            outcome.detail = format!("{}; {detail}", outcome.detail);
        }
        println!("criterion {n:>2}: {}", outcome.line());
        if !outcome.passed {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", CRITERIA.len());
}
