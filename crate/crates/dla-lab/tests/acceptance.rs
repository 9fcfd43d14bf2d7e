//! Acceptance gate: each criterion prints one pass/fail line (visible with
//! `--nocapture`) and asserts. Criteria share a fixed seed so the whole
//! suite is reproducible.

use dla_lab::verify::{run_criterion, VerifyOptions};

fn check(id: u32) {
    let opts = VerifyOptions::default();
    let r = run_criterion(id, &opts);
    println!("{}", r.summary_line());
    assert!(r.pass, "{}", r.summary_line());
}

#[test]
fn criterion_01_exact_solver_soundness() {
    check(1);
}

#[test]
fn criterion_02_mc_exact_agreement() {
    check(2);
}

#[test]
fn criterion_03_acceleration_neutrality() {
    check(3);
}

#[test]
fn criterion_04_scaling_constant() {
    check(4);
}

#[test]
fn criterion_05_process_first_step_law() {
    check(5);
}

#[test]
fn criterion_06_coupling_marginals_and_joint() {
    check(6);
}

#[test]
fn criterion_07_envelope_containment() {
    check(7);
}

#[test]
fn criterion_08_discrepancy_window_agreement() {
    check(8);
}

#[test]
fn criterion_09_byte_determinism() {
    check(9);
}

#[test]
fn criterion_10_structural_invariants() {
    check(10);
}
