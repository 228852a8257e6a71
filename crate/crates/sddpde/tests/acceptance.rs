//! Acceptance suite: each criterion prints its pass/fail line and must
//! hold at the stated tolerance.

use sddpde::certify::{self, CriterionReport};

const SEED: u64 = 42;

fn check(report: CriterionReport) {
    println!("{report}");
    assert!(report.pass, "{report}");
}

#[test]
fn criterion_1_oracle_equivalence() {
    check(certify::c1_oracle_equivalence(SEED));
}

#[test]
fn criterion_2_contraction_certificate() {
    check(certify::c2_contraction_certificate(SEED));
}

#[test]
fn criterion_3_semigroup_estimates() {
    check(certify::c3_semigroup_estimates(SEED));
}

#[test]
fn criterion_4_derivative_correctness() {
    check(certify::c4_derivative_correctness(SEED));
}

#[test]
fn criterion_5_manifold_invariance() {
    check(certify::c5_manifold_invariance(SEED));
}

#[test]
fn criterion_6_semiflow_derivative() {
    check(certify::c6_semiflow_derivative(SEED));
}

#[test]
fn criterion_7_holder_bootstrap() {
    check(certify::c7_holder_bootstrap(SEED));
}

#[test]
fn criterion_8_delay_functional() {
    check(certify::c8_delay_functional(SEED));
}
