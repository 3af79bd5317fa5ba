//! Full-strength acceptance gate. Each test prints one PASS/FAIL line with
//! the measured quantity so `cargo test --test acceptance -- --nocapture`
//! doubles as a report.
//!
//! The Monte Carlo tests here run at their advertised trial counts; the fast
//! variants live behind `run_checks(CheckLevel::Quick)` in the library.

use mudet::checks::{
    check_analytic_vs_sampling_oracle, check_cf_offset_average_closure,
    check_cf_sampling_consistency, check_detector_sanity, check_infrastructure,
    check_offset_kernel_oracle, check_penalty_calculus, check_quadrature_identities,
    check_robustness_ordering, check_single_user_closed_form, CheckLevel, CheckOutcome,
};

fn report(outcome: CheckOutcome) {
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn offset_kernel_matches_numerical_average() {
    report(check_offset_kernel_oracle());
}

#[test]
fn interferer_cf_closes_the_offset_average() {
    report(check_cf_offset_average_closure());
}

#[test]
fn sampled_interference_matches_its_cf() {
    report(check_cf_sampling_consistency());
}

#[test]
fn quadrature_reproduces_known_integrals_and_both_ber_forms_agree() {
    report(check_quadrature_identities());
}

#[test]
fn single_user_ber_hits_the_closed_form() {
    report(check_single_user_closed_form());
}

#[test]
fn analytic_ber_agrees_with_the_sampling_oracle() {
    report(check_analytic_vs_sampling_oracle(CheckLevel::Full));
}

#[test]
fn penalty_derivatives_and_continuity_hold() {
    report(check_penalty_calculus());
}

#[test]
fn estimators_recover_clean_signals_and_least_squares_matches_decorrelator() {
    report(check_detector_sanity());
}

#[test]
fn robust_detectors_order_as_claimed_under_contamination() {
    report(check_robustness_ordering(CheckLevel::Full));
}

#[test]
fn sequences_fading_and_determinism_hold() {
    report(check_infrastructure(CheckLevel::Full));
}
