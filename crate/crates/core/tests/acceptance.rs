//! Acceptance suite: one test per documented criterion, each printing a
//! pass/fail line with its measured figures and enforcing the stated
//! runtime budget.
//!
//! The shared check implementations live in `noma_ber::validate`, which the
//! CLI `validate` command also drives, so the command line and this suite
//! always agree on what is being measured.

use noma_ber::validate::{self, CheckOutcome};
use std::time::{Duration, Instant};

fn report(criterion: &str, outcome: &CheckOutcome, elapsed: Duration, budget: Duration) {
    println!(
        "criterion {criterion} [{}] in {:.1}s (budget {:.0}s)\n    {}",
        if outcome.passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        outcome.detail
    );
    assert!(
        elapsed <= budget,
        "criterion {criterion} exceeded its runtime budget: {elapsed:?} > {budget:?}"
    );
    assert!(outcome.passed, "criterion {criterion}: {}", outcome.detail);
}

#[test]
fn criterion_1_conditional_equivalence_two_users() {
    let t0 = Instant::now();
    let outcome = validate::check_n2_conditional_vs_oracle();
    report("1", &outcome, t0.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_2_oracle_vs_simulation_fixed_gains() {
    let t0 = Instant::now();
    let outcome = validate::check_mc_vs_oracle_fixed_gains();
    report("2", &outcome, t0.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_3_figure_two_reproduction() {
    let t0 = Instant::now();
    let outcome = validate::check_series_vs_mc();
    report("3", &outcome, t0.elapsed(), Duration::from_secs(300));
}

#[test]
fn criterion_4_rayleigh_consistency() {
    let t0 = Instant::now();
    let outcome = validate::check_rayleigh_triple_agreement();
    report("4", &outcome, t0.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_5_power_allocation_tables() {
    let t0 = Instant::now();
    let outcomes = [
        validate::check_fairness_table_m1_n2(),
        validate::check_fairness_table_m3_n2(),
        validate::check_minavg_table_m1_n2(),
        validate::check_minavg_table_m1_n3(),
    ];
    let elapsed = t0.elapsed();
    let mut failures = Vec::new();
    for o in &outcomes {
        println!(
            "criterion 5 [{}] {}\n    {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.detail
        );
        if !o.passed {
            failures.push(o.name);
        }
    }
    assert!(
        elapsed <= Duration::from_secs(300),
        "criterion 5 exceeded its runtime budget: {elapsed:?}"
    );
    // The published tables are only partially consistent with the exact
    // BER surface; the `validate --audit` report carries the measured
    // optima next to the published rows for the mismatching entries.
    assert!(
        failures.is_empty(),
        "criterion 5: published rows irreproducible from the exact BER surface in {failures:?} \
         (see the deviation audit; the mismatching rows are reproduced only by the mis-printed \
         series exponent, which criteria 3/4/6/9 rule out)"
    );
}

#[test]
fn criterion_6_order_statistics_validity() {
    let t0 = Instant::now();
    let chisq = validate::check_order_statistics_chisq();
    let norm = validate::check_gamma_pdf_normalization();
    println!(
        "criterion 6 [{}] {}\n    {}",
        if chisq.passed { "PASS" } else { "FAIL" },
        chisq.name,
        chisq.detail
    );
    println!(
        "criterion 6 [{}] {}\n    {}",
        if norm.passed { "PASS" } else { "FAIL" },
        norm.name,
        norm.detail
    );
    assert!(t0.elapsed() <= Duration::from_secs(300));
    assert!(chisq.passed, "criterion 6: {}", chisq.detail);
    assert!(norm.passed, "criterion 6: {}", norm.detail);
}

#[test]
fn criterion_7_perfect_vs_imperfect_sic() {
    let t0 = Instant::now();
    let outcome = validate::check_perfect_vs_imperfect_sic();
    report("7", &outcome, t0.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_8_documented_deviation_audit() {
    let t0 = Instant::now();
    let outcome = validate::check_deviation_audit();
    // Passes iff the report is produced with every comparison computed; the
    // formulas' disagreement regions are its content, not its verdict.
    report("8", &outcome, t0.elapsed(), Duration::from_secs(300));
    let audit = validate::audit_report().unwrap();
    assert_eq!(audit.summaries.len(), 6, "expected six audited formulas");
    assert!(audit.rows.len() >= 6 * 7, "audit grid looks truncated");
}

#[test]
fn criterion_9_series_robustness() {
    let t0 = Instant::now();
    let outcome = validate::check_series_robustness();
    report("9", &outcome, t0.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_10_sharded_reproducibility() {
    // The byte-identical CSV half of this criterion lives in the CLI test
    // `manifest_rerun_is_byte_identical_across_shards`; this half pins the
    // underlying count-level invariance across worker threads.
    let t0 = Instant::now();
    let outcome = validate::check_mc_reproducibility();
    report("10", &outcome, t0.elapsed(), Duration::from_secs(120));
}
