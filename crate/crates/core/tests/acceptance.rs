//! Acceptance suite: every criterion at its full sample size and tolerance.
//! Each test prints one PASS/FAIL line (run with `--nocapture` to see them).

use rtr_core::acceptance::{self, CriterionResult, Profile};

fn check(r: CriterionResult) {
    println!("{}", r.line());
    assert!(r.passed, "{}", r.line());
}

macro_rules! criterion {
    ($name:ident, $f:path) => {
        #[test]
        fn $name() {
            check($f(&Profile::default()));
        }
    };
}

criterion!(c01_eigenvalue_reproduction, acceptance::c01_eigenvalue);
criterion!(c02_constant_consistency, acceptance::c02_constants);
criterion!(c03_generator_convergence, acceptance::c03_generator_convergence);
criterion!(c04_exact_tv_oracle, acceptance::c04_exact_tv);
criterion!(c05_coupling_validity, acceptance::c05_coupling_validity);
criterion!(c06_bijection_suite, acceptance::c06_bijection);
criterion!(c07_coalescence_after_good_time, acceptance::c07_coalescence);
criterion!(c08_queue_rate_identification, acceptance::c08_queue_rates);
criterion!(c09_tail_vs_truncated_chain, acceptance::c09_tail);
criterion!(c10_stochastic_dominance, acceptance::c10_dominance);
criterion!(c11_bound_calculator, acceptance::c11_bound_calculator);
