use std::f64::consts::PI;

use proptest::prelude::*;
use seqfdr_core::schedules::{LambdaSchedule, PARTIAL_SUM_TERMS};

#[test]
fn budget_conservation_at_ten_million() {
    let n = PARTIAL_SUM_TERMS;
    for s in [
        LambdaSchedule::power(1.05, 0.1).unwrap(),
        LambdaSchedule::power(2.0, 0.05).unwrap(),
        LambdaSchedule::adaptive(0.1).unwrap(),
        LambdaSchedule::adaptive(1.0 / (1e5f64).ln()).unwrap(),
    ] {
        let partial = s.partial_sum(n);
        let (lo, hi) = s.tail_bounds(n);
        assert!(partial < s.q());
        let residual = partial + hi - s.q();
        assert!(residual.abs() <= 1e-9, "{:?}: residual {residual}", s.kind());
        assert!(partial + lo <= s.q(), "{:?}", s.kind());
        assert!(partial + lo >= s.q() - 1e-9, "{:?}", s.kind());
    }
}

#[test]
fn zeta_two_is_exact_enough() {
    let s = LambdaSchedule::power(2.0, PI * PI / 6.0).unwrap();
    assert!((s.normalizer() - 1.0).abs() < 1e-13);
    assert!((s.lambda_at(2).unwrap() - 0.25).abs() < 1e-13);
}

#[test]
fn partial_sums_stay_below_budget() {
    for s in [LambdaSchedule::power(1.05, 0.1).unwrap(), LambdaSchedule::adaptive(0.2).unwrap()] {
        let mut acc = 0.0;
        for i in 1..=100_000 {
            acc += s.lambda(i);
            assert!(acc < s.q());
        }
    }
}

#[test]
fn inverse_log_levels_are_valid_budgets() {
    for n in [3usize, 10, 1_000, 1_000_000_000] {
        let q = 1.0 / (n as f64).ln();
        assert!(q > 0.0 && q < 1.0);
        let s = LambdaSchedule::power(1.05, q).unwrap();
        assert!(s.lambda(2) < s.lambda(1));
    }
}

proptest! {
    #[test]
    fn lambda_is_positive_and_non_increasing(nu in prop::sample::select(vec![1.01, 1.05, 1.5, 2.0, 3.5]), q in 0.001f64..0.999, i in 1u64..10_000_000) {
        let s = LambdaSchedule::power(nu, q).unwrap();
        let a = s.lambda_at(i).unwrap();
        let b = s.lambda_at(i + 1).unwrap();
        prop_assert!(a > 0.0 && b > 0.0 && b <= a);
        prop_assert_eq!(a, s.lambda_at(i).unwrap());
    }

    #[test]
    fn normalizer_scales_linearly_in_q(q in 0.001f64..0.999) {
        let s = LambdaSchedule::power(1.05, q).unwrap();
        let unit = LambdaSchedule::power(1.05, 0.5).unwrap();
        prop_assert!((s.normalizer() / unit.normalizer() - q / 0.5).abs() < 1e-13);
    }
}
