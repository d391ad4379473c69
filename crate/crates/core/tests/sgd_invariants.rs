use anneal_lab::problems::{AbsNoise, AbsProblem, QuadProblem};
use anneal_lab::sgd::{
    discrete_last_iterate_bound_lipschitz, last_iterate_rhs_lipschitz, lemma3_audit, lemma3_gap,
    run_sgd, v_weights, Problem, RunOptions, StepsizePlan,
};
use anneal_lab::{Schedule, TailFunctions};
use proptest::prelude::*;

fn schedule_strategy() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        Just(Schedule::cosine()),
        (1.0..=5.0f64).prop_map(|p| Schedule::polynomial(p).unwrap()),
    ]
}

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..=hi.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn suffix_sum_is_dominated_by_integral_form(
        schedule in schedule_strategy(),
        steps in 50u64..=5000,
        k_frac in 0.0..1.0f64,
        cell in 0.0..1.0f64,
        eta in log_range(1e-3, 1e3),
        c1 in log_range(1e-2, 1e2),
        c2 in log_range(1e-2, 1e2),
    ) {
        let k = 1 + ((k_frac * steps as f64) as u64).min(steps - 1);
        let n = steps as f64;
        let tau = ((k - 1) as f64 + cell) / n;
        prop_assume!(tau < k as f64 / n);
        let plan = StepsizePlan::new(eta, schedule, steps).unwrap();
        let tails = TailFunctions::analytic(schedule).unwrap();
        let (lhs, rhs) = lemma3_gap(&plan, &tails, k, c1, c2, tau).unwrap();
        prop_assert!(lhs <= rhs, "{schedule} T={steps} k={k} tau={tau}: {lhs} > {rhs}");
    }
}

#[test]
fn seeded_audit_finds_no_violation() {
    let audit = lemma3_audit(500, 11).unwrap();
    assert_eq!(audit.cases, 500);
    assert!(
        audit.violations.is_empty(),
        "{:?}",
        audit.violations.first()
    );
    assert!(audit.worst_ratio <= 1.0);
}

#[test]
fn suffix_bound_equals_comparison_lhs() {
    let (d, g) = (2.0, 1.5);
    for schedule in [Schedule::cosine(), Schedule::polynomial(2.0).unwrap()] {
        let plan = StepsizePlan::new(0.1, schedule, 300).unwrap();
        let tails = TailFunctions::analytic(schedule).unwrap();
        for k in [1u64, 2, 150, 299, 300] {
            let suffix = StepsizePlan::new(0.1, schedule, 300).unwrap().stepsizes();
            let direct = last_iterate_rhs_lipschitz(&suffix[(k - 1) as usize..], d, g).unwrap();
            let tau = (k - 1) as f64 / 300.0;
            let (lhs, _) = lemma3_gap(&plan, &tails, k, d * d / 2.0, 2.0 * g * g, tau).unwrap();
            assert!(
                (direct - lhs).abs() <= 1e-12 * lhs,
                "k={k}: {direct} vs {lhs}"
            );
        }
        let whole = discrete_last_iterate_bound_lipschitz(&plan, d, g).unwrap();
        let (lhs, _) = lemma3_gap(&plan, &tails, 1, d * d / 2.0, 2.0 * g * g, 0.0).unwrap();
        assert!((whole - lhs).abs() <= 1e-12 * lhs);
    }
}

#[test]
fn v_weights_telescope() {
    for schedule in [
        Schedule::cosine(),
        Schedule::polynomial(3.0).unwrap(),
        Schedule::constant(),
    ] {
        let plan = StepsizePlan::new(0.7, schedule, 1000).unwrap();
        let etas = plan.stepsizes();
        let v = v_weights(&plan);
        assert_eq!(v.len(), 1001);
        let scale = etas[999];
        for t in 2..=1000usize {
            let tail: f64 = etas[t - 1..].iter().sum();
            let r = etas[t - 2] * v[t - 1] - (v[t] - v[t - 1]) * tail;
            assert!(r.abs() <= 1e-10 * scale, "{schedule} t={t}: {r}");
        }
    }
}

#[test]
fn equal_seeds_give_bitwise_equal_trajectories() {
    let p = AbsProblem::new(1.0, 1.0, AbsNoise::Rademacher).unwrap();
    let plan = StepsizePlan::new(0.05, Schedule::cosine(), 500).unwrap();
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let a = run_sgd(&p, &plan, &[0.3], 42, &opts).unwrap();
    let b = run_sgd(&p, &plan, &[0.3], 42, &opts).unwrap();
    assert_eq!(a, b);
    let c = run_sgd(&p, &plan, &[0.3], 43, &opts).unwrap();
    assert_ne!(a.trajectory, c.trajectory);
}

#[test]
fn iterates_stay_feasible() {
    let opts = RunOptions {
        record_trajectory: true,
        ..RunOptions::default()
    };
    let abs = AbsProblem::new(3.0, 2.0, AbsNoise::Rademacher).unwrap();
    let quad = QuadProblem::new(4.0, 5.0, vec![0.5, -0.4, 0.2], 1.0).unwrap();
    let cases: [(&dyn Problem, Vec<f64>); 2] = [(&abs, vec![1.0]), (&quad, vec![0.0, 1.0, 0.0])];
    for (problem, x1) in cases {
        for eta in [0.01, 1.0, 100.0] {
            let plan = StepsizePlan::new(eta, Schedule::constant(), 400).unwrap();
            let run = run_sgd(problem, &plan, &x1, 9, &opts).unwrap();
            let domain = problem.domain();
            for p in run.trajectory.as_ref().unwrap() {
                assert!(domain.contains(&p.x, 1e-12), "t={} x={:?}", p.t, p.x);
            }
            assert!(domain.contains(&run.last_iterate, 1e-12));
        }
    }
}

#[test]
fn deterministic_descent_has_closed_form_averages() {
    let p = AbsProblem::new(1.0, 1.0, AbsNoise::None).unwrap();
    // On x > 0 every step moves by exactly -eta.
    let plan = StepsizePlan::new(1e-4, Schedule::constant(), 1000).unwrap();
    let run = run_sgd(&p, &plan, &[0.4], 1, &RunOptions::default()).unwrap();
    assert!((run.last_iterate[0] - 0.3).abs() <= 1e-12);
    let mean = 0.4 - 1e-4 * 999.0 / 2.0;
    assert!((run.uniform_average[0] - mean).abs() <= 1e-12);
    assert!(run.polynomial_average[0] < mean);
}
