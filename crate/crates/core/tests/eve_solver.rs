use mismatch_core::eve::INFEASIBLE_RESIDUAL;
use mismatch_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn example2() -> DetectorPair {
    load_pair(
        &ComplexMatrix::from_real_rows(&[&[0.8, -0.2], &[-0.2, 0.4]]).unwrap(),
        &ComplexMatrix::from_real_rows(&[&[0.3, 0.1], &[0.1, 0.9]]).unwrap(),
    )
    .unwrap()
}

fn filter_for(pair: &DetectorPair) -> VirtualFilterC {
    compute_c(&mismatch_spectrum(pair).unwrap(), pair).unwrap()
}

fn config(starts: usize) -> SolverConfig {
    SolverConfig {
        starts,
        ..SolverConfig::default()
    }
}

#[test]
fn zero_observed_rates_recover_noiseless_rate() {
    let pair = example2();
    let filter = filter_for(&pair);
    let p1 = solve_p1(&pair, &filter, 0.0, 0.0, &config(32)).unwrap();
    assert!((p1.value - 0.496).abs() < 0.005, "{}", p1.value);
    let p2 = solve_p2(&pair, &filter, 0.0, 0.0, &config(32)).unwrap();
    assert!(p2.value.abs() <= 1e-6, "{}", p2.value);
}

#[test]
fn witnesses_reproduce_reported_values() {
    let pair = example2();
    let filter = filter_for(&pair);
    for (eb, epp) in [(0.02, 0.02), (0.05, 0.03)] {
        for solution in [
            solve_p1(&pair, &filter, eb, epp, &config(16)).unwrap(),
            solve_p2(&pair, &filter, eb, epp, &config(16)).unwrap(),
        ] {
            let stats = evaluate_statistics(&solution.witness, &pair, &filter).unwrap();
            assert!((stats.e_b - eb).abs() <= 1e-5);
            assert!((stats.e_p_prime - epp).abs() <= 1e-5);
            assert!(
                (stats.p_succ - solution.value).abs() < 1e-6
                    || (stats.e_p - solution.value).abs() < 1e-6
            );
        }
    }
}

#[test]
fn constrained_results_sit_between_the_analytic_bounds() {
    let pair = example2();
    let filter = filter_for(&pair);
    let (lower, upper) = suboptimal_bounds(&mismatch_spectrum(&pair).unwrap());
    let e = 0.02;
    let p1 = solve_p1(&pair, &filter, e, e, &config(32)).unwrap().value;
    assert!(p1 >= lower - 1e-6 && p1 <= 1.0);
    // independent SLSQP reference for this point: 0.42237
    assert!(p1 <= 0.4225, "{p1}");
    let p2 = solve_p2(&pair, &filter, e, e, &config(32)).unwrap().value;
    assert!(p2 <= e * upper + 1e-6 && p2 >= e - 1e-6, "{p2}");
}

#[test]
fn equal_detectors_have_no_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let e = random::efficiency(&mut rng, 2, 0.2, 0.9);
    let pair = load_pair(&e, &e).unwrap();
    let filter = filter_for(&pair);
    let p1 = solve_p1(&pair, &filter, 0.03, 0.04, &config(8)).unwrap();
    assert!((p1.value - 1.0).abs() < 1e-9);
    let p2 = solve_p2(&pair, &filter, 0.03, 0.04, &config(8)).unwrap();
    assert!((p2.value - 0.04).abs() < 1e-5);
}

#[test]
fn symmetric_attack_on_scalar_pair() {
    let pair = load_pair(
        &ComplexMatrix::from_real_diagonal(&[0.8]),
        &ComplexMatrix::from_real_diagonal(&[0.2]),
    )
    .unwrap();
    let filter = filter_for(&pair);
    let symmetric = SolverConfig {
        starts: 8,
        symmetric: true,
        ..SolverConfig::default()
    };
    let p1 = solve_p1(&pair, &filter, 0.05, 0.05, &symmetric).unwrap();
    assert!((p1.value - 0.4).abs() < 1e-9, "{}", p1.value);
    assert_eq!(p1.witness.rank(), 4);
    let p2 = solve_p2(&pair, &filter, 0.05, 0.05, &symmetric).unwrap();
    assert!((p2.value - 0.05).abs() < 1e-5, "{}", p2.value);
    // Without the restriction Eve can push all weight onto the stronger detector.
    let p1_free = solve_p1(&pair, &filter, 0.05, 0.05, &config(8)).unwrap();
    assert!(p1_free.value < 0.4 - 1e-3);
}

#[test]
fn unconstrained_bounds_match_analytic_values() {
    let pair = example2();
    let filter = filter_for(&pair);
    let b = solve_unconstrained_bounds_numeric(&pair, &filter, &config(16)).unwrap();
    assert!((b.p_succ_min - 0.330).abs() < 1e-3);
    assert!((b.ep_ratio_max - 3.03).abs() < 1e-2);
    let (lower, upper) = suboptimal_bounds(&mismatch_spectrum(&pair).unwrap());
    assert!((b.p_succ_min - lower).abs() < 1e-3);
    assert!((b.ep_ratio_max - upper).abs() < 1e-3);
    assert!((lower * upper - 1.0).abs() < 1e-12);

    let e = ComplexMatrix::from_real_rows(&[&[0.5, 0.2], &[0.2, 0.7]]).unwrap();
    let same = load_pair(&e, &e).unwrap();
    let b = solve_unconstrained_bounds_numeric(&same, &filter_for(&same), &config(8)).unwrap();
    assert!((b.p_succ_min - 1.0).abs() < 1e-9 && (b.ep_ratio_max - 1.0).abs() < 1e-9);
}

#[test]
fn unconstrained_bounds_on_diagonal_pairs_use_pointwise_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..3 {
        let pair = random::diagonal_pair(&mut rng, 3, 0.1, 0.9);
        let ratios: Vec<f64> = (0..3)
            .map(|t| pair.efficiency(0).get(t, t).re / pair.efficiency(1).get(t, t).re)
            .collect();
        let widest = ratios.iter().map(|r| r.max(1.0 / r)).fold(0.0, f64::max);
        let b = solve_unconstrained_bounds_numeric(&pair, &filter_for(&pair), &config(16)).unwrap();
        assert!((b.ep_ratio_max - widest).abs() < 1e-3 * widest);
        assert!((b.p_succ_min - 1.0 / widest).abs() < 1e-3);
    }
}

#[test]
fn solver_is_deterministic_given_seed() {
    let pair = example2();
    let filter = filter_for(&pair);
    let a = solve_p1(&pair, &filter, 0.04, 0.04, &config(8)).unwrap();
    let b = solve_p1(&pair, &filter, 0.04, 0.04, &config(8)).unwrap();
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.witness, b.witness);
}

#[test]
fn rank_scan_never_does_worse() {
    let pair = example2();
    let filter = filter_for(&pair);
    let base = solve_p1(&pair, &filter, 0.05, 0.05, &config(16)).unwrap();
    let scanned = solve_p1(
        &pair,
        &filter,
        0.05,
        0.05,
        &SolverConfig {
            starts: 16,
            scan_ranks: true,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert!(scanned.value <= base.value + 1e-7);
}

#[test]
fn bad_inputs_are_rejected() {
    let pair = example2();
    let filter = filter_for(&pair);
    assert!(matches!(
        solve_p1(&pair, &filter, 0.6, 0.0, &config(4)),
        Err(Error::DomainError { .. })
    ));
    assert!(matches!(
        solve_p2(&pair, &filter, 0.0, -0.1, &config(4)),
        Err(Error::DomainError { .. })
    ));
    assert!(matches!(
        solve_p1(&pair, &filter, 0.0, 0.0, &config(0)),
        Err(Error::DomainError { .. })
    ));
    let no_budget = SolverConfig {
        starts: 4,
        max_iters: 0,
        ..SolverConfig::default()
    };
    match solve_p1(&pair, &filter, 0.1, 0.1, &no_budget) {
        Err(Error::Infeasible { best_residual }) => assert!(best_residual >= INFEASIBLE_RESIDUAL),
        other => panic!("expected Infeasible, got {other:?}"),
    }
    let singular = load_pair(
        &ComplexMatrix::from_real_diagonal(&[0.5, 0.0]),
        &ComplexMatrix::from_real_diagonal(&[0.5, 0.5]),
    )
    .unwrap();
    assert!(matches!(
        solve_p1(&singular, &filter, 0.0, 0.0, &config(4)),
        Err(Error::SingularDetector { detector: 0 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn constrained_solves_respect_the_relaxation(seed in any::<u64>(), d in 1usize..=2, e in 0.0f64..0.1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = random::full_rank_pair(&mut rng, d);
        let spectrum = mismatch_spectrum(&pair).unwrap();
        let filter = compute_c(&spectrum, &pair).unwrap();
        let (lower, upper) = suboptimal_bounds(&spectrum);
        let p1 = solve_p1(&pair, &filter, e, e, &config(8)).unwrap();
        prop_assert!(p1.value >= lower - 1e-6 && p1.value <= 1.0 + 1e-12);
        let p2 = solve_p2(&pair, &filter, e, e, &config(8)).unwrap();
        prop_assert!(p2.value <= (e * upper).min(1.0) + 1e-6);
        prop_assert!(p2.value >= e - 1e-6);
    }
}
