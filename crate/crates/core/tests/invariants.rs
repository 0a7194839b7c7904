use cpce_core::encoding::{binomial2, eta, PairIndexing};
use cpce_core::estimators::{
    c_build_factor, default_c_for_C, default_c_for_E, e_psd_condition, CSchedule, CovarianceModel,
    EMode, EstimatorKind, EstimatorProblem, RegularizationParams,
};
use cpce_core::format::fmt_g17;
use cpce_core::linalg::{jacobi_eigenvalues, random_mask, random_psd, SymmetricMatrix};
use cpce_core::optimizer::{init_params, OptimizerConfig};
use cpce_core::rng::SeededRng;
use cpce_core::simulator::{run_hea, CircuitSpec, ParamSet};
use proptest::prelude::*;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig {
        cases: n,
        ..ProptestConfig::default()
    }
}

fn angles(spec: &CircuitSpec, seed: u64) -> ParamSet {
    init_params(spec, seed)
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn circuit_preserves_norm(eta in 1usize..7, layers in 1usize..5, seed in any::<u64>()) {
        let spec = CircuitSpec::new(eta, layers).unwrap();
        let state = run_hea(&spec, &angles(&spec, seed)).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pair_index_is_bijective(n in 2usize..40) {
        let idx = PairIndexing::new(n);
        let mut seen = vec![false; binomial2(n)];
        for i in 0..n {
            for j in i + 1..n {
                let r = idx.index(i, j);
                prop_assert!(!seen[r]);
                seen[r] = true;
                prop_assert_eq!(idx.pair(r), (i, j));
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn capacity_law(n in 3usize..=64) {
        let e = eta(n, 2).unwrap();
        prop_assert!(binomial2(n) <= 3 * binomial2(e));
    }

    #[test]
    fn g17_round_trips(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(fmt_g17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn shuffle_is_a_permutation(len in 0usize..50, seed in any::<u64>()) {
        let mut v: Vec<usize> = (0..len).collect();
        SeededRng::new(seed).shuffle(&mut v);
        v.sort_unstable();
        prop_assert_eq!(v, (0..len).collect::<Vec<_>>());
    }

    #[test]
    fn random_psd_is_psd(n in 2usize..9, seed in any::<u64>()) {
        let m = random_psd(n, seed).unwrap();
        prop_assert!(jacobi_eigenvalues(&m)[0] >= -1e-10);
    }

    #[test]
    fn masks_nest_across_fractions(n in 3usize..9, seed in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let keep_more = random_mask(n, lo, seed).unwrap();
        let keep_less = random_mask(n, hi, seed).unwrap();
        for &(i, j) in keep_less.pairs() {
            prop_assert!(keep_more.contains(i, j));
        }
    }
}

proptest! {
    #![proptest_config(cases(100))]

    #[test]
    fn c_factor_is_psd_for_any_input(n in 2usize..9, seed in any::<u64>(), scale in 0.0f64..3.0) {
        let mut rng = SeededRng::new(seed);
        let variances: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.1, 3.0)).collect();
        let c = RegularizationParams::from_fn(n, |_, _| scale * rng.uniform()).unwrap();
        let x: Vec<f64> = (0..binomial2(n)).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let gram = c_build_factor(&x, &c, &variances).factor.gram();
        prop_assert!(jacobi_eigenvalues(&gram)[0] >= -1e-10);
    }

    #[test]
    fn c_diagonal_matches_variances(n in 2usize..9, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let variances: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.1, 3.0)).collect();
        let c = default_c_for_C(&variances).unwrap();
        let x: Vec<f64> = (0..binomial2(n)).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let build = c_build_factor(&x, &c, &variances);
        prop_assert!(build.clamped.is_empty());
        let gram = build.factor.gram();
        for i in 0..n {
            prop_assert!((gram.get(i, i) - variances[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn guaranteed_e_is_psd(n in 2usize..9, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let variances: Vec<f64> = (0..n).map(|_| rng.uniform_range(0.1, 3.0)).collect();
        let c = default_c_for_E(&variances, EMode::Guaranteed).unwrap();
        prop_assert!(e_psd_condition(&c, &variances));
        let idx = PairIndexing::new(n);
        let x: Vec<f64> = (0..binomial2(n)).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let m = SymmetricMatrix::from_lower_fn(n, |i, j| {
            if i == j { variances[i] } else { c.values()[idx.index(i, j)] * x[idx.index(i, j)] }
        }).unwrap();
        prop_assert!(jacobi_eigenvalues(&m)[0] >= -1e-9);
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn lowrank_estimate_respects_rank(rank in 1usize..6, seed in any::<u64>()) {
        let target = random_psd(6, seed).unwrap();
        let problem = EstimatorProblem::with_schedule(EstimatorKind::C, target, CSchedule::Correlation)
            .unwrap()
            .with_rank(rank)
            .unwrap();
        let model = CovarianceModel::canonical(problem, 2).unwrap();
        let sigma = model.sigma_hat(&angles(model.spec(), seed)).unwrap();
        let big = jacobi_eigenvalues(&sigma).into_iter().filter(|e| *e > 1e-8).count();
        prop_assert!(big <= rank);
    }

    #[test]
    fn masked_loss_never_exceeds_full_loss(kind in prop_oneof![Just(EstimatorKind::C), Just(EstimatorKind::E)],
                                          frac in 0.0f64..1.0, seed in any::<u64>()) {
        let target = random_psd(5, seed).unwrap();
        let full = EstimatorProblem::with_schedule(kind, target, CSchedule::Correlation).unwrap();
        let masked = full.clone().with_mask(random_mask(5, frac, seed).unwrap()).unwrap();
        let a = CovarianceModel::canonical(full, 2).unwrap();
        let b = CovarianceModel::canonical(masked, 2).unwrap();
        let theta = angles(a.spec(), seed ^ 0x5a5a);
        prop_assert!(b.loss(&theta).unwrap() <= a.loss(&theta).unwrap());
    }

    #[test]
    fn estimates_are_deterministic_and_best_so_far_monotone(kind in prop_oneof![Just(EstimatorKind::C), Just(EstimatorKind::E)],
                                                            seed in 0u64..1000) {
        let target = random_psd(4, seed).unwrap();
        let problem = EstimatorProblem::with_schedule(kind, target, CSchedule::Correlation).unwrap();
        let model = CovarianceModel::canonical(problem, 2).unwrap();
        let cfg = OptimizerConfig { iterations: 15, seed, ..Default::default() };
        let r1 = cpce_core::estimators::estimate_model(&model, &cfg, Some(&model.problem().target)).unwrap();
        let r2 = cpce_core::estimators::estimate_model(&model, &cfg, Some(&model.problem().target)).unwrap();
        prop_assert_eq!(r1.trace.to_csv(), r2.trace.to_csv());
        for w in r1.trace.records.windows(2) {
            prop_assert!(w[1].best_loss <= w[0].best_loss);
            prop_assert!(w[1].best_mae.unwrap() <= w[0].best_mae.unwrap());
        }
        let min = r1.trace.records.iter().map(|r| r.loss).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r1.final_loss, min);
    }
}
