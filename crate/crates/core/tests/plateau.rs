use cpce_core::encoding::ObservableAssignment;
use cpce_core::estimators::{CovarianceModel, EstimatorKind, EstimatorProblem, RegularizationParams};
use cpce_core::linalg::SymmetricMatrix;
use cpce_core::plateau::{
    exponential_c, gradient_samples, gradient_variance, mitigation_demo, sample_params, sample_variance,
    theorem_bound, variance_standard_error, variance_sweep, LayerRule, VarianceSweepConfig,
};
use cpce_core::simulator::CircuitSpec;
use cpce_core::CSchedule;

fn toy(target_off: f64, c: f64) -> CovarianceModel {
    let target = SymmetricMatrix::from_rows(&[vec![1.0, target_off], vec![target_off, 1.0]]).unwrap();
    let problem = EstimatorProblem::new(EstimatorKind::E, target, RegularizationParams::uniform(2, c).unwrap()).unwrap();
    let assignment = ObservableAssignment::new(2, 2, vec!["ZX".parse().unwrap()]).unwrap();
    CovarianceModel::new(problem, CircuitSpec::new(2, 1).unwrap(), assignment).unwrap()
}

#[test]
fn toy_matches_closed_form_replay() {
    let model = toy(0.5, 1.0);
    let samples = gradient_samples(&model, 300, 1, 77).unwrap();
    let closed: Vec<f64> = (0..300)
        .map(|s| {
            let t = sample_params(model.spec(), 77, s).as_slice()[1];
            2.0 * (t.sin() - 0.5) * t.cos()
        })
        .collect();
    for (a, b) in samples.iter().zip(&closed) {
        assert!((a - b).abs() <= 1e-14);
    }
    assert!((sample_variance(&samples) - sample_variance(&closed)).abs() <= 1e-14);
}

#[test]
fn toy_variance_is_stable_under_doubling() {
    let model = toy(0.5, 1.0);
    let small = gradient_samples(&model, 400, 1, 5).unwrap();
    let large = gradient_samples(&model, 800, 1, 5).unwrap();
    let se = variance_standard_error(&small).hypot(variance_standard_error(&large));
    assert!((sample_variance(&small) - sample_variance(&large)).abs() < 3.0 * se);
}

#[test]
fn constant_loss_has_zero_variance() {
    let target = SymmetricMatrix::identity(4).unwrap();
    let problem = EstimatorProblem::new(EstimatorKind::E, target, RegularizationParams::zeros(4)).unwrap();
    let model = CovarianceModel::canonical(problem, 4).unwrap();
    assert_eq!(gradient_variance(&model, 40, 8, 3).unwrap(), 0.0);
}

#[test]
fn scaling_c_and_target_scales_samples_quadratically() {
    let n = 4;
    let base_t = SymmetricMatrix::from_lower_fn(n, |i, j| if i == j { 1.0 } else { 0.3 }).unwrap();
    let base_c = RegularizationParams::from_fn(n, |i, j| 0.5 + 0.1 * (i + j) as f64).unwrap();
    let t = 1.7;
    let base = EstimatorProblem::new(EstimatorKind::E, base_t.clone(), base_c.clone()).unwrap();
    let scaled = EstimatorProblem::new(EstimatorKind::E, base_t.scaled(t), base_c.scaled(t)).unwrap();
    let a = CovarianceModel::canonical(base, 3).unwrap();
    let b = CovarianceModel::canonical(scaled, 3).unwrap();
    let sa = gradient_samples(&a, 40, 5, 9).unwrap();
    let sb = gradient_samples(&b, 40, 5, 9).unwrap();
    for (x, y) in sa.iter().zip(&sb) {
        assert!((y - t.powi(2) * x).abs() <= 1e-12 * (1.0 + y.abs()));
    }
    let (va, vb) = (sample_variance(&sa), sample_variance(&sb));
    assert!((vb / va - t.powi(4)).abs() <= 1e-9 * t.powi(4));
}

#[test]
fn identical_schedules_give_identical_variances() {
    let problem = EstimatorProblem::with_schedule(EstimatorKind::E, SymmetricMatrix::identity(4).unwrap(), CSchedule::Uniform(1.0)).unwrap();
    let report = mitigation_demo(&problem, &problem.c.clone(), 4, 40, 2).unwrap();
    assert_eq!(report.base.variance, report.scaled.variance);
    assert!(!report.mitigated());
}

#[test]
fn exponential_entry_lifts_variance_and_bound() {
    let n = 6;
    let problem = EstimatorProblem::with_schedule(EstimatorKind::E, SymmetricMatrix::identity(n).unwrap(), CSchedule::Uniform(1.0)).unwrap();
    let scaled = exponential_c(&problem.c, 0).unwrap();
    assert_eq!(scaled.values()[0], 8.0);
    let report = mitigation_demo(&problem, &scaled, 8, 60, 4).unwrap();
    assert!(report.mitigated());
    assert!(theorem_bound(&scaled, &problem.target) > theorem_bound(&problem.c, &problem.target));
}

#[test]
fn variance_decreases_with_register_size() {
    let cfg = VarianceSweepConfig {
        qubit_counts: vec![4, 6, 8],
        layer_rule: LayerRule::Square,
        samples: 200,
        seed: 11,
        ..Default::default()
    };
    let report = variance_sweep(&cfg).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert_eq!(report.rows.iter().map(|r| r.layers).collect::<Vec<_>>(), vec![16, 36, 64]);
    for w in report.rows.windows(2) {
        assert!(w[1].variance < w[0].variance);
    }
    assert!(report.log2_slope() < 0.0);
    assert!(report.rows.iter().all(|r| r.bound > 0.0 && r.ratio.is_finite()));
}
