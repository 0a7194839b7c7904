use std::hint::black_box;

use cpce_core::encoding::e_family;
use cpce_core::estimators::CovarianceModel;
use cpce_core::linalg::random_psd;
use cpce_core::optimizer::init_params;
use cpce_core::simulator::{expectation_jacobian, run_hea, CircuitSpec};
use cpce_core::{CSchedule, EstimatorKind, EstimatorProblem};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn statevector(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_hea");
    for eta in [4, 8, 12] {
        let spec = CircuitSpec::new(eta, eta).unwrap();
        let params = init_params(&spec, 1);
        group.bench_with_input(BenchmarkId::from_parameter(eta), &eta, |b, _| {
            b.iter(|| run_hea(black_box(&spec), black_box(&params)).unwrap())
        });
    }
    group.finish();
}

fn jacobian(c: &mut Criterion) {
    let mut group = c.benchmark_group("expectation_jacobian");
    for n in [4, 6, 8] {
        let assignment = e_family(n).unwrap();
        let spec = CircuitSpec::new(assignment.eta(), 4).unwrap();
        let params = init_params(&spec, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| expectation_jacobian(&spec, black_box(&params), assignment.observables()).unwrap())
        });
    }
    group.finish();
}

fn loss_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss_gradient");
    for kind in [EstimatorKind::C, EstimatorKind::E] {
        let problem = EstimatorProblem::with_schedule(kind, random_psd(6, 0).unwrap(), CSchedule::Correlation).unwrap();
        let model = CovarianceModel::canonical(problem, 4).unwrap();
        let params = init_params(model.spec(), 3);
        group.bench_function(kind.to_string(), |b| b.iter(|| model.gradient(black_box(&params)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, statevector, jacobian, loss_gradient);
criterion_main!(benches);
