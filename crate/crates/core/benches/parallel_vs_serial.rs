//! Compares the rayon data-parallel engine against the sequential path on
//! the two hot loops: quadruple-inequality sweeps and Monte Carlo rate
//! experiments.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use frechet_core::cost::{CostDescriptor, QuadrupleStructure, StructureInstance};
use frechet_core::estimator::EstimatorConfig;
use frechet_core::harness::{run_experiment_with_mode, DistributionSpec, ExperimentConfig};
use frechet_core::lab::sweep_system;
use frechet_core::space::{sample_point, DistanceKind, MetricSpaceDescriptor};
use frechet_core::ExecMode;

fn sweep_bench(c: &mut Criterion) {
    let space = MetricSpaceDescriptor::tripod();
    let inst = StructureInstance::new(space.clone(), QuadrupleStructure::Nice).unwrap();
    let mut group = c.benchmark_group("nice_tripod_sweep_100k");
    for (label, mode) in [("serial", ExecMode::Serial), ("parallel", ExecMode::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| {
                let report = sweep_system(
                    &inst,
                    |rng| sample_point(&space, None, rng),
                    |rng| sample_point(&space, None, rng),
                    100_000,
                    7,
                    1e-9,
                    mode,
                );
                assert_eq!(report.violations, 0);
                report
            })
        });
    }
    group.finish();
}

fn experiment_bench(c: &mut Criterion) {
    let config = ExperimentConfig {
        space: MetricSpaceDescriptor::euclidean(1),
        cost: CostDescriptor::SquaredDistance,
        loss: DistanceKind::Base,
        distribution: DistributionSpec::GaussianVector {
            mean: vec![0.0],
            variances: vec![1.0],
        },
        n_grid: vec![64, 256, 1024],
        replications: 200,
        seed: 99,
        estimator: EstimatorConfig::default(),
        known_m: None,
        kappa: 2.0,
    };
    let mut group = c.benchmark_group("gaussian_rate_experiment");
    for (label, mode) in [("serial", ExecMode::Serial), ("parallel", ExecMode::Parallel)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &mode, |b, &mode| {
            b.iter(|| run_experiment_with_mode(&config, mode).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_bench, experiment_bench);
criterion_main!(benches);
