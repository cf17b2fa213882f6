use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eqsub::equilibrium::{ConvexFn, EquilibriumProblem, OracleOptions};
use eqsub::operators::FirmOp;
use eqsub::rates::{Limits, RateCalculator, RateInputs};
use eqsub::solver::{run, EpsSchedule, SolverConfig};
use eqsub::{Counterfunction, Vector};
use num_bigint::BigUint;
use num_rational::BigRational;

fn weighted_norm(dim: usize) -> EquilibriumProblem {
    EquilibriumProblem::convex_minimization(ConvexFn::WeightedOneNorm {
        center: vec![0.0; dim],
        weights: vec![1.0; dim],
    })
    .unwrap()
}

fn solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solver_run");
    for dim in [1, 8, 64] {
        let problem = weighted_norm(dim);
        let m = (dim as f64).sqrt();
        let cfg = SolverConfig::new(0.5 / (m * m), 1.0 / (m * m), m, EpsSchedule::Harmonic { eps0: 1e-3 }, 1_000);
        let x0 = Vector::new(vec![1.0; dim]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |bch, _| {
            bch.iter(|| run(&problem, &FirmOp::Identity, &cfg, black_box(x0.clone())).into_result().unwrap())
        });
    }
    group.finish();
}

fn metastability(c: &mut Criterion) {
    let q = |n: i64| BigRational::from_integer(n.into());
    let inputs = RateInputs::new(q(1), q(1), q(1), q(2), q(1), q(0), 1, Counterfunction::constant(0u32)).unwrap();
    let calc = RateCalculator::new(inputs, Limits::default()).unwrap();
    let mut group = c.benchmark_group("metastability_rate");
    group.sample_size(10);
    for (k, g) in [(0u32, Counterfunction::constant(0u32)), (0, Counterfunction::constant(1u32))] {
        let k = BigUint::from(k);
        group.bench_function(format!("k={k},g={g}"), |bch| {
            bch.iter(|| calc.metastability_rate(black_box(&k), &g))
        });
    }
    group.finish();
}

fn grid_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid_oracle");
    for dim in [1, 2] {
        let problem = weighted_norm(dim).with_oracle_options(OracleOptions {
            force_grid: true,
            ..OracleOptions::default()
        });
        let x = Vector::new(vec![0.5; dim]).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |bch, _| {
            bch.iter(|| problem.approx_max(black_box(&x), 2.0, 1e-2).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, solver, metastability, grid_oracle);
criterion_main!(benches);
