//! Sequential vs rayon execution of the batch entry points.

use std::hint::black_box;

use barker::balancing::barker_jump_rate_mc_with;
use barker::data::{synthesize_imbalanced, SyntheticSpec};
use barker::experiments::{jump_bias, run_grid, BiasSpec, GridSpec};
use barker::par::{map_indexed, Execution};
use barker::precond::Preconditioner;
use barker::samplers::{run_chain, SamplerKind, Tuning};
use barker::targets::{make_skew_normal, GaussianTarget};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DVector;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn jump_rate(c: &mut Criterion) {
    let target = make_skew_normal(5.0).unwrap();
    let mut g = c.benchmark_group("jump_rate_mc_1e6");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| barker_jump_rate_mc_with(exec, &target, 1.0, 0.7, 1_000_000, 3).unwrap())
        });
    }
    g.finish();
}

fn chains(c: &mut Criterion) {
    let target = GaussianTarget::standard(20).unwrap();
    let tuning = Tuning::Fixed(Preconditioner::identity(20, 0.5).unwrap());
    let x0 = DVector::zeros(20);
    let mut g = c.benchmark_group("barker_8_chains_x_5000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                map_indexed(exec, 8, |k| {
                    run_chain(&target, SamplerKind::Barker, 5_000, &x0, &tuning, k as u64)
                        .unwrap()
                        .acceptance_rate()
                })
            })
        });
    }
    g.finish();
}

fn bias(c: &mut Criterion) {
    let mut g = c.benchmark_group("jump_bias_64_paths");
    for (name, exec) in MODES {
        let spec = BiasSpec {
            proposal_stds: vec![0.4, 0.2],
            duration: 2_000.0,
            replicates: 32,
            seed: 1,
            execution: exec,
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| jump_bias(black_box(&spec)).unwrap())
        });
    }
    g.finish();
}

fn grid(c: &mut Criterion) {
    let ds = synthesize_imbalanced(&SyntheticSpec {
        n: 200,
        d_imbalanced: 5,
        d_regular: 5,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let mut g = c.benchmark_group("grid_small");
    g.sample_size(10);
    for (name, exec) in MODES {
        let spec = GridSpec {
            n_iters: 1_000,
            n_chains: 2,
            history_every: 0,
            execution: exec,
            ..GridSpec::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_grid(&ds, &spec).unwrap().len())
        });
    }
    g.finish();
}

criterion_group!(benches, jump_rate, chains, bias, grid);
criterion_main!(benches);
