use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use spectrum_games::continuous::{stackelberg_leader_search, weighted_sum_optimize, SolverOptions};
use spectrum_games::experiments::{channel_ensemble_study, EnsembleConfig};
use spectrum_games::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn ensemble(c: &mut Criterion) {
    let cfg = EnsembleConfig { realizations: 16, ..EnsembleConfig::default() };
    let mut group = c.benchmark_group("ensemble_16");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = SolverOptions { execution, ..SolverOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| channel_ensemble_study(black_box(&cfg), &opts).unwrap())
        });
    }
    group.finish();
}

fn weighted_sum_oracle(c: &mut Criterion) {
    let cfg = EnsembleConfig { bin_count: 2, total_band: 2.0, budgets: vec![2.0, 2.0], ..EnsembleConfig::default() };
    let sc = cfg.scenario(cfg.realization_seed(0, 0)).unwrap();
    let mut group = c.benchmark_group("weighted_sum_k2_l40");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = SolverOptions { levels: 40, execution, ..SolverOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| weighted_sum_optimize(&sc, black_box(&[0.5, 0.5]), &opts).unwrap())
        });
    }
    group.finish();
}

fn leader_grid(c: &mut Criterion) {
    let cfg = EnsembleConfig { bin_count: 4, total_band: 4.0, budgets: vec![4.0, 4.0], ..EnsembleConfig::default() };
    let sc = cfg.scenario(cfg.realization_seed(0, 0)).unwrap();
    let mut group = c.benchmark_group("leader_search_k4");
    group.sample_size(10);
    for (name, execution) in MODES {
        let opts = SolverOptions { execution, ..SolverOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| stackelberg_leader_search(black_box(&sc), 0, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble, weighted_sum_oracle, leader_grid);
criterion_main!(benches);
