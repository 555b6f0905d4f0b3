use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use metanic_core::feasibility::{brute_force_oracle, check_feasibility, q, MarginalSystem};
use metanic_core::nic::{estimate_stats, test_equalities};
use metanic_core::rotation::{exact_c_matrix, RotationModelConfig};
use metanic_core::simulate::{simulate, AgentSpec, LatentModel, SimulationPlan};
use std::hint::black_box;

fn rotation(c: &mut Criterion) {
    let cfg = RotationModelConfig::default();
    c.bench_function("exact_c_matrix", |b| b.iter(|| exact_c_matrix(black_box(&cfg))));
}

fn feasibility(c: &mut Criterion) {
    let cycle = MarginalSystem::from_disagreements(
        vec![q(1, 2); 3],
        &[((0, 1), q(1, 1)), ((0, 2), q(1, 1)), ((1, 2), q(1, 1))],
    )
    .unwrap();
    let joint: Vec<_> = [3, 1, 4, 1, 5, 9, 2, 6].iter().map(|&k| q(k, 31)).collect();
    let from_joint = MarginalSystem::from_joint(3, &joint).unwrap();
    c.bench_function("check_feasibility/infeasible", |b| b.iter(|| check_feasibility(black_box(&cycle))));
    c.bench_function("check_feasibility/feasible", |b| b.iter(|| check_feasibility(black_box(&from_joint))));
    c.bench_function("brute_force_oracle/grid200", |b| b.iter(|| brute_force_oracle(black_box(&cycle), 200)));
}

fn statistics(c: &mut Criterion) {
    let agent = AgentSpec::rotation(RotationModelConfig::default(), 0.05);
    let trials = simulate(&agent, &SimulationPlan::new(1000, 1)).unwrap();
    let stats = estimate_stats(&trials, 0.5).unwrap();
    let mut group = c.benchmark_group("equality_battery");
    group.sample_size(10);
    group.bench_function("n1000_perm10000", |b| {
        b.iter(|| test_equalities(&stats, &trials, 10_000, &[], 4, 7).unwrap())
    });
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let agent = AgentSpec::nic(LatentModel::default(), 0.05);
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function("nic_n1000", |b| {
        b.iter_batched(|| SimulationPlan::new(1000, 5), |plan| simulate(&agent, &plan).unwrap(), BatchSize::SmallInput)
    });
    group.finish();
}

criterion_group!(benches, rotation, feasibility, statistics, simulation);
criterion_main!(benches);
