use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mismatch_core::montecarlo::{run_trials, Scenario, TrialConfig};
use mismatch_core::scanmap::{find_attack_points, pinhole_filter, synthesize_scan, AttackPoint, ScanPreset, SearchThresholds};
use mismatch_core::{
    optimize_mode_a, optimize_mode_b, AttackProblem, EveDetectorModel, LinkModel, OptimizerConfig, ReceiverModel,
};

fn attack_points() -> [AttackPoint; 4] {
    let map = synthesize_scan(&ScanPreset::paper_like(), 1).unwrap();
    find_attack_points(&map, &SearchThresholds::paper()).complete().unwrap()
}

fn problem(loss_db: f64) -> AttackProblem {
    AttackProblem::from_attack_points(
        &attack_points(),
        EveDetectorModel::default(),
        LinkModel::with_loss(loss_db).unwrap(),
        ReceiverModel::default(),
    )
}

fn scan(c: &mut Criterion) {
    let map = synthesize_scan(&ScanPreset::paper_like(), 1).unwrap();
    c.bench_function("synthesize_scan", |b| {
        b.iter(|| synthesize_scan(black_box(&ScanPreset::paper_like()), 1).unwrap())
    });
    c.bench_function("find_attack_points", |b| {
        b.iter(|| find_attack_points(black_box(&map), &SearchThresholds::paper()))
    });
    c.bench_function("pinhole_filter", |b| b.iter(|| pinhole_filter(black_box(&map), 100.0, 10.0).unwrap()));
}

fn rates(c: &mut Criterion) {
    let p = problem(9.0);
    c.bench_function("evaluate_attack", |b| b.iter(|| p.evaluate(black_box([0.8, 50.0, 0.5, 1.4])).unwrap()));
}

fn optimizer(c: &mut Criterion) {
    let mut group = c.benchmark_group("optimizer");
    let config = OptimizerConfig::default();
    for loss in [3.0, 15.0] {
        let p = problem(loss);
        group.bench_with_input(BenchmarkId::new("mode_b", loss), &p, |b, p| {
            b.iter(|| optimize_mode_b(p, &config).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("mode_a", loss), &p, |b, p| {
            b.iter(|| optimize_mode_a(p, &config).unwrap())
        });
    }
    group.finish();
}

fn montecarlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("montecarlo");
    group.sample_size(10);
    let p = problem(6.0);
    let mu = optimize_mode_b(&p, &OptimizerConfig::default()).unwrap().mu;
    let scenarios = [
        ("baseline", Scenario::BaselineNoEve),
        ("attack", Scenario::FakedStateAttack(p.strategy(mu).unwrap())),
    ];
    for (name, scenario) in scenarios {
        let config = TrialConfig {
            n_pulses: 1 << 18,
            seed: 1,
            link: p.link,
            receiver: p.receiver,
            scenario,
        };
        group.bench_function(name, |b| b.iter(|| run_trials(black_box(&config)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, scan, rates, optimizer, montecarlo);
criterion_main!(benches);
