use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use framesched::oracle::{min_penalty_power_target, min_penalty_target, min_power_target};
use framesched::policies::{dynpower_decide, PowerModel};
use framesched::{presets, run, PolicyKind, RunOptions};

const FRAMES: u64 = 10_000;

fn simulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.throughput(Throughput::Elements(FRAMES));
    let fixed = presets::mm1_fairness(1000.0);
    let mut power = presets::power_two_class_affine().with_bounds(&[0.3, 0.3]);
    power.p_const = Some(3.5);
    for kind in PolicyKind::ALL {
        let cfg = if kind.controls_power() { &power } else { &fixed };
        group.bench_with_input(BenchmarkId::from_parameter(kind), cfg, |b, cfg| {
            b.iter(|| run(cfg, kind, FRAMES, black_box(7), RunOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn power_argmin(c: &mut Criterion) {
    let model = PowerModel::new(&presets::power_two_class_affine());
    c.bench_function("dynpower decision", |b| {
        b.iter(|| dynpower_decide(black_box(&[3.0, 1.5]), &model, black_box(10.0)).unwrap())
    });
}

fn oracles(c: &mut Criterion) {
    let fair = presets::mm1_fairness(1.0);
    c.bench_function("penalty oracle", |b| {
        b.iter(|| min_penalty_target(&fair, &fair.penalties(), &fair.delay_bounds(), 1.0).unwrap())
    });
    let power = presets::power_two_class_affine();
    let mut group = c.benchmark_group("power oracles");
    group.sample_size(10);
    group.bench_function("min power", |b| {
        b.iter(|| min_power_target(&power, black_box(&[0.3, 0.3])).unwrap())
    });
    group.bench_function("penalty under budget", |b| {
        b.iter(|| min_penalty_power_target(&power, &power.penalties(), black_box(3.5)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, simulate, power_argmin, oracles);
criterion_main!(benches);
