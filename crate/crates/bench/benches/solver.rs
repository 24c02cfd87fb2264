use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use mvlp_core::desk::{desk_system, vre_gas_system, DeskShape};
use mvlp_core::{build_lp, solve, FormulationOptions, PolicyConfig, Tolerances};

fn formulate(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_lp");
    for nodes in [1, 3, 5] {
        let s = desk_system(7, DeskShape { nodes, snapshots: 168, storage: true, ring: true });
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &s, |b, s| {
            b.iter(|| build_lp(black_box(s), &PolicyConfig::none(), FormulationOptions::default()).unwrap())
        });
    }
    group.finish();
}

fn simplex(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for t in [48, 168] {
        let s = vre_gas_system(3, t);
        let lp = build_lp(&s, &PolicyConfig::support_share(&["wind"], 0.5), FormulationOptions::default()).unwrap();
        group.bench_with_input(BenchmarkId::new("vre_gas", t), &lp, |b, lp| {
            b.iter(|| solve(black_box(lp), &Tolerances::default()).unwrap())
        });
    }
    let s = desk_system(11, DeskShape { nodes: 3, snapshots: 48, storage: true, ring: true });
    let kvl = FormulationOptions { enforce_kvl: true, ..FormulationOptions::default() };
    let lp = build_lp(&s, &PolicyConfig::none(), kvl).unwrap();
    group.bench_function("desk_3node_kvl_48", |b| b.iter(|| solve(black_box(&lp), &Tolerances::default()).unwrap()));
    group.finish();
}

criterion_group!(benches, formulate, simplex);
criterion_main!(benches);
