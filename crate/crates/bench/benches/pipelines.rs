use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dmtomo::hilbert::{Aprime, CMat};
use dmtomo::statistics::{
    reconstruct_method1_sampled, sample_pointer_positions_seeded, Quadrature, ShotPlan,
};
use dmtomo::tomography::physicality_project;
use dmtomo_bench::{bell_state, method1_exact, method1_probability, method2, werner_state};

fn bench_method1(c: &mut Criterion) {
    let mut group = c.benchmark_group("method1");
    for (name, state) in [("bell", bell_state()), ("werner", werner_state())] {
        group.bench_with_input(BenchmarkId::new("exact", name), &state, |b, s| {
            let cfg = method1_exact();
            b.iter(|| dmtomo::modular::reconstruct(s, &cfg).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("probability", name), &state, |b, s| {
            let cfg = method1_probability(1e-2);
            b.iter(|| dmtomo::modular::reconstruct(s, &cfg).unwrap());
        });
    }
    group.finish();
}

fn bench_method2(c: &mut Criterion) {
    let mut group = c.benchmark_group("method2");
    for (name, state) in [("bell", bell_state()), ("werner", werner_state())] {
        group.bench_with_input(BenchmarkId::new("full", name), &state, |b, s| {
            let cfg = method2(1e-3);
            b.iter(|| dmtomo::sequential::reconstruct(&s.rho, &cfg).unwrap());
        });
    }
    group.bench_function("single_element", |b| {
        let state = bell_state();
        let cfg = method2(1e-3);
        b.iter(|| {
            dmtomo::sequential::reconstruct_element(&state.rho, Aprime::HH, Aprime::VV, &cfg)
                .unwrap()
        });
    });
    group.finish();
}

fn bench_projection(c: &mut Criterion) {
    let state = werner_state();
    let mut noisy = state.rho.matrix().clone();
    noisy.set(0, 1, noisy.get(0, 1) + dmtomo::c64(0.05, -0.03));
    noisy.set(2, 3, noisy.get(2, 3) + dmtomo::c64(-0.04, 0.02));
    c.bench_function("physicality_project", |b| {
        b.iter(|| physicality_project(&noisy).unwrap())
    });
}

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampling");
    group.sample_size(20);

    group.bench_function("method1_sampled_100k", |b| {
        let state = bell_state();
        let cfg = method1_probability(1e-2);
        let plan = ShotPlan::uniform(5, 100_000);
        b.iter(|| reconstruct_method1_sampled(&state, &cfg, &plan).unwrap());
    });

    group.bench_function("pointer_positions_10k", |b| {
        let state = bell_state();
        let pointer = method2(0.3).pointer;
        let e = dmtomo::sequential::prepare(&state.rho, &pointer).unwrap();
        let e = dmtomo::sequential::couple_for_setting(&e, Aprime::HH, dmtomo::Bprime::DD, 0.3);
        let post = dmtomo::sequential::postselect(&e, Aprime::VV);
        let pattern = [Quadrature::Position; 4];
        b.iter(|| sample_pointer_positions_seeded(&post, &pattern, 10_000, 9, "bench").unwrap());
    });

    group.finish();
}

fn bench_linalg(c: &mut Criterion) {
    let state = werner_state();
    c.bench_function("eigh_4x4", |b| {
        b.iter(|| dmtomo::hilbert::eigh(state.rho.matrix()))
    });
    c.bench_function("matmul_4x4", |b| {
        let m: &CMat = state.rho.matrix();
        b.iter(|| m.mul(m))
    });
}

criterion_group!(
    benches,
    bench_method1,
    bench_method2,
    bench_projection,
    bench_sampling,
    bench_linalg
);
criterion_main!(benches);
