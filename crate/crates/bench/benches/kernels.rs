use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ecap_bench::{bump_on_grid, random_cloud};
use ecap_core::localization::{Convolver, SourcePatch};
use ecap_core::oscillation::{DEFAULT_N_BOUNDARY, DEFAULT_N_RADIAL};
use ecap_core::{
    build_partition, curvature_energy, l_oscillation, localized_pieces, oscillation_via_psi, with_threads, Disc,
    EllipticOperator, C64,
};
use std::hint::black_box;

fn energy(c: &mut Criterion) {
    let mut group = c.benchmark_group("curvature_energy");
    group.sample_size(10);
    for n in [100, 300, 600] {
        let mu = random_cloud(n, 1);
        group.bench_with_input(BenchmarkId::new("default_pool", n), &mu, |b, mu| b.iter(|| curvature_energy(black_box(mu))));
        group.bench_with_input(BenchmarkId::new("one_thread", n), &mu, |b, mu| {
            b.iter(|| with_threads(1, || curvature_energy(black_box(mu))))
        });
    }
    group.finish();
}

fn oscillation(c: &mut Criterion) {
    let f = bump_on_grid(1.0 / 256.0);
    let disc = Disc::new(C64::new(0.05, -0.02), 0.3).unwrap();
    let mut group = c.benchmark_group("oscillation");
    for (name, op) in [("laplacian", EllipticOperator::laplacian()), ("bitsadze", EllipticOperator::bitsadze())] {
        group.bench_function(BenchmarkId::new("direct", name), |b| {
            b.iter(|| l_oscillation(&op, black_box(&f), &disc, DEFAULT_N_BOUNDARY, DEFAULT_N_RADIAL).unwrap())
        });
        group.bench_function(BenchmarkId::new("via_psi", name), |b| {
            b.iter(|| oscillation_via_psi(&op, black_box(&f), &disc).unwrap())
        });
    }
    group.finish();
}

fn convolution(c: &mut Criterion) {
    let op = EllipticOperator::laplacian();
    let mut group = c.benchmark_group("convolution");
    group.sample_size(10);
    for h in [1.0 / 128.0, 1.0 / 256.0] {
        let f = bump_on_grid(h);
        let conv = Convolver::new(&op, f.grid).unwrap();
        let src = SourcePatch::from_grid_values(&f.grid, &f.values).unwrap();
        group.bench_with_input(BenchmarkId::new("fft", f.grid.nx), &src, |b, src| b.iter(|| conv.apply(black_box(src))));
    }
    let f = bump_on_grid(1.0 / 128.0);
    let part = build_partition((C64::new(-0.75, -0.75), C64::new(0.75, 0.75)), 0.125, &f.grid).unwrap();
    group.bench_function("localize_and_reconstruct", |b| {
        b.iter(|| localized_pieces(&op, black_box(&f), &part).unwrap().reconstruct())
    });
    group.finish();
}

criterion_group!(benches, energy, oscillation, convolution);
criterion_main!(benches);
