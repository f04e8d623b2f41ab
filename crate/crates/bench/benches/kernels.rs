use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use euler_lab::biot_savart;
use euler_lab::euler2d::{euler_rhs, step_rk4};
use euler_lab::models1d::clm_rhs;
use euler_lab::SpectralField2;
use euler_lab_bench::{clm_data, euler_state, vorticity};

fn fft_roundtrip(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft_roundtrip");
    for n in [64, 128, 256] {
        let w = vorticity(n);
        let values = w.to_physical();
        group.bench_with_input(BenchmarkId::from_parameter(n), &values, |b, v| {
            b.iter(|| SpectralField2::from_physical(*w.grid(), black_box(v)).unwrap().to_physical())
        });
    }
    group.finish();
}

fn biot_savart_law(c: &mut Criterion) {
    let mut group = c.benchmark_group("biot_savart");
    for n in [64, 256] {
        let w = vorticity(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| b.iter(|| biot_savart(black_box(w)).unwrap()));
    }
    group.finish();
}

fn euler(c: &mut Criterion) {
    let mut group = c.benchmark_group("euler");
    for n in [64, 256] {
        let s = euler_state(n);
        group.bench_with_input(BenchmarkId::new("rhs", n), &s, |b, s| b.iter(|| euler_rhs(black_box(s))));
        group.bench_with_input(BenchmarkId::new("rk4_step", n), &s, |b, s| b.iter(|| step_rk4(black_box(s), 1e-3, 0.4).unwrap()));
    }
    group.finish();
}

fn clm(c: &mut Criterion) {
    let mut group = c.benchmark_group("clm_rhs");
    for n in [1024, 16384] {
        let w = clm_data(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| b.iter(|| clm_rhs(black_box(w))));
    }
    group.finish();
}

criterion_group!(benches, fft_roundtrip, biot_savart_law, euler, clm);
criterion_main!(benches);
