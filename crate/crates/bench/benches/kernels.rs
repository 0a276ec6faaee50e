use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use purify_core::analytic::{recursion_pn_fn, EigenSpectrum};
use purify_core::circuit::{compile_to_unitary, three_copy_circuit};
use purify_core::sdp::solve_fidelity;
use purify_core::symgroup::symmetric_projector;
use purify_core::NoiseChannel;

fn recursion(c: &mut Criterion) {
    let spec = EigenSpectrum::depolarizing(4, 0.3).unwrap();
    c.bench_function("recursion d=4 n<=40", |b| {
        b.iter(|| recursion_pn_fn(black_box(&spec), 40))
    });
}

fn projector(c: &mut Criterion) {
    c.bench_function("symmetric projector n=4 d=3", |b| {
        b.iter(|| symmetric_projector(black_box(4), 3).unwrap())
    });
}

fn sdp(c: &mut Criterion) {
    let ch = NoiseChannel::depolarizing(2, 0.2).unwrap();
    let mut group = c.benchmark_group("sdp");
    group.sample_size(10);
    group.bench_function("fidelity n=2 d=2", |b| {
        b.iter(|| solve_fidelity(black_box(&ch), 2, 0.91).unwrap())
    });
    group.finish();
}

fn circuit(c: &mut Criterion) {
    let circ = three_copy_circuit().unwrap().circuit;
    c.bench_function("compile three-copy circuit", |b| {
        b.iter(|| compile_to_unitary(black_box(&circ)).unwrap())
    });
}

criterion_group!(benches, recursion, projector, sdp, circuit);
criterion_main!(benches);
