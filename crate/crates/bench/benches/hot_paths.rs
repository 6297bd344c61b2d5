use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fvspine::conformal::{h_conformal, MapConstants};
use fvspine::fourier::{drift_gap, eval_h};
use fvspine::montecarlo::{first_exit_pair, RngSeed};
use fvspine::SquarePoint;
use std::f64::consts::PI;

fn bench_fourier(c: &mut Criterion) {
    let p = SquarePoint::new(1.0, 1.5).unwrap();
    c.bench_function("fourier_eval_h", |b| {
        b.iter(|| eval_h(black_box(p), 1e-10).unwrap())
    });
    let q = SquarePoint::new(PI / 4.0, PI / 4.0).unwrap();
    c.bench_function("fourier_drift_gap", |b| {
        b.iter(|| drift_gap(black_box(q), 1e-10).unwrap())
    });
}

fn bench_conformal(c: &mut Criterion) {
    let consts = MapConstants::compute();
    let p = SquarePoint::new(1.0, 1.5).unwrap();
    c.bench_function("conformal_h", |b| {
        b.iter(|| h_conformal(black_box(p), &consts, 1e-10).unwrap())
    });
}

fn bench_mc(c: &mut Criterion) {
    c.bench_function("fv_first_exit_pair", |b| {
        let mut rng = RngSeed::new(1, 0).rng();
        b.iter(|| first_exit_pair(black_box(1.0), black_box(2.0), 1e-3, &mut rng))
    });
}

criterion_group!(benches, bench_fourier, bench_conformal, bench_mc);
criterion_main!(benches);
