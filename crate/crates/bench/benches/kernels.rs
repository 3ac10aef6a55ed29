use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use glmvae_core::closed_form::{mle_fit, objective_hat, MleOptions};
use glmvae_core::data::synthetic_bernoulli;
use glmvae_core::edf::EdfFamily;
use glmvae_core::nn::{build_architecture, elbo_minibatch, init_bench, Architecture};
use glmvae_core::numerics::{sym_eig, Matrix, Rng};

fn spd(n: usize) -> Matrix {
    let mut rng = Rng::new(1);
    let a = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
    a.transpose().matmul(&a).unwrap()
}

fn eigendecomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for n in [20, 50, 100] {
        let m = spd(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| b.iter(|| sym_eig(black_box(m)).unwrap()));
    }
    group.finish();
}

fn closed_form(c: &mut Criterion) {
    let ds = synthetic_bernoulli(2000, 100, 0).unwrap();
    let fam = EdfFamily::bernoulli();
    let opts = MleOptions::new(1.0, 5);
    c.bench_function("mle_fit/2000x100", |b| b.iter(|| mle_fit(black_box(&ds.train), &fam, &opts).unwrap()));
    let dec = mle_fit(&ds.train, &fam, &opts).unwrap().decoder();
    c.bench_function("objective_hat/2000x100", |b| {
        b.iter(|| objective_hat(&dec, black_box(&ds.train), &fam, 1.0).unwrap())
    });
}

fn training_step(c: &mut Criterion) {
    let ds = synthetic_bernoulli(1000, 200, 0).unwrap();
    let batch = ds.train.slice_rows(0, 100);
    let mut group = c.benchmark_group("elbo_minibatch");
    for arch in [Architecture::Canonical, Architecture::Deep] {
        let mut model = build_architecture(arch, 200, 2, EdfFamily::bernoulli(), 1.0, 0.1).unwrap();
        init_bench(&mut model, &mut Rng::new(2));
        group.bench_function(BenchmarkId::from_parameter(arch), |b| {
            let mut rng = Rng::new(3);
            b.iter(|| elbo_minibatch(&model, black_box(&batch), &mut rng, 1).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigendecomposition, closed_form, training_step);
criterion_main!(benches);
