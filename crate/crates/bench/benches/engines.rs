use std::f64::consts::PI;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use gsff_core::bvp1d::{transfer_matrix, verify_gsff, VerifyOptions};
use gsff_core::harness::{catalog_entry, random_scenario};
use gsff_core::sample;
use gsff_core::specflow::{sf_partition, OperatorPath};
use gsff_core::Tolerances;

fn transfer(c: &mut Criterion) {
    let tol = Tolerances::default();
    let sc = random_scenario(7, 2).build(&tol).unwrap();
    c.bench_function("transfer_matrix m=2", |b| {
        b.iter(|| transfer_matrix(&sc.system, black_box(0.3), black_box(1.5)).unwrap())
    });
}

fn partition(c: &mut Criterion) {
    let tol = Tolerances::default();
    for n in [4usize, 16] {
        let mut r = sample::rng(n as u64);
        let h0 = sample::hermitian(&mut r, n);
        let h1 = sample::hermitian(&mut r, n).scale(3.0);
        let path = OperatorPath::hermitian(n, move |s| &h0 + h1.scale((2.0 * PI * s).cos()));
        c.bench_function(&format!("sf_partition n={n}"), |b| {
            b.iter(|| sf_partition(&path, &tol).unwrap().0)
        });
    }
}

fn verify(c: &mut Criterion) {
    let tol = Tolerances::default();
    let sc = catalog_entry("R1").unwrap().build(&tol).unwrap();
    let opts = VerifyOptions::default();
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    g.bench_function("R1", |b| b.iter(|| verify_gsff(&sc, &opts, &tol).unwrap().equal));
    g.finish();
}

criterion_group!(benches, transfer, partition, verify);
criterion_main!(benches);
