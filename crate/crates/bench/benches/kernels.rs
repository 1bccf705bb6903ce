use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wdnorm::cone::{self, ConeSpec};
use wdnorm::eigen::{self, EigenOptions};
use wdnorm::model::{self, IndexSet, NoiseModel};
use wdnorm::norms::NormSpec;
use wdnorm::solve::{self, SolveOptions};

fn bench_l1_eigenvalue(c: &mut Criterion) {
    let mut group = c.benchmark_group("l1_eigenvalue");
    let x = model::gaussian_design(50, 20, 0.3, 1).unwrap();
    let opts = EigenOptions::default();
    for s in [2usize, 4, 6, 8] {
        let set = IndexSet::new(20, 0..s).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(s), &set, |b, set| {
            b.iter(|| eigen::l1_eigenvalue(&x, black_box(set), 3.0, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    let (n, p) = (100, 40);
    let x = model::gaussian_design(n, p, 0.3, 2).unwrap();
    let mut beta0 = vec![0.0; p];
    beta0[..4].copy_from_slice(&[2.0, -1.0, 1.0, 0.5]);
    let eps = model::draw_noise(&NoiseModel::gaussian(0.5, 3), n).unwrap();
    let y: Vec<f64> = x.mul(&beta0).iter().zip(&eps).map(|(a, b)| a + b).collect();
    let groups: Vec<Vec<usize>> = (0..p / 4).map(|g| (4 * g..4 * g + 4).collect()).collect();
    let specs = [
        ("l1", NormSpec::L1),
        ("group", NormSpec::group(groups).unwrap()),
        ("monotone", NormSpec::Cone(ConeSpec::Monotone)),
    ];
    let opts = SolveOptions::default();
    for (name, spec) in &specs {
        group.bench_function(*name, |b| {
            b.iter(|| solve::solve_penalized_ls(&x, black_box(&y), 0.1, spec, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_pava(c: &mut Criterion) {
    let mut group = c.benchmark_group("monotone_partition");
    for p in [10usize, 100, 1000] {
        let beta = model::draw_noise(&NoiseModel::gaussian(1.0, p as u64), p).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(p), &beta, |b, beta| {
            b.iter(|| cone::monotone_contiguous_partition(black_box(beta)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_l1_eigenvalue, bench_solver, bench_pava);
criterion_main!(benches);
