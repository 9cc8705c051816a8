use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pbow_core::datasets::{generate_shape, ShapeClass};
use pbow_core::encoding::{nearest_center_linear, KdTree};
use pbow_core::metrics::{bottleneck, wasserstein};
use pbow_core::persistence::rips_diagram;
use pbow_core::{CodebookKind, CodebookSpec, Diagram, Encoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.random(), rng.random::<f64>() + 0.01])
        .collect()
}

fn nearest_center(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let queries = random_points(&mut rng, 1000);
    let mut group = c.benchmark_group("nearest_center");
    for n in [10, 50, 200] {
        let centers = random_points(&mut rng, n);
        let tree = KdTree::new(&centers);
        group.bench_with_input(BenchmarkId::new("kdtree", n), &n, |b, _| {
            b.iter(|| {
                queries
                    .iter()
                    .map(|q| tree.nearest(q).unwrap().0)
                    .sum::<usize>()
            })
        });
        group.bench_with_input(BenchmarkId::new("linear", n), &n, |b, _| {
            b.iter(|| {
                queries
                    .iter()
                    .map(|q| nearest_center_linear(q, &centers).0)
                    .sum::<usize>()
            })
        });
    }
    group.finish();
}

fn distances(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("distances");
    for n in [10, 50, 100] {
        let a = Diagram::new(1, random_points(&mut rng, n));
        let b = Diagram::new(1, random_points(&mut rng, n));
        group.bench_with_input(BenchmarkId::new("wasserstein_1", n), &n, |bench, _| {
            bench.iter(|| wasserstein(black_box(&a), black_box(&b), 1.0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("bottleneck", n), &n, |bench, _| {
            bench.iter(|| bottleneck(black_box(&a), black_box(&b)))
        });
    }
    group.finish();
}

fn rips(c: &mut Criterion) {
    let mut group = c.benchmark_group("rips_h1");
    group.sample_size(10);
    for n in [50, 100, 200] {
        let cloud = generate_shape(ShapeClass::Torus, n, 0.1, 3).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| rips_diagram(black_box(&cloud), 1, None).unwrap())
        });
    }
    group.finish();
}

fn codebook_and_encode(c: &mut Criterion) {
    let diagrams: Vec<Diagram> = (0..60)
        .map(|seed| {
            let class = ShapeClass::ALL[seed as usize % ShapeClass::ALL.len()];
            rips_diagram(&generate_shape(class, 100, 0.1, seed).unwrap(), 1, None).unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("codebook");
    group.sample_size(10);
    for kind in [CodebookKind::Kmeans, CodebookKind::Gmm] {
        let spec = CodebookSpec {
            kind,
            n: 20,
            ..Default::default()
        };
        group.bench_function(BenchmarkId::new("fit", kind), |b| {
            b.iter(|| spec.fit(&diagrams, 0).unwrap())
        });
        let cb = spec.fit(&diagrams, 0).unwrap();
        let encoder = Encoder::new(&cb).unwrap();
        group.bench_function(BenchmarkId::new("encode", kind), |b| {
            b.iter(|| encoder.encode_all(black_box(&diagrams)))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    nearest_center,
    distances,
    rips,
    codebook_and_encode
);
criterion_main!(benches);
