use cfsdim_bench::{four_corner, three_groups, two_one};
use cfsdim_core::dimension::{attractor_dimension, gd_dimension, Depth};
use cfsdim_core::entropy::{phi_monte_carlo, phi_series, rw_entropy_bruteforce};
use cfsdim_core::fourcorner::{natural_p, phi_xy};
use cfsdim_core::separation::min_gap;
use cfsdim_core::symbolic::DEFAULT_BUDGET;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn phi(c: &mut Criterion) {
    let (sys, p) = two_one();
    c.bench_function("phi_series (2,1)", |b| b.iter(|| phi_series(&sys, black_box(&p), 1e-12).unwrap()));
    let (sys3, p3) = three_groups();
    c.bench_function("phi_series (3,2,2) heavy group", |b| {
        b.iter(|| phi_series(&sys3, black_box(&p3), 1e-12).unwrap())
    });
    c.bench_function("phi_monte_carlo 1e5", |b| b.iter(|| phi_monte_carlo(&sys, &p, 100_000, black_box(1)).unwrap()));
}

fn random_walk(c: &mut Criterion) {
    let (sys, p) = three_groups();
    c.bench_function("rw_entropy dp n=40", |b| {
        b.iter(|| rw_entropy_bruteforce(&sys, black_box(&p), 40, DEFAULT_BUDGET).unwrap())
    });
}

fn dimensions(c: &mut Criterion) {
    let (sys, _) = three_groups();
    c.bench_function("attractor_dimension", |b| b.iter(|| attractor_dimension(black_box(&sys), 1e-12).unwrap()));
    c.bench_function("gd_dimension depth 10", |b| {
        b.iter(|| gd_dimension(black_box(&sys), Depth::Finite(10), 1e-10).unwrap())
    });
    let sys4 = four_corner();
    c.bench_function("natural_p 4-corner", |b| b.iter(|| natural_p(black_box(&sys4)).unwrap()));
    let p4 = natural_p(&sys4).unwrap().p;
    c.bench_function("phi_xy", |b| b.iter(|| phi_xy(black_box(&p4), 1e-12).unwrap()));
}

fn separation(c: &mut Criterion) {
    let (sys, _) = two_one();
    c.bench_function("min_gap n=8", |b| b.iter(|| min_gap(black_box(&sys), 8, DEFAULT_BUDGET).unwrap()));
}

criterion_group!(benches, phi, random_walk, dimensions, separation);
criterion_main!(benches);
