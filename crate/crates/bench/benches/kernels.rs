use std::collections::BTreeSet;

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use harmlab::construct::{lamplighter_h_exact, lamplighter_h_mc, McConfig, R_EXACT_MAX};
use harmlab::family::within;
use harmlab::laplace::{dirichlet_solve, laplacian_slice};
use harmlab::lca::{ball_surjectivity, Automaton};
use harmlab::linalg::rank;
use harmlab::walks::{n_step_distribution, FrontierPolicy};
use harmlab::{Element, GroupModel, PrimeField, Rationals, SymmetricMeasure};
use harmlab_bench::{lattice, sphere_problem};

fn elimination(c: &mut Criterion) {
    let g = lattice(2).ball(8).unwrap();
    let rows = within(&g, 7);
    let cols: Vec<usize> = (0..g.len()).collect();
    let m = laplacian_slice(&g, &rows, &cols, false).unwrap();
    c.bench_function("rank laplacian slice z2 B(7) over Q", |b| b.iter(|| rank(&Rationals, black_box(&m))));
    let z2 = GroupModel::free_abelian(2).unwrap();
    let mu = SymmetricMeasure::standard(&z2).unwrap();
    let tau = Automaton::group_laplacian(Rationals, z2, &mu).unwrap();
    c.bench_function("ball surjectivity laplacian z2 n=5 over Q", |b| {
        b.iter(|| ball_surjectivity(black_box(&tau), 5).unwrap())
    });
    // Δ on Z² over GF(5) (the weights 1/4 are invertible there)
    let z2 = GroupModel::free_abelian(2).unwrap();
    let tau5 = Automaton::group_laplacian(PrimeField::new(5).unwrap(), z2, &mu).unwrap();
    c.bench_function("ball surjectivity laplacian z2 n=5 over GF(5)", |b| {
        b.iter(|| ball_surjectivity(black_box(&tau5), 5).unwrap())
    });
}

fn dirichlet(c: &mut Criterion) {
    let g = lattice(2).ball(8).unwrap();
    let p = sphere_problem(&g, 8);
    c.bench_function("dirichlet z2 B(7)", |b| b.iter(|| dirichlet_solve(black_box(&g), &p).unwrap()));
}

fn propagation(c: &mut Criterion) {
    let g = lattice(3).ball(20).unwrap();
    c.bench_function("n-step distribution z3 n=20", |b| {
        b.iter(|| n_step_distribution(black_box(&g), g.base(), 20, &BTreeSet::new(), FrontierPolicy::Error).unwrap())
    });
}

fn lamplighter(c: &mut Criterion) {
    let e = Element::lamp(0, &[]);
    c.bench_function("lamplighter exact R=8", |b| b.iter(|| lamplighter_h_exact(black_box(&e), 8, R_EXACT_MAX).unwrap()));
    let cfg = McConfig { samples: 20_000, seed: 1, threads: 1 };
    c.bench_function("lamplighter mc R=6 20k samples", |b| b.iter(|| lamplighter_h_mc(black_box(&e), 6, &cfg).unwrap()));
}

criterion_group!(benches, elimination, dirichlet, propagation, lamplighter);
criterion_main!(benches);
