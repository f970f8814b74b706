use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use interbank_eq::*;

fn decentralized(c: &mut Criterion) {
    let five = fixtures::five_bank();
    c.bench_function("decentralized/five_bank", |b| b.iter(|| solve_decentralized(black_box(&five))));
    let mut g = c.benchmark_group("decentralized/identical");
    for n in [10, 100, 1000] {
        let sys = fixtures::reference_system(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, s| b.iter(|| solve_decentralized(s)));
    }
    g.finish();
}

fn centralized(c: &mut Criterion) {
    let mut g = c.benchmark_group("centralized/identical");
    for n in [3, 30, 300] {
        let sys = fixtures::reference_system(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &sys, |b, s| b.iter(|| solve_centralized(s)));
    }
    g.finish();
}

fn welfare(c: &mut Criterion) {
    let bank = fixtures::reference_bank();
    c.bench_function("welfare/rates_1e2_to_1e5", |b| {
        b.iter(|| asymptotic_rates_report(&bank, black_box(&[100, 1_000, 10_000, 100_000]), fixtures::REFERENCE_R))
    });
}

fn extensions(c: &mut Criterion) {
    let sys = fixtures::reference_system(3);
    c.bench_function("extensions/liquidity_loss", |b| b.iter(|| solve_ext_liquidity_loss(black_box(&sys))));
    let bond = fixtures::partial_bond_system(6);
    c.bench_function("extensions/partial_bond", |b| b.iter(|| solve_ext_partial_bond(black_box(&bond), 0.5)));
    let bank = fixtures::endogenous_eta_bank();
    c.bench_function("extensions/endogenous_eta", |b| {
        b.iter(|| solve_ext_endogenous_eta(black_box(&bank), fixtures::ENDOGENOUS_ETA_R))
    });
}

fn monte_carlo(c: &mut Criterion) {
    let sys = fixtures::reference_system(3);
    let alloc = solve_decentralized(&sys).unwrap().allocation;
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("10k_paths", |b| b.iter(|| simulate_paths(&sys, &alloc, 10_000, black_box(1), false)));
    g.finish();
}

criterion_group!(benches, decentralized, centralized, welfare, extensions, monte_carlo);
criterion_main!(benches);
