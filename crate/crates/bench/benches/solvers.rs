use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mfg_core::mc::{kde_mode, simulate_ensemble, BandwidthRule, EnsembleConfig};
use mfg_core::{pde, GaussianInitial, GaussianSolution, QuadraticCost, QuadraticTerminal, SolverOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn problem() -> (QuadraticCost, QuadraticTerminal, GaussianInitial) {
    (
        QuadraticCost::new(-2.0, 0.0, 0.0, 0.2, 2.0).unwrap(),
        QuadraticTerminal::new(0.0, 0.0, 0.0).unwrap(),
        GaussianInitial::new(0.2, 0.5).unwrap(),
    )
}

fn riccati(c: &mut Criterion) {
    let (cost, terminal, initial) = problem();
    let opts = SolverOptions::default();
    c.bench_function("riccati_solve", |b| {
        b.iter(|| GaussianSolution::solve(black_box(&cost), &terminal, &initial, &opts).unwrap())
    });
}

fn pde_512(c: &mut Criterion) {
    let (cost, terminal, initial) = problem();
    let sol = GaussianSolution::solve(&cost, &terminal, &initial, &SolverOptions::default()).unwrap();
    let mut g = c.benchmark_group("pde");
    g.sample_size(10);
    g.bench_function("gaussian_512x512", |b| b.iter(|| pde::solve_gaussian(black_box(&sol), 512, 512).unwrap()));
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let (cost, terminal, initial) = problem();
    let sol = GaussianSolution::solve(&cost, &terminal, &initial, &SolverOptions::default()).unwrap();
    let config = EnsembleConfig::new(20_000, 1).with_steps(200, 10);
    let mut g = c.benchmark_group("mc");
    g.sample_size(10);
    g.bench_function("ensemble_20k_agents_200_steps", |b| {
        b.iter(|| simulate_ensemble(&sol.value, &cost, &initial, black_box(&config)).unwrap())
    });
    g.finish();
}

fn kde(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    c.bench_function("kde_mode_100k", |b| b.iter(|| kde_mode(black_box(&samples), BandwidthRule::DensityDerivative).unwrap()));
}

criterion_group!(benches, riccati, pde_512, monte_carlo, kde);
criterion_main!(benches);
