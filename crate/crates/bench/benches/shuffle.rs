use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rtr_core::chain::{build_c, build_ktilde, second_largest_eigenvalue};
use rtr_core::coupling::GoodTimeScanner;
use rtr_core::exact::{DistOverSn, ShuffleKernel};
use rtr_core::montecarlo::{estimate_t_tail, DEFAULT_PAIR};
use rtr_core::{CouplingVariant, Deck, SeedSpec, Shuffle, ShufflePath};

fn apply_shuffle(c: &mut Criterion) {
    let mut g = c.benchmark_group("apply_shuffle");
    for n in [10usize, 52, 200] {
        let mut rng = SeedSpec::new(1).stream(0);
        let moves: Vec<Shuffle> = (0..1024).map(|_| Shuffle::random(&mut rng, n)).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            let mut deck = Deck::identity(n);
            let mut i = 0;
            b.iter(|| {
                deck.apply_mut(black_box(moves[i & 1023])).unwrap();
                i += 1;
            });
        });
    }
    g.finish();
}

fn kernel_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("kernel_step");
    g.sample_size(10);
    for n in [6usize, 7, 8] {
        let kernel = ShuffleKernel::new(n).unwrap();
        let start = kernel.evolve(&DistOverSn::point_mass(&Deck::identity(n)), 3).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| kernel.step(black_box(&start)).unwrap())
        });
    }
    g.finish();
}

fn eigenvalue(c: &mut Criterion) {
    let limit = build_c();
    c.bench_function("eigenvalue/limit", |b| b.iter(|| second_largest_eigenvalue(black_box(&limit)).unwrap()));
    let k50 = build_ktilde(50).unwrap();
    c.bench_function("eigenvalue/ktilde_50", |b| b.iter(|| second_largest_eigenvalue(black_box(&k50)).unwrap()));
}

fn t_tail(c: &mut Criterion) {
    let mut rng = SeedSpec::new(2).stream(0);
    let path = ShufflePath::random(&mut rng, 50, 392);
    c.bench_function("t_tail/scan_one_path_n50_k392", |b| {
        b.iter(|| {
            let mut s = GoodTimeScanner::new(50, DEFAULT_PAIR, CouplingVariant::AMENDED);
            for &m in path.moves() {
                s.push(m);
            }
            black_box(s.last_good_time())
        })
    });
    let mut g = c.benchmark_group("t_tail");
    g.sample_size(10);
    g.bench_function("estimate_n50_k392_10k", |b| {
        b.iter(|| estimate_t_tail(50, 392, 10_000, 0, CouplingVariant::AMENDED).unwrap())
    });
    g.finish();
}

criterion_group!(benches, apply_shuffle, kernel_step, eigenvalue, t_tail);
criterion_main!(benches);
