use criterion::{black_box, criterion_group, criterion_main, Criterion};
use delaypo_bench::fixture;
use delaypo_core::dapo::linear::{geometric_resampling, FeaturizedMdp};
use delaypo_core::dapo::unknown::{box_simplex_extremize, occupancy_bounds, ConfidenceSet, Counters, Sense};
use delaypo_core::env::{evaluate, occupancy, sample_episode};
use delaypo_core::hedge::HedgeState;
use delaypo_core::rng::{stream, streams};
use delaypo_core::Shape;

fn kernels(c: &mut Criterion) {
    let shape = Shape::new(10, 4, 6).unwrap();
    let f = fixture(shape, 1, 0, 3);

    c.bench_function("evaluate", |b| b.iter(|| evaluate(&f.mdp, &f.policy, &f.costs[0]).unwrap()));
    c.bench_function("occupancy", |b| b.iter(|| occupancy(&f.mdp, &f.policy).unwrap()));

    let mut counters = Counters::new(shape);
    let mut rng = stream(3, streams::SIMULATOR);
    for _ in 0..200 {
        counters.record(&sample_episode(&f.mdp, &f.policy, &f.costs[0], &mut rng));
    }
    let confidence = ConfidenceSet::from_counters(&counters, 5.0);
    c.bench_function("occupancy_bounds", |b| b.iter(|| occupancy_bounds(&confidence, &f.policy, 0).unwrap()));

    let p = vec![0.1; 10];
    let radius = vec![0.05; 10];
    let v: Vec<f64> = (0..10).map(|i| (i * 7 % 10) as f64).collect();
    c.bench_function("box_simplex_extremize", |b| {
        b.iter(|| box_simplex_extremize(black_box(&p), &radius, &v, Sense::Max).unwrap())
    });

    let losses = vec![vec![0.3; 16]; 8];
    c.bench_function("hedge_update", |b| {
        b.iter_batched(
            || HedgeState::new(16, 0.1).unwrap(),
            |mut state| state.exp_update(&losses).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });

    let small = Shape::new(4, 2, 3).unwrap();
    let env = FeaturizedMdp::random_low_rank(small, 3, 0, &mut stream(4, streams::ENVIRONMENT)).unwrap();
    let policy = delaypo_core::Policy::uniform(small);
    let mut group = c.benchmark_group("resampling");
    group.sample_size(10);
    group.bench_function("geometric_resampling_m1000_n50", |b| {
        b.iter(|| geometric_resampling(&env, &policy, 1000, 50, 0.1, &mut stream(5, streams::SIMULATOR)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
