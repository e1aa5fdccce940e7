use criterion::{criterion_group, criterion_main, Criterion};
use delaypo_bench::fixture;
use delaypo_core::dapo::known::{self, DapoKnownConfig};
use delaypo_core::dapo::linear::{run_linear, FeaturizedMdp, LinearConfig, LinearGammaPreset};
use delaypo_core::dapo::unknown::{run_unknown, DapoUnknownConfig};
use delaypo_core::rng::{stream, streams};
use delaypo_core::Shape;

fn learners(c: &mut Criterion) {
    let shape = Shape::new(5, 3, 4).unwrap();
    let k = 500;
    let f = fixture(shape, k, 20, 1);
    let mut group = c.benchmark_group("run_500_episodes");
    group.sample_size(10);

    let known_config = DapoKnownConfig::tuned(&f.mdp, k, f.schedule.total());
    group.bench_function("dapo_known", |b| {
        b.iter(|| known::run(&f.mdp, &f.costs, &f.schedule, &known_config, &mut stream(1, streams::LEARNER)).unwrap())
    });

    let unknown_config = DapoUnknownConfig::tuned(&f.mdp, k, f.schedule.total(), 0.1);
    group.bench_function("dapo_unknown", |b| {
        b.iter(|| run_unknown(&f.mdp, &f.costs, &f.schedule, &unknown_config, &mut stream(1, streams::LEARNER)).unwrap())
    });
    group.finish();

    let small = Shape::new(3, 2, 3).unwrap();
    let k = 40;
    let f = fixture(small, k, 4, 2);
    let env = FeaturizedMdp::one_hot(f.mdp.clone());
    let linear_config = LinearConfig {
        enforce_hedge_precondition: false,
        ..LinearConfig::tuned(3, 6, &f.schedule, 0.1, LinearGammaPreset::Statement).with_resampling(200, 40)
    };
    let mut group = c.benchmark_group("run_40_episodes");
    group.sample_size(10);
    group.bench_function("dapo_linear", |b| {
        b.iter(|| run_linear(&env, &f.costs, &f.schedule, &linear_config, &mut stream(2, streams::LEARNER)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, learners);
criterion_main!(benches);
