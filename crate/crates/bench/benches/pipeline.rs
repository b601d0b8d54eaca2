//! Benchmarks for the hot paths: election resolution, gap computation,
//! statistical tests, synthetic generation, and full stub simulation.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use leaderlab_core::agent::{run_agent_cohort, ProviderConfig, StubProvider};
use leaderlab_core::analytics::{binomial_test_exact, welch_t_test, Alternative};
use leaderlab_core::election::{
    leader_gap, resolve_election, select_candidates, Ballot, ParticipantId, SelfNomination,
    TaskScore,
};
use leaderlab_core::synth::{canonical_task_key, generate_cohort, SynthConfig};
use leaderlab_core::Treatment;

fn pid(s: &str) -> ParticipantId {
    ParticipantId::new(s).unwrap()
}

fn bench_election(c: &mut Criterion) {
    let nominations: Vec<SelfNomination> = [("a", 8.0), ("b", 6.5), ("c", 6.5), ("d", 2.0)]
        .iter()
        .map(|(id, w)| SelfNomination::new(pid(id), *w).unwrap())
        .collect();
    c.bench_function("select_candidates_with_tie", |b| {
        b.iter(|| select_candidates(black_box(&nominations), 7).unwrap())
    });

    let candidates = select_candidates(&nominations, 7).unwrap();
    let ballots: Vec<Ballot> = ["a", "b", "c", "d"]
        .iter()
        .enumerate()
        .map(|(i, v)| Ballot {
            voter: pid(v),
            ranking: if i % 2 == 0 {
                candidates.members().to_vec()
            } else {
                candidates.members().iter().rev().cloned().collect()
            },
        })
        .collect();
    c.bench_function("resolve_election_split", |b| {
        b.iter(|| resolve_election(black_box(&ballots), &candidates, &nominations, 7).unwrap())
    });

    let scores: Vec<TaskScore> = [("a", 4u32), ("b", 6), ("c", 3), ("d", 1)]
        .iter()
        .map(|(id, s)| TaskScore::new(pid(id), *s, 6).unwrap())
        .collect();
    let elected = candidates.members()[0].clone();
    c.bench_function("leader_gap", |b| {
        b.iter(|| leader_gap("g", black_box(&scores), &candidates, &elected, 6).unwrap())
    });
}

fn bench_statistics(c: &mut Criterion) {
    c.bench_function("binomial_exact_57_of_88", |b| {
        b.iter(|| binomial_test_exact(black_box(57), 88, 0.5, Alternative::TwoSided).unwrap())
    });

    let male: Vec<f64> = (0..176).map(|i| 6.67 + f64::from(i % 7) * 0.3).collect();
    let non_male: Vec<f64> = (0..176).map(|i| 5.47 + f64::from(i % 9) * 0.25).collect();
    c.bench_function("welch_t_176_per_arm", |b| {
        b.iter(|| welch_t_test(black_box(&male), &non_male, Alternative::TwoSided).unwrap())
    });
}

fn bench_synth_and_sim(c: &mut Criterion) {
    let config = SynthConfig {
        n_groups: 100,
        male_nomination_shift: 1.2,
        seed: 5,
        ..SynthConfig::default()
    };
    c.bench_function("generate_cohort_100_groups", |b| {
        b.iter(|| generate_cohort(black_box(&config)).unwrap())
    });

    let human = generate_cohort(&SynthConfig {
        n_groups: 10,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    let provider = StubProvider::new(9);
    let key = canonical_task_key(6);
    let provider_config = ProviderConfig::default();
    c.bench_function("stub_simulation_10_groups", |b| {
        b.iter_batched(
            || human.clone(),
            |cohort| {
                run_agent_cohort(
                    black_box(&cohort),
                    Treatment::NoDemographics,
                    &provider,
                    &provider_config,
                    &key,
                    9,
                )
                .unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_election, bench_statistics, bench_synth_and_sim);
criterion_main!(benches);
