use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crowdroute::sim::run;
use crowdroute::{plan, PlanRequest, RewardSign};
use crowdroute_bench::{campus_fixture, scenario};
use std::hint::black_box;

fn plan_by_sources(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_sources_n5");
    let (net, sources, reward) = campus_fixture(6, 5);
    let x0 = net.idx("north_in").unwrap();
    for s in 1..=sources.len() {
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            b.iter(|| {
                plan(&PlanRequest {
                    network: &net,
                    initial: x0,
                    horizon: 5,
                    sources: &sources[..s],
                    target: None,
                    reward: &reward,
                    sign: RewardSign::Subtract,
                })
                .unwrap()
            })
        });
    }
    group.finish();
}

fn plan_by_horizon(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_horizon_s6");
    let (net, sources, reward) = campus_fixture(6, 5);
    let x0 = net.idx("north_in").unwrap();
    for n in 1..=5 {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                plan(&PlanRequest {
                    network: &net,
                    initial: x0,
                    horizon: n,
                    sources: &sources,
                    target: None,
                    reward: &reward,
                    sign: RewardSign::Subtract,
                })
                .unwrap()
            })
        });
    }
    group.finish();
}

fn desk_scenario(c: &mut Criterion) {
    let mut cfg = scenario("s1_desk.json");
    cfg.controlled_count = Some(30);
    c.bench_function("s1_desk_full_control", |b| b.iter(|| run(black_box(&cfg)).unwrap()));
}

criterion_group!(benches, plan_by_sources, plan_by_horizon, desk_scenario);
criterion_main!(benches);
