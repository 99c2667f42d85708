use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dpdp_core::dispatcher::{
    cheapest_insertion, classify_and_order, decide, neighborhood_best, reconstruct, DispatcherConfig, EpochContext,
    Operator, WorkingSolution,
};
use dpdp_core::io::GeneratorSpec;
use dpdp_core::model::Instance;
use dpdp_core::par::ExecMode;
use dpdp_core::sdp::{transition, State};
use std::hint::black_box;

/// The busiest decision state within the first epochs of a group-3 episode.
fn busy_state() -> (Instance, State) {
    let inst = GeneratorSpec::group(3, 1).unwrap().generate().unwrap();
    let config = DispatcherConfig {
        vns_budget_iterations: Some(10),
        ..Default::default()
    };
    let mut state = State::initial(&inst);
    let mut best = state.clone();
    let size = |s: &State| s.vehicles.iter().map(|v| v.plan.len()).sum::<usize>() + s.unprocessed.len();
    for _ in 0..40 {
        let (action, _) = decide(&inst, &state, &config).unwrap();
        state = transition(&inst, &state, &action).unwrap().next;
        if size(&state) > size(&best) {
            best = state.clone();
        }
    }
    (inst, best)
}

fn bench(c: &mut Criterion) {
    let (inst, state) = busy_state();
    let modes = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];
    let ctx = EpochContext::new(&inst, &state, inst.params.multipliers, ExecMode::Sequential);
    let routes = reconstruct(&state);
    let pending = classify_and_order(&inst, &state, &routes, inst.params.urgency_threshold);
    let solution: WorkingSolution = ctx.solution(routes.clone()).unwrap();
    // insert a pending order, or take a planned one out and put it back
    let (order, before) = match pending.urgent.first().or(pending.non_urgent.first()) {
        Some(&o) => (o, solution.clone()),
        None => {
            let (v, o) = routes
                .iter()
                .enumerate()
                .find_map(|(v, r)| r.pickups().next().map(|o| (v, o)))
                .expect("the busy state has planned pickups");
            let mut rest = routes.clone();
            rest[v] = rest[v].remove_order(o);
            (o, ctx.solution(rest).unwrap())
        }
    };

    let mut group = c.benchmark_group("neighborhood_best");
    group.sample_size(20);
    for op in Operator::ALL {
        for (name, exec) in modes {
            let ctx = EpochContext { exec, ..ctx.clone() };
            group.bench_with_input(BenchmarkId::new(op.name(), name), &solution, |b, s| {
                b.iter(|| black_box(neighborhood_best(&ctx, s, op)))
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("cheapest_insertion");
    group.sample_size(20);
    for (name, exec) in modes {
        let ctx = EpochContext { exec, ..ctx.clone() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &before, |b, s| {
            b.iter(|| black_box(cheapest_insertion(&ctx, s, order)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
