use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use delaynet::feasibility::{exists_transform_code, SearchOptions};
use delaynet::fixtures;
use delaynet::netmodel::LecAssignment;
use delaynet::par::Exec;
use delaynet::pbna::{scheme1_check, PbnaInstance};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

// The Example-3 network is structurally infeasible, so every seeded trial
// runs to completion and the whole trial budget is spent.
fn scheme1_trials(c: &mut Criterion) {
    let inst = PbnaInstance::new(fixtures::network("ex3").unwrap()).unwrap();
    let mut group = c.benchmark_group("scheme1_infeasible_trials");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::new(name, 32), &exec, |b, &exec| {
            b.iter(|| scheme1_check(&inst, 2, 32, 7, None, exec).unwrap())
        });
    }
    group.finish();
}

fn transform_search(c: &mut Criterion) {
    let net = fixtures::network("fig2").unwrap();
    let lecs = LecAssignment::uniform(&net.field, &net.symbols(), net.field.one());
    let mut group = c.benchmark_group("transform_search");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = SearchOptions { exec, ..SearchOptions::default() };
        group.bench_function(name, |b| b.iter(|| exists_transform_code(&net, &lecs, &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, scheme1_trials, transform_search);
criterion_main!(benches);
