//! Random instances shared by the property suites.

#![allow(dead_code)]

pub mod properties;

use delaynet::galois::Field;
use delaynet::netmodel::{Connection, Edge, Input, NetworkSpec, Sink, Source, Tap};
use delaynet::symbolic::{LecSymbol, MultiPoly};
use proptest::test_runner::{Config, RngSeed};
use rand::Rng;

pub fn config(seed: u64) -> Config {
    Config {
        cases: 256,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..Config::default()
    }
}

/// A random DAG on at most `max_nodes` nodes. Edges only run from lower to
/// higher node index. Every edge gain and every sink tap gets its own
/// symbol. Delays are drawn from 1..=max_delay; taps have no delay.
pub fn random_dag<R: Rng>(field: &Field, max_nodes: usize, max_delay: u32, rng: &mut R) -> NetworkSpec {
    let n_nodes = rng.gen_range(4..=max_nodes);
    let nodes: Vec<String> = (0..n_nodes).map(|k| format!("v{k}")).collect();
    let n_src = rng.gen_range(1..=2);
    let n_sink = rng.gen_range(1..=2);
    let sources: Vec<Source> = (0..n_src)
        .map(|k| Source {
            node: k,
            processes: rng.gen_range(1..=2),
        })
        .collect();
    let mut edges: Vec<Edge> = Vec::new();
    let mut sym = 0usize;
    let fresh = |sym: &mut usize| {
        *sym += 1;
        MultiPoly::var(field, LecSymbol::new(format!("g{sym}")))
    };
    for head in 1..n_nodes {
        for tail in 0..head {
            if rng.gen_bool(0.45) || tail + 1 == head {
                let mut gains = Vec::new();
                if let Some(s) = sources.iter().find(|s| s.node == tail) {
                    for l in 0..s.processes {
                        gains.push((Input::Process(l), fresh(&mut sym)));
                    }
                }
                for (k, e) in edges.iter().enumerate() {
                    if e.head == tail {
                        gains.push((Input::Edge(k), fresh(&mut sym)));
                    }
                }
                edges.push(Edge {
                    id: format!("e{}", edges.len()),
                    tail,
                    head,
                    delay: rng.gen_range(1..=max_delay),
                    gains,
                });
            }
        }
    }
    let sinks: Vec<Sink> = (0..n_sink)
        .map(|k| {
            let node = n_nodes - 1 - k;
            let incoming: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].head == node).collect();
            let outputs = rng.gen_range(1..=2);
            let taps = (0..outputs)
                .map(|_| {
                    incoming
                        .iter()
                        .map(|&e| Tap {
                            edge: e,
                            coef: fresh(&mut sym),
                            delay: 0,
                        })
                        .collect()
                })
                .collect();
            Sink { node, outputs, taps }
        })
        .collect();
    let connections = vec![Connection {
        source: 0,
        sink: 0,
        process: 0,
    }];
    NetworkSpec::assemble(field.clone(), nodes, edges, sources, sinks, connections).expect("valid DAG")
}
