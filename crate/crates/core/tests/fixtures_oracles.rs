//! Frozen expectations for the bundled example networks.

use delaynet::feasibility::{check_classical, exists_transform_code, SearchOptions, Verdict};
use delaynet::fixtures;
use delaynet::galois::Embedding;
use delaynet::netmodel::{symbolic_transfer, transfer_matrices, LecAssignment};
use delaynet::transform::{cp_pipeline, hat_transfer, DftCtx};
use rand::SeedableRng;

fn ones(name: &str) -> (delaynet::netmodel::NetworkSpec, LecAssignment) {
    let net = fixtures::network(name).unwrap();
    let lecs = LecAssignment::uniform(&net.field, &net.symbols(), net.field.one());
    (net, lecs)
}

#[test]
fn fig2_determinants_and_f() {
    let (net, lecs) = ones("fig2");
    let rep = check_classical(&net, &lecs).unwrap();
    let dets: Vec<String> = rep.determinants.iter().map(|d| d.format(&net.field)).collect();
    assert_eq!(dets, ["D^5", "D^5", "D^6", "D^5", "D^4"]);
    assert_eq!(rep.f_poly.format(&net.field), "D^25");
    assert_eq!(rep.verdict, Verdict::Solvable);
    assert_eq!((rep.d_min, rep.d_max), (1, 4));
    let ts = transfer_matrices(&net, &lecs).unwrap();
    let u1: Vec<Vec<String>> = ts.sink_matrix(0).format(&net.field);
    assert_eq!(u1, vec![vec!["D", "0", "0"], vec!["0", "D", "0"], vec!["D^3", "D^3", "D^3"]]);
}

#[test]
fn fig2_search_finds_gf8_block_7() {
    let (net, lecs) = ones("fig2");
    let rep = exists_transform_code(&net, &lecs, &SearchOptions::default()).unwrap();
    assert_eq!(rep.verdict, Verdict::SolvableTransform);
    assert_eq!(rep.n, Some(7));
    assert_eq!(rep.eval_field.unwrap().degree(), 3);
}

#[test]
fn fig2_pipeline_recovers_inputs() {
    let (net, lecs) = ones("fig2");
    let big = net.field.extension(3).unwrap();
    let emb = Embedding::new(&net.field, &big).unwrap();
    let net8 = net.map_field(&emb);
    let lecs8 = lecs.map_field(&emb);
    let ts = transfer_matrices(&net8, &lecs8).unwrap();
    let dft = DftCtx::new(&big, 7, None).unwrap();
    let hat = hat_transfer(&ts, &dft).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let x: Vec<Vec<_>> = (0..3).map(|_| (0..7).map(|_| big.random(&mut rng)).collect()).collect();
    let run = cp_pipeline(&net8, &lecs8, &ts, &dft, &x).unwrap();
    assert_eq!(run.yhat, hat.apply(&big, &x));
}

#[test]
fn ex2_transfer_labels() {
    let net = fixtures::network("ex2").unwrap();
    let sym = symbolic_transfer(&net).unwrap();
    let f = &net.field;
    assert_eq!(sym.grid[0][1].get(0, 0).format(f), "D^3*u + D^5*a*t");
    assert_eq!(sym.grid[0][0].get(0, 0).format(f), "D^5*a*p");
    assert_eq!(sym.d_min, 3);
}
