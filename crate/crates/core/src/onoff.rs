//! Parity on-off schedules.
//!
//! Each sink may cancel one interfering source by delaying an incoming link
//! and combining it with a declared coefficient. What remains reaches the
//! sink with path delays whose parities decide the schedule: source i sends
//! only at times t ≡ φ_i (mod 2), and at every sink the desired symbols must
//! land in the opposite parity from every surviving interferer. That is a
//! system φ_i ⊕ φ_k = d_ij ⊕ d_kj ⊕ 1 over GF(2), i.e. a two-colouring
//! problem whose obstruction is an odd cycle.
//!
//! Slot labels count from 1, so time index 0 is an "odd" slot.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{Embedding, Fe, Field};
use crate::netmodel::{simulate, symbolic_transfer, GapPolicy, LecAssignment, LecMode, NetworkSpec, Streams, Tap};
use crate::symbolic::{trial_rng, LecSymbol, MultiPoly};

/// A declared delay-and-combine rule: at `sink`, the symbol on `edge` is
/// delayed by `delay` slots and weighted by `coef`, which should null the
/// contribution of source `cancels`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancellationRule {
    pub sink: String,
    pub edge: String,
    pub coef: String,
    pub delay: u32,
    pub cancels: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CancellationFile {
    cancellations: Vec<CancellationRule>,
}

pub fn parse_cancellations(text: &str) -> Result<Vec<CancellationRule>> {
    let file: CancellationFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    Ok(file.cancellations)
}

/// Rewrites the sink taps according to `rules`. A rule replaces the tap on
/// its edge in every output row that reads that edge.
pub fn apply_cancellations(net: &NetworkSpec, rules: &[CancellationRule]) -> Result<NetworkSpec> {
    let mut out = net.clone();
    for r in rules {
        let j = net
            .sink_named(&r.sink)
            .ok_or_else(|| Error::Cancellation(format!("unknown sink {:?}", r.sink)))?;
        net.source_named(&r.cancels)
            .ok_or_else(|| Error::Cancellation(format!("unknown source {:?}", r.cancels)))?;
        let e = net
            .edges
            .iter()
            .position(|e| e.id == r.edge)
            .ok_or_else(|| Error::Cancellation(format!("unknown edge {:?}", r.edge)))?;
        if net.edges[e].head != net.sinks[j].node {
            return Err(Error::Cancellation(format!(
                "edge {:?} does not enter sink {:?}",
                r.edge, r.sink
            )));
        }
        let coef = MultiPoly::parse(&net.field, &r.coef)?;
        if coef.symbols().iter().any(LecSymbol::is_delay) {
            return Err(Error::Cancellation(format!("coefficient {:?} uses D", r.coef)));
        }
        let tap = Tap {
            edge: e,
            coef,
            delay: r.delay,
        };
        let sink = &mut out.sinks[j];
        let mut touched = false;
        for row in &mut sink.taps {
            for t in row.iter_mut().filter(|t| t.edge == e) {
                *t = tap.clone();
                touched = true;
            }
        }
        if !touched {
            if sink.outputs != 1 {
                return Err(Error::Cancellation(format!(
                    "sink {:?} has several outputs and none reads {:?}",
                    r.sink, r.edge
                )));
            }
            sink.taps[0].push(tap);
        }
    }
    Ok(out)
}

/// One source's surviving contribution at a sink.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Arrival {
    pub source: usize,
    /// Distinct path delays of the residual transfer.
    pub delays: Vec<u32>,
    /// Distinct delay parities (0 or 1).
    pub parities: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArrivalTable {
    pub sources: usize,
    /// `desired[j]` is the source sink j decodes.
    pub desired: Vec<usize>,
    /// `sinks[j]` lists every source whose residual at sink j is nonzero.
    pub sinks: Vec<Vec<Arrival>>,
}

fn single_demand(net: &NetworkSpec, j: usize) -> Result<usize> {
    match net.demands(j).as_slice() {
        [(i, 0)] if net.sources[*i].processes == 1 => Ok(*i),
        _ => Err(Error::MalformedDemands(format!(
            "sink {} must demand exactly one single-process source",
            net.sink_name(j)
        ))),
    }
}

/// Residual arrivals after applying `rules`. Each rule is checked twice:
/// the symbolic residual of the cancelled source must vanish identically,
/// and a simulated impulse with random nonzero coefficients must leave no
/// trace at the sink.
pub fn build_arrival_table(net: &NetworkSpec, rules: &[CancellationRule], seed: u64) -> Result<ArrivalTable> {
    for (j, s) in net.sinks.iter().enumerate() {
        if s.outputs != 1 {
            return Err(Error::Network(format!("sink {} must have one output", net.sink_name(j))));
        }
    }
    let desired: Vec<usize> = (0..net.sinks.len())
        .map(|j| single_demand(net, j))
        .collect::<Result<_>>()?;
    let cancelled = apply_cancellations(net, rules)?;
    let sym = symbolic_transfer(&cancelled)?;
    let d = LecSymbol::delay();
    let mut sinks = Vec::with_capacity(net.sinks.len());
    for j in 0..net.sinks.len() {
        let mut row = Vec::new();
        for i in 0..net.sources.len() {
            let mut delays = BTreeSet::new();
            for l in 0..net.sources[i].processes {
                for (mono, _) in sym.grid[i][j].get(0, l).terms() {
                    delays.insert(mono.exponent(&d));
                }
            }
            if delays.is_empty() {
                continue;
            }
            let parities: BTreeSet<u8> = delays.iter().map(|x| (x % 2) as u8).collect();
            row.push(Arrival {
                source: i,
                delays: delays.into_iter().collect(),
                parities: parities.into_iter().collect(),
            });
        }
        sinks.push(row);
    }
    for r in rules {
        let j = net.sink_named(&r.sink).expect("validated");
        let i = net.source_named(&r.cancels).expect("validated");
        if let Some(a) = sinks[j].iter().find(|a| a.source == i) {
            return Err(Error::Cancellation(format!(
                "source {} still reaches sink {} with delays {:?}",
                r.cancels, r.sink, a.delays
            )));
        }
        let residual = impulse_energy(&cancelled, i, j, seed)?;
        if residual != 0 {
            return Err(Error::Cancellation(format!(
                "simulation leaves {residual} nonzero outputs from {} at {}",
                r.cancels, r.sink
            )));
        }
    }
    Ok(ArrivalTable {
        sources: net.sources.len(),
        desired,
        sinks,
    })
}

/// A random assignment with no zero values, over a field large enough that
/// accidental cancellations are unlikely.
fn generic_lecs(net: &NetworkSpec, seed: u64) -> Result<(NetworkSpec, LecAssignment)> {
    let base = net.field.clone();
    let mut deg = base.degree();
    while (base.characteristic() as f64).powi(deg as i32) < 1e4 {
        deg += base.degree();
    }
    let big = if deg == base.degree() { base.clone() } else { base.extension(deg)? };
    let emb = Embedding::new(&base, &big)?;
    let lifted = net.map_field(&emb);
    let mut rng = trial_rng(seed, 0);
    let mut lecs = LecAssignment::new(&big, LecMode::TimeInvariant);
    for s in lifted.symbols() {
        let v = loop {
            let v = big.random(&mut rng);
            if v.raw() != 0 {
                break v;
            }
        };
        lecs.values.insert(s, v);
    }
    Ok((lifted, lecs))
}

fn horizon(net: &NetworkSpec) -> usize {
    let edges: u32 = net.edges.iter().map(|e| e.delay).sum();
    let taps: u32 = net
        .sinks
        .iter()
        .flat_map(|s| s.taps.iter().flatten())
        .map(|t| t.delay)
        .max()
        .unwrap_or(0);
    (edges + taps) as usize + 2
}

/// Number of nonzero outputs at sink j after a unit impulse from source i.
fn impulse_energy(net: &NetworkSpec, i: usize, j: usize, seed: u64) -> Result<usize> {
    let (lifted, lecs) = generic_lecs(net, seed)?;
    let f = &lifted.field;
    let h = horizon(&lifted);
    let x = lifted
        .sources
        .iter()
        .enumerate()
        .map(|(k, s)| {
            (0..s.processes)
                .map(|_| {
                    let mut v = vec![f.zero(); h];
                    if k == i {
                        v[0] = f.one();
                    }
                    v
                })
                .collect()
        })
        .collect();
    let y = simulate(&lifted, &lecs, &Streams { start: 0, x }, h, GapPolicy::Error)?;
    Ok(y[j][0].iter().filter(|v| v.raw() != 0).count())
}

// ---------------------------------------------------------------------------
// GF(2) schedule

/// φ_a ⊕ φ_b = rhs, imposed at `sink`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub sink: usize,
    pub a: usize,
    pub b: usize,
    pub rhs: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OnOffCertificate {
    /// Constraints around a cycle whose right-hand sides sum to 1.
    OddCycle { cycle: Vec<Constraint> },
    /// A source reaches a sink in both parities, so no gating separates it.
    MixedParity { sink: usize, source: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum OnOffOutcome {
    /// `phi[i]` is the time parity source i transmits in.
    Schedule { phi: Vec<u8> },
    Infeasible(OnOffCertificate),
}

fn constraints(table: &ArrivalTable) -> Result<std::result::Result<Vec<Constraint>, OnOffCertificate>> {
    if table.desired.len() != table.sinks.len() {
        return Err(Error::Params("one desired source per sink".into()));
    }
    let mut out = Vec::new();
    for (j, row) in table.sinks.iter().enumerate() {
        let want = table.desired[j];
        if want >= table.sources || row.iter().any(|a| a.source >= table.sources) {
            return Err(Error::Params(format!("sink {j} names an unknown source")));
        }
        let Some(des) = row.iter().find(|a| a.source == want) else {
            return Err(Error::Params(format!("desired source {want} does not reach sink {j}")));
        };
        for a in row {
            if a.parities.len() != 1 {
                return Ok(Err(OnOffCertificate::MixedParity { sink: j, source: a.source }));
            }
        }
        for a in row.iter().filter(|a| a.source != want) {
            out.push(Constraint {
                sink: j,
                a: want,
                b: a.source,
                rhs: des.parities[0] ^ a.parities[0] ^ 1,
            });
        }
    }
    Ok(Ok(out))
}

/// Solves the parity system by breadth-first two-colouring. Components are
/// rooted at their lowest source with φ = 0. On conflict the returned cycle
/// is the offending constraint plus the two tree paths to their common
/// ancestor.
pub fn onoff_feasible(table: &ArrivalTable) -> Result<OnOffOutcome> {
    let cons = match constraints(table)? {
        Ok(c) => c,
        Err(cert) => return Ok(OnOffOutcome::Infeasible(cert)),
    };
    let n = table.sources;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (idx, c) in cons.iter().enumerate() {
        adj[c.a].push((c.b, idx));
        adj[c.b].push((c.a, idx));
    }
    let mut phi: Vec<Option<u8>> = vec![None; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![0usize; n];
    for root in 0..n {
        if phi[root].is_some() {
            continue;
        }
        phi[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, idx) in &adj[u] {
                let want = phi[u].expect("visited") ^ cons[idx].rhs;
                match phi[v] {
                    None => {
                        phi[v] = Some(want);
                        parent[v] = Some((u, idx));
                        depth[v] = depth[u] + 1;
                        queue.push_back(v);
                    }
                    Some(got) if got != want => {
                        let cycle = tree_cycle(&parent, &depth, u, v, idx)
                            .into_iter()
                            .map(|i| cons[i].clone())
                            .collect();
                        return Ok(OnOffOutcome::Infeasible(OnOffCertificate::OddCycle { cycle }));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(OnOffOutcome::Schedule {
        phi: phi.into_iter().map(|p| p.expect("all visited")).collect(),
    })
}

fn tree_cycle(
    parent: &[Option<(usize, usize)>],
    depth: &[usize],
    mut u: usize,
    mut v: usize,
    closing: usize,
) -> Vec<usize> {
    let mut left = Vec::new();
    let mut right = Vec::new();
    while depth[u] > depth[v] {
        let (p, e) = parent[u].expect("non-root");
        left.push(e);
        u = p;
    }
    while depth[v] > depth[u] {
        let (p, e) = parent[v].expect("non-root");
        right.push(e);
        v = p;
    }
    while u != v {
        let (pu, eu) = parent[u].expect("non-root");
        let (pv, ev) = parent[v].expect("non-root");
        left.push(eu);
        right.push(ev);
        u = pu;
        v = pv;
    }
    let mut cycle = vec![closing];
    cycle.extend(right);
    cycle.extend(left.into_iter().rev());
    cycle
}

/// Checks that `cycle` is closed and has odd weight.
pub fn is_odd_cycle(cycle: &[Constraint]) -> bool {
    if cycle.is_empty() {
        return false;
    }
    let mut degree = std::collections::BTreeMap::new();
    for c in cycle {
        *degree.entry(c.a).or_insert(0usize) += 1;
        *degree.entry(c.b).or_insert(0usize) += 1;
    }
    degree.values().all(|d| d % 2 == 0) && cycle.iter().fold(0, |acc, c| acc ^ c.rhs) == 1
}

/// "odd" or "even" under 1-based slot numbering.
pub fn slot_label(time_parity: u8) -> &'static str {
    if time_parity == 0 {
        "odd"
    } else {
        "even"
    }
}

// ---------------------------------------------------------------------------
// Replay

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplaySink {
    pub sink: usize,
    /// Time parities at which desired symbols were observed.
    pub desired_parities: Vec<u8>,
    pub interference_parities: Vec<u8>,
    pub disjoint: bool,
}

/// Gates every source by its parity, sends random nonzero symbols for
/// `generations` on-slots each, and records per sink which parities carry
/// desired and interfering energy. Sources are simulated one at a time so
/// that desired and interfering contributions are separated exactly.
pub fn replay_schedule(
    net: &NetworkSpec,
    rules: &[CancellationRule],
    phi: &[u8],
    generations: usize,
    seed: u64,
) -> Result<Vec<ReplaySink>> {
    let cancelled = apply_cancellations(net, rules)?;
    if phi.len() != net.sources.len() {
        return Err(Error::Params("one parity per source".into()));
    }
    let (lifted, lecs) = generic_lecs(&cancelled, seed)?;
    let f = lifted.field.clone();
    let h = 2 * generations + horizon(&lifted);
    let mut rng = trial_rng(seed, 1);
    let per_source: Vec<Vec<Vec<Fe>>> = (0..lifted.sources.len())
        .map(|i| {
            let x = (0..lifted.sources.len())
                .map(|k| {
                    (0..lifted.sources[k].processes)
                        .map(|_| {
                            (0..h)
                                .map(|t| {
                                    let on = k == i && t < 2 * generations && (t % 2) as u8 == phi[i];
                                    if on {
                                        nonzero(&f, &mut rng)
                                    } else {
                                        f.zero()
                                    }
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let y = simulate(&lifted, &lecs, &Streams { start: 0, x }, h, GapPolicy::Error)?;
            Ok(y.into_iter().map(|mut rows| rows.swap_remove(0)).collect())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for j in 0..lifted.sinks.len() {
        let want = single_demand(&lifted, j)?;
        let parities = |i: usize| -> BTreeSet<u8> {
            per_source[i][j]
                .iter()
                .enumerate()
                .filter(|(_, v)| v.raw() != 0)
                .map(|(t, _)| (t % 2) as u8)
                .collect()
        };
        let desired = parities(want);
        let interference: BTreeSet<u8> = (0..lifted.sources.len())
            .filter(|&i| i != want)
            .flat_map(parities)
            .collect();
        out.push(ReplaySink {
            sink: j,
            disjoint: !desired.is_empty() && desired.is_disjoint(&interference),
            desired_parities: desired.into_iter().collect(),
            interference_parities: interference.into_iter().collect(),
        });
    }
    Ok(out)
}

fn nonzero<R: Rng>(f: &Field, rng: &mut R) -> Fe {
    loop {
        let v = f.random(rng);
        if v.raw() != 0 {
            return v;
        }
    }
}

// ---------------------------------------------------------------------------
// Report

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleEntry {
    pub source: String,
    pub slots: &'static str,
    pub time_parity: u8,
}

#[derive(Clone, Debug, Serialize)]
pub struct OnOffReport {
    pub feasible: bool,
    pub table: ArrivalTable,
    pub schedule: Option<Vec<ScheduleEntry>>,
    pub certificate: Option<OnOffCertificate>,
    pub replay: Option<Vec<ReplaySink>>,
}

impl OnOffReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// Table, schedule or certificate, and a simulator replay of the schedule.
pub fn onoff_check(net: &NetworkSpec, rules: &[CancellationRule], seed: u64) -> Result<OnOffReport> {
    let table = build_arrival_table(net, rules, seed)?;
    Ok(match onoff_feasible(&table)? {
        OnOffOutcome::Schedule { phi } => {
            let replay = replay_schedule(net, rules, &phi, 4, seed)?;
            OnOffReport {
                feasible: true,
                schedule: Some(
                    phi.iter()
                        .enumerate()
                        .map(|(i, &p)| ScheduleEntry {
                            source: net.source_name(i).to_string(),
                            slots: slot_label(p),
                            time_parity: p,
                        })
                        .collect(),
                ),
                table,
                certificate: None,
                replay: Some(replay),
            }
        }
        OnOffOutcome::Infeasible(cert) => OnOffReport {
            feasible: false,
            table,
            schedule: None,
            certificate: Some(cert),
            replay: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ex(name: &str, cancel: &str) -> (NetworkSpec, Vec<CancellationRule>) {
        (fixtures::network(name).unwrap(), parse_cancellations(cancel).unwrap())
    }

    #[test]
    fn example5_schedule() {
        let (net, rules) = ex("onoff5", fixtures::ONOFF5_CANCEL);
        let r = onoff_check(&net, &rules, 3).unwrap();
        let labels: Vec<&str> = r.schedule.unwrap().iter().map(|e| e.slots).collect();
        assert_eq!(labels, ["odd", "even", "even"]);
        assert!(r.replay.unwrap().iter().all(|s| s.disjoint));
    }

    #[test]
    fn example5_without_rules_sees_every_source() {
        let (net, _) = ex("onoff5", fixtures::ONOFF5_CANCEL);
        let t = build_arrival_table(&net, &[], 1).unwrap();
        assert!(t.sinks.iter().all(|row| row.len() == 3));
    }

    #[test]
    fn example6_odd_cycle() {
        let (net, rules) = ex("onoff6", fixtures::ONOFF6_CANCEL);
        let r = onoff_check(&net, &rules, 3).unwrap();
        assert!(!r.feasible);
        match r.certificate.unwrap() {
            OnOffCertificate::OddCycle { cycle } => {
                assert!(is_odd_cycle(&cycle));
                assert_eq!(cycle.len(), 3);
            }
            other => panic!("unexpected certificate {other:?}"),
        }
    }

    #[test]
    fn wrong_coefficient_is_rejected() {
        let (net, mut rules) = ex("onoff5", fixtures::ONOFF5_CANCEL);
        rules[0].coef = "a3".into();
        rules[0].delay = 1;
        assert!(matches!(build_arrival_table(&net, &rules, 1), Err(Error::Cancellation(_))));
    }

    #[test]
    fn single_source_either_parity() {
        let table = ArrivalTable {
            sources: 1,
            desired: vec![0],
            sinks: vec![vec![Arrival {
                source: 0,
                delays: vec![3],
                parities: vec![1],
            }]],
        };
        assert_eq!(onoff_feasible(&table).unwrap(), OnOffOutcome::Schedule { phi: vec![0] });
    }

    #[test]
    fn missing_desired_source_is_malformed() {
        let table = ArrivalTable {
            sources: 2,
            desired: vec![0],
            sinks: vec![vec![Arrival {
                source: 1,
                delays: vec![2],
                parities: vec![0],
            }]],
        };
        assert!(onoff_feasible(&table).is_err());
    }
}
