//! Acyclic delay networks: description, LEC assignments, transfer matrices,
//! and the register-level simulator that serves as ground truth.
//!
//! # Conventions
//!
//! * An edge coefficient is applied at the moment a node puts a symbol on the
//!   edge; the symbol arrives at the head `delay` steps later.
//! * A sink output at time t is Σ tap-coefficient(t) · (symbol that arrived on
//!   the tapped edge at time t − tap delay). Sinks add no delay of their own.
//! * Time-varying coefficients are indexed by that application time.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{Embedding, Fe, Field};
use crate::polymatrix::{self as pm, DelayPoly, Matrix, PolyMatrix, PolyRing};
use crate::symbolic::{LecSymbol, MultiPoly, PolyCtx};

/// What an edge combines: a process of the source hosted at its tail, or the
/// symbol arriving on an incoming edge.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Input {
    Process(usize),
    Edge(usize),
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub delay: u32,
    /// Combination coefficients, one per input that feeds this edge.
    pub gains: Vec<(Input, MultiPoly)>,
}

#[derive(Clone, Debug)]
pub struct Source {
    pub node: usize,
    pub processes: usize,
}

/// One term of a sink output: coefficient times a (possibly delayed) incoming symbol.
#[derive(Clone, Debug)]
pub struct Tap {
    pub edge: usize,
    pub coef: MultiPoly,
    pub delay: u32,
}

#[derive(Clone, Debug)]
pub struct Sink {
    pub node: usize,
    pub outputs: usize,
    pub taps: Vec<Vec<Tap>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Connection {
    pub source: usize,
    pub sink: usize,
    pub process: usize,
}

#[derive(Clone, Debug)]
pub struct NetworkSpec {
    pub field: Field,
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub sources: Vec<Source>,
    pub sinks: Vec<Sink>,
    pub connections: Vec<Connection>,
    /// Edge indices in an order where every edge follows its inputs.
    order: Vec<usize>,
}

// ---- JSON schema ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetFile {
    field: Option<String>,
    #[serde(default)]
    nodes: Vec<String>,
    edges: Vec<EdgeFile>,
    sources: Vec<SourceFile>,
    sinks: Vec<SinkFile>,
    #[serde(default)]
    connections: Vec<(String, String, usize)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeFile {
    id: Option<String>,
    tail: String,
    head: String,
    #[serde(default = "one_i64")]
    delay: i64,
    lec: Option<String>,
    coeffs: Option<BTreeMap<String, String>>,
}

fn one_i64() -> i64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceFile {
    node: String,
    #[serde(default = "one_usize")]
    processes: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SinkFile {
    node: String,
    #[serde(default = "one_usize")]
    outputs: usize,
    taps: Option<Vec<Vec<TapFile>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TapFile {
    edge: String,
    #[serde(default = "one_string")]
    coef: String,
    #[serde(default)]
    delay: u32,
}

fn one_string() -> String {
    "1".into()
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    }
}

/// Parses an edge or tap coefficient: a polynomial in LEC symbols.
fn parse_coef(field: &Field, s: &str) -> Result<MultiPoly> {
    let p = MultiPoly::parse(field, s)?;
    if p.symbols().iter().any(|x| x.is_delay()) {
        return Err(Error::Network(format!(
            "coefficient {s:?} uses the reserved symbol D"
        )));
    }
    Ok(p)
}

impl NetworkSpec {
    /// Parses the network JSON format. `field_override` replaces the file's field.
    pub fn from_json(text: &str, field_override: Option<&Field>) -> Result<Self> {
        let raw: NetFile = serde_json::from_str(text).map_err(json_error)?;
        let field = match (field_override, &raw.field) {
            (Some(f), _) => f.clone(),
            (None, Some(lit)) => Field::parse(lit)?,
            (None, None) => return Err(Error::Network("no field given".into())),
        };
        let mut nodes = raw.nodes.clone();
        let mut index: HashMap<String, usize> = HashMap::new();
        for (k, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), k).is_some() {
                return Err(Error::Network(format!("duplicate node {n:?}")));
            }
        }
        let mut node_id = |name: &str, nodes: &mut Vec<String>| -> usize {
            if let Some(&k) = index.get(name) {
                return k;
            }
            nodes.push(name.to_string());
            index.insert(name.to_string(), nodes.len() - 1);
            nodes.len() - 1
        };
        let mut edges = Vec::new();
        let mut edge_index: HashMap<String, usize> = HashMap::new();
        for (k, e) in raw.edges.iter().enumerate() {
            let id = e.id.clone().unwrap_or_else(|| format!("e{k}"));
            if edge_index.insert(id.clone(), k).is_some() {
                return Err(Error::Network(format!("duplicate edge id {id:?}")));
            }
            if e.delay < 1 {
                return Err(Error::Network(format!(
                    "edge {id:?} has nonpositive delay {}",
                    e.delay
                )));
            }
            let tail = node_id(&e.tail, &mut nodes);
            let head = node_id(&e.head, &mut nodes);
            edges.push(Edge {
                id,
                tail,
                head,
                delay: e.delay as u32,
                gains: Vec::new(),
            });
        }
        let mut sources = Vec::new();
        for s in &raw.sources {
            let node = *index
                .get(&s.node)
                .ok_or_else(|| Error::Network(format!("unknown source node {:?}", s.node)))?;
            if sources.iter().any(|x: &Source| x.node == node) {
                return Err(Error::Network(format!("node {:?} hosts two sources", s.node)));
            }
            sources.push(Source {
                node,
                processes: s.processes,
            });
        }
        // gains
        for (k, e) in raw.edges.iter().enumerate() {
            let tail = edges[k].tail;
            let mut inputs: Vec<(String, Input)> = Vec::new();
            if let Some(src) = sources.iter().find(|s| s.node == tail) {
                for l in 0..src.processes {
                    inputs.push((format!("x{l}"), Input::Process(l)));
                }
            }
            for (k2, e2) in edges.iter().enumerate() {
                if e2.head == tail {
                    inputs.push((e2.id.clone(), Input::Edge(k2)));
                }
            }
            let gains = match (&e.lec, &e.coeffs) {
                (Some(_), Some(_)) => {
                    return Err(Error::Network(format!(
                        "edge {:?} gives both lec and coeffs",
                        edges[k].id
                    )))
                }
                (Some(lec), None) => {
                    let c = parse_coef(&field, lec)?;
                    inputs.iter().map(|(_, i)| (*i, c.clone())).collect()
                }
                (None, Some(map)) => {
                    let mut g = Vec::new();
                    for (key, val) in map {
                        let input = inputs
                            .iter()
                            .find(|(name, _)| name == key)
                            .map(|(_, i)| *i)
                            .ok_or_else(|| {
                                Error::Network(format!(
                                    "edge {:?}: {key:?} is not an input of its tail",
                                    edges[k].id
                                ))
                            })?;
                        g.push((input, parse_coef(&field, val)?));
                    }
                    g
                }
                (None, None) => inputs
                    .iter()
                    .map(|(_, i)| (*i, MultiPoly::constant(field.one())))
                    .collect(),
            };
            edges[k].gains = gains;
        }
        let mut sinks = Vec::new();
        for s in &raw.sinks {
            let node = *index
                .get(&s.node)
                .ok_or_else(|| Error::Network(format!("unknown sink node {:?}", s.node)))?;
            let incoming: Vec<usize> = (0..edges.len()).filter(|&k| edges[k].head == node).collect();
            let taps = match &s.taps {
                Some(rows) => {
                    if rows.len() != s.outputs {
                        return Err(Error::Network(format!(
                            "sink {:?} declares {} outputs but {} tap rows",
                            s.node,
                            s.outputs,
                            rows.len()
                        )));
                    }
                    let mut out = Vec::new();
                    for row in rows {
                        let mut taps = Vec::new();
                        for t in row {
                            let edge = *edge_index
                                .get(&t.edge)
                                .ok_or_else(|| Error::Network(format!("unknown edge {:?}", t.edge)))?;
                            if edges[edge].head != node {
                                return Err(Error::Network(format!(
                                    "tap edge {:?} does not enter sink {:?}",
                                    t.edge, s.node
                                )));
                            }
                            taps.push(Tap {
                                edge,
                                coef: parse_coef(&field, &t.coef)?,
                                delay: t.delay,
                            });
                        }
                        out.push(taps);
                    }
                    out
                }
                None if s.outputs == incoming.len() => incoming
                    .iter()
                    .map(|&e| {
                        vec![Tap {
                            edge: e,
                            coef: MultiPoly::constant(field.one()),
                            delay: 0,
                        }]
                    })
                    .collect(),
                None if s.outputs == 1 => vec![incoming
                    .iter()
                    .map(|&e| Tap {
                        edge: e,
                        coef: MultiPoly::constant(field.one()),
                        delay: 0,
                    })
                    .collect()],
                None => {
                    return Err(Error::Network(format!(
                        "sink {:?}: {} outputs but {} incoming edges and no taps",
                        s.node,
                        s.outputs,
                        incoming.len()
                    )))
                }
            };
            sinks.push(Sink {
                node,
                outputs: s.outputs,
                taps,
            });
        }
        let mut connections = Vec::new();
        for (src, snk, l) in &raw.connections {
            let source = sources
                .iter()
                .position(|s| nodes[s.node] == *src)
                .ok_or_else(|| Error::Network(format!("connection names unknown source {src:?}")))?;
            let sink = sinks
                .iter()
                .position(|s| nodes[s.node] == *snk)
                .ok_or_else(|| Error::Network(format!("connection names unknown sink {snk:?}")))?;
            if *l >= sources[source].processes {
                return Err(Error::Network(format!(
                    "connection ({src}, {snk}, {l}) references a missing process"
                )));
            }
            connections.push(Connection {
                source,
                sink,
                process: *l,
            });
        }
        Self::assemble(field, nodes, edges, sources, sinks, connections)
    }

    /// Validates and indexes a network built in code.
    pub fn assemble(
        field: Field,
        nodes: Vec<String>,
        edges: Vec<Edge>,
        sources: Vec<Source>,
        sinks: Vec<Sink>,
        connections: Vec<Connection>,
    ) -> Result<Self> {
        if nodes.is_empty() || edges.is_empty() {
            return Err(Error::Network("network has no nodes or no edges".into()));
        }
        for e in &edges {
            if e.delay == 0 {
                return Err(Error::Network(format!("edge {:?} has zero delay", e.id)));
            }
            if e.tail >= nodes.len() || e.head >= nodes.len() {
                return Err(Error::Network(format!("edge {:?} references a missing node", e.id)));
            }
        }
        let order = topo_edges(nodes.len(), &edges)?;
        Ok(NetworkSpec {
            field,
            nodes,
            edges,
            sources,
            sinks,
            connections,
            order,
        })
    }

    pub fn edge_order(&self) -> &[usize] {
        &self.order
    }

    pub fn source_named(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| self.nodes[s.node] == name)
    }

    pub fn sink_named(&self, name: &str) -> Option<usize> {
        self.sinks.iter().position(|s| self.nodes[s.node] == name)
    }

    pub fn source_name(&self, i: usize) -> &str {
        &self.nodes[self.sources[i].node]
    }

    pub fn sink_name(&self, j: usize) -> &str {
        &self.nodes[self.sinks[j].node]
    }

    /// Every LEC symbol used by an edge gain or a sink tap.
    pub fn symbols(&self) -> BTreeSet<LecSymbol> {
        let mut s = BTreeSet::new();
        for e in &self.edges {
            for (_, g) in &e.gains {
                s.extend(g.symbols());
            }
        }
        for k in &self.sinks {
            for row in &k.taps {
                for t in row {
                    s.extend(t.coef.symbols());
                }
            }
        }
        s
    }

    pub fn is_unit_delay(&self) -> bool {
        self.edges.iter().all(|e| e.delay == 1)
    }

    /// Replaces each edge of delay k by a chain of k unit edges through k−1
    /// dummy nodes. The first link carries the original gains; the rest pass
    /// the symbol through with gain 1.
    pub fn normalize_delays(&self) -> NetworkSpec {
        if self.is_unit_delay() {
            return self.clone();
        }
        let mut nodes = self.nodes.clone();
        let mut edges: Vec<Edge> = Vec::new();
        // index of the last link of each original edge
        let mut last = vec![0usize; self.edges.len()];
        let mut first = vec![0usize; self.edges.len()];
        for (k, e) in self.edges.iter().enumerate() {
            let mut tail = e.tail;
            for step in 0..e.delay {
                let head = if step + 1 == e.delay {
                    e.head
                } else {
                    nodes.push(format!("{}~{}", e.id, step + 1));
                    nodes.len() - 1
                };
                let id = if e.delay == 1 {
                    e.id.clone()
                } else {
                    format!("{}~{}", e.id, step)
                };
                if step == 0 {
                    first[k] = edges.len();
                }
                let gains = if step == 0 {
                    Vec::new()
                } else {
                    vec![(
                        Input::Edge(edges.len() - 1),
                        MultiPoly::constant(self.field.one()),
                    )]
                };
                edges.push(Edge {
                    id,
                    tail,
                    head,
                    delay: 1,
                    gains,
                });
                tail = head;
            }
            last[k] = edges.len() - 1;
        }
        for (k, e) in self.edges.iter().enumerate() {
            edges[first[k]].gains = e
                .gains
                .iter()
                .map(|(i, g)| {
                    let i = match i {
                        Input::Edge(src) => Input::Edge(last[*src]),
                        p => *p,
                    };
                    (i, g.clone())
                })
                .collect();
        }
        let sinks = self
            .sinks
            .iter()
            .map(|s| Sink {
                node: s.node,
                outputs: s.outputs,
                taps: s
                    .taps
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|t| Tap {
                                edge: last[t.edge],
                                coef: t.coef.clone(),
                                delay: t.delay,
                            })
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Self::assemble(
            self.field.clone(),
            nodes,
            edges,
            self.sources.clone(),
            sinks,
            self.connections.clone(),
        )
        .expect("expansion of a valid network is valid")
    }

    /// The same network with every coefficient viewed in a larger field.
    pub fn map_field(&self, emb: &Embedding) -> NetworkSpec {
        let mut out = self.clone();
        out.field = emb.target().clone();
        for e in &mut out.edges {
            for (_, g) in &mut e.gains {
                *g = g.map_field(emb);
            }
        }
        for s in &mut out.sinks {
            for row in &mut s.taps {
                for t in row {
                    t.coef = t.coef.map_field(emb);
                }
            }
        }
        out
    }

    /// Multiplies every edge gain by the constant `c` (sink taps unchanged).
    pub fn scale_edge_gains(&self, c: Fe) -> NetworkSpec {
        let mut out = self.clone();
        for e in &mut out.edges {
            for (_, g) in &mut e.gains {
                *g = g.scale(&self.field, c);
            }
        }
        out
    }

    /// Maximum number of edge-disjoint paths from source `i` to sink `j`.
    pub fn min_cut(&self, i: usize, j: usize) -> usize {
        let s = self.sources[i].node;
        let t = self.sinks[j].node;
        let mut flow = vec![false; self.edges.len()];
        let mut total = 0;
        loop {
            // BFS over nodes in the residual graph, remembering the edge used
            let mut prev: Vec<Option<(usize, bool)>> = vec![None; self.nodes.len()];
            let mut seen = vec![false; self.nodes.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for (k, e) in self.edges.iter().enumerate() {
                    let (from, to, forward) = if !flow[k] {
                        (e.tail, e.head, true)
                    } else {
                        (e.head, e.tail, false)
                    };
                    if from == u && !seen[to] {
                        seen[to] = true;
                        prev[to] = Some((k, forward));
                        queue.push_back(to);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut v = t;
            while v != s {
                let (k, forward) = prev[v].expect("on path");
                flow[k] = forward;
                v = if forward {
                    self.edges[k].tail
                } else {
                    self.edges[k].head
                };
            }
            total += 1;
        }
    }

    /// Table of min-cuts indexed [source][sink].
    pub fn min_cut_table(&self) -> Vec<Vec<usize>> {
        (0..self.sources.len())
            .map(|i| (0..self.sinks.len()).map(|j| self.min_cut(i, j)).collect())
            .collect()
    }

    /// Shortest and longest source-to-sink-output path delays over all pairs
    /// that are connected at all, including tap delays.
    pub fn path_delay_range(&self) -> Option<(usize, usize)> {
        let mut lo = usize::MAX;
        let mut hi = 0usize;
        for i in 0..self.sources.len() {
            for l in 0..self.sources[i].processes {
                // (min, max) arrival delay at the head of each edge
                let mut span: Vec<Option<(usize, usize)>> = vec![None; self.edges.len()];
                for &k in &self.order {
                    let e = &self.edges[k];
                    let mut acc: Option<(usize, usize)> = None;
                    for (inp, _) in &e.gains {
                        let base = match inp {
                            Input::Process(p) if self.sources[i].node == e.tail && *p == l => Some((0, 0)),
                            Input::Edge(src) => span[*src],
                            _ => None,
                        };
                        if let Some((a, b)) = base {
                            acc = Some(match acc {
                                None => (a, b),
                                Some((x, y)) => (x.min(a), y.max(b)),
                            });
                        }
                    }
                    span[k] = acc.map(|(a, b)| (a + e.delay as usize, b + e.delay as usize));
                }
                for sink in &self.sinks {
                    for row in &sink.taps {
                        for t in row {
                            if let Some((a, b)) = span[t.edge] {
                                lo = lo.min(a + t.delay as usize);
                                hi = hi.max(b + t.delay as usize);
                            }
                        }
                    }
                }
            }
        }
        (lo != usize::MAX).then_some((lo, hi))
    }

    /// Demanded (source, process) columns of sink `j`, in connection order.
    pub fn demands(&self, j: usize) -> Vec<(usize, usize)> {
        self.connections
            .iter()
            .filter(|c| c.sink == j)
            .map(|c| (c.source, c.process))
            .collect()
    }
}

fn topo_edges(n: usize, edges: &[Edge]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    for e in edges {
        indeg[e.head] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut node_order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        node_order.push(v);
        for e in edges.iter().filter(|e| e.tail == v) {
            indeg[e.head] -= 1;
            if indeg[e.head] == 0 {
                queue.push_back(e.head);
            }
        }
    }
    if node_order.len() != n {
        return Err(Error::Network("graph contains a cycle".into()));
    }
    let mut rank = vec![0usize; n];
    for (r, &v) in node_order.iter().enumerate() {
        rank[v] = r;
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&k| (rank[edges[k].tail], k));
    Ok(order)
}

// ---------------------------------------------------------------------------
// LEC assignments

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum LecMode {
    TimeInvariant,
    /// Values indexed by application time.
    TimeVarying,
    /// Values indexed by block; block l (1-based) covers times
    /// origin + (l−1)·len ..< origin + l·len.
    Block { origin: i64, len: usize },
}

#[derive(Clone, Debug)]
pub struct LecAssignment {
    pub field: Field,
    pub values: BTreeMap<LecSymbol, Fe>,
    pub mode: LecMode,
}

impl LecAssignment {
    pub fn new(field: &Field, mode: LecMode) -> Self {
        LecAssignment {
            field: field.clone(),
            values: BTreeMap::new(),
            mode,
        }
    }

    /// Every listed symbol set to `v`.
    pub fn uniform(field: &Field, symbols: &BTreeSet<LecSymbol>, v: Fe) -> Self {
        let mut a = Self::new(field, LecMode::TimeInvariant);
        for s in symbols {
            a.values.insert(s.clone(), v);
        }
        a
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, symbols: &BTreeSet<LecSymbol>, rng: &mut R) -> Self {
        let mut a = Self::new(field, LecMode::TimeInvariant);
        for s in symbols {
            a.values.insert(s.clone(), field.random(rng));
        }
        a
    }

    /// Independent random values for every symbol at every time in `times`.
    pub fn random_time_varying<R: Rng + ?Sized>(
        field: &Field,
        symbols: &BTreeSet<LecSymbol>,
        times: std::ops::Range<i64>,
        rng: &mut R,
    ) -> Self {
        let mut a = Self::new(field, LecMode::TimeVarying);
        for t in times {
            for s in symbols {
                a.values.insert(s.at_time(t), field.random(rng));
            }
        }
        a
    }

    /// Independent random values per block 1..=blocks.
    pub fn random_block<R: Rng + ?Sized>(
        field: &Field,
        symbols: &BTreeSet<LecSymbol>,
        blocks: usize,
        origin: i64,
        len: usize,
        rng: &mut R,
    ) -> Self {
        let mut a = Self::new(field, LecMode::Block { origin, len });
        for l in 1..=blocks as i64 {
            for s in symbols {
                a.values.insert(s.in_block(l), field.random(rng));
            }
        }
        a
    }

    /// Parses {"a": "b^6", "a@-1": "...", "a#2": "..."}; the mode follows
    /// from the keys. Block assignments need [`LecAssignment::with_block_layout`].
    pub fn from_json(text: &str, field: &Field) -> Result<Self> {
        let raw: BTreeMap<String, String> = serde_json::from_str(text).map_err(json_error)?;
        let mut values = BTreeMap::new();
        let (mut timed, mut blocked) = (false, false);
        for (k, v) in raw {
            let s = LecSymbol::parse(&k)?;
            timed |= s.time.is_some();
            blocked |= s.block.is_some();
            values.insert(s, field.parse_element(&v)?);
        }
        let mode = match (timed, blocked) {
            (false, false) => LecMode::TimeInvariant,
            (true, false) => LecMode::TimeVarying,
            (false, true) => LecMode::Block { origin: 0, len: 1 },
            (true, true) => {
                return Err(Error::parse("LEC file mixes time and block indices"));
            }
        };
        Ok(LecAssignment {
            field: field.clone(),
            values,
            mode,
        })
    }

    pub fn with_block_layout(mut self, origin: i64, len: usize) -> Self {
        self.mode = LecMode::Block { origin, len };
        self
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.to_string(), serde_json::Value::String(self.field.format(*v))))
                .collect(),
        )
    }

    /// The time-invariant assignment in force during block `l` (1-based).
    pub fn block_slice(&self, l: i64) -> LecAssignment {
        let mut out = LecAssignment::new(&self.field, LecMode::TimeInvariant);
        for (k, v) in &self.values {
            if k.time.is_none() && k.block.is_none() {
                out.values.entry(k.clone()).or_insert(*v);
            } else if k.block == Some(l) {
                out.values.insert(LecSymbol::new(k.name.clone()), *v);
            }
        }
        out
    }

    pub fn map_field(&self, emb: &Embedding) -> LecAssignment {
        LecAssignment {
            field: emb.target().clone(),
            values: self.values.iter().map(|(k, v)| (k.clone(), emb.map(*v))).collect(),
            mode: self.mode.clone(),
        }
    }

    /// Block number (1-based) containing time `t`.
    pub fn block_of(&self, t: i64) -> Option<i64> {
        match self.mode {
            LecMode::Block { origin, len } => Some((t - origin).div_euclid(len as i64) + 1),
            _ => None,
        }
    }

    /// Value of an unindexed symbol at time `t`. Indexed entries take
    /// precedence; an unindexed entry acts as a constant over time.
    pub fn lookup(&self, s: &LecSymbol, t: i64) -> Option<Fe> {
        if s.time.is_some() || s.block.is_some() {
            return self.values.get(s).copied();
        }
        let indexed = match self.mode {
            LecMode::TimeInvariant => None,
            LecMode::TimeVarying => self.values.get(&s.at_time(t)).copied(),
            LecMode::Block { .. } => {
                let l = self.block_of(t).expect("block mode");
                self.values.get(&s.in_block(l)).copied()
            }
        };
        indexed.or_else(|| self.values.get(s).copied())
    }

    /// Evaluates a coefficient polynomial at time `t`.
    pub fn coef_at(&self, c: &MultiPoly, t: i64) -> Result<Fe> {
        if let Some(v) = c.as_constant(&self.field) {
            return Ok(v);
        }
        c.eval(&self.field, &|s| self.lookup(s, t)).map_err(|e| match e {
            Error::ScheduleGap(name) => Error::ScheduleGap(format!("{name} at time {t}")),
            other => other,
        })
    }
}

// ---------------------------------------------------------------------------
// Transfer matrices

/// Raw transfer grid `grid[i][j]` = M_ij(D) (ν_j × μ_i) plus its delay span.
#[derive(Clone, Debug)]
pub struct TransferSet {
    pub field: Field,
    pub grid: Vec<Vec<PolyMatrix>>,
    /// Smallest exponent of D anywhere in the grid.
    pub d_min: usize,
    /// Largest exponent minus `d_min`.
    pub d_max: usize,
}

impl TransferSet {
    /// Grid divided by D^d_min.
    pub fn normalized(&self) -> Vec<Vec<PolyMatrix>> {
        self.grid
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| m.map(|p| p.shift_down(self.d_min).expect("d_min is the global minimum")))
                    .collect()
            })
            .collect()
    }

    /// Sink j's full transfer matrix M_j(D) over all processes (ν_j × Σμ).
    pub fn sink_matrix(&self, j: usize) -> PolyMatrix {
        let mut m = self.grid[0][j].clone();
        for i in 1..self.grid.len() {
            m = m.hstack(&self.grid[i][j]).expect("same row count");
        }
        m
    }
}

/// Propagates per-process path sums through the DAG.
/// `coef` turns an edge/tap coefficient into a ring element and `dpow(k)` is D^k.
fn propagate<R: pm::Ring>(
    net: &NetworkSpec,
    ring: &R,
    coef: &dyn Fn(&MultiPoly) -> Result<R::Elem>,
    dpow: &dyn Fn(u32) -> R::Elem,
) -> Result<Vec<Vec<Matrix<R::Elem>>>> {
    let edge_gains: Vec<Vec<(Input, R::Elem)>> = net
        .edges
        .iter()
        .map(|e| {
            e.gains
                .iter()
                .map(|(i, g)| Ok((*i, coef(g)?)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let taps: Vec<Vec<Vec<(usize, R::Elem)>>> = net
        .sinks
        .iter()
        .map(|s| {
            s.taps
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|t| Ok((t.edge, ring.mul(&coef(&t.coef)?, &dpow(t.delay)))))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut grid = Vec::new();
    for (i, src) in net.sources.iter().enumerate() {
        let mut row: Vec<Matrix<R::Elem>> = net
            .sinks
            .iter()
            .map(|s| Matrix::zeros(ring, s.outputs, src.processes))
            .collect();
        for l in 0..src.processes {
            let mut val: Vec<R::Elem> = vec![ring.zero(); net.edges.len()];
            for &k in &net.order {
                let e = &net.edges[k];
                let mut acc = ring.zero();
                for (inp, g) in &edge_gains[k] {
                    let x = match inp {
                        Input::Process(p) if *p == l && net.sources[i].node == e.tail => ring.one(),
                        Input::Edge(src) => val[*src].clone(),
                        _ => continue,
                    };
                    if !ring.is_zero(&x) {
                        acc = ring.add(&acc, &ring.mul(g, &x));
                    }
                }
                val[k] = if ring.is_zero(&acc) {
                    acc
                } else {
                    ring.mul(&acc, &dpow(e.delay))
                };
            }
            for (j, sink_taps) in taps.iter().enumerate() {
                for (o, trow) in sink_taps.iter().enumerate() {
                    let mut acc = ring.zero();
                    for (edge, c) in trow {
                        acc = ring.add(&acc, &ring.mul(c, &val[*edge]));
                    }
                    row[j].set(o, l, acc);
                }
            }
        }
        let _ = i;
        grid.push(row);
    }
    Ok(grid)
}

/// Numeric transfer matrices for a time-invariant assignment.
pub fn transfer_matrices(net: &NetworkSpec, lecs: &LecAssignment) -> Result<TransferSet> {
    if lecs.mode != LecMode::TimeInvariant {
        return Err(Error::Params("transfer matrices need a time-invariant assignment".into()));
    }
    if lecs.field != net.field {
        return Err(Error::ContextMismatch);
    }
    let field = net.field.clone();
    let ring = PolyRing { field: field.clone() };
    let one = field.one();
    let grid = propagate(
        net,
        &ring,
        &|c| Ok(DelayPoly::constant(lecs.coef_at(c, 0)?)),
        &|k| DelayPoly::monomial(one, k as usize),
    )?;
    let lows = grid
        .iter()
        .flatten()
        .flat_map(|m| m.entries().filter_map(|p| p.low_degree()).collect::<Vec<_>>());
    let d_min = lows.min().unwrap_or(0);
    let d_hi = grid
        .iter()
        .flatten()
        .filter_map(|m| m.max_degree())
        .max()
        .unwrap_or(0);
    Ok(TransferSet {
        field,
        grid,
        d_min,
        d_max: d_hi.saturating_sub(d_min),
    })
}

/// Symbolic transfer grid: entries are polynomials in the LEC symbols and `D`.
#[derive(Clone, Debug)]
pub struct SymbolicTransfer {
    pub field: Field,
    pub grid: Vec<Vec<Matrix<MultiPoly>>>,
    pub d_min: usize,
}

impl SymbolicTransfer {
    /// Entry (o, l) of M_ij divided by D^d_min.
    pub fn normalized_entry(&self, i: usize, j: usize, o: usize, l: usize) -> MultiPoly {
        let p = self.grid[i][j].get(o, l);
        let d = LecSymbol::delay();
        let mut out = MultiPoly::zero();
        for (m, c) in p.terms() {
            let e = m.exponent(&d) - self.d_min as u32;
            let rest = m
                .factors()
                .iter()
                .filter(|(s, _)| !s.is_delay())
                .fold(MultiPoly::constant(*c), |acc, (s, k)| {
                    acc.mul(&self.field, &MultiPoly::var(&self.field, s.clone()).pow(&self.field, *k))
                });
            let dp = MultiPoly::var(&self.field, d.clone()).pow(&self.field, e);
            out = out.add(&self.field, &rest.mul(&self.field, &dp));
        }
        out
    }

    /// Scalar entry (0,0) of the normalized M_ij with D replaced by `c`.
    pub fn scalar_at(&self, i: usize, j: usize, c: Fe) -> MultiPoly {
        self.normalized_entry(i, j, 0, 0)
            .substitute_value(&self.field, &LecSymbol::delay(), c)
    }
}

pub fn symbolic_transfer(net: &NetworkSpec) -> Result<SymbolicTransfer> {
    let field = net.field.clone();
    let ring = PolyCtx { field: field.clone() };
    let dvar = MultiPoly::var(&field, LecSymbol::delay());
    let grid = propagate(net, &ring, &|c| Ok(c.clone()), &|k| dvar.pow(&field, k))?;
    let d = LecSymbol::delay();
    let d_min = grid
        .iter()
        .flatten()
        .flat_map(|m| m.entries().flat_map(|p| p.terms().map(|(mono, _)| mono.exponent(&d))).collect::<Vec<_>>())
        .min()
        .unwrap_or(0) as usize;
    Ok(SymbolicTransfer { field, grid, d_min })
}

// ---------------------------------------------------------------------------
// Simulation

/// What to do when a time-varying schedule lacks a value the run touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapPolicy {
    Error,
    /// Treat missing coefficients as zero. Only sound when the affected
    /// outputs are discarded afterwards (for example, inside a cyclic prefix).
    Zero,
}

/// Per-source, per-process input streams: `x[i][l][k]` is sent at time `start + k`.
#[derive(Clone, Debug)]
pub struct Streams {
    pub start: i64,
    pub x: Vec<Vec<Vec<Fe>>>,
}

/// Register-level simulation over times `start .. start + horizon`.
/// Returns `y[j][o][k]`, the output of sink j, row o, at time `start + k`.
pub fn simulate(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    inputs: &Streams,
    horizon: usize,
    gaps: GapPolicy,
) -> Result<Vec<Vec<Vec<Fe>>>> {
    let net = net.normalize_delays();
    let field = &net.field;
    let coef = |c: &MultiPoly, t: i64| -> Result<Fe> {
        match lecs.coef_at(c, t) {
            Err(Error::ScheduleGap(_)) if gaps == GapPolicy::Zero => Ok(field.zero()),
            other => other,
        }
    };
    if inputs.x.len() != net.sources.len() {
        return Err(Error::Dimension("one input stream set per source".into()));
    }
    for (i, s) in net.sources.iter().enumerate() {
        if inputs.x[i].len() != s.processes {
            return Err(Error::Dimension(format!(
                "source {} expects {} process streams",
                net.source_name(i),
                s.processes
            )));
        }
    }
    let source_at: HashMap<usize, usize> = net
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| (s.node, i))
        .collect();
    let mut reg = vec![field.zero(); net.edges.len()];
    let mut lines: Vec<Vec<Vec<VecDeque<Fe>>>> = net
        .sinks
        .iter()
        .map(|s| {
            s.taps
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|t| VecDeque::from(vec![field.zero(); t.delay as usize]))
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut out: Vec<Vec<Vec<Fe>>> = net
        .sinks
        .iter()
        .map(|s| vec![Vec::with_capacity(horizon); s.outputs])
        .collect();
    for k in 0..horizon {
        let t = inputs.start + k as i64;
        for (j, s) in net.sinks.iter().enumerate() {
            for (o, row) in s.taps.iter().enumerate() {
                let mut acc = field.zero();
                for (ti, tap) in row.iter().enumerate() {
                    let line = &mut lines[j][o][ti];
                    let v = if tap.delay == 0 {
                        reg[tap.edge]
                    } else {
                        line.push_back(reg[tap.edge]);
                        line.pop_front().expect("delay line is nonempty")
                    };
                    if v.raw() != 0 {
                        acc = field.add(acc, field.mul(coef(&tap.coef, t)?, v));
                    }
                }
                out[j][o].push(acc);
            }
        }
        let mut next = vec![field.zero(); net.edges.len()];
        for (e_idx, e) in net.edges.iter().enumerate() {
            let mut acc = field.zero();
            for (inp, g) in &e.gains {
                let v = match inp {
                    Input::Process(l) => {
                        let i = source_at[&e.tail];
                        inputs.x[i][*l].get(k).copied().unwrap_or_else(|| field.zero())
                    }
                    Input::Edge(src) => reg[*src],
                };
                if v.raw() != 0 {
                    acc = field.add(acc, field.mul(coef(g, t)?, v));
                }
            }
            next[e_idx] = acc;
        }
        reg = next;
    }
    Ok(out)
}

/// Response of every sink output to a unit symbol from process `l` of source
/// `i` sent at time `tau`, by summing over paths with time-indexed
/// coefficients. Returns `(sink, output, time) -> value` for nonzero values.
pub fn impulse_response(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    i: usize,
    l: usize,
    tau: i64,
    gaps: GapPolicy,
) -> Result<BTreeMap<(usize, usize, i64), Fe>> {
    let field = &net.field;
    let coef = |c: &MultiPoly, t: i64| -> Result<Fe> {
        match lecs.coef_at(c, t) {
            Err(Error::ScheduleGap(_)) if gaps == GapPolicy::Zero => Ok(field.zero()),
            other => other,
        }
    };
    impulse_generic(net, field, &coef, i, l, tau)
}

/// Path-sum impulse response over any coefficient ring. `coef(c, t)` maps
/// the coefficient polynomial `c`, applied at time `t`, into the ring.
fn impulse_generic<R: pm::Ring>(
    net: &NetworkSpec,
    ring: &R,
    coef: &dyn Fn(&MultiPoly, i64) -> Result<R::Elem>,
    i: usize,
    l: usize,
    tau: i64,
) -> Result<BTreeMap<(usize, usize, i64), R::Elem>> {
    // arrivals[e] : arrival time at head -> value
    let mut arrivals: Vec<BTreeMap<i64, R::Elem>> = vec![BTreeMap::new(); net.edges.len()];
    for &k in &net.order {
        let e = &net.edges[k];
        let mut sent: BTreeMap<i64, R::Elem> = BTreeMap::new();
        for (inp, g) in &e.gains {
            match inp {
                Input::Process(p) if *p == l && net.sources[i].node == e.tail => {
                    let c = coef(g, tau)?;
                    let slot = sent.entry(tau).or_insert_with(|| ring.zero());
                    *slot = ring.add(slot, &c);
                }
                Input::Edge(src) => {
                    for (&t, v) in &arrivals[*src] {
                        let c = coef(g, t)?;
                        let slot = sent.entry(t).or_insert_with(|| ring.zero());
                        *slot = ring.add(slot, &ring.mul(&c, v));
                    }
                }
                _ => {}
            }
        }
        arrivals[k] = sent
            .into_iter()
            .filter(|(_, v)| !ring.is_zero(v))
            .map(|(t, v)| (t + e.delay as i64, v))
            .collect();
    }
    let mut out = BTreeMap::new();
    for (j, s) in net.sinks.iter().enumerate() {
        for (o, row) in s.taps.iter().enumerate() {
            for tap in row {
                for (&t, v) in &arrivals[tap.edge] {
                    let when = t + tap.delay as i64;
                    let c = coef(&tap.coef, when)?;
                    let slot = out.entry((j, o, when)).or_insert_with(|| ring.zero());
                    *slot = ring.add(slot, &ring.mul(&c, v));
                }
            }
        }
    }
    out.retain(|_, v| !ring.is_zero(v));
    Ok(out)
}

/// The block matrices relating stacked inputs X_i^n to stacked outputs Y_j^n
/// over one cyclic-prefix block, for an arbitrary (possibly time-varying)
/// schedule. Both stacks are newest first: row block r holds Y^(n−1−r) and
/// column block c holds X^(n−1−c). Times are normalized so that the earliest
/// possible arrival of generation 0 is time 0; the prefix occupies times
/// −d_max .. −1 and carries generations n−d_max .. n−1.
///
/// Returns `mats[i][j]` of size (n·ν_j) × (n·μ_i).
pub fn time_varying_block_matrix(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    n: usize,
) -> Result<Vec<Vec<FieldBlock>>> {
    let (lo, hi) = net
        .path_delay_range()
        .ok_or_else(|| Error::Network("no source reaches any sink".into()))?;
    let d_min = lo;
    let d_max = hi - lo;
    block_matrix_with(net, lecs, n, d_min, d_max, 0, GapPolicy::Error)
}

pub type FieldBlock = Matrix<Fe>;

/// As [`time_varying_block_matrix`] with explicit offsets: the block starts
/// at raw time `origin`, generation s is sent at `origin + s` and its prefix
/// copy at `origin + s − n`; outputs are read at raw `origin + d_min + t`.
pub fn block_matrix_with(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    n: usize,
    d_min: usize,
    d_max: usize,
    origin: i64,
    gaps: GapPolicy,
) -> Result<Vec<Vec<FieldBlock>>> {
    let field = net.field.clone();
    let coef = |c: &MultiPoly, t: i64| -> Result<Fe> {
        match lecs.coef_at(c, t) {
            Err(Error::ScheduleGap(_)) if gaps == GapPolicy::Zero => Ok(field.zero()),
            other => other,
        }
    };
    block_matrix_generic(net, &field, &coef, n, d_min, d_max, origin)
}

/// Block matrices with symbolic entries: every LEC symbol `s` applied at
/// time `t` becomes the indeterminate `s@t`. Layout and offsets follow
/// [`time_varying_block_matrix`] with origin 0.
pub fn symbolic_block_matrix(net: &NetworkSpec, n: usize) -> Result<Vec<Vec<Matrix<MultiPoly>>>> {
    let (lo, hi) = net
        .path_delay_range()
        .ok_or_else(|| Error::Network("no source reaches any sink".into()))?;
    let field = net.field.clone();
    let ring = PolyCtx { field: field.clone() };
    let coef = |c: &MultiPoly, t: i64| -> Result<MultiPoly> {
        let subs: BTreeMap<LecSymbol, MultiPoly> = c
            .symbols()
            .into_iter()
            .filter(|s| s.time.is_none() && s.block.is_none())
            .map(|s| {
                let timed = MultiPoly::var(&field, s.at_time(t));
                (s, timed)
            })
            .collect();
        Ok(c.substitute(&field, &subs))
    };
    block_matrix_generic(net, &ring, &coef, n, lo, hi - lo, 0)
}

fn block_matrix_generic<R: pm::Ring>(
    net: &NetworkSpec,
    ring: &R,
    coef: &dyn Fn(&MultiPoly, i64) -> Result<R::Elem>,
    n: usize,
    d_min: usize,
    d_max: usize,
    origin: i64,
) -> Result<Vec<Vec<Matrix<R::Elem>>>> {
    if n <= d_max {
        return Err(Error::Params(format!(
            "block length {n} must exceed the delay spread {d_max}"
        )));
    }
    let net = net.normalize_delays();
    let mut mats: Vec<Vec<Matrix<R::Elem>>> = net
        .sources
        .iter()
        .map(|s| {
            net.sinks
                .iter()
                .map(|k| Matrix::zeros(ring, n * k.outputs, n * s.processes))
                .collect()
        })
        .collect();
    for (i, src) in net.sources.iter().enumerate() {
        for l in 0..src.processes {
            for s in 0..n {
                let mut sends = vec![origin + s as i64];
                if s + d_max >= n {
                    sends.push(origin + s as i64 - n as i64);
                }
                for tau in sends {
                    for ((j, o, when), v) in impulse_generic(&net, ring, coef, i, l, tau)? {
                        let t = when - origin - d_min as i64;
                        if t < 0 || t >= n as i64 {
                            continue;
                        }
                        let nu = net.sinks[j].outputs;
                        let row = (n - 1 - t as usize) * nu + o;
                        let col = (n - 1 - s) * src.processes + l;
                        let m = &mut mats[i][j];
                        let cur = m.get(row, col).clone();
                        m.set(row, col, ring.add(&cur, &v));
                    }
                }
            }
        }
    }
    Ok(mats)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"{
        "field": "2^3",
        "edges": [
            {"tail": "S", "head": "A", "lec": "a"},
            {"tail": "A", "head": "T", "delay": 3, "lec": "b"}
        ],
        "sources": [{"node": "S"}],
        "sinks": [{"node": "T"}],
        "connections": [["S", "T", 0]]
    }"#;

    #[test]
    fn parse_and_normalize() {
        let net = NetworkSpec::from_json(CHAIN, None).unwrap();
        assert_eq!(net.nodes.len(), 3);
        let unit = net.normalize_delays();
        assert_eq!(unit.edges.len(), 4);
        assert_eq!(unit.nodes.len(), 5);
        assert!(unit.is_unit_delay());
        assert_eq!(net.path_delay_range(), Some((4, 4)));
        assert_eq!(unit.path_delay_range(), Some((4, 4)));
        assert_eq!(net.min_cut(0, 0), 1);
    }

    #[test]
    fn rejects_bad_networks() {
        assert!(matches!(
            NetworkSpec::from_json("{}", None),
            Err(Error::Parse { .. })
        ));
        let cyc = r#"{"field":"2","edges":[{"tail":"A","head":"B"},{"tail":"B","head":"A"}],
            "sources":[{"node":"A"}],"sinks":[{"node":"B"}]}"#;
        assert!(matches!(NetworkSpec::from_json(cyc, None), Err(Error::Network(_))));
        let zero = r#"{"field":"2","edges":[{"tail":"A","head":"B","delay":0}],
            "sources":[{"node":"A"}],"sinks":[{"node":"B"}]}"#;
        assert!(matches!(NetworkSpec::from_json(zero, None), Err(Error::Network(_))));
    }

    #[test]
    fn single_edge_transfer_is_lec_times_d() {
        let text = r#"{"field":"2^3","edges":[{"tail":"S","head":"T","lec":"a"}],
            "sources":[{"node":"S"}],"sinks":[{"node":"T"}],"connections":[["S","T",0]]}"#;
        let net = NetworkSpec::from_json(text, None).unwrap();
        let f = net.field.clone();
        let v = f.pow(f.primitive(), 3);
        let mut lecs = LecAssignment::new(&f, LecMode::TimeInvariant);
        lecs.values.insert(LecSymbol::new("a"), v);
        let ts = transfer_matrices(&net, &lecs).unwrap();
        assert_eq!(ts.grid[0][0].get(0, 0), &DelayPoly::monomial(v, 1));
        let sym = symbolic_transfer(&net).unwrap();
        assert_eq!(sym.grid[0][0].get(0, 0).format(&f), "D*a");
    }

    #[test]
    fn disconnected_pair_has_zero_cut() {
        let text = r#"{"field":"2","edges":[{"tail":"S","head":"T"},{"tail":"U","head":"V"}],
            "sources":[{"node":"S"},{"node":"U"}],"sinks":[{"node":"T"},{"node":"V"}]}"#;
        let net = NetworkSpec::from_json(text, None).unwrap();
        assert_eq!(net.min_cut_table(), vec![vec![1, 0], vec![0, 1]]);
    }
}
