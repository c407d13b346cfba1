//! Precoding-based network alignment (PBNA) for three unicast sessions
//! S_i → T_i over a delay network.
//!
//! Three schemes are provided:
//!
//! * scheme 1: the DFT transform with time-invariant coefficients. After the
//!   transform every transfer is a diagonal matrix and the precoders are
//!   built from Û = M̂₁₂⁻¹M̂₃₂M̂₃₁⁻¹M̂₂₁M̂₂₃⁻¹M̂₁₃.
//! * scheme 2: time-varying coefficients over one cyclic-prefix block of
//!   length n, with general (non-circulant) block matrices. Variant "2z"
//!   handles a cross pair with zero min-cut.
//! * scheme 3: the transform with coefficients that change per block, whose
//!   feasibility reduces to membership tests on the rational functions η and
//!   b_i evaluated at D = 1.
//!
//! Every "feasible" verdict carries a decode witness: random independent
//! symbols are precoded, pushed through the register-level simulator and
//! recovered exactly at each sink. "Infeasible" is only issued with a
//! structural certificate; anything else is "unknown".

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::galois::{gcd, min_extension_for_order, Embedding, Fe, Field};
use crate::netmodel::{
    block_matrix_with, symbolic_block_matrix, symbolic_transfer, transfer_matrices, GapPolicy,
    LecAssignment, LecMode, NetworkSpec,
};
use crate::par::{find_first, Exec};
use crate::polymatrix::{FieldMatrix, Matrix};
use crate::symbolic::{rf_is_constant, rf_probably_equal, trial_rng, Equality, RatCtx, RationalFn};
use crate::transform::{
    block_cp_pipeline, block_hat, cp_pipeline, hat_transfer, prefix_pipeline, BlockLayout, DftCtx,
};

type Grid<T> = Vec<Vec<T>>;

/// Sampling fields are enlarged until they hold at least this many elements.
const MIN_SAMPLE_ORDER: u64 = 1 << 10;
/// Symbolic certificates are skipped when the block matrices exceed this many terms.
const SYMBOLIC_TERM_LIMIT: usize = 20_000;

// ---------------------------------------------------------------------------
// Instance

/// A three-session unicast network: source i (one process) demands delivery
/// at sink i (one output).
#[derive(Clone, Debug)]
pub struct PbnaInstance {
    pub net: NetworkSpec,
    /// `min_cuts[i][j]` between source i and sink j.
    pub min_cuts: Vec<Vec<usize>>,
}

impl PbnaInstance {
    pub fn new(net: NetworkSpec) -> Result<Self> {
        if net.sources.len() != 3 || net.sinks.len() != 3 {
            return Err(Error::Network(format!(
                "alignment needs 3 sources and 3 sinks, found {} and {}",
                net.sources.len(),
                net.sinks.len()
            )));
        }
        for (i, s) in net.sources.iter().enumerate() {
            if s.processes != 1 {
                return Err(Error::Network(format!(
                    "source {} must carry one process",
                    net.source_name(i)
                )));
            }
        }
        for (j, s) in net.sinks.iter().enumerate() {
            if s.outputs != 1 {
                return Err(Error::Network(format!("sink {} must have one output", net.sink_name(j))));
            }
            if net.demands(j) != vec![(j, 0)] {
                return Err(Error::MalformedDemands(format!(
                    "sink {} must demand exactly source {}",
                    net.sink_name(j),
                    net.source_name(j)
                )));
            }
        }
        let min_cuts = net.min_cut_table();
        for (i, row) in min_cuts.iter().enumerate() {
            if row[i] != 1 {
                return Err(Error::Network(format!(
                    "session {} has min-cut {}, expected 1",
                    i + 1,
                    row[i]
                )));
            }
        }
        Ok(PbnaInstance { net, min_cuts })
    }

    pub fn field(&self) -> &Field {
        &self.net.field
    }

    /// Cross pairs (source, sink) with zero min-cut.
    pub fn zero_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if i != j && self.min_cuts[i][j] == 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn require_connected_cross(&self) -> Result<()> {
        match self.zero_pairs().first() {
            None => Ok(()),
            Some(&(i, j)) => Err(Error::Network(format!(
                "source {} does not reach sink {}; use the zero-min-cut variant",
                self.net.source_name(i),
                self.net.sink_name(j)
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PbnaVerdict {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Strategy {
    #[serde(rename = "krylov")]
    Krylov,
    #[serde(rename = "free")]
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankCheck {
    pub name: String,
    /// Frequency bin for the per-block scheme.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub rank: usize,
    pub target: usize,
}

impl RankCheck {
    pub fn passed(&self) -> bool {
        self.rank == self.target
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlignmentCheck {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecodeCheck {
    /// Independent symbols sent per session.
    pub symbols: [usize; 3],
    /// Symbols recovered incorrectly (or not at all) per session.
    pub errors: [usize; 3],
    /// Channel uses consumed on the wire.
    pub wire_slots: usize,
}

impl DecodeCheck {
    pub fn exact(&self) -> bool {
        self.errors == [0, 0, 0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rate {
    pub symbols: usize,
    pub slots: usize,
    pub value: f64,
}

impl Rate {
    fn new(symbols: usize, slots: usize) -> Self {
        Rate {
            symbols,
            slots,
            value: symbols as f64 / slots as f64,
        }
    }
}

/// ((n′+1)/(2n′+1), n′/(2n′+1), n′/(2n′+1)).
pub fn rate_tuple(nprime: usize) -> [Rate; 3] {
    let n = 2 * nprime + 1;
    [Rate::new(nprime + 1, n), Rate::new(nprime, n), Rate::new(nprime, n)]
}

/// Membership of b_i(0) in S = {1, η, η+1, η/(η+1)}.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedReport {
    /// Cross pair (source, sink) with zero min-cut, when the variant applies.
    pub zero_pair: Option<(usize, usize)>,
    pub eta: Option<String>,
    pub eta_constant: bool,
    pub b: Vec<String>,
    /// For each b_i: the element of S it equals, "constant" when the
    /// constant-η or zero-pair rule applies, or None.
    pub membership: Vec<Option<String>>,
    /// True when every equality decision was exact rather than sampled.
    pub exact: bool,
    /// Probability bound for sampled equality decisions (0 when exact).
    pub failure_bound: f64,
    pub feasible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PbnaReport {
    pub scheme: String,
    pub verdict: PbnaVerdict,
    pub reason: String,
    /// Field in which the witness lives.
    pub field: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub alpha: Option<String>,
    pub demands: [usize; 3],
    pub rates: Vec<Rate>,
    pub d_min: Option<usize>,
    pub d_max: Option<usize>,
    pub witness_lecs: Option<Value>,
    pub precoders: Option<Value>,
    /// Diagonals of the transformed transfers, keyed "M11".."M33".
    pub hat_diagonals: Option<Value>,
    pub ranks: Vec<RankCheck>,
    pub alignment: Vec<AlignmentCheck>,
    /// Nonzero entries of U·V1·A·C − V1·B.
    pub g_residual_nonzero: Option<usize>,
    pub invertible: Option<Vec<bool>>,
    pub reduced: Option<ReducedReport>,
    pub decode: Option<DecodeCheck>,
    pub trials_run: usize,
    pub failure_bound: Option<f64>,
    pub certificate: Option<String>,
    /// Relabeling used by the zero-min-cut variant: position a holds the
    /// original session index playing role a+1.
    pub relabel: Option<[usize; 3]>,
}

impl PbnaReport {
    fn empty(scheme: &str, field: &Field, demands: [usize; 3]) -> Self {
        PbnaReport {
            scheme: scheme.into(),
            verdict: PbnaVerdict::Unknown,
            reason: String::new(),
            field: field.literal(),
            n: None,
            k: None,
            alpha: None,
            demands,
            rates: Vec::new(),
            d_min: None,
            d_max: None,
            witness_lecs: None,
            precoders: None,
            hat_diagonals: None,
            ranks: Vec::new(),
            alignment: Vec::new(),
            g_residual_nonzero: None,
            invertible: None,
            reduced: None,
            decode: None,
            trials_run: 0,
            failure_bound: None,
            certificate: None,
            relabel: None,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    fn ranks_pass(&self) -> bool {
        self.ranks.iter().all(RankCheck::passed) && self.alignment.iter().all(|a| a.holds)
    }
}

// ---------------------------------------------------------------------------
// Shared linear algebra

fn inv(f: &Field, m: &FieldMatrix) -> Option<FieldMatrix> {
    m.inverse(f).ok()
}

fn mul(f: &Field, a: &FieldMatrix, b: &FieldMatrix) -> FieldMatrix {
    a.mul(f, b).expect("conformable")
}

fn hcat(a: &FieldMatrix, b: &FieldMatrix) -> FieldMatrix {
    a.hstack(b).expect("equal heights")
}

fn ones(f: &Field, n: usize) -> FieldMatrix {
    Matrix::filled(n, 1, f.one())
}

/// [W, UW, …, U^{c−1}W].
fn krylov(f: &Field, u: &FieldMatrix, w: &FieldMatrix, c: usize) -> FieldMatrix {
    let mut cols = Vec::with_capacity(c);
    let mut cur = w.clone();
    for _ in 0..c {
        cols.push(cur.column(0));
        cur = mul(f, u, &cur);
    }
    Matrix::from_fn(u.rows(), c, |r, k| cols[k][r])
}

/// Columns `idx` of the identity of size `n`.
fn selection(f: &Field, n: usize, idx: &[usize]) -> FieldMatrix {
    Matrix::identity(f, n).select_columns(idx)
}

fn format_matrix(f: &Field, m: &FieldMatrix) -> Value {
    serde_json::to_value(m.format(f)).expect("strings serialize")
}

fn format_precoders(f: &Field, v: &[FieldMatrix; 3]) -> Value {
    serde_json::json!({
        "V1": format_matrix(f, &v[0]),
        "V2": format_matrix(f, &v[1]),
        "V3": format_matrix(f, &v[2]),
    })
}

fn within_span(f: &Field, basis: &FieldMatrix, extra: &FieldMatrix) -> bool {
    basis.rank(f) == hcat(basis, extra).rank(f)
}

/// U = M₁₂⁻¹M₃₂M₃₁⁻¹M₂₁M₂₃⁻¹M₁₃, or None if a needed inverse is missing.
fn u_matrix(f: &Field, m: &Grid<FieldMatrix>) -> Option<FieldMatrix> {
    let a = mul(f, &inv(f, &m[1][2])?, &m[0][2]);
    let b = mul(f, &inv(f, &m[2][0])?, &mul(f, &m[1][0], &a));
    Some(mul(f, &inv(f, &m[0][1])?, &mul(f, &m[2][1], &b)))
}

/// The three rank conditions in the form [V₁ M₁₁⁻¹M₂₁V₂] etc. With `zero21`
/// the first condition uses the only interferer, V₃.
fn rank_conditions(
    f: &Field,
    m: &Grid<FieldMatrix>,
    v: &[FieldMatrix; 3],
    zero21: bool,
    q: Option<usize>,
) -> Option<Vec<RankCheck>> {
    let (n1, n2, n3) = (v[0].cols(), v[1].cols(), v[2].cols());
    let m11i = inv(f, &m[0][0])?;
    let m12i = inv(f, &m[0][1])?;
    let m13i = inv(f, &m[0][2])?;
    let first = if zero21 {
        let blk = hcat(&v[0], &mul(f, &m11i, &mul(f, &m[2][0], &v[2])));
        RankCheck {
            name: "rank[V1, M11^-1 M31 V3]".into(),
            q,
            rank: blk.rank(f),
            target: n1 + n3,
        }
    } else {
        let blk = hcat(&v[0], &mul(f, &m11i, &mul(f, &m[1][0], &v[1])));
        RankCheck {
            name: "rank[V1, M11^-1 M21 V2]".into(),
            q,
            rank: blk.rank(f),
            target: n1 + n2,
        }
    };
    let second = hcat(&mul(f, &m12i, &mul(f, &m[1][1], &v[1])), &v[0]);
    let third = hcat(&mul(f, &m13i, &mul(f, &m[2][2], &v[2])), &v[0]);
    Some(vec![
        first,
        RankCheck {
            name: "rank[M12^-1 M22 V2, V1]".into(),
            q,
            rank: second.rank(f),
            target: n1 + n2,
        },
        RankCheck {
            name: "rank[M13^-1 M33 V3, V1]".into(),
            q,
            rank: third.rank(f),
            target: n1 + n3,
        },
    ])
}

/// Interference at each sink confined to the span of one interferer.
fn alignment_conditions(
    f: &Field,
    m: &Grid<FieldMatrix>,
    v: &[FieldMatrix; 3],
    zero21: bool,
    q: Option<usize>,
) -> Vec<AlignmentCheck> {
    let mv = |i: usize, j: usize| mul(f, &m[i][j], &v[i]);
    let mut out = Vec::new();
    if !zero21 {
        out.push(AlignmentCheck {
            name: "span(M31 V3) in span(M21 V2)".into(),
            q,
            holds: within_span(f, &mv(1, 0), &mv(2, 0)),
        });
    }
    out.push(AlignmentCheck {
        name: "span(M32 V3) in span(M12 V1)".into(),
        q,
        holds: within_span(f, &mv(0, 1), &mv(2, 1)),
    });
    out.push(AlignmentCheck {
        name: "span(M23 V2) in span(M13 V1)".into(),
        q,
        holds: within_span(f, &mv(0, 2), &mv(1, 2)),
    });
    out
}

/// Recovers each session's independent symbols from its sink's outputs by
/// solving [desired | interference basis]·z = y. Returns per-session error
/// counts against `sent`.
fn decode_sessions(
    f: &Field,
    m: &Grid<FieldMatrix>,
    v: &[FieldMatrix; 3],
    y: &[Vec<Fe>],
    sent: &[Vec<Fe>],
) -> [usize; 3] {
    let mut errors = [0; 3];
    for j in 0..3 {
        let desired = mul(f, &m[j][j], &v[j]);
        let mut interference: Option<FieldMatrix> = None;
        for i in (0..3).filter(|&i| i != j) {
            let blk = mul(f, &m[i][j], &v[i]);
            interference = Some(match interference {
                None => blk,
                Some(acc) => hcat(&acc, &blk),
            });
        }
        let interference = interference.expect("two interferers");
        let basis = interference.select_columns(&interference.independent_columns(f));
        let g = if basis.cols() == 0 { desired.clone() } else { hcat(&desired, &basis) };
        errors[j] = match g.solve_consistent(f, &y[j]) {
            Ok(Some(z)) => z[..sent[j].len()]
                .iter()
                .zip(&sent[j])
                .filter(|(a, b)| a != b)
                .count(),
            _ => sent[j].len(),
        };
    }
    errors
}

fn random_vec<R: rand::Rng>(f: &Field, len: usize, rng: &mut R) -> Vec<Fe> {
    (0..len).map(|_| f.random(rng)).collect()
}

fn random_matrix<R: rand::Rng>(f: &Field, rows: usize, cols: usize, rng: &mut R) -> FieldMatrix {
    Matrix::from_fn(rows, cols, |_, _| f.random(rng))
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Degree (a multiple of `base_deg`) of a sampling field with at least
/// [`MIN_SAMPLE_ORDER`] elements, and its doubled enlargement.
fn sample_degrees(p: u64, base_deg: u32) -> (u32, u32) {
    let mut b = base_deg;
    while (p as f64).powi(b as i32) < MIN_SAMPLE_ORDER as f64 {
        b += base_deg;
    }
    let big = 2 * b;
    let fits = (p as f64).powi(big as i32) <= (1u64 << 40) as f64;
    (b, if fits { big } else { b })
}

/// A field of degree `deg` over the base field's prime field, together with
/// the embedding of the base field into it.
fn lift(base: &Field, deg: u32) -> Result<(Field, Embedding)> {
    let big = if deg == base.degree() {
        base.clone()
    } else {
        base.extension(deg)?
    };
    let emb = Embedding::new(base, &big)?;
    Ok((big, emb))
}

/// Highest total degree in the coefficient symbols among the transfers.
fn lec_degree(net: &NetworkSpec) -> Result<u32> {
    let sym = symbolic_transfer(net)?;
    let one = net.field.one();
    let mut deg = 1;
    for i in 0..3 {
        for j in 0..3 {
            deg = deg.max(sym.scalar_at(i, j, one).total_degree());
        }
    }
    Ok(deg)
}

/// Schwartz–Zippel style bound for `trials` failures of a nonzero
/// polynomial of degree at most `deg` sampled over `order` elements.
fn sz_bound(deg: f64, order: u64, trials: usize) -> f64 {
    (deg / order as f64).min(1.0).powi(trials as i32)
}

// ---------------------------------------------------------------------------
// Diagonal precoders (schemes 1 and 3)

/// Diagonal transfers `d[i][j][p]`; builds V₁ = [W ÛW … Û^{n′}W],
/// V₂ = [R̂W … R̂Û^{n′−1}W], V₃ = [ŜÛW … ŜÛ^{n′}W]. None if a required
/// diagonal entry vanishes.
fn diagonal_precoders(f: &Field, m: &Grid<FieldMatrix>, nprime: usize) -> Option<[FieldMatrix; 3]> {
    let n = m[0][0].rows();
    let u = u_matrix(f, m)?;
    let r = mul(f, &m[0][2], &inv(f, &m[1][2])?);
    let s = mul(f, &m[0][1], &inv(f, &m[2][1])?);
    let w = ones(f, n);
    let v1 = krylov(f, &u, &w, nprime + 1);
    let kry = krylov(f, &u, &w, nprime + 1);
    let v2 = mul(f, &r, &kry.select_columns(&(0..nprime).collect::<Vec<_>>()));
    let v3 = mul(f, &s, &kry.select_columns(&(1..=nprime).collect::<Vec<_>>()));
    Some([v1, v2, v3])
}

fn diag_grid(f: &Field, d: &Grid<Vec<Fe>>) -> Grid<FieldMatrix> {
    d.iter()
        .map(|row| row.iter().map(|v| Matrix::diag(f, v)).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Scheme 1

struct Attempt {
    report: PbnaReport,
    ok: bool,
}

fn scheme1_attempt(
    inst: &PbnaInstance,
    field: &Field,
    emb: &Embedding,
    lecs: &LecAssignment,
    nprime: usize,
    seed: u64,
    trial: u64,
) -> Result<Attempt> {
    let n = 2 * nprime + 1;
    let demands = [nprime + 1, nprime, nprime];
    let mut rep = PbnaReport::empty("1", field, demands);
    let net = inst.net.map_field(emb);
    let ts = transfer_matrices(&net, lecs)?;
    rep.n = Some(n);
    rep.d_min = Some(ts.d_min);
    rep.d_max = Some(ts.d_max);
    rep.witness_lecs = Some(lecs.to_json());
    if ts.d_max >= n {
        rep.reason = format!("block length {n} does not exceed the delay spread {}", ts.d_max);
        return Ok(Attempt { report: rep, ok: false });
    }
    let dft = DftCtx::new(field, n, None)?;
    rep.alpha = Some(field.format(dft.alpha));
    let hat = hat_transfer(&ts, &dft)?;
    let d: Grid<Vec<Fe>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| (0..n).map(|p| *hat.get(i, j, n - 1 - p).get(0, 0)).collect())
                .collect()
        })
        .collect();
    let mut diag_json = serde_json::Map::new();
    for i in 0..3 {
        for j in 0..3 {
            let vals: Vec<String> = d[i][j].iter().map(|v| field.format(*v)).collect();
            diag_json.insert(format!("M{}{}", i + 1, j + 1), vals.into());
        }
    }
    rep.hat_diagonals = Some(Value::Object(diag_json));
    let m = diag_grid(field, &d);
    let Some(v) = diagonal_precoders(field, &m, nprime) else {
        rep.reason = "a transformed cross transfer vanishes at some frequency".into();
        return Ok(Attempt { report: rep, ok: false });
    };
    rep.precoders = Some(format_precoders(field, &v));
    let Some(ranks) = rank_conditions(field, &m, &v, false, None) else {
        rep.reason = "a transformed transfer vanishes at some frequency".into();
        return Ok(Attempt { report: rep, ok: false });
    };
    rep.ranks = ranks;
    rep.alignment = alignment_conditions(field, &m, &v, false, None);
    let exact = mul(field, &m[1][0], &v[1]) == mul(field, &m[2][0], &v[2]);
    rep.alignment.insert(
        0,
        AlignmentCheck {
            name: "M21 V2 = M31 V3".into(),
            q: None,
            holds: exact,
        },
    );
    if !rep.ranks_pass() {
        rep.reason = "rank or alignment condition fails".into();
        return Ok(Attempt { report: rep, ok: false });
    }
    let mut rng = trial_rng(seed ^ 0x5eed_0001, trial);
    let sent: Vec<Vec<Fe>> = demands.iter().map(|&c| random_vec(field, c, &mut rng)).collect();
    let x: Vec<Vec<Fe>> = (0..3)
        .map(|i| v[i].mul_vec(field, &sent[i]).expect("shape"))
        .collect();
    let run = cp_pipeline(&net, lecs, &ts, &dft, &x)?;
    let errors = decode_sessions(field, &m, &v, &run.yhat, &sent);
    rep.decode = Some(DecodeCheck {
        symbols: demands,
        errors,
        wire_slots: run.wire_slots,
    });
    let ok = rep.decode.as_ref().is_some_and(DecodeCheck::exact);
    rep.reason = if ok {
        "rank and alignment conditions hold; decode exact".into()
    } else {
        "conditions hold but the simulated decode failed".into()
    };
    Ok(Attempt { report: rep, ok })
}

/// Scheme 1 with n = 2n′+1. With `lecs` the given time-invariant values are
/// evaluated once; otherwise `trials` random assignments are sampled.
pub fn scheme1_check(
    inst: &PbnaInstance,
    nprime: usize,
    trials: usize,
    seed: u64,
    lecs: Option<&LecAssignment>,
    exec: Exec,
) -> Result<PbnaReport> {
    if nprime == 0 {
        return Err(Error::Params("n' must be positive".into()));
    }
    let base = inst.field().clone();
    let p = base.characteristic();
    let n = 2 * nprime + 1;
    let ord = min_extension_for_order(p, n as u64).ok_or_else(|| {
        Error::Params(format!("block length {n} is a multiple of the characteristic {p}"))
    })?;
    inst.require_connected_cross()?;
    let b0 = lcm(base.degree() as u64, ord as u64) as u32;
    let mut outcome = match lecs {
        Some(given) => {
            if given.mode != LecMode::TimeInvariant {
                return Err(Error::Params("scheme 1 needs time-invariant coefficients".into()));
            }
            let (big, emb) = lift(&base, b0)?;
            let att = scheme1_attempt(inst, &big, &emb, &given.map_field(&emb), nprime, seed, 0)?;
            let mut r = att.report;
            r.trials_run = 1;
            (r, att.ok)
        }
        None => {
            if trials == 0 {
                return Err(Error::Params("at least one trial is required".into()));
            }
            let (small, large) = sample_degrees(p, b0);
            let fields = [lift(&base, small)?, lift(&base, large)?];
            let symbols = inst.net.symbols();
            let half = trials.div_ceil(2);
            let attempt = |t: usize| -> Result<Attempt> {
                let (f, emb) = &fields[usize::from(t >= half)];
                let mut rng = trial_rng(seed, t as u64);
                let l = LecAssignment::random(f, &symbols, &mut rng);
                scheme1_attempt(inst, f, emb, &l, nprime, seed, t as u64)
            };
            let hit = find_first(exec, trials, |t| match attempt(t) {
                Ok(a) if a.ok => Some(Ok(a.report)),
                Ok(_) => None,
                Err(e) => Some(Err(e)),
            });
            match hit {
                Some((t, r)) => {
                    let mut r = r?;
                    r.trials_run = t + 1;
                    (r, true)
                }
                None => {
                    let mut r = attempt(0)?.report;
                    r.trials_run = trials;
                    let deg = lec_degree(&inst.net)? as f64 * 6.0 * (n * (nprime + 1)) as f64;
                    let order = fields[0].0.order().min(fields[1].0.order());
                    r.failure_bound = Some(sz_bound(deg, order, trials));
                    (r, false)
                }
            }
        }
    };
    let rep = &mut outcome.0;
    rep.rates = rate_tuple(nprime).to_vec();
    let reduced = scheme3_reduced(inst, 16, seed).ok();
    if outcome.1 {
        rep.verdict = PbnaVerdict::Feasible;
    } else if let Some(red) = reduced.as_ref().filter(|r| !r.feasible) {
        rep.verdict = PbnaVerdict::Infeasible;
        rep.certificate = Some(membership_certificate(red));
    } else {
        rep.verdict = PbnaVerdict::Unknown;
    }
    rep.reduced = reduced;
    Ok(outcome.0)
}

fn membership_certificate(red: &ReducedReport) -> String {
    let hits: Vec<String> = red
        .membership
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.as_ref().map(|s| format!("b{} = {} ({s})", i + 1, red.b[i])))
        .collect();
    format!("reduced conditions fail: {}", hits.join("; "))
}

// ---------------------------------------------------------------------------
// Scheme 2

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockDemands {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub n: usize,
}

impl BlockDemands {
    fn cols(&self) -> [usize; 3] {
        [self.n1, self.n2, self.n3]
    }

    fn rates(&self) -> Vec<Rate> {
        self.cols().iter().map(|&c| Rate::new(c, self.n)).collect()
    }
}

/// Which block-matrix construction a scheme-2 attempt uses.
#[derive(Clone, Copy)]
enum Block2 {
    Aligned(Strategy),
    /// Zero min-cut between relabeled source 2 and sink 1.
    Zero21,
}

struct Scheme2Ctx<'a> {
    inst: &'a PbnaInstance,
    dem: BlockDemands,
    /// perm[a] = original session playing role a.
    perm: [usize; 3],
    d_min: usize,
    d_max: usize,
    kind: Block2,
}

impl Scheme2Ctx<'_> {
    fn attempt(
        &self,
        field: &Field,
        emb: &Embedding,
        lecs: &LecAssignment,
        seed: u64,
        trial: u64,
    ) -> Result<Attempt> {
        let dem = self.dem;
        let perm = self.perm;
        // demands in relabeled order
        let cols = [dem.cols()[perm[0]], dem.cols()[perm[1]], dem.cols()[perm[2]]];
        let scheme = if matches!(self.kind, Block2::Zero21) { "2z" } else { "2" };
        let mut rep = PbnaReport::empty(scheme, field, dem.cols());
        rep.n = Some(dem.n);
        rep.d_min = Some(self.d_min);
        rep.d_max = Some(self.d_max);
        rep.witness_lecs = Some(lecs.to_json());
        let net = self.inst.net.map_field(emb);
        let raw = block_matrix_with(&net, lecs, dem.n, self.d_min, self.d_max, 0, GapPolicy::Zero)?;
        let m: Grid<FieldMatrix> = (0..3)
            .map(|a| (0..3).map(|b| raw[perm[a]][perm[b]].clone()).collect())
            .collect();
        let zero21 = matches!(self.kind, Block2::Zero21);
        let invertible: Vec<bool> = (0..9)
            .map(|k| m[k / 3][k % 3].rank(field) == dem.n)
            .collect();
        rep.invertible = Some(invertible.clone());
        let needed_ok = (0..9).all(|k| invertible[k] || (zero21 && k == 3));
        if !needed_ok {
            rep.reason = "a block transfer matrix is singular".into();
            return Ok(Attempt { report: rep, ok: false });
        }
        let mut rng = trial_rng(seed ^ 0x5eed_0002, trial);
        let (v1, a, b) = match self.kind {
            Block2::Zero21 => (
                random_matrix(field, dem.n, cols[0], &mut rng),
                random_matrix(field, cols[0], cols[1], &mut rng),
                random_matrix(field, cols[0], cols[2], &mut rng),
            ),
            Block2::Aligned(strategy) => {
                let u = u_matrix(field, &m).expect("inverses checked");
                let k = krylov(field, &u, &ones(field, dem.n), cols[0]);
                let (v1, a, b, c) = match strategy {
                    Strategy::Krylov => {
                        let a = selection(field, cols[0], &(0..cols[1]).collect::<Vec<_>>());
                        let b = selection(field, cols[0], &(1..=cols[2]).collect::<Vec<_>>());
                        let c = selection(field, cols[1], &(0..cols[2]).collect::<Vec<_>>());
                        (k, a, b, c)
                    }
                    Strategy::Free => {
                        let g = loop {
                            let g = random_matrix(field, cols[0], cols[0], &mut rng);
                            if let Some(gi) = inv(field, &g) {
                                break (g, gi);
                            }
                        };
                        let mut a0 = random_matrix(field, cols[0], cols[1], &mut rng);
                        for c in 0..cols[1] {
                            a0.set(cols[0] - 1, c, field.zero());
                        }
                        let c = random_matrix(field, cols[1], cols[2], &mut rng);
                        let ac = mul(field, &a0, &c);
                        // U·K·e_r = K·e_{r+1}, so U·K·(A0·C) = K·shift(A0·C)
                        let shifted = Matrix::from_fn(cols[0], cols[2], |r, cc| {
                            if r == 0 {
                                field.zero()
                            } else {
                                *ac.get(r - 1, cc)
                            }
                        });
                        let v1 = mul(field, &k, &g.0);
                        (v1, mul(field, &g.1, &a0), mul(field, &g.1, &shifted), c)
                    }
                };
                let lhs = mul(field, &u, &mul(field, &v1, &mul(field, &a, &c)));
                let rhs = mul(field, &v1, &b);
                let residual = lhs.sub(field, &rhs).expect("same shape");
                rep.g_residual_nonzero = Some(residual.entries().filter(|e| e.raw() != 0).count());
                (v1, a, b)
            }
        };
        let v2 = mul(field, &inv(field, &m[1][2]).expect("checked"), &mul(field, &m[0][2], &mul(field, &v1, &a)));
        let v3 = mul(field, &inv(field, &m[2][1]).expect("checked"), &mul(field, &m[0][1], &mul(field, &v1, &b)));
        let v = [v1, v2, v3];
        rep.precoders = Some(format_precoders(field, &v));
        rep.ranks = rank_conditions(field, &m, &v, zero21, None).expect("inverses checked");
        rep.alignment = alignment_conditions(field, &m, &v, zero21, None);
        if rep.g_residual_nonzero.unwrap_or(0) != 0 {
            rep.reason = "alignment residual g is nonzero".into();
            return Ok(Attempt { report: rep, ok: false });
        }
        if !rep.ranks_pass() {
            rep.reason = "rank or alignment condition fails".into();
            return Ok(Attempt { report: rep, ok: false });
        }
        let sent: Vec<Vec<Fe>> = cols.iter().map(|&c| random_vec(field, c, &mut rng)).collect();
        let mut x = vec![Vec::new(); 3];
        for a in 0..3 {
            x[perm[a]] = v[a].mul_vec(field, &sent[a]).expect("shape");
        }
        let y_orig = prefix_pipeline(&net, lecs, dem.n, self.d_min, self.d_max, &x, GapPolicy::Zero)?;
        let y: Vec<Vec<Fe>> = (0..3).map(|a| y_orig[perm[a]].clone()).collect();
        let rel_errors = decode_sessions(field, &m, &v, &y, &sent);
        let mut errors = [0; 3];
        for a in 0..3 {
            errors[perm[a]] = rel_errors[a];
        }
        rep.decode = Some(DecodeCheck {
            symbols: dem.cols(),
            errors,
            wire_slots: dem.n + self.d_max,
        });
        let ok = rep.decode.as_ref().is_some_and(DecodeCheck::exact);
        rep.reason = if ok {
            "rank and alignment conditions hold; decode exact".into()
        } else {
            "conditions hold but the simulated decode failed".into()
        };
        Ok(Attempt { report: rep, ok })
    }

    fn run(&self, trials: usize, seed: u64, lecs: Option<&LecAssignment>, exec: Exec) -> Result<(PbnaReport, bool)> {
        let base = self.inst.field().clone();
        match lecs {
            Some(given) => {
                let emb = Embedding::identity(&base);
                let att = self.attempt(&base, &emb, given, seed, 0)?;
                let mut r = att.report;
                r.trials_run = 1;
                Ok((r, att.ok))
            }
            None => {
                if trials == 0 {
                    return Err(Error::Params("at least one trial is required".into()));
                }
                let (small, large) = sample_degrees(base.characteristic(), base.degree());
                let fields = [lift(&base, small)?, lift(&base, large)?];
                let symbols = self.inst.net.symbols();
                let half = trials.div_ceil(2);
                let times = -(self.d_max as i64)..(self.d_min + self.dem.n) as i64;
                let attempt = |t: usize| -> Result<Attempt> {
                    let (f, emb) = &fields[usize::from(t >= half)];
                    let mut rng = trial_rng(seed, t as u64);
                    let l = LecAssignment::random_time_varying(f, &symbols, times.clone(), &mut rng);
                    self.attempt(f, emb, &l, seed, t as u64)
                };
                let hit = find_first(exec, trials, |t| match attempt(t) {
                    Ok(a) if a.ok => Some(Ok(a.report)),
                    Ok(_) => None,
                    Err(e) => Some(Err(e)),
                });
                match hit {
                    Some((t, r)) => {
                        let mut r = r?;
                        r.trials_run = t + 1;
                        Ok((r, true))
                    }
                    None => {
                        let mut r = attempt(0)?.report;
                        r.trials_run = trials;
                        let deg = lec_degree(&self.inst.net)? as f64
                            * 6.0
                            * (self.dem.n * (self.dem.n1 + self.dem.n2)) as f64;
                        let order = fields[0].0.order().min(fields[1].0.order());
                        r.failure_bound = Some(sz_bound(deg, order, trials));
                        Ok((r, false))
                    }
                }
            }
        }
    }
}

fn block_delays(inst: &PbnaInstance, n: usize) -> Result<(usize, usize)> {
    let (lo, hi) = inst
        .net
        .path_delay_range()
        .ok_or_else(|| Error::Network("no source reaches any sink".into()))?;
    if n <= hi - lo {
        return Err(Error::Params(format!(
            "block length {n} must exceed the delay spread {}",
            hi - lo
        )));
    }
    Ok((lo, hi - lo))
}

/// Scheme 2: time-varying coefficients over one prefixed block of length n.
/// With `lecs` the given schedule (indexed by application time, origin at
/// the first data symbol) is evaluated once; missing values read as zero.
pub fn scheme2_check(
    inst: &PbnaInstance,
    dem: BlockDemands,
    trials: usize,
    seed: u64,
    strategy: Strategy,
    lecs: Option<&LecAssignment>,
    exec: Exec,
) -> Result<PbnaReport> {
    let [n1, n2, n3] = dem.cols();
    if !(n1 >= n2 && n2 >= n3 && n3 >= 1) {
        return Err(Error::Params("demands must satisfy n1 >= n2 >= n3 >= 1".into()));
    }
    let mut rep = PbnaReport::empty("2", inst.field(), dem.cols());
    rep.n = Some(dem.n);
    rep.rates = dem.rates();
    if n1 + n2 > dem.n || n1 + n3 > dem.n {
        rep.verdict = PbnaVerdict::Infeasible;
        rep.reason = "dimension bound".into();
        rep.certificate = Some(format!(
            "n1 + n2 = {} or n1 + n3 = {} exceeds n = {}",
            n1 + n2,
            n1 + n3,
            dem.n
        ));
        return Ok(rep);
    }
    inst.require_connected_cross()?;
    if strategy == Strategy::Krylov && n3 >= n1 {
        return Err(Error::Params("the krylov construction needs n3 < n1".into()));
    }
    let (d_min, d_max) = block_delays(inst, dem.n)?;
    let ctx = Scheme2Ctx {
        inst,
        dem,
        perm: [0, 1, 2],
        d_min,
        d_max,
        kind: Block2::Aligned(strategy),
    };
    let (mut rep, ok) = ctx.run(trials, seed, lecs, exec)?;
    rep.rates = dem.rates();
    if ok {
        rep.verdict = PbnaVerdict::Feasible;
        return Ok(rep);
    }
    rep.verdict = PbnaVerdict::Unknown;
    if let Some(c) = interference_ratio_scalar(inst, dem.n)? {
        rep.verdict = PbnaVerdict::Infeasible;
        rep.certificate = Some(format!(
            "M11^-1 M21 M23^-1 M13 = {} * I_{} identically, so [V1, M11^-1 M21 V2] = [V1, c V1 A] has rank n1",
            inst.field().format(c),
            dem.n
        ));
    }
    Ok(rep)
}

/// Scheme 2 when source `zero_pair.0` cannot reach sink `zero_pair.1`.
/// The sessions are relabeled so the missing pair plays the role (2, 1).
pub fn scheme2_mincut0_check(
    inst: &PbnaInstance,
    zero_pair: (usize, usize),
    dem: BlockDemands,
    trials: usize,
    seed: u64,
    lecs: Option<&LecAssignment>,
    exec: Exec,
) -> Result<PbnaReport> {
    let (i0, j0) = zero_pair;
    if i0 >= 3 || j0 >= 3 || i0 == j0 {
        return Err(Error::Params("the zero pair must name two different sessions".into()));
    }
    let zeros = inst.zero_pairs();
    if zeros != vec![(i0, j0)] {
        return Err(Error::Network(format!(
            "min-cut table has zero cross pairs {zeros:?}, not exactly ({i0}, {j0})"
        )));
    }
    let k = 3 - i0 - j0;
    let perm = [j0, i0, k];
    let cols = dem.cols();
    let c = [cols[perm[0]], cols[perm[1]], cols[perm[2]]];
    if c.contains(&0) {
        return Err(Error::Params("every demand must be positive".into()));
    }
    let mut rep = PbnaReport::empty("2z", inst.field(), cols);
    rep.n = Some(dem.n);
    rep.rates = dem.rates();
    rep.relabel = Some(perm);
    if c[0] + c[1] > dem.n || c[0] + c[2] > dem.n {
        rep.verdict = PbnaVerdict::Infeasible;
        rep.reason = "dimension bound".into();
        rep.certificate = Some(format!(
            "relabeled n1 + n2 = {} or n1 + n3 = {} exceeds n = {}",
            c[0] + c[1],
            c[0] + c[2],
            dem.n
        ));
        return Ok(rep);
    }
    let (d_min, d_max) = block_delays(inst, dem.n)?;
    let ctx = Scheme2Ctx {
        inst,
        dem,
        perm,
        d_min,
        d_max,
        kind: Block2::Zero21,
    };
    let (mut rep, ok) = ctx.run(trials, seed, lecs, exec)?;
    rep.rates = dem.rates();
    rep.relabel = Some(perm);
    rep.verdict = if ok { PbnaVerdict::Feasible } else { PbnaVerdict::Unknown };
    Ok(rep)
}

/// Decides exactly whether M₁₁⁻¹M₂₁M₂₃⁻¹M₁₃ is a scalar multiple of the
/// identity for every time-varying schedule, using block matrices whose
/// entries are polynomials in the time-indexed coefficients. Returns the
/// scalar when it is. Returns None when the matrices are too large to
/// handle symbolically or a factor is singular.
pub fn interference_ratio_scalar(inst: &PbnaInstance, n: usize) -> Result<Option<Fe>> {
    let f = inst.field().clone();
    let sym = symbolic_block_matrix(&inst.net, n)?;
    let terms: usize = [(0, 0), (1, 0), (1, 2), (0, 2)]
        .iter()
        .map(|&(i, j)| sym[i][j].entries().map(|p| p.term_count()).sum::<usize>())
        .sum();
    if terms > SYMBOLIC_TERM_LIMIT {
        return Ok(None);
    }
    let ring = RatCtx { field: f.clone() };
    let rat = |i: usize, j: usize| sym[i][j].map(|p| RationalFn::from_poly(&f, p.clone()));
    let (Ok(m11i), Ok(m23i)) = (rat(0, 0).inverse(&ring), rat(1, 2).inverse(&ring)) else {
        return Ok(None);
    };
    let t = m11i
        .mul(&ring, &rat(1, 0))?
        .mul(&ring, &m23i)?
        .mul(&ring, &rat(0, 2))?;
    let Some(c) = rf_is_constant(&f, t.get(0, 0)) else {
        return Ok(None);
    };
    for r in 0..n {
        for k in 0..n {
            let e = t.get(r, k);
            let want = if r == k { c } else { f.zero() };
            if rf_is_constant(&f, e) != Some(want) {
                return Ok(None);
            }
        }
    }
    Ok(Some(c))
}

// ---------------------------------------------------------------------------
// Scheme 3: reduced conditions

fn large_embedding(base: &Field) -> Result<Embedding> {
    let m = base.degree();
    let mut b = m;
    while (base.characteristic() as f64).powi(b as i32) < 1e6 && b + m <= 40 {
        b += m;
    }
    Ok(lift(base, b)?.1)
}

/// η(0) and b_i(0) with D = 1, and membership of each b_i in
/// S = {1, η, η+1, η/(η+1)}. A single zero cross pair switches to the
/// variant where b₁ is redefined and feasibility means no b_i is constant.
pub fn scheme3_reduced(inst: &PbnaInstance, trials: u32, seed: u64) -> Result<ReducedReport> {
    let f = inst.field().clone();
    let sym = symbolic_transfer(&inst.net)?;
    let zeros = inst.zero_pairs();
    if zeros.len() > 1 {
        return Err(Error::Params(format!(
            "more than one zero cross min-cut ({zeros:?}) is not covered"
        )));
    }
    let zero_pair = zeros.first().copied();
    let perm = match zero_pair {
        Some((i0, j0)) => [j0, i0, 3 - i0 - j0],
        None => [0, 1, 2],
    };
    let one = f.one();
    let m = |a: usize, b: usize| sym.scalar_at(perm[a - 1], perm[b - 1], one);
    let ratio = |nums: &[(usize, usize)], dens: &[(usize, usize)], what: &str| -> Result<RationalFn> {
        let prod = |ps: &[(usize, usize)]| {
            ps.iter()
                .fold(crate::symbolic::MultiPoly::constant(one), |acc, &(a, b)| acc.mul(&f, &m(a, b)))
        };
        let den = prod(dens);
        if den.is_zero() {
            return Err(Error::DegenerateDenominator(format!("{what} has a zero denominator")));
        }
        RationalFn::new(&f, prod(nums), den)
    };
    let b1 = if zero_pair.is_some() {
        ratio(&[(3, 1), (1, 2)], &[(1, 1), (3, 2)], "b1")?
    } else {
        ratio(&[(2, 1), (1, 3)], &[(1, 1), (2, 3)], "b1")?
    };
    let b2 = ratio(&[(2, 2), (1, 3)], &[(1, 2), (2, 3)], "b2")?;
    let b3 = ratio(&[(3, 3), (1, 2)], &[(1, 3), (3, 2)], "b3")?;
    let bs = [b1, b2, b3];
    let mut rep = ReducedReport {
        zero_pair,
        eta: None,
        eta_constant: false,
        b: bs.iter().map(|b| b.format(&f)).collect(),
        membership: vec![None; 3],
        exact: true,
        failure_bound: 0.0,
        feasible: true,
    };
    let constant_rule = |rep: &mut ReducedReport| {
        for (i, b) in bs.iter().enumerate() {
            if let Some(c) = rf_is_constant(&f, b) {
                rep.membership[i] = Some(format!("constant {}", f.format(c)));
            }
        }
    };
    if zero_pair.is_some() {
        constant_rule(&mut rep);
    } else {
        let eta = ratio(&[(2, 1), (3, 2), (1, 3)], &[(3, 1), (2, 3), (1, 2)], "eta")?;
        rep.eta = Some(eta.format(&f));
        if rf_is_constant(&f, &eta).is_some() {
            rep.eta_constant = true;
            constant_rule(&mut rep);
        } else {
            let emb = large_embedding(&f)?;
            let one_rf = RationalFn::constant(&f, one);
            let eta1 = eta.add(&f, &one_rf);
            let set = [
                ("1", one_rf.clone()),
                ("eta", eta.clone()),
                ("eta+1", eta1.clone()),
                ("eta/(eta+1)", eta.div(&f, &eta1)?),
            ];
            for (i, b) in bs.iter().enumerate() {
                for (k, (label, s)) in set.iter().enumerate() {
                    let eq = rf_probably_equal(&f, b, s, trials.max(1), seed ^ (i * 4 + k) as u64, Some(&emb))?;
                    match eq {
                        Equality::EqualExact => {}
                        Equality::EqualProbable { failure_bound, .. } => {
                            rep.exact = false;
                            rep.failure_bound = rep.failure_bound.max(failure_bound);
                        }
                        Equality::Different { .. } => continue,
                    }
                    rep.membership[i] = Some((*label).to_string());
                    break;
                }
            }
        }
    }
    rep.feasible = rep.membership.iter().all(Option::is_none);
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Scheme 3: block pipeline

/// Scheme 3 end to end: 2n′+1 blocks of length k, coefficients redrawn per
/// block, per-bin precoders V^{(q)} and rank checks for every q, and a decode
/// of ((n′+1)k, n′k, n′k) symbols through the simulator.
pub fn scheme3_pipeline(
    inst: &PbnaInstance,
    nprime: usize,
    k: usize,
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Result<PbnaReport> {
    if nprime == 0 || trials == 0 {
        return Err(Error::Params("n' and the trial count must be positive".into()));
    }
    let base = inst.field().clone();
    let blocks = 2 * nprime + 1;
    let demands = [(nprime + 1) * k, nprime * k, nprime * k];
    let mut rep = PbnaReport::empty("3", &base, demands);
    rep.k = Some(k);
    rep.n = Some(blocks);
    rep.rates = rate_tuple(nprime).to_vec();
    DftCtx::new(&base, k, None)?;
    let reduced = scheme3_reduced(inst, 16, seed)?;
    if !reduced.feasible {
        rep.verdict = PbnaVerdict::Infeasible;
        rep.reason = "infeasible by reduced conditions".into();
        rep.certificate = Some(membership_certificate(&reduced));
        rep.reduced = Some(reduced);
        return Ok(rep);
    }
    if reduced.eta_constant || reduced.zero_pair.is_some() {
        rep.reason = "reduced conditions pass; the block precoders here cover the non-constant eta case only".into();
        rep.reduced = Some(reduced);
        return Ok(rep);
    }
    let layout = BlockLayout::for_network(&inst.net, k, blocks)?;
    rep.d_min = Some(layout.d_min);
    rep.d_max = Some(layout.d_max);
    let (_, large) = sample_degrees(base.characteristic(), base.degree());
    let fields = [lift(&base, base.degree())?, lift(&base, large)?];
    let symbols = inst.net.symbols();
    let half = trials.div_ceil(2);
    let attempt = |t: usize| -> Result<Attempt> {
        let (f, emb) = &fields[usize::from(t >= half)];
        let mut rng = trial_rng(seed, t as u64);
        let lecs = LecAssignment::random_block(
            f,
            &symbols,
            blocks,
            layout.lec_origin(),
            layout.period(),
            &mut rng,
        );
        scheme3_attempt(inst, f, emb, &lecs, &layout, nprime, demands, &mut rng)
    };
    let hit = find_first(exec, trials, |t| match attempt(t) {
        Ok(a) if a.ok => Some(Ok(a.report)),
        Ok(_) => None,
        Err(e) => Some(Err(e)),
    });
    let (mut out, ok, used) = match hit {
        Some((t, r)) => (r?, true, t + 1),
        None => (attempt(0)?.report, false, trials),
    };
    out.k = Some(k);
    out.n = Some(blocks);
    out.rates = rate_tuple(nprime).to_vec();
    out.trials_run = used;
    out.reduced = Some(reduced);
    out.verdict = if ok { PbnaVerdict::Feasible } else { PbnaVerdict::Unknown };
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn scheme3_attempt<R: rand::Rng>(
    inst: &PbnaInstance,
    field: &Field,
    emb: &Embedding,
    lecs: &LecAssignment,
    layout: &BlockLayout,
    nprime: usize,
    demands: [usize; 3],
    rng: &mut R,
) -> Result<Attempt> {
    let k = layout.k;
    let blocks = layout.blocks;
    let mut rep = PbnaReport::empty("3", field, demands);
    rep.d_min = Some(layout.d_min);
    rep.d_max = Some(layout.d_max);
    rep.witness_lecs = Some(lecs.to_json());
    let net = inst.net.map_field(emb);
    let dft = DftCtx::new(field, k, None)?;
    rep.alpha = Some(field.format(dft.alpha));
    let hat = block_hat(&net, lecs, layout, &dft)?;
    let mut per_q: Vec<(Grid<FieldMatrix>, [FieldMatrix; 3])> = Vec::with_capacity(k);
    for q in 0..k {
        let d: Grid<Vec<Fe>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| (0..blocks).map(|l| *hat[i][j][l][q].get(0, 0)).collect())
                    .collect()
            })
            .collect();
        let m = diag_grid(field, &d);
        let Some(v) = diagonal_precoders(field, &m, nprime) else {
            rep.reason = format!("a cross transfer vanishes in bin {q}");
            return Ok(Attempt { report: rep, ok: false });
        };
        let Some(ranks) = rank_conditions(field, &m, &v, false, Some(q)) else {
            rep.reason = format!("a transfer vanishes in bin {q}");
            return Ok(Attempt { report: rep, ok: false });
        };
        rep.ranks.extend(ranks);
        rep.alignment.extend(alignment_conditions(field, &m, &v, false, Some(q)));
        per_q.push((m, v));
    }
    if !rep.ranks_pass() {
        rep.reason = "a per-bin rank or alignment condition fails".into();
        return Ok(Attempt { report: rep, ok: false });
    }
    let dims = [nprime + 1, nprime, nprime];
    // sent[i][q]: independent symbols of session i carried in bin q
    let sent: Vec<Vec<Vec<Fe>>> = dims
        .iter()
        .map(|&c| (0..k).map(|_| random_vec(field, c, rng)).collect())
        .collect();
    let mut x = vec![vec![vec![field.zero(); k]; blocks]; 3];
    for i in 0..3 {
        for q in 0..k {
            let col = per_q[q].1[i].mul_vec(field, &sent[i][q]).expect("shape");
            for l in 0..blocks {
                x[i][l][q] = col[l];
            }
        }
    }
    let y = block_cp_pipeline(&net, lecs, layout, &dft, &x)?;
    let mut errors = [0; 3];
    for (q, (m, v)) in per_q.iter().enumerate() {
        let yq: Vec<Vec<Fe>> = (0..3).map(|j| (0..blocks).map(|l| y[j][l][q]).collect()).collect();
        let sq: Vec<Vec<Fe>> = (0..3).map(|i| sent[i][q].clone()).collect();
        let e = decode_sessions(field, m, v, &yq, &sq);
        for i in 0..3 {
            errors[i] += e[i];
        }
    }
    rep.precoders = Some(format_precoders(field, &per_q[0].1));
    rep.decode = Some(DecodeCheck {
        symbols: demands,
        errors,
        wire_slots: layout.wire_slots(),
    });
    let ok = rep.decode.as_ref().is_some_and(DecodeCheck::exact);
    rep.reason = if ok {
        "per-bin rank and alignment conditions hold for every q; decode exact".into()
    } else {
        "conditions hold but the simulated decode failed".into()
    };
    Ok(Attempt { report: rep, ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn inst(name: &str) -> PbnaInstance {
        PbnaInstance::new(fixtures::network(name).unwrap()).unwrap()
    }

    #[test]
    fn rate_tuple_values() {
        let r = rate_tuple(3);
        assert_eq!((r[0].symbols, r[0].slots), (4, 7));
        assert_eq!((r[1].symbols, r[2].slots), (3, 7));
    }

    #[test]
    fn dimension_bound_is_infeasible() {
        let i = inst("ex3");
        let dem = BlockDemands { n1: 1, n2: 1, n3: 1, n: 1 };
        let r = scheme2_check(&i, dem, 4, 1, Strategy::Krylov, None, Exec::Sequential).unwrap();
        assert_eq!(r.verdict, PbnaVerdict::Infeasible);
    }

    #[test]
    fn example3_reduced_b1_is_one() {
        let r = scheme3_reduced(&inst("ex3"), 8, 1).unwrap();
        assert_eq!(r.membership[0].as_deref(), Some("1"));
        assert!(!r.feasible);
    }

    #[test]
    fn example3_ratio_is_identity() {
        let i = inst("ex3");
        let f = i.field().clone();
        assert_eq!(interference_ratio_scalar(&i, 4).unwrap(), Some(f.one()));
    }

    #[test]
    fn example2_reduced_passes() {
        let r = scheme3_reduced(&inst("ex2"), 8, 1).unwrap();
        assert!(r.feasible, "{r:?}");
    }

    #[test]
    fn characteristic_dividing_block_length_is_rejected() {
        let i = inst("ex2");
        // 2n'+1 is odd, so in characteristic 2 use a field of characteristic 3
        assert!(scheme1_check(&i, 1, 1, 1, None, Exec::Sequential).is_ok());
        let net3 = NetworkSpec::from_json(fixtures::EX3, Some(&Field::new(3, 1, None).unwrap())).unwrap();
        let i3 = PbnaInstance::new(net3).unwrap();
        assert!(matches!(
            scheme1_check(&i3, 1, 1, 1, None, Exec::Sequential),
            Err(Error::Params(_))
        ));
    }

    #[test]
    fn example2_scheme1_with_published_coefficients() {
        let i = inst("ex2");
        let l = fixtures::lecs("ex2", i.field()).unwrap();
        let r = scheme1_check(&i, 3, 1, 7, Some(&l), Exec::Sequential).unwrap();
        assert_eq!(r.verdict, PbnaVerdict::Feasible, "{}", r.reason);
        assert!(r.ranks.iter().all(|c| c.rank == 7));
        assert_eq!(r.alpha.as_deref(), Some(i.field().format(i.field().nth_root_of_unity(7).unwrap()).as_str()));
    }

    #[test]
    fn example2_scheme1_random() {
        let r = scheme1_check(&inst("ex2"), 1, 8, 3, None, Exec::Sequential).unwrap();
        assert_eq!(r.verdict, PbnaVerdict::Feasible, "{}", r.reason);
    }

    #[test]
    fn example3_scheme1_is_infeasible() {
        let r = scheme1_check(&inst("ex3"), 1, 4, 3, None, Exec::Sequential).unwrap();
        assert_eq!(r.verdict, PbnaVerdict::Infeasible, "{}", r.reason);
    }

    #[test]
    fn example4_scheme2_krylov() {
        let i = inst("ex4");
        let l = fixtures::lecs("ex4", i.field()).unwrap();
        let dem = BlockDemands { n1: 5, n2: 3, n3: 3, n: 8 };
        let r = scheme2_check(&i, dem, 1, 5, Strategy::Krylov, Some(&l), Exec::Sequential).unwrap();
        assert_eq!(r.g_residual_nonzero, Some(0));
        assert_eq!(r.verdict, PbnaVerdict::Feasible, "{} {:?}", r.reason, r.ranks);
    }

    #[test]
    fn example4_scheme2_free_random() {
        let dem = BlockDemands { n1: 5, n2: 3, n3: 3, n: 8 };
        let r = scheme2_check(&inst("ex4"), dem, 4, 5, Strategy::Free, None, Exec::Sequential).unwrap();
        assert_eq!(r.verdict, PbnaVerdict::Feasible, "{}", r.reason);
    }

    #[test]
    fn example2_scheme3_pipeline() {
        let r = scheme3_pipeline(&inst("ex2"), 2, 7, 4, 9, Exec::Sequential).unwrap();
        assert_eq!(r.verdict, PbnaVerdict::Feasible, "{}", r.reason);
        assert_eq!(r.decode.unwrap().symbols, [21, 14, 14]);
    }
}
