//! Solvability of a demand set: zero interference plus invertibility of the
//! demanded submatrices, the product f(D) of their determinants, its values at
//! DFT points, and a search for a field extension and block length at which
//! the transform scheme works.

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::galois::{Embedding, Fe, Field};
use crate::netmodel::{transfer_matrices, LecAssignment, NetworkSpec, TransferSet};
use crate::par::{find_first, Exec};
use crate::polymatrix::{polymat_det, DelayPoly, PolyMatrix};
use crate::symbolic::trial_rng;
use crate::transform::DftCtx;

/// A nonzero transfer entry from an undemanded process.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub source: usize,
    pub sink: usize,
    pub process: usize,
    pub output: usize,
    /// Lowest delay at which the leak appears.
    pub delay: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Solvable,
    Unsolvable,
    SolvableTransform,
    TransformInfeasible,
    /// (D − 1) divides f(D): no block length can work.
    Impossible,
    BudgetExhausted,
}

#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    pub field: Field,
    pub zero_interference: bool,
    pub violations: Vec<Violation>,
    pub invertible: Vec<bool>,
    pub determinants: Vec<DelayPoly>,
    pub f_poly: DelayPoly,
    pub d_min: usize,
    pub d_max: usize,
    pub verdict: Verdict,
    /// Field in which the DFT points live (may be an extension).
    pub eval_field: Option<Field>,
    pub n: Option<usize>,
    pub alpha: Option<Fe>,
    /// (t, f(α^t)) for t = 0..n−1.
    pub f_at_points: Vec<(usize, Fe)>,
    /// Whether n > d_max, so the cyclic prefix covers every delay.
    pub prefix_fits: Option<bool>,
    pub note: Option<String>,
}

impl FeasibilityReport {
    pub fn to_json(&self) -> serde_json::Value {
        let f = &self.field;
        let ef = self.eval_field.as_ref().unwrap_or(f);
        json!({
            "verdict": self.verdict,
            "field": f.literal(),
            "zero_interference": self.zero_interference,
            "violations": self.violations,
            "invertible": self.invertible,
            "determinants": self.determinants.iter().map(|d| d.format(f)).collect::<Vec<_>>(),
            "f": self.f_poly.format(f),
            "d_min": self.d_min,
            "d_max": self.d_max,
            "eval_field": self.eval_field.as_ref().map(|e| e.literal()),
            "n": self.n,
            "alpha": self.alpha.map(|a| ef.format(a)),
            "f_at_points": self.f_at_points.iter().map(|(t, v)| json!([t, ef.format(*v)])).collect::<Vec<_>>(),
            "prefix_fits": self.prefix_fits,
            "note": self.note,
        })
    }
}

/// Global process indices (source, process) in source-major order.
fn process_list(net: &NetworkSpec) -> Vec<(usize, usize)> {
    net.sources
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.processes).map(move |l| (i, l)))
        .collect()
}

/// The square matrix M′_j formed by the demanded columns of sink j.
pub fn demanded_submatrix(net: &NetworkSpec, ts: &TransferSet, j: usize) -> Result<PolyMatrix> {
    let demands = net.demands(j);
    let nu = net.sinks[j].outputs;
    if demands.len() != nu {
        return Err(Error::MalformedDemands(format!(
            "sink {} has {} outputs but demands {} processes",
            net.sink_name(j),
            nu,
            demands.len()
        )));
    }
    let cols: Vec<Vec<DelayPoly>> = demands
        .iter()
        .map(|&(i, l)| ts.grid[i][j].column(l))
        .collect();
    Ok(PolyMatrix::from_fn(nu, nu, |r, c| cols[c][r].clone()))
}

fn zero_interference(net: &NetworkSpec, ts: &TransferSet) -> Vec<Violation> {
    let mut out = Vec::new();
    for j in 0..net.sinks.len() {
        let demands = net.demands(j);
        for (i, l) in process_list(net) {
            if demands.contains(&(i, l)) {
                continue;
            }
            for (o, p) in ts.grid[i][j].column(l).iter().enumerate() {
                if let Some(d) = p.low_degree() {
                    out.push(Violation {
                        source: i,
                        sink: j,
                        process: l,
                        output: o,
                        delay: d,
                    });
                }
            }
        }
    }
    out
}

/// Zero interference and invertibility of every demanded submatrix.
pub fn check_classical(net: &NetworkSpec, lecs: &LecAssignment) -> Result<FeasibilityReport> {
    let ts = transfer_matrices(net, lecs)?;
    check_transfer(net, &ts)
}

pub fn check_transfer(net: &NetworkSpec, ts: &TransferSet) -> Result<FeasibilityReport> {
    let field = ts.field.clone();
    let violations = zero_interference(net, ts);
    let mut determinants = Vec::new();
    for j in 0..net.sinks.len() {
        let m = demanded_submatrix(net, ts, j)?;
        determinants.push(polymat_det(&field, &m)?);
    }
    let invertible: Vec<bool> = determinants.iter().map(|d| !d.is_zero()).collect();
    let f_poly = determinants
        .iter()
        .fold(DelayPoly::constant(field.one()), |acc, d| acc.mul(&field, d));
    let ok = violations.is_empty() && invertible.iter().all(|&b| b);
    Ok(FeasibilityReport {
        field,
        zero_interference: violations.is_empty(),
        violations,
        invertible,
        determinants,
        f_poly,
        d_min: ts.d_min,
        d_max: ts.d_max,
        verdict: if ok { Verdict::Solvable } else { Verdict::Unsolvable },
        eval_field: None,
        n: None,
        alpha: None,
        f_at_points: Vec::new(),
        prefix_fits: None,
        note: None,
    })
}

/// f(D) = Π_j det M′_j(D), computed from the raw (unnormalized) transfers.
pub fn f_of_d(net: &NetworkSpec, lecs: &LecAssignment) -> Result<DelayPoly> {
    Ok(check_classical(net, lecs)?.f_poly)
}

/// Evaluates f at every power of the DFT root. Lifts into the DFT's field
/// when that is an extension of the network field.
pub fn transform_feasible(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    dft: &DftCtx,
) -> Result<FeasibilityReport> {
    let mut rep = check_classical(net, lecs)?;
    let emb = Embedding::new(&rep.field, &dft.field)?;
    let f_big = rep.f_poly.map(&emb);
    rep.f_at_points = (0..dft.n)
        .map(|t| (t, f_big.eval(&dft.field, dft.alpha_pow(t as i64))))
        .collect();
    let all_nonzero = rep.f_at_points.iter().all(|(_, v)| v.raw() != 0);
    rep.verdict = if rep.zero_interference && all_nonzero {
        Verdict::SolvableTransform
    } else {
        Verdict::TransformInfeasible
    };
    rep.eval_field = Some(dft.field.clone());
    rep.n = Some(dft.n);
    rep.alpha = Some(dft.alpha);
    rep.prefix_fits = Some(dft.n > rep.d_max);
    Ok(rep)
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Upper bound on d_max / n.
    pub target_rate_loss: f64,
    pub max_degree: u32,
    pub max_n: u64,
    pub exec: Exec,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            target_rate_loss: 1.0,
            max_degree: 24,
            max_n: 4096,
            exec: Exec::default(),
        }
    }
}

fn divisors(x: u64) -> Vec<u64> {
    let mut d = Vec::new();
    let mut k = 1;
    while k * k <= x {
        if x % k == 0 {
            d.push(k);
            if k * k != x {
                d.push(x / k);
            }
        }
        k += 1;
    }
    d.sort_unstable();
    d
}

/// Looks for an extension degree b (a multiple of the base degree) and a
/// block length n | p^b − 1 with n > d_max and d_max/n within the target,
/// such that f(α^t) ≠ 0 for every t. Candidates are tried in increasing b,
/// then increasing n.
pub fn exists_transform_code(
    net: &NetworkSpec,
    lecs: &LecAssignment,
    opts: &SearchOptions,
) -> Result<FeasibilityReport> {
    let mut rep = check_classical(net, lecs)?;
    if !rep.zero_interference {
        rep.verdict = Verdict::Unsolvable;
        rep.note = Some("zero-interference fails for every block length".into());
        return Ok(rep);
    }
    let base = rep.field.clone();
    if rep.f_poly.eval(&base, base.one()).raw() == 0 {
        rep.verdict = Verdict::Impossible;
        rep.note = Some("f(1) = 0, so (D - 1) divides f(D)".into());
        return Ok(rep);
    }
    let p = base.characteristic();
    let m = base.degree();
    let mut b = m;
    while b <= opts.max_degree {
        let big = if b == m { base.clone() } else { base.extension(b)? };
        let emb = Embedding::new(&base, &big)?;
        let f_big = rep.f_poly.map(&emb);
        let candidates: Vec<u64> = divisors(big.order() - 1)
            .into_iter()
            .filter(|&n| {
                n <= opts.max_n
                    && n > rep.d_max as u64
                    && (rep.d_max as f64) / (n as f64) <= opts.target_rate_loss
            })
            .collect();
        let hit = find_first(opts.exec, candidates.len(), |c| {
            let n = candidates[c] as usize;
            let dft = DftCtx::new(&big, n, None).ok()?;
            let vals: Vec<(usize, Fe)> = (0..n)
                .map(|t| (t, f_big.eval(&big, dft.alpha_pow(t as i64))))
                .collect();
            vals.iter().all(|(_, v)| v.raw() != 0).then_some((dft, vals))
        });
        if let Some((_, (dft, vals))) = hit {
            rep.verdict = Verdict::SolvableTransform;
            rep.eval_field = Some(big);
            rep.n = Some(dft.n);
            rep.alpha = Some(dft.alpha);
            rep.f_at_points = vals;
            rep.prefix_fits = Some(true);
            return Ok(rep);
        }
        b += m;
    }
    rep.verdict = Verdict::BudgetExhausted;
    rep.note = Some(format!(
        "no candidate with extension degree <= {} and n <= {} over characteristic {p}",
        opts.max_degree, opts.max_n
    ));
    Ok(rep)
}

/// Outcome of the randomized symbolic invertibility test for one sink.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolicInvertibility {
    /// True once some sample gave a nonzero determinant (certain).
    pub nonzero: bool,
    pub trials: usize,
    /// Probability that an identically-nonzero determinant looked zero in
    /// every trial; zero when `nonzero` holds.
    pub failure_bound: f64,
}

/// Zero interference and determinant non-vanishing with LECs left free:
/// symbols are sampled in a large extension, `trials` times per sink.
pub fn check_symbolic(
    net: &NetworkSpec,
    trials: usize,
    seed: u64,
) -> Result<(Vec<Violation>, Vec<SymbolicInvertibility>)> {
    let sym = crate::netmodel::symbolic_transfer(net)?;
    let mut violations = Vec::new();
    for j in 0..net.sinks.len() {
        let demands = net.demands(j);
        for (i, l) in process_list(net) {
            if demands.contains(&(i, l)) {
                continue;
            }
            for o in 0..net.sinks[j].outputs {
                let e = sym.grid[i][j].get(o, l);
                if !e.is_zero() {
                    let d = crate::symbolic::LecSymbol::delay();
                    let delay = e.terms().map(|(m, _)| m.exponent(&d)).min().unwrap_or(0) as usize;
                    violations.push(Violation {
                        source: i,
                        sink: j,
                        process: l,
                        output: o,
                        delay,
                    });
                }
            }
        }
    }
    let base = &net.field;
    let m = base.degree();
    let mut b = m;
    while (base.characteristic() as f64).powi(b as i32) < 1e6 && b + m <= 40 {
        b += m;
    }
    let big = if b == m { base.clone() } else { base.extension(b)? };
    let emb = Embedding::new(base, &big)?;
    let lifted = net.map_field(&emb);
    let symbols = net.symbols();
    // per-sink degree bound in the LEC symbols and D
    let mut results = vec![
        SymbolicInvertibility {
            nonzero: false,
            trials: 0,
            failure_bound: 1.0
        };
        net.sinks.len()
    ];
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let lecs = LecAssignment::random(&big, &symbols, &mut rng);
        let ts = transfer_matrices(&lifted, &lecs)?;
        for (j, res) in results.iter_mut().enumerate() {
            if res.nonzero {
                continue;
            }
            res.trials += 1;
            let det = polymat_det(&big, &demanded_submatrix(&lifted, &ts, j)?)?;
            if !det.is_zero() {
                res.nonzero = true;
                res.failure_bound = 0.0;
            }
        }
    }
    for (j, res) in results.iter_mut().enumerate() {
        if !res.nonzero {
            let nu = net.sinks[j].outputs as f64;
            let deg = nu * (symbols.len() as f64 + 1.0);
            res.failure_bound = (deg / big.order() as f64).min(1.0).powi(res.trials as i32);
        }
    }
    Ok((violations, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::LecMode;
    use crate::symbolic::LecSymbol;

    fn net(text: &str) -> NetworkSpec {
        NetworkSpec::from_json(text, None).unwrap()
    }

    const PARALLEL: &str = r#"{"field":"2","edges":[
        {"id":"a","tail":"S","head":"T"},
        {"id":"b","tail":"S","head":"M"},
        {"id":"c","tail":"M","head":"T"}],
        "sources":[{"node":"S"}],"sinks":[{"node":"T"}],"connections":[["S","T",0]]}"#;

    fn ones(n: &NetworkSpec) -> LecAssignment {
        LecAssignment::uniform(&n.field, &n.symbols(), n.field.one())
    }

    #[test]
    fn parallel_paths_give_d_plus_d2_and_no_transform() {
        let n = net(PARALLEL);
        let lecs = ones(&n);
        let f = f_of_d(&n, &lecs).unwrap();
        assert_eq!(f.format(&n.field), "D + D^2");
        let rep = exists_transform_code(&n, &lecs, &SearchOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Impossible);
        let big = n.field.extension(2).unwrap();
        let dft = DftCtx::new(&big, 3, None).unwrap();
        let rep = transform_feasible(&n, &lecs, &dft).unwrap();
        assert_eq!(rep.verdict, Verdict::TransformInfeasible);
        assert_eq!(rep.f_at_points[0].1.raw(), 0);
    }

    #[test]
    fn single_edge_is_lec_times_d() {
        let n = net(r#"{"field":"2^3","edges":[{"tail":"S","head":"T","lec":"k"}],
            "sources":[{"node":"S"}],"sinks":[{"node":"T"}],"connections":[["S","T",0]]}"#);
        let mut lecs = LecAssignment::new(&n.field, LecMode::TimeInvariant);
        let v = n.field.primitive();
        lecs.values.insert(LecSymbol::new("k"), v);
        let rep = check_classical(&n, &lecs).unwrap();
        assert_eq!(rep.verdict, Verdict::Solvable);
        assert_eq!(rep.f_poly, DelayPoly::monomial(v, 1));
        let one = DftCtx::new(&n.field, 1, None).unwrap();
        assert_eq!(transform_feasible(&n, &lecs, &one).unwrap().verdict, Verdict::SolvableTransform);
        let rep = exists_transform_code(&n, &lecs, &SearchOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::SolvableTransform);
        assert_eq!(rep.n, Some(1));
    }

    #[test]
    fn malformed_demands_rejected() {
        let n = net(r#"{"field":"2","edges":[{"tail":"S","head":"T"}],
            "sources":[{"node":"S"}],"sinks":[{"node":"T"}]}"#);
        assert!(matches!(check_classical(&n, &ones(&n)), Err(Error::MalformedDemands(_))));
    }

    #[test]
    fn symbolic_check_finds_leak() {
        let n = net(r#"{"field":"2","edges":[{"tail":"S","head":"T","lec":"a"},{"tail":"U","head":"T","lec":"b"}],
            "sources":[{"node":"S"},{"node":"U"}],"sinks":[{"node":"T"}],"connections":[["S","T",0]]}"#);
        let (viol, inv) = check_symbolic(&n, 4, 1).unwrap();
        assert_eq!(viol.len(), 1);
        assert!(inv[0].nonzero);
    }
}
