//! Sparse multivariate polynomials and rational functions over named LEC
//! symbols, with exact and seeded randomized identity tests.
//!
//! The delay operator is represented by the reserved symbol `D`, so a
//! symbolic transfer entry M_ij(D) is just a [`MultiPoly`] containing `D`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{Embedding, Fe, Field};
use crate::polymatrix as pm;

/// Products whose expansion would exceed this many terms are compared by
/// random evaluation instead.
pub const EXACT_TERM_BUDGET: usize = 20_000;

/// A named LEC, optionally indexed by time or block.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct LecSymbol {
    pub name: String,
    pub time: Option<i64>,
    pub block: Option<i64>,
}

impl LecSymbol {
    pub fn new(name: impl Into<String>) -> Self {
        LecSymbol {
            name: name.into(),
            time: None,
            block: None,
        }
    }

    pub fn at_time(&self, t: i64) -> Self {
        LecSymbol {
            name: self.name.clone(),
            time: Some(t),
            block: None,
        }
    }

    pub fn in_block(&self, l: i64) -> Self {
        LecSymbol {
            name: self.name.clone(),
            time: None,
            block: Some(l),
        }
    }

    /// The reserved delay indeterminate.
    pub fn delay() -> Self {
        Self::new("D")
    }

    pub fn is_delay(&self) -> bool {
        self.name == "D" && self.time.is_none() && self.block.is_none()
    }

    /// Parses "a", "a@-1" or "a#2".
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, time, block) = if let Some((n, t)) = s.split_once('@') {
            let t: i64 = t
                .parse()
                .map_err(|_| Error::parse(format!("bad time index in {s:?}")))?;
            (n, Some(t), None)
        } else if let Some((n, b)) = s.split_once('#') {
            let b: i64 = b
                .parse()
                .map_err(|_| Error::parse(format!("bad block index in {s:?}")))?;
            (n, None, Some(b))
        } else {
            (s, None, None)
        };
        let valid = name
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(Error::parse(format!("invalid symbol name {s:?}")));
        }
        Ok(LecSymbol {
            name: name.to_string(),
            time,
            block,
        })
    }
}

impl fmt::Display for LecSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if let Some(t) = self.time {
            write!(f, "@{t}")?;
        }
        if let Some(b) = self.block {
            write!(f, "#{b}")?;
        }
        Ok(())
    }
}

/// Sorted (symbol, exponent) list with positive exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(Vec<(LecSymbol, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(s: LecSymbol) -> Self {
        Monomial(vec![(s, 1)])
    }

    pub fn factors(&self) -> &[(LecSymbol, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, s: &LecSymbol) -> u32 {
        self.0
            .iter()
            .find(|(x, _)| x == s)
            .map_or(0, |(_, e)| *e)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut map: BTreeMap<LecSymbol, u32> = BTreeMap::new();
        for (s, e) in self.0.iter().chain(&other.0) {
            *map.entry(s.clone()).or_default() += e;
        }
        Monomial(map.into_iter().collect())
    }

    /// Componentwise minimum of exponents.
    fn gcd(&self, other: &Self) -> Self {
        Monomial(
            self.0
                .iter()
                .filter_map(|(s, e)| {
                    let o = other.exponent(s);
                    (o > 0).then(|| (s.clone(), (*e).min(o)))
                })
                .collect(),
        )
    }

    /// self / other, assuming divisibility.
    fn div(&self, other: &Self) -> Self {
        Monomial(
            self.0
                .iter()
                .filter_map(|(s, e)| {
                    let r = e - other.exponent(s);
                    (r > 0).then(|| (s.clone(), r))
                })
                .collect(),
        )
    }

    fn format(&self) -> String {
        self.0
            .iter()
            .map(|(s, e)| {
                if *e == 1 {
                    s.to_string()
                } else {
                    format!("{s}^{e}")
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }
}

/// Sparse polynomial; never stores a zero coefficient.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct MultiPoly {
    terms: BTreeMap<Monomial, Fe>,
}

/// A map from symbols to values used for evaluation.
pub type Assignment = BTreeMap<LecSymbol, Fe>;

impl MultiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Fe) -> Self {
        let mut terms = BTreeMap::new();
        if c.raw() != 0 {
            terms.insert(Monomial::one(), c);
        }
        MultiPoly { terms }
    }

    pub fn var(field: &Field, s: LecSymbol) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Monomial::var(s), field.one());
        MultiPoly { terms }
    }

    pub fn term(c: Fe, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if c.raw() != 0 {
            terms.insert(m, c);
        }
        MultiPoly { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Fe)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Exact identically-zero test on the canonical representation.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, s: &LecSymbol) -> u32 {
        self.terms.keys().map(|m| m.exponent(s)).max().unwrap_or(0)
    }

    pub fn symbols(&self) -> BTreeSet<LecSymbol> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(s, _)| s.clone()))
            .collect()
    }

    /// The constant value if the polynomial has no variables.
    pub fn as_constant(&self, field: &Field) -> Option<Fe> {
        match self.terms.len() {
            0 => Some(field.zero()),
            1 => self.terms.get(&Monomial::one()).copied(),
            _ => None,
        }
    }

    pub fn add(&self, field: &Field, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            let e = terms.entry(m.clone()).or_insert_with(|| field.zero());
            *e = field.add(*e, *c);
            if e.raw() == 0 {
                terms.remove(m);
            }
        }
        MultiPoly { terms }
    }

    pub fn neg(&self, field: &Field) -> Self {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), field.neg(*c)))
                .collect(),
        }
    }

    pub fn sub(&self, field: &Field, other: &Self) -> Self {
        self.add(field, &other.neg(field))
    }

    pub fn mul(&self, field: &Field, other: &Self) -> Self {
        let mut terms: BTreeMap<Monomial, Fe> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = ma.mul(mb);
                let e = terms.entry(m).or_insert_with(|| field.zero());
                *e = field.add(*e, field.mul(*ca, *cb));
            }
        }
        terms.retain(|_, c| c.raw() != 0);
        MultiPoly { terms }
    }

    pub fn scale(&self, field: &Field, c: Fe) -> Self {
        if c.raw() == 0 {
            return Self::zero();
        }
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, x)| (m.clone(), field.mul(*x, c)))
                .collect(),
        }
    }

    pub fn pow(&self, field: &Field, e: u32) -> Self {
        let mut out = Self::constant(field.one());
        for _ in 0..e {
            out = out.mul(field, self);
        }
        out
    }

    /// Evaluates with every symbol looked up in `values`.
    pub fn eval(&self, field: &Field, values: &dyn Fn(&LecSymbol) -> Option<Fe>) -> Result<Fe> {
        let mut acc = field.zero();
        for (m, c) in &self.terms {
            let mut t = *c;
            for (s, e) in &m.0 {
                let v = values(s).ok_or_else(|| Error::ScheduleGap(s.to_string()))?;
                t = field.mul(t, field.pow(v, *e as u64));
            }
            acc = field.add(acc, t);
        }
        Ok(acc)
    }

    /// Evaluates in an extension field: coefficients are mapped by `emb`,
    /// symbol values live in the target field.
    pub fn eval_embedded(
        &self,
        emb: &Embedding,
        values: &dyn Fn(&LecSymbol) -> Option<Fe>,
    ) -> Result<Fe> {
        let tf = emb.target();
        let mut acc = tf.zero();
        for (m, c) in &self.terms {
            let mut t = emb.map(*c);
            for (s, e) in &m.0 {
                let v = values(s).ok_or_else(|| Error::ScheduleGap(s.to_string()))?;
                t = tf.mul(t, tf.pow(v, *e as u64));
            }
            acc = tf.add(acc, t);
        }
        Ok(acc)
    }

    /// Replaces the listed symbols by polynomials; others stay symbolic.
    pub fn substitute(&self, field: &Field, subs: &BTreeMap<LecSymbol, MultiPoly>) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut t = Self::constant(*c);
            let mut rest = Vec::new();
            for (s, e) in &m.0 {
                match subs.get(s) {
                    Some(p) => t = t.mul(field, &p.pow(field, *e)),
                    None => rest.push((s.clone(), *e)),
                }
            }
            t = t.mul(field, &Self::term(field.one(), Monomial(rest)));
            out = out.add(field, &t);
        }
        out
    }

    /// Replaces `s` by a field constant.
    pub fn substitute_value(&self, field: &Field, s: &LecSymbol, v: Fe) -> Self {
        let mut subs = BTreeMap::new();
        subs.insert(s.clone(), Self::constant(v));
        self.substitute(field, &subs)
    }

    /// Groups terms by the power of `s`: result[k] is the coefficient of s^k.
    pub fn coefficients_in(&self, s: &LecSymbol) -> Vec<MultiPoly> {
        let deg = self.degree_in(s) as usize;
        let mut out = vec![Self::zero(); if self.is_zero() { 0 } else { deg + 1 }];
        for (m, c) in &self.terms {
            let k = m.exponent(s) as usize;
            let rest = Monomial(m.0.iter().filter(|(x, _)| x != s).cloned().collect());
            out[k].terms.insert(rest, *c);
        }
        out
    }

    pub fn map_field(&self, emb: &Embedding) -> Self {
        MultiPoly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), emb.map(*c)))
                .collect(),
        }
    }

    /// Largest monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |g, m| g.gcd(m))
    }

    fn div_monomial(&self, m: &Monomial) -> Self {
        MultiPoly {
            terms: self.terms.iter().map(|(k, c)| (k.div(m), *c)).collect(),
        }
    }

    pub fn format(&self, field: &Field) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        self.terms
            .iter()
            .map(|(m, c)| {
                let mono = m.format();
                let lit = field.format(*c);
                let lit = if lit.contains('+') { format!("{{{lit}}}") } else { lit };
                match (mono.is_empty(), *c == field.one()) {
                    (true, _) => lit,
                    (false, true) => mono,
                    (false, false) => format!("{lit}*{mono}"),
                }
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Parses sums of products such as "u*D^3 + a*t*D^5 - 2*b".
    /// Field literals that are not plain integers go in braces: "{b^9}*a".
    pub fn parse(field: &Field, s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::parse("empty polynomial"));
        }
        let mut acc = Self::zero();
        let mut depth = 0i32;
        let mut start = 0usize;
        let mut neg = false;
        let bytes = s.as_bytes();
        let mut pieces = Vec::new();
        for (i, &c) in bytes.iter().enumerate() {
            match c {
                b'{' => depth += 1,
                b'}' => depth -= 1,
                b'+' | b'-' if depth == 0 && !(i > 0 && bytes[i - 1] == b'^') && !(i > 0 && bytes[i - 1] == b'@') => {
                    pieces.push((neg, &s[start..i], start));
                    neg = c == b'-';
                    start = i + 1;
                }
                _ => {}
            }
        }
        pieces.push((neg, &s[start..], start));
        for (idx, (neg, piece, at)) in pieces.into_iter().enumerate() {
            let piece = piece.trim();
            if piece.is_empty() {
                if idx == 0 && at == 0 {
                    continue;
                }
                return Err(Error::Parse {
                    line: 1,
                    column: at + 1,
                    msg: format!("empty term in {s:?}"),
                });
            }
            let mut t = Self::constant(field.one());
            for factor in piece.split('*') {
                let f = factor.trim();
                let v = if let Some(lit) = f.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                    Self::constant(field.parse_element(lit)?)
                } else if f.chars().all(|c| c.is_ascii_digit()) && !f.is_empty() {
                    let k: u64 = f.parse().map_err(|_| Error::parse(format!("bad integer {f:?}")))?;
                    Self::constant(field.scalar(k))
                } else {
                    let (sym, exp) = match f.rsplit_once('^') {
                        Some((b, e)) => (
                            b,
                            e.trim()
                                .parse::<u32>()
                                .map_err(|_| Error::parse(format!("bad exponent in {f:?}")))?,
                        ),
                        None => (f, 1),
                    };
                    Self::var(field, LecSymbol::parse(sym)?).pow(field, exp)
                };
                t = t.mul(field, &v);
            }
            acc = if neg { acc.sub(field, &t) } else { acc.add(field, &t) };
        }
        Ok(acc)
    }
}

/// Ring context for [`MultiPoly`].
#[derive(Clone, Debug)]
pub struct PolyCtx {
    pub field: Field,
}

impl pm::Ring for PolyCtx {
    type Elem = MultiPoly;
    fn zero(&self) -> MultiPoly {
        MultiPoly::zero()
    }
    fn one(&self) -> MultiPoly {
        MultiPoly::constant(self.field.one())
    }
    fn add(&self, a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
        a.add(&self.field, b)
    }
    fn sub(&self, a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
        a.sub(&self.field, b)
    }
    fn mul(&self, a: &MultiPoly, b: &MultiPoly) -> MultiPoly {
        a.mul(&self.field, b)
    }
    fn is_zero(&self, a: &MultiPoly) -> bool {
        a.is_zero()
    }
}

/// Quotient of polynomials. Kept in a light normal form: common monomial
/// factors are cancelled and the first denominator term has coefficient 1.
/// Equality in the mathematical sense is decided by cross-multiplication.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalFn {
    num: MultiPoly,
    den: MultiPoly,
}

impl RationalFn {
    pub fn new(field: &Field, num: MultiPoly, den: MultiPoly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DegenerateDenominator("denominator is identically zero".into()));
        }
        Ok(Self::normalize(field, num, den))
    }

    pub fn from_poly(field: &Field, p: MultiPoly) -> Self {
        RationalFn {
            num: p,
            den: MultiPoly::constant(field.one()),
        }
    }

    pub fn constant(field: &Field, c: Fe) -> Self {
        Self::from_poly(field, MultiPoly::constant(c))
    }

    pub fn num(&self) -> &MultiPoly {
        &self.num
    }

    pub fn den(&self) -> &MultiPoly {
        &self.den
    }

    fn normalize(field: &Field, num: MultiPoly, den: MultiPoly) -> Self {
        if num.is_zero() {
            return RationalFn {
                num,
                den: MultiPoly::constant(field.one()),
            };
        }
        let g = num.monomial_content().gcd(&den.monomial_content());
        let (num, den) = (num.div_monomial(&g), den.div_monomial(&g));
        let lead = *den.terms.values().next().expect("nonzero denominator");
        let inv = field.inv(lead).expect("nonzero");
        let (num, den) = (num.scale(field, inv), den.scale(field, inv));
        // num = c * den  =>  c / 1
        if num.terms.len() == den.terms.len() {
            let (m0, d0) = den.terms.iter().next().expect("nonzero");
            if let Some(n0) = num.terms.get(m0) {
                let c = field.mul(*n0, field.inv(*d0).expect("nonzero"));
                if num == den.scale(field, c) {
                    return RationalFn::constant(field, c);
                }
            }
        }
        RationalFn { num, den }
    }

    pub fn add(&self, field: &Field, o: &Self) -> Self {
        if self.den == o.den {
            return Self::normalize(field, self.num.add(field, &o.num), self.den.clone());
        }
        Self::normalize(
            field,
            self.num.mul(field, &o.den).add(field, &o.num.mul(field, &self.den)),
            self.den.mul(field, &o.den),
        )
    }

    pub fn neg(&self, field: &Field) -> Self {
        RationalFn {
            num: self.num.neg(field),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, field: &Field, o: &Self) -> Self {
        self.add(field, &o.neg(field))
    }

    pub fn mul(&self, field: &Field, o: &Self) -> Self {
        Self::normalize(field, self.num.mul(field, &o.num), self.den.mul(field, &o.den))
    }

    pub fn inv(&self, field: &Field) -> Result<Self> {
        if self.num.is_zero() {
            return Err(Error::DegenerateDenominator("inverse of zero".into()));
        }
        Ok(Self::normalize(field, self.den.clone(), self.num.clone()))
    }

    pub fn div(&self, field: &Field, o: &Self) -> Result<Self> {
        Ok(self.mul(field, &o.inv(field)?))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn total_degree(&self) -> u32 {
        self.num.total_degree().max(self.den.total_degree())
    }

    pub fn symbols(&self) -> BTreeSet<LecSymbol> {
        let mut s = self.num.symbols();
        s.extend(self.den.symbols());
        s
    }

    pub fn eval(&self, field: &Field, values: &dyn Fn(&LecSymbol) -> Option<Fe>) -> Result<Option<Fe>> {
        let d = self.den.eval(field, values)?;
        if d.raw() == 0 {
            return Ok(None);
        }
        Ok(Some(field.mul(self.num.eval(field, values)?, field.inv(d)?)))
    }

    pub fn substitute(&self, field: &Field, subs: &BTreeMap<LecSymbol, MultiPoly>) -> Result<Self> {
        Self::new(field, self.num.substitute(field, subs), self.den.substitute(field, subs))
    }

    pub fn format(&self, field: &Field) -> String {
        if self.den.as_constant(field) == Some(field.one()) {
            return self.num.format(field);
        }
        format!("({}) / ({})", self.num.format(field), self.den.format(field))
    }
}

/// Field-of-fractions context; makes symbolic matrices invertible by elimination.
#[derive(Clone, Debug)]
pub struct RatCtx {
    pub field: Field,
}

impl pm::Ring for RatCtx {
    type Elem = RationalFn;
    fn zero(&self) -> RationalFn {
        RationalFn::constant(&self.field, self.field.zero())
    }
    fn one(&self) -> RationalFn {
        RationalFn::constant(&self.field, self.field.one())
    }
    fn add(&self, a: &RationalFn, b: &RationalFn) -> RationalFn {
        a.add(&self.field, b)
    }
    fn sub(&self, a: &RationalFn, b: &RationalFn) -> RationalFn {
        a.sub(&self.field, b)
    }
    fn mul(&self, a: &RationalFn, b: &RationalFn) -> RationalFn {
        a.mul(&self.field, b)
    }
    fn is_zero(&self, a: &RationalFn) -> bool {
        a.is_zero()
    }
}

impl pm::DivRing for RatCtx {
    fn inv(&self, a: &RationalFn) -> Result<RationalFn> {
        a.inv(&self.field).map_err(|_| Error::Singular)
    }
}

/// Outcome of a rational-function identity test.
#[derive(Clone, Debug, PartialEq)]
pub enum Equality {
    /// Decided by exact expansion.
    EqualExact,
    /// No difference found in `trials` random evaluations; the probability
    /// that unequal functions pass is at most `failure_bound`.
    EqualProbable { failure_bound: f64, trials: u32 },
    /// Provably different. The witness is a point where the two differ
    /// (values in the evaluation field), when one was located.
    Different { witness: Option<Vec<(String, String)>> },
}

impl Equality {
    pub fn is_equal(&self) -> bool {
        !matches!(self, Equality::Different { .. })
    }
}

/// Deterministic RNG for trial `t` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t);
    rng
}

/// Decides f = g as rational functions.
///
/// The cross-multiplied difference f.num·g.den − g.num·f.den is expanded
/// exactly when the product sizes fit [`EXACT_TERM_BUDGET`]; otherwise it is
/// evaluated at `trials` random points of `eval` (an extension of `field`).
pub fn rf_probably_equal(
    field: &Field,
    f: &RationalFn,
    g: &RationalFn,
    trials: u32,
    seed: u64,
    eval: Option<&Embedding>,
) -> Result<Equality> {
    if trials == 0 {
        return Err(Error::Params("at least one trial is required".into()));
    }
    let cost = f.num.term_count() * g.den.term_count() + g.num.term_count() * f.den.term_count();
    let symbols: Vec<LecSymbol> = f.symbols().union(&g.symbols()).cloned().collect();
    let identity = Embedding::identity(field);
    let emb = eval.unwrap_or(&identity);
    let ef = emb.target().clone();
    if cost <= EXACT_TERM_BUDGET {
        let diff = f
            .num
            .mul(field, &g.den)
            .sub(field, &g.num.mul(field, &f.den));
        if diff.is_zero() {
            return Ok(Equality::EqualExact);
        }
        let witness = find_witness(f, g, &symbols, emb, trials.max(64), seed)?;
        return Ok(Equality::Different { witness });
    }
    if let Some(w) = find_witness(f, g, &symbols, emb, trials, seed)? {
        return Ok(Equality::Different { witness: Some(w) });
    }
    let deg = (f.num.total_degree() + g.den.total_degree())
        .max(g.num.total_degree() + f.den.total_degree()) as f64;
    let bound = (deg / ef.order() as f64).min(1.0).powi(trials as i32);
    Ok(Equality::EqualProbable {
        failure_bound: bound,
        trials,
    })
}

fn find_witness(
    f: &RationalFn,
    g: &RationalFn,
    symbols: &[LecSymbol],
    emb: &Embedding,
    trials: u32,
    seed: u64,
) -> Result<Option<Vec<(String, String)>>> {
    let ef = emb.target();
    for t in 0..trials {
        let mut rng = trial_rng(seed, t as u64);
        let mut point = None;
        for _ in 0..64 {
            let vals: BTreeMap<LecSymbol, Fe> =
                symbols.iter().map(|s| (s.clone(), ef.random(&mut rng))).collect();
            let look = |s: &LecSymbol| vals.get(s).copied();
            let fd = f.den.eval_embedded(emb, &look)?;
            let gd = g.den.eval_embedded(emb, &look)?;
            if fd.raw() != 0 && gd.raw() != 0 {
                point = Some((vals.clone(), fd, gd));
                break;
            }
        }
        let Some((vals, fd, gd)) = point else {
            return Err(Error::FieldTooSmall);
        };
        let look = |s: &LecSymbol| vals.get(s).copied();
        let lhs = ef.mul(f.num.eval_embedded(emb, &look)?, gd);
        let rhs = ef.mul(g.num.eval_embedded(emb, &look)?, fd);
        if lhs != rhs {
            return Ok(Some(
                vals.iter()
                    .map(|(s, v)| (s.to_string(), ef.format(*v)))
                    .collect(),
            ));
        }
    }
    Ok(None)
}

/// Returns `Some(c)` iff `f` is identically the constant `c`.
///
/// Because both parts are stored expanded, f ≡ c exactly when num = c·den,
/// which is checked directly against the candidate c read off one term.
pub fn rf_is_constant(field: &Field, f: &RationalFn) -> Option<Fe> {
    if f.num.is_zero() {
        return Some(field.zero());
    }
    let (m0, d0) = f.den.terms.iter().next()?;
    let n0 = f.num.terms.get(m0)?;
    let c = field.mul(*n0, field.inv(*d0).ok()?);
    (f.num == f.den.scale(field, c)).then_some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf64() -> Field {
        Field::parse("2^6:1+x+x^6").unwrap()
    }

    fn mp(f: &Field, s: &str) -> MultiPoly {
        MultiPoly::parse(f, s).unwrap()
    }

    #[test]
    fn identically_zero() {
        let f = gf64();
        assert!(mp(&f, "a*b - a*b").is_zero());
        assert!(!mp(&f, "a + b").is_zero());
        // det [[a, b], [2a... ]] : rows scalar multiples
        let det = mp(&f, "a*{b^3}*b").sub(&f, &mp(&f, "b*{b^3}*a"));
        assert!(det.is_zero());
    }

    #[test]
    fn symbol_literals() {
        for s in ["a", "a@-1", "a#2", "eps_12"] {
            assert_eq!(LecSymbol::parse(s).unwrap().to_string(), s);
        }
        assert!(LecSymbol::parse("1a").is_err());
        let p = mp(&gf64(), "a@-1*b#2 + {b^9}*D^3");
        assert_eq!(MultiPoly::parse(&gf64(), &p.format(&gf64())).unwrap(), p);
    }

    #[test]
    fn equality_tests() {
        let f = gf64();
        let r = |n: &str, d: &str| RationalFn::new(&f, mp(&f, n), mp(&f, d)).unwrap();
        let eta = r("a*b + c", "a + b*c");
        assert_eq!(
            rf_probably_equal(&f, &eta, &eta, 4, 1, None).unwrap(),
            Equality::EqualExact
        );
        let h = mp(&f, "1 + a*c");
        let scaled = RationalFn::new(&f, eta.num().mul(&f, &h), eta.den().mul(&f, &h)).unwrap();
        assert_eq!(
            rf_probably_equal(&f, &eta, &scaled, 4, 1, None).unwrap(),
            Equality::EqualExact
        );
        let a = r("a", "1");
        let b = r("b", "1");
        match rf_probably_equal(&f, &a, &b, 4, 1, None).unwrap() {
            Equality::Different { witness } => assert!(witness.is_some()),
            other => panic!("expected a difference, got {other:?}"),
        }
        assert_eq!(rf_is_constant(&f, &r("a*b", "a*b")), Some(f.one()));
        assert_eq!(rf_is_constant(&f, &r("a", "b")), None);
        assert!(RationalFn::new(&f, mp(&f, "a"), MultiPoly::zero()).is_err());
    }
}
