//! Arithmetic in GF(p^m).
//!
//! Elements are packed as base-p integers: the coefficient of x^i of the
//! polynomial-basis representation is the i-th base-p digit. Every element
//! carries the tag of the context it was created in, and arithmetic checks it.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest field order for which exp/log tables are built.
const TABLE_LIMIT: u64 = 1 << 16;
/// Largest supported field order.
const ORDER_LIMIT: u64 = 1 << 48;

/// A field element: packed representation plus the tag of its context.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Fe {
    tag: u64,
    v: u64,
}

impl Fe {
    /// The packed base-p representation.
    pub fn raw(self) -> u64 {
        self.v
    }

    pub fn tag(self) -> u64 {
        self.tag
    }

    pub(crate) fn with_raw(self, v: u64) -> Fe {
        Fe { tag: self.tag, v }
    }
}

struct Tables {
    exp: Vec<u32>,
    log: Vec<u32>,
}

/// Immutable description of GF(p^m).
pub struct FieldCtx {
    p: u64,
    m: u32,
    q: u64,
    modulus: Vec<u64>,
    primitive: u64,
    tag: u64,
    q1_factors: Vec<u64>,
    tables: Option<Tables>,
}

/// Shared handle to a field context. Cloning is cheap.
#[derive(Clone)]
pub struct Field(Arc<FieldCtx>);

impl Deref for Field {
    type Target = FieldCtx;
    fn deref(&self) -> &FieldCtx {
        &self.0
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.tag == other.tag
    }
}
impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({})", self.literal())
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal())
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Distinct prime factors by trial division.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `m` with `n | p^m - 1`, or `None` when `p | n`.
pub fn min_extension_for_order(p: u64, n: u64) -> Option<u32> {
    assert!(n >= 1, "n must be positive");
    if n == 1 {
        return Some(1);
    }
    if n % p == 0 {
        return None;
    }
    let mut acc = p % n;
    let mut m = 1u32;
    while acc != 1 {
        acc = ((acc as u128 * p as u128) % n as u128) as u64;
        m += 1;
    }
    Some(m)
}

// ---- polynomials over GF(p), low-to-high coefficient vectors ----

mod zp {
    pub fn trim(a: &mut Vec<u64>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    pub fn inv(a: u64, p: u64) -> u64 {
        pow(a, p - 2, p)
    }

    pub fn pow(mut a: u64, mut e: u64, p: u64) -> u64 {
        let mut r = 1u64 % p;
        a %= p;
        while e > 0 {
            if e & 1 == 1 {
                r = (r as u128 * a as u128 % p as u128) as u64;
            }
            a = (a as u128 * a as u128 % p as u128) as u64;
            e >>= 1;
        }
        r
    }

    pub fn rem(a: &[u64], f: &[u64], p: u64) -> Vec<u64> {
        let mut r = a.to_vec();
        trim(&mut r);
        let df = f.len() - 1;
        let lead_inv = inv(f[df], p);
        while r.len() > df {
            let top = r.len() - 1;
            let c = (r[top] as u128 * lead_inv as u128 % p as u128) as u64;
            let shift = top - df;
            for (i, &fi) in f.iter().enumerate() {
                let sub = (c as u128 * fi as u128 % p as u128) as u64;
                r[shift + i] = (r[shift + i] + p - sub) % p;
            }
            trim(&mut r);
        }
        r
    }

    pub fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = ((out[i + j] as u128 + x as u128 * y as u128) % p as u128) as u64;
            }
        }
        trim(&mut out);
        out
    }

    pub fn mulmod(a: &[u64], b: &[u64], f: &[u64], p: u64) -> Vec<u64> {
        rem(&mul(a, b, p), f, p)
    }

    pub fn powmod(a: &[u64], mut e: u64, f: &[u64], p: u64) -> Vec<u64> {
        let mut base = rem(a, f, p);
        let mut r = vec![1u64];
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(&r, &base, f, p);
            }
            base = mulmod(&base, &base, f, p);
            e >>= 1;
        }
        r
    }

    pub fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let n = a.len().max(b.len());
        let mut out: Vec<u64> = (0..n)
            .map(|i| {
                let x = a.get(i).copied().unwrap_or(0);
                let y = b.get(i).copied().unwrap_or(0);
                (x + p - y) % p
            })
            .collect();
        trim(&mut out);
        out
    }

    pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        trim(&mut x);
        trim(&mut y);
        while !y.is_empty() {
            let r = rem(&x, &y, p);
            x = y;
            y = r;
        }
        x
    }

    /// Ben-Or irreducibility test for a monic polynomial.
    pub fn is_irreducible(f: &[u64], p: u64) -> bool {
        let m = f.len() - 1;
        if m == 0 {
            return false;
        }
        if m == 1 {
            return true;
        }
        let x = vec![0u64, 1];
        let mut h = x.clone();
        for _ in 1..=m / 2 {
            h = powmod(&h, p, f, p);
            let g = gcd(f, &sub(&h, &x, p), p);
            if g.len() != 1 {
                return false;
            }
        }
        true
    }
}

fn fnv(parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &x in parts {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

fn poly_literal(coeffs: &[u64]) -> String {
    let mut parts = Vec::new();
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mono = match i {
            0 => String::new(),
            1 => "x".to_string(),
            _ => format!("x^{i}"),
        };
        parts.push(match (c, i) {
            (_, 0) => c.to_string(),
            (1, _) => mono,
            _ => format!("{c}*{mono}"),
        });
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join("+")
    }
}

impl Field {
    /// Builds GF(p^m). Without an explicit modulus the lexicographically least
    /// monic irreducible of degree `m` is used (lower coefficients compared as
    /// a base-p number, highest coefficient most significant).
    pub fn new(p: u64, m: u32, modulus: Option<Vec<u64>>) -> Result<Field> {
        if !is_prime(p) || p >= (1 << 31) {
            return Err(Error::NotPrime(p));
        }
        if m == 0 {
            return Err(Error::InvalidField("extension degree must be at least 1".into()));
        }
        let q = p
            .checked_pow(m)
            .filter(|&q| q <= ORDER_LIMIT)
            .ok_or_else(|| Error::InvalidField(format!("{p}^{m} exceeds the supported order")))?;
        let modulus = match modulus {
            Some(mut f) => {
                for c in f.iter_mut() {
                    *c %= p;
                }
                zp::trim(&mut f);
                if f.len() != m as usize + 1 {
                    return Err(Error::InvalidField(format!(
                        "modulus {} does not have degree {m}",
                        poly_literal(&f)
                    )));
                }
                let lead = zp::inv(f[m as usize], p);
                for c in f.iter_mut() {
                    *c = (*c as u128 * lead as u128 % p as u128) as u64;
                }
                if !zp::is_irreducible(&f, p) {
                    return Err(Error::ReducibleModulus(poly_literal(&f)));
                }
                f
            }
            None => default_modulus(p, m),
        };
        let mut tag_parts = vec![p, m as u64];
        tag_parts.extend(&modulus);
        let mut ctx = FieldCtx {
            p,
            m,
            q,
            modulus,
            primitive: 1,
            tag: fnv(&tag_parts),
            q1_factors: prime_factors(q - 1),
            tables: None,
        };
        ctx.primitive = ctx.find_primitive();
        if q <= TABLE_LIMIT {
            ctx.tables = Some(ctx.build_tables());
        }
        Ok(Field(Arc::new(ctx)))
    }

    /// Parses "p^m:poly", "p^m" or a bare prime "p".
    pub fn parse(lit: &str) -> Result<Field> {
        let lit = lit.trim();
        let (head, modulus) = match lit.split_once(':') {
            Some((h, m)) => (h.trim(), Some(m.trim())),
            None => (lit, None),
        };
        let (p, m) = match head.split_once('^') {
            Some((p, m)) => (p.trim(), m.trim()),
            None => (head, "1"),
        };
        let p: u64 = p
            .parse()
            .map_err(|_| Error::parse(format!("bad characteristic in field literal {lit:?}")))?;
        let m: u32 = m
            .parse()
            .map_err(|_| Error::parse(format!("bad extension degree in field literal {lit:?}")))?;
        let modulus = match modulus {
            Some(s) => Some(parse_zp_poly(s, p)?),
            None => None,
        };
        Field::new(p, m, modulus)
    }

    /// The same characteristic with a default modulus of degree `b`.
    pub fn extension(&self, b: u32) -> Result<Field> {
        Field::new(self.p, b, None)
    }
}

fn default_modulus(p: u64, m: u32) -> Vec<u64> {
    let span = p.pow(m);
    for r in 0..span {
        let mut f = Vec::with_capacity(m as usize + 1);
        let mut x = r;
        for _ in 0..m {
            f.push(x % p);
            x /= p;
        }
        f.push(1);
        if zp::is_irreducible(&f, p) {
            return f;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

/// Parses a polynomial in `x` with integer coefficients reduced mod p.
fn parse_zp_poly(s: &str, p: u64) -> Result<Vec<u64>> {
    let mut out: Vec<u64> = Vec::new();
    for (sign, term) in split_signed_terms(s)? {
        let (coef, deg) = parse_x_term(term)?;
        let coef = coef % p;
        let coef = if sign { (p - coef) % p } else { coef };
        if out.len() <= deg {
            out.resize(deg + 1, 0);
        }
        out[deg] = (out[deg] + coef) % p;
    }
    zp::trim(&mut out);
    Ok(out)
}

/// Splits "a+b-c" into (negated, term) pairs.
fn split_signed_terms(s: &str) -> Result<Vec<(bool, &str)>> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::parse("empty expression"));
    }
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut neg = false;
    let mut depth = 0i32;
    for (i, &c) in bytes.iter().enumerate() {
        match c {
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            b'+' | b'-' if depth == 0 && !(i > 0 && bytes[i - 1] == b'^') => {
                let term = s[start..i].trim();
                if term.is_empty() {
                    // only a leading sign may precede an empty term
                    if !out.is_empty() || i != 0 {
                        return Err(Error::parse(format!("empty term in {s:?}")));
                    }
                } else {
                    out.push((neg, term));
                }
                neg = c == b'-';
                start = i + 1;
            }
            _ => {}
        }
    }
    let last = s[start..].trim();
    if last.is_empty() {
        return Err(Error::parse(format!("dangling operator in {s:?}")));
    }
    out.push((neg, last));
    Ok(out)
}

fn parse_x_term(term: &str) -> Result<(u64, usize)> {
    let (coef, mono) = match term.split_once('*') {
        Some((c, m)) => (c.trim(), m.trim()),
        None if term.starts_with('x') => ("1", term),
        None => (term, ""),
    };
    let coef: u64 = coef
        .parse()
        .map_err(|_| Error::parse(format!("bad coefficient in term {term:?}")))?;
    let deg = if mono.is_empty() {
        0
    } else if mono == "x" {
        1
    } else if let Some(e) = mono.strip_prefix("x^") {
        e.trim()
            .parse()
            .map_err(|_| Error::parse(format!("bad exponent in term {term:?}")))?
    } else {
        return Err(Error::parse(format!("unrecognized term {term:?}")));
    };
    Ok((coef, deg))
}

impl FieldCtx {
    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.m
    }

    /// Number of elements, p^m.
    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn tag(&self) -> u64 {
        self.tag
    }

    /// The context literal, "p^m:poly".
    pub fn literal(&self) -> String {
        format!("{}^{}:{}", self.p, self.m, poly_literal(&self.modulus))
    }

    fn fe(&self, v: u64) -> Fe {
        Fe { tag: self.tag, v }
    }

    pub fn zero(&self) -> Fe {
        self.fe(0)
    }

    pub fn one(&self) -> Fe {
        self.fe(1)
    }

    pub fn primitive(&self) -> Fe {
        self.fe(self.primitive)
    }

    /// Element of the prime subfield congruent to `k`.
    pub fn from_int(&self, k: i64) -> Fe {
        self.fe(k.rem_euclid(self.p as i64) as u64)
    }

    /// Element with the given packed representation.
    pub fn from_raw(&self, v: u64) -> Result<Fe> {
        if v >= self.q {
            return Err(Error::InvalidField(format!("raw value {v} out of range")));
        }
        Ok(self.fe(v))
    }

    /// Element with the given polynomial-basis coefficients (low to high).
    pub fn from_coeffs(&self, coeffs: &[u64]) -> Fe {
        let red = zp::rem(coeffs, &self.modulus, self.p);
        self.fe(self.pack(&red))
    }

    /// Polynomial-basis coefficients, always of length m.
    pub fn coeffs(&self, a: Fe) -> Vec<u64> {
        self.unpack(a.v)
    }

    pub fn belongs(&self, a: Fe) -> bool {
        a.tag == self.tag
    }

    /// Fails unless `a` was created in this context.
    pub fn check(&self, a: Fe) -> Result<Fe> {
        if self.belongs(a) {
            Ok(a)
        } else {
            Err(Error::ContextMismatch)
        }
    }

    #[inline]
    fn same(&self, a: Fe, b: Fe) {
        assert!(
            a.tag == self.tag && b.tag == self.tag,
            "field elements from different contexts were combined"
        );
    }

    fn unpack(&self, mut v: u64) -> Vec<u64> {
        let mut d = Vec::with_capacity(self.m as usize);
        for _ in 0..self.m {
            d.push(v % self.p);
            v /= self.p;
        }
        d
    }

    fn pack(&self, digits: &[u64]) -> u64 {
        digits.iter().rev().fold(0u64, |acc, &d| acc * self.p + d)
    }

    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        self.same(a, b);
        if self.p == 2 {
            return self.fe(a.v ^ b.v);
        }
        if self.m == 1 {
            return self.fe((a.v + b.v) % self.p);
        }
        let (mut x, mut y) = (a.v, b.v);
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.m {
            out += ((x % self.p + y % self.p) % self.p) * place;
            x /= self.p;
            y /= self.p;
            place = place.wrapping_mul(self.p);
        }
        self.fe(out)
    }

    pub fn neg(&self, a: Fe) -> Fe {
        self.same(a, a);
        if self.p == 2 {
            return a;
        }
        let d: Vec<u64> = self
            .unpack(a.v)
            .into_iter()
            .map(|c| (self.p - c) % self.p)
            .collect();
        self.fe(self.pack(&d))
    }

    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        self.same(a, b);
        if a.v == 0 || b.v == 0 {
            return self.zero();
        }
        if let Some(t) = &self.tables {
            let s = t.log[a.v as usize] as usize + t.log[b.v as usize] as usize;
            return self.fe(t.exp[s] as u64);
        }
        self.fe(self.mul_raw(a.v, b.v))
    }

    fn mul_raw(&self, a: u64, b: u64) -> u64 {
        if self.m == 1 {
            return (a as u128 * b as u128 % self.p as u128) as u64;
        }
        if self.p == 2 {
            let mut prod: u128 = 0;
            for i in 0..self.m {
                if (b >> i) & 1 == 1 {
                    prod ^= (a as u128) << i;
                }
            }
            let m = self.m as usize;
            let low_mod: u128 = self
                .modulus
                .iter()
                .take(m)
                .enumerate()
                .fold(0u128, |acc, (i, &c)| acc | ((c as u128) << i));
            for i in (m..2 * m - 1).rev() {
                if (prod >> i) & 1 == 1 {
                    prod ^= 1u128 << i;
                    prod ^= low_mod << (i - m);
                }
            }
            return prod as u64;
        }
        let r = zp::mulmod(&self.unpack(a), &self.unpack(b), &self.modulus, self.p);
        self.pack(&r)
    }

    pub fn pow(&self, a: Fe, e: u64) -> Fe {
        self.same(a, a);
        if e == 0 {
            return self.one();
        }
        if a.v == 0 {
            return self.zero();
        }
        if let Some(t) = &self.tables {
            let l = (t.log[a.v as usize] as u64 as u128 * e as u128 % (self.q - 1) as u128) as usize;
            return self.fe(t.exp[l] as u64);
        }
        let mut base = a.v;
        let mut e = e;
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul_raw(r, base);
            }
            base = self.mul_raw(base, base);
            e >>= 1;
        }
        self.fe(r)
    }

    /// Power with a possibly negative exponent (requires `a != 0` when `e < 0`).
    pub fn pow_i(&self, a: Fe, e: i64) -> Result<Fe> {
        if e >= 0 {
            Ok(self.pow(a, e as u64))
        } else {
            Ok(self.pow(self.inv(a)?, e.unsigned_abs()))
        }
    }

    pub fn inv(&self, a: Fe) -> Result<Fe> {
        self.check(a)?;
        if a.v == 0 {
            return Err(Error::ZeroElement);
        }
        if let Some(t) = &self.tables {
            let l = t.log[a.v as usize] as u64;
            let k = (self.q - 1 - l) % (self.q - 1);
            return Ok(self.fe(t.exp[k as usize] as u64));
        }
        Ok(self.pow(a, self.q - 2))
    }

    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn is_zero(&self, a: Fe) -> bool {
        a.v == 0
    }

    /// The integer `k` as a field element (k·1).
    pub fn scalar(&self, k: u64) -> Fe {
        self.fe(k % self.p)
    }

    /// Multiplicative order of a nonzero element.
    pub fn element_order(&self, a: Fe) -> Result<u64> {
        self.check(a)?;
        if a.v == 0 {
            return Err(Error::ZeroElement);
        }
        let mut ord = self.q - 1;
        for &r in &self.q1_factors {
            while ord % r == 0 && self.pow(a, ord / r) == self.one() {
                ord /= r;
            }
        }
        Ok(ord)
    }

    /// primitive^((q-1)/n), an element of order exactly n.
    pub fn nth_root_of_unity(&self, n: u64) -> Result<Fe> {
        if n == 0 || (self.q - 1) % n != 0 {
            let suggestion = if n == 0 {
                "none".to_string()
            } else {
                match min_extension_for_order(self.p, n) {
                    Some(b) => format!("GF({}^{b})", self.p),
                    None => format!("impossible since {} divides {n}", self.p),
                }
            };
            return Err(Error::NoRootOfUnity {
                n,
                q_minus_1: self.q - 1,
                suggestion,
            });
        }
        Ok(self.pow(self.primitive(), (self.q - 1) / n))
    }

    fn find_primitive(&self) -> u64 {
        if self.q == 2 {
            return 1;
        }
        let n = self.q - 1;
        'cand: for v in 1..self.q {
            for &r in &self.q1_factors {
                let mut base = v;
                let mut e = n / r;
                let mut acc = 1u64;
                while e > 0 {
                    if e & 1 == 1 {
                        acc = self.mul_raw(acc, base);
                    }
                    base = self.mul_raw(base, base);
                    e >>= 1;
                }
                if acc == 1 {
                    continue 'cand;
                }
            }
            return v;
        }
        unreachable!("the multiplicative group of a finite field is cyclic")
    }

    fn build_tables(&self) -> Tables {
        let n = (self.q - 1) as usize;
        let mut exp = vec![0u32; 2 * n.max(1)];
        let mut log = vec![0u32; self.q as usize];
        let mut x = 1u64;
        for (i, slot) in exp.iter_mut().enumerate().take(n) {
            *slot = x as u32;
            log[x as usize] = i as u32;
            x = self.mul_raw(x, self.primitive);
        }
        for i in n..2 * n {
            exp[i] = exp[i - n];
        }
        Tables { exp, log }
    }

    /// Uniformly random element.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        self.fe(rng.gen_range(0..self.q))
    }

    /// Uniformly random nonzero element.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        self.fe(rng.gen_range(1..self.q))
    }

    /// All elements in packed order.
    pub fn elements(&self) -> impl Iterator<Item = Fe> + '_ {
        (0..self.q).map(move |v| self.fe(v))
    }

    /// Polynomial-basis literal, e.g. "1+x^2+x^5". Prime fields print integers.
    pub fn format(&self, a: Fe) -> String {
        poly_literal(&self.unpack(a.v))
    }

    /// Parses an element literal.
    ///
    /// Accepted forms: sums and differences of terms `c`, `c*x^k`, `x^k`,
    /// `b^k` (power of the primitive element, `k` may be negative), `c*b^k`;
    /// a binary bit vector `0b...` (most significant bit = highest power of x);
    /// a coefficient list `[c0,c1,...]`.
    pub fn parse_element(&self, s: &str) -> Result<Fe> {
        let s = s.trim();
        if let Some(bits) = s.strip_prefix("0b") {
            let mut coeffs = Vec::new();
            for ch in bits.chars().rev() {
                match ch {
                    '0' => coeffs.push(0),
                    '1' => coeffs.push(1),
                    '_' => {}
                    _ => return Err(Error::parse(format!("bad bit vector {s:?}"))),
                }
            }
            return Ok(self.from_coeffs(&coeffs));
        }
        if let Some(body) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let coeffs = body
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    t.trim()
                        .parse::<u64>()
                        .map(|c| c % self.p)
                        .map_err(|_| Error::parse(format!("bad coefficient list {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(self.from_coeffs(&coeffs));
        }
        let mut acc = self.zero();
        for (neg, term) in split_signed_terms(s)? {
            let v = self.parse_term(term)?;
            acc = if neg { self.sub(acc, v) } else { self.add(acc, v) };
        }
        Ok(acc)
    }

    fn parse_term(&self, term: &str) -> Result<Fe> {
        let mut acc = self.one();
        for factor in term.split('*') {
            let f = factor.trim();
            let v = if let Some(rest) = f.strip_prefix('b') {
                let e: i64 = match rest.strip_prefix('^') {
                    Some(e) => e
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(format!("bad exponent in {term:?}")))?,
                    None if rest.is_empty() => 1,
                    None => return Err(Error::parse(format!("unrecognized factor {f:?}"))),
                };
                self.pow_i(self.primitive(), e)?
            } else if let Some(rest) = f.strip_prefix('x') {
                let e: usize = match rest.strip_prefix('^') {
                    Some(e) => e
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(format!("bad exponent in {term:?}")))?,
                    None if rest.is_empty() => 1,
                    None => return Err(Error::parse(format!("unrecognized factor {f:?}"))),
                };
                let mut c = vec![0u64; e + 1];
                c[e] = 1;
                self.from_coeffs(&c)
            } else {
                let k: u64 = f
                    .parse()
                    .map_err(|_| Error::parse(format!("unrecognized factor {f:?}")))?;
                self.scalar(k)
            };
            acc = self.mul(acc, v);
        }
        Ok(acc)
    }
}

/// Field homomorphism GF(p^m) -> GF(p^b) for m | b.
///
/// The image of the polynomial generator x is a root of the source modulus in
/// the target, chosen as the smallest power of the target's subfield generator
/// primitive^((p^b-1)/(p^m-1)) that is a root. Sending the source primitive to
/// that generator directly only respects addition when both share a minimal
/// polynomial, so the root is located explicitly.
#[derive(Clone)]
pub struct Embedding {
    src: Field,
    dst: Field,
    basis: Vec<Fe>,
}

impl fmt::Debug for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Embedding({} -> {})", self.src.literal(), self.dst.literal())
    }
}

impl Embedding {
    pub fn new(src: &Field, dst: &Field) -> Result<Embedding> {
        if src.p != dst.p || dst.m % src.m != 0 {
            return Err(Error::InvalidField(format!(
                "{} does not embed into {}",
                src.literal(),
                dst.literal()
            )));
        }
        let p = src.p;
        let root = if src.m == 1 {
            dst.from_int(-(src.modulus[0] as i64))
        } else {
            let gamma = dst.pow(dst.primitive(), (dst.q - 1) / (src.q - 1));
            let eval = |z: Fe| {
                src.modulus
                    .iter()
                    .rev()
                    .fold(dst.zero(), |acc, &c| dst.add(dst.mul(acc, z), dst.scalar(c)))
            };
            let mut cand = gamma;
            let mut found = None;
            for _ in 1..src.q {
                if dst.is_zero(eval(cand)) {
                    found = Some(cand);
                    break;
                }
                cand = dst.mul(cand, gamma);
            }
            found.ok_or_else(|| Error::InvalidField("no root of the source modulus".into()))?
        };
        let _ = p;
        let mut basis = Vec::with_capacity(src.m as usize);
        let mut acc = dst.one();
        for _ in 0..src.m {
            basis.push(acc);
            acc = dst.mul(acc, root);
        }
        Ok(Embedding {
            src: src.clone(),
            dst: dst.clone(),
            basis,
        })
    }

    /// The identity map of a field onto itself.
    pub fn identity(f: &Field) -> Embedding {
        Embedding::new(f, f).expect("a field embeds into itself")
    }

    pub fn source(&self) -> &Field {
        &self.src
    }

    pub fn target(&self) -> &Field {
        &self.dst
    }

    pub fn map(&self, a: Fe) -> Fe {
        assert!(self.src.belongs(a), "element is not in the embedding's source field");
        if self.src == self.dst {
            return a;
        }
        self.src
            .coeffs(a)
            .iter()
            .zip(&self.basis)
            .fold(self.dst.zero(), |acc, (&c, &b)| {
                self.dst.add(acc, self.dst.mul(self.dst.scalar(c), b))
            })
    }

    /// Inverse image of `a`, or `None` if `a` is outside the embedded subfield.
    pub fn pullback(&self, a: Fe) -> Option<Fe> {
        if !self.dst.belongs(a) {
            return None;
        }
        if self.src == self.dst {
            return Some(a);
        }
        let p = self.src.p;
        let m = self.src.m as usize;
        let b = self.dst.m as usize;
        // Solve sum_i c_i * coords(basis_i) = coords(a) over GF(p).
        let cols: Vec<Vec<u64>> = self.basis.iter().map(|&e| self.dst.coeffs(e)).collect();
        let target = self.dst.coeffs(a);
        let mut rows: Vec<Vec<u64>> = (0..b)
            .map(|r| {
                let mut row: Vec<u64> = (0..m).map(|c| cols[c][r]).collect();
                row.push(target[r]);
                row
            })
            .collect();
        let mut pivots = Vec::new();
        let mut r0 = 0;
        for c in 0..m {
            let Some(piv) = (r0..b).find(|&r| rows[r][c] != 0) else {
                continue;
            };
            rows.swap(r0, piv);
            let inv = zp::inv(rows[r0][c], p);
            for x in rows[r0].iter_mut() {
                *x = (*x as u128 * inv as u128 % p as u128) as u64;
            }
            for r in 0..b {
                if r != r0 && rows[r][c] != 0 {
                    let f = rows[r][c];
                    for k in 0..=m {
                        let sub = (f as u128 * rows[r0][k] as u128 % p as u128) as u64;
                        rows[r][k] = (rows[r][k] + p - sub) % p;
                    }
                }
            }
            pivots.push(c);
            r0 += 1;
        }
        if rows[r0..].iter().any(|row| row[m] != 0) {
            return None;
        }
        let mut coeffs = vec![0u64; m];
        for (r, &c) in pivots.iter().enumerate() {
            coeffs[c] = rows[r][m];
        }
        Some(self.src.from_coeffs(&coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gf64_with_given_modulus() {
        let f = Field::parse("2^6:1+x+x^6").unwrap();
        let beta = f.primitive();
        assert_eq!(f.format(beta), "x");
        assert_eq!(f.pow(beta, 63), f.one());
        assert_eq!(f.element_order(beta).unwrap(), 63);
        let alpha = f.nth_root_of_unity(7).unwrap();
        assert_eq!(alpha, f.pow(beta, 9));
        assert_eq!(f.element_order(alpha).unwrap(), 7);
        // beta is a root of 1 + x + x^6
        let v = f.add(f.add(f.one(), beta), f.pow(beta, 6));
        assert!(f.is_zero(v));
    }

    #[test]
    fn small_fields() {
        let f = Field::new(2, 1, None).unwrap();
        assert_eq!(f.primitive(), f.one());
        let g = Field::new(3, 2, None).unwrap();
        assert_eq!(g.order(), 9);
        for x in g.elements().skip(1) {
            assert_eq!(g.pow(x, 8), g.one());
        }
        assert_eq!(Field::new(2, 6, None).unwrap().modulus(), &[1, 1, 0, 0, 0, 0, 1]);
        let h = Field::new(2, 3, None).unwrap();
        assert_eq!(h.element_order(h.nth_root_of_unity(7).unwrap()).unwrap(), 7);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Field::new(4, 1, None).unwrap_err(), Error::NotPrime(4));
        assert!(matches!(
            Field::parse("2^2:1+x^2"),
            Err(Error::ReducibleModulus(_))
        ));
        assert!(matches!(
            Field::parse("2^6").unwrap().nth_root_of_unity(5),
            Err(Error::NoRootOfUnity { .. })
        ));
        let f = Field::parse("2^3").unwrap();
        assert_eq!(f.element_order(f.zero()), Err(Error::ZeroElement));
    }

    #[test]
    fn min_extension() {
        assert_eq!(min_extension_for_order(2, 7), Some(3));
        assert_eq!(min_extension_for_order(2, 1), Some(1));
        assert_eq!(min_extension_for_order(3, 9), None);
        assert_eq!(min_extension_for_order(2, 63), Some(6));
    }

    #[test]
    fn table_and_slow_paths_agree() {
        // GF(2^17) has no tables; compare against a schoolbook product.
        let f = Field::new(2, 17, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = f.random(&mut rng);
            let b = f.random(&mut rng);
            let expect = zp::mulmod(&f.coeffs(a), &f.coeffs(b), f.modulus(), 2);
            assert_eq!(f.mul(a, b), f.from_coeffs(&expect));
        }
        let g = Field::new(5, 3, None).unwrap();
        for _ in 0..200 {
            let a = g.random_nonzero(&mut rng);
            assert_eq!(g.mul(a, g.inv(a).unwrap()), g.one());
            assert_eq!(g.add(a, g.neg(a)), g.zero());
        }
    }

    #[test]
    fn literals_round_trip() {
        let f = Field::parse("2^6:1+x+x^6").unwrap();
        assert_eq!(f.parse_element("b^9").unwrap(), f.pow(f.primitive(), 9));
        assert_eq!(f.parse_element("b^-1").unwrap(), f.inv(f.primitive()).unwrap());
        assert_eq!(f.parse_element("1+b^4").unwrap(), f.parse_element("0b010001").unwrap());
        assert_eq!(f.parse_element("[1,0,0,0,1]").unwrap(), f.parse_element("1+x^4").unwrap());
        for x in f.elements() {
            assert_eq!(f.parse_element(&f.format(x)).unwrap(), x);
        }
        assert!(f.parse_element("1+").is_err());
        assert!(f.parse_element("y").is_err());
        let g = Field::parse("7").unwrap();
        assert_eq!(g.parse_element("3-5").unwrap(), g.from_int(-2));
    }

    #[test]
    #[should_panic(expected = "different contexts")]
    fn mixing_contexts_panics() {
        let f = Field::parse("2^3").unwrap();
        let g = Field::parse("2^4").unwrap();
        f.add(f.one(), g.one());
    }

    #[test]
    fn embedding_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (src, b) in [("2^3", 6u32), ("2^2", 6), ("2^6:1+x+x^6", 12), ("3^2", 4), ("2", 3)] {
            let s = Field::parse(src).unwrap();
            let t = s.extension(b).unwrap();
            let e = Embedding::new(&s, &t).unwrap();
            for _ in 0..200 {
                let x = s.random(&mut rng);
                let y = s.random(&mut rng);
                assert_eq!(e.map(s.add(x, y)), t.add(e.map(x), e.map(y)));
                assert_eq!(e.map(s.mul(x, y)), t.mul(e.map(x), e.map(y)));
                assert_eq!(e.pullback(e.map(x)), Some(x));
            }
        }
    }
}
