//! Delay polynomials and dense matrices over a field or over GF(q)[D].
//!
//! Matrix algorithms are generic over [`Ring`] / [`DivRing`] so the same
//! elimination code serves numeric matrices and rational-function matrices.

use std::fmt::Debug;

use crate::error::{Error, Result};
use crate::galois::{Embedding, Fe, Field};

/// Arithmetic context for matrix entries.
pub trait Ring {
    type Elem: Clone + PartialEq + Debug + Send + Sync;
    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    fn neg(&self, a: &Self::Elem) -> Self::Elem {
        self.sub(&self.zero(), a)
    }
}

/// A ring in which every nonzero element is invertible.
pub trait DivRing: Ring {
    fn inv(&self, a: &Self::Elem) -> Result<Self::Elem>;
}

impl Ring for Field {
    type Elem = Fe;
    fn zero(&self) -> Fe {
        (**self).zero()
    }
    fn one(&self) -> Fe {
        (**self).one()
    }
    fn add(&self, a: &Fe, b: &Fe) -> Fe {
        (**self).add(*a, *b)
    }
    fn sub(&self, a: &Fe, b: &Fe) -> Fe {
        (**self).sub(*a, *b)
    }
    fn mul(&self, a: &Fe, b: &Fe) -> Fe {
        (**self).mul(*a, *b)
    }
    fn is_zero(&self, a: &Fe) -> bool {
        (**self).is_zero(*a)
    }
    fn neg(&self, a: &Fe) -> Fe {
        (**self).neg(*a)
    }
}

impl DivRing for Field {
    fn inv(&self, a: &Fe) -> Result<Fe> {
        (**self).inv(*a).map_err(|_| Error::Singular)
    }
}

// ---------------------------------------------------------------------------
// DelayPoly

/// Polynomial in the delay operator D; `coeffs[d]` multiplies D^d.
/// The coefficient vector never has a trailing zero.
#[derive(Clone, PartialEq, Eq, Debug, Hash)]
pub struct DelayPoly {
    coeffs: Vec<Fe>,
}

impl DelayPoly {
    pub fn zero() -> Self {
        DelayPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: Fe) -> Self {
        Self::monomial(c, 0)
    }

    /// c·D^d
    pub fn monomial(c: Fe, d: usize) -> Self {
        if c.raw() == 0 {
            return Self::zero();
        }
        let mut coeffs = vec![Fe::zero_like(c); d + 1];
        coeffs[d] = c;
        DelayPoly { coeffs }
    }

    /// Builds from low-to-high coefficients, trimming trailing zeros.
    pub fn from_coeffs(mut coeffs: Vec<Fe>) -> Self {
        while coeffs.last().is_some_and(|c| c.raw() == 0) {
            coeffs.pop();
        }
        DelayPoly { coeffs }
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.coeffs
    }

    /// Coefficient of D^d (zero beyond the degree).
    pub fn coeff(&self, field: &Field, d: usize) -> Fe {
        self.coeffs.get(d).copied().unwrap_or_else(|| field.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` standing for the zero polynomial's minus infinity.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Smallest exponent with a nonzero coefficient.
    pub fn low_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| c.raw() != 0)
    }

    pub fn add(&self, field: &Field, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::from_coeffs(
            (0..n)
                .map(|i| field.add(&self.coeff(field, i), &other.coeff(field, i)))
                .collect(),
        )
    }

    pub fn sub(&self, field: &Field, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::from_coeffs(
            (0..n)
                .map(|i| field.sub(&self.coeff(field, i), &other.coeff(field, i)))
                .collect(),
        )
    }

    pub fn mul(&self, field: &Field, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut out = vec![field.zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.raw() == 0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = field.add(&out[i + j], &field.mul(a, b));
            }
        }
        Self::from_coeffs(out)
    }

    pub fn scale(&self, field: &Field, c: Fe) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|a| field.mul(a, &c)).collect())
    }

    /// Multiplies by D^k.
    pub fn shift_up(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let z = Fe::zero_like(self.coeffs[0]);
        let mut coeffs = vec![z; k];
        coeffs.extend_from_slice(&self.coeffs);
        DelayPoly { coeffs }
    }

    /// Divides by D^k; fails if a coefficient below D^k is nonzero.
    pub fn shift_down(&self, k: usize) -> Result<Self> {
        if self.is_zero() {
            return Ok(Self::zero());
        }
        if self.low_degree().unwrap_or(0) < k {
            return Err(Error::Params(format!("polynomial is not divisible by D^{k}")));
        }
        Ok(DelayPoly {
            coeffs: self.coeffs[k..].to_vec(),
        })
    }

    /// Horner evaluation at `c`.
    pub fn eval(&self, field: &Field, c: Fe) -> Fe {
        field
            .check(c)
            .expect("evaluation point is in a different field; map the polynomial first");
        self.coeffs
            .iter()
            .rev()
            .fold(field.zero(), |acc, a| field.add(&field.mul(&acc, &c), a))
    }

    /// Applies a field embedding coefficientwise.
    pub fn map(&self, emb: &Embedding) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|&c| emb.map(c)).collect())
    }

    /// Quotient and remainder by a nonzero divisor.
    pub fn divrem(&self, field: &Field, div: &Self) -> Result<(Self, Self)> {
        let dd = div.degree().ok_or(Error::ZeroElement)?;
        let lead_inv = field.inv(&div.coeffs[dd])?;
        let mut rem = self.coeffs.clone();
        let n = self.coeffs.len();
        if n <= dd {
            return Ok((Self::zero(), self.clone()));
        }
        let mut quo = vec![field.zero(); n - dd];
        for k in (0..n - dd).rev() {
            let c = field.mul(&rem[k + dd], &lead_inv);
            quo[k] = c;
            if c.raw() == 0 {
                continue;
            }
            for (i, b) in div.coeffs.iter().enumerate() {
                rem[k + i] = field.sub(&rem[k + i], &field.mul(&c, b));
            }
        }
        Ok((Self::from_coeffs(quo), Self::from_coeffs(rem)))
    }

    /// "c0 + c1*D + c3*D^3" with element literals in parentheses when composite.
    pub fn format(&self, field: &Field) -> String {
        if self.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (d, c) in self.coeffs.iter().enumerate() {
            if c.raw() == 0 {
                continue;
            }
            let lit = field.format(*c);
            let lit = if lit.contains('+') { format!("({lit})") } else { lit };
            parts.push(match d {
                0 => lit,
                _ => {
                    let mono = if d == 1 { "D".to_string() } else { format!("D^{d}") };
                    if *c == field.one() {
                        mono
                    } else {
                        format!("{lit}*{mono}")
                    }
                }
            });
        }
        parts.join(" + ")
    }

    /// Parses the textual form produced by [`DelayPoly::format`].
    pub fn parse(field: &Field, s: &str) -> Result<Self> {
        let mut acc = Self::zero();
        for term in split_top_level(s, '+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::parse(format!("empty term in {s:?}")));
            }
            let (coef, deg) = match term.rfind('D') {
                Some(pos) if !term[pos..].contains(')') => {
                    let mono = &term[pos..];
                    let deg: usize = match mono.strip_prefix("D^") {
                        Some(e) => e
                            .trim()
                            .parse()
                            .map_err(|_| Error::parse(format!("bad exponent in {term:?}")))?,
                        None if mono == "D" => 1,
                        None => return Err(Error::parse(format!("bad monomial in {term:?}"))),
                    };
                    let head = term[..pos].trim().trim_end_matches('*').trim();
                    let coef = if head.is_empty() {
                        field.one()
                    } else {
                        field.parse_element(strip_parens(head))?
                    };
                    (coef, deg)
                }
                _ => (field.parse_element(strip_parens(term))?, 0),
            };
            acc = acc.add(field, &Self::monomial(coef, deg));
        }
        Ok(acc)
    }
}

fn strip_parens(s: &str) -> &str {
    s.strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .unwrap_or(s)
}

fn split_top_level(s: &str, sep: char) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ if c == sep && depth == 0 => {
                out.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

impl Fe {
    /// The zero of `x`'s context, without needing the context handle.
    pub(crate) fn zero_like(x: Fe) -> Fe {
        x.with_raw(0)
    }
}

/// Arithmetic context for [`DelayPoly`] entries.
#[derive(Clone, Debug)]
pub struct PolyRing {
    pub field: Field,
}

impl Ring for PolyRing {
    type Elem = DelayPoly;
    fn zero(&self) -> DelayPoly {
        DelayPoly::zero()
    }
    fn one(&self) -> DelayPoly {
        DelayPoly::constant(self.field.one())
    }
    fn add(&self, a: &DelayPoly, b: &DelayPoly) -> DelayPoly {
        a.add(&self.field, b)
    }
    fn sub(&self, a: &DelayPoly, b: &DelayPoly) -> DelayPoly {
        a.sub(&self.field, b)
    }
    fn mul(&self, a: &DelayPoly, b: &DelayPoly) -> DelayPoly {
        a.mul(&self.field, b)
    }
    fn is_zero(&self, a: &DelayPoly) -> bool {
        a.is_zero()
    }
}

/// True iff (D - 1) divides `f`, i.e. f(1) = 0.
pub fn divides_dminus1(field: &Field, f: &DelayPoly) -> bool {
    field.is_zero(&f.eval(field, field.one()))
}

// ---------------------------------------------------------------------------
// Matrix

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type FieldMatrix = Matrix<Fe>;
pub type PolyMatrix = Matrix<DelayPoly>;

impl<T: Clone> Matrix<T> {
    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).clone())
    }

    pub fn map<U: Clone>(&self, f: impl FnMut(&T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Sub-block with rows `r0..r0+h` and columns `c0..c0+w`.
    pub fn block(&self, r0: usize, c0: usize, h: usize, w: usize) -> Self {
        Self::from_fn(h, w, |r, c| self.get(r0 + r, c0 + c).clone())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.cols, |r, c| self.get(idx[r], c).clone())
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |r, c| self.get(r, idx[c]).clone())
    }

    /// [self | other]
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Dimension(format!(
                "hstack of {} and {} rows",
                self.rows, other.rows
            )));
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |r, c| {
            if c < self.cols {
                self.get(r, c).clone()
            } else {
                other.get(r, c - self.cols).clone()
            }
        }))
    }

    /// [self ; other]
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "vstack of {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }
}

impl<T: Clone + PartialEq + Debug + Send + Sync> Matrix<T> {
    pub fn zeros<R: Ring<Elem = T>>(ring: &R, rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, ring.zero())
    }

    pub fn identity<R: Ring<Elem = T>>(ring: &R, n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { ring.one() } else { ring.zero() })
    }

    pub fn diag<R: Ring<Elem = T>>(ring: &R, d: &[T]) -> Self {
        Self::from_fn(d.len(), d.len(), |r, c| {
            if r == c {
                d[r].clone()
            } else {
                ring.zero()
            }
        })
    }

    /// Column vector.
    pub fn column_vector(v: Vec<T>) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v,
        }
    }

    pub fn is_zero<R: Ring<Elem = T>>(&self, ring: &R) -> bool {
        self.data.iter().all(|x| ring.is_zero(x))
    }

    pub fn mul<R: Ring<Elem = T>>(&self, ring: &R, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(ring, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if ring.is_zero(a) {
                    continue;
                }
                for c in 0..other.cols {
                    let prod = ring.mul(a, other.get(k, c));
                    let idx = r * other.cols + c;
                    out.data[idx] = ring.add(&out.data[idx], &prod);
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec<R: Ring<Elem = T>>(&self, ring: &R, v: &[T]) -> Result<Vec<T>> {
        if self.cols != v.len() {
            return Err(Error::Dimension("matrix-vector length".into()));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(ring.zero(), |acc, (a, b)| ring.add(&acc, &ring.mul(a, b)))
            })
            .collect())
    }

    pub fn add<R: Ring<Elem = T>>(&self, ring: &R, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| ring.add(a, b))
    }

    pub fn sub<R: Ring<Elem = T>>(&self, ring: &R, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| ring.sub(a, b))
    }

    pub fn scale<R: Ring<Elem = T>>(&self, ring: &R, s: &T) -> Self {
        self.map(|x| ring.mul(s, x))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension("elementwise shapes differ".into()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        })
    }

    /// Kronecker product self ⊗ other.
    pub fn kron<R: Ring<Elem = T>>(&self, ring: &R, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            ring.mul(
                self.get(r / other.rows, c / other.cols),
                other.get(r % other.rows, c % other.cols),
            )
        })
    }

    /// Integer power of a square matrix.
    pub fn pow<R: Ring<Elem = T>>(&self, ring: &R, e: usize) -> Result<Self> {
        let mut out = Self::identity(ring, self.rows);
        for _ in 0..e {
            out = out.mul(ring, self)?;
        }
        Ok(out)
    }
}

/// Result of forward elimination: reduced row echelon form plus pivot columns.
struct Echelon<T> {
    m: Matrix<T>,
    pivots: Vec<usize>,
    swaps: usize,
}

fn row_reduce<R: DivRing>(ring: &R, mut m: Matrix<R::Elem>, full: bool) -> Echelon<R::Elem> {
    let mut pivots = Vec::new();
    let mut swaps = 0;
    let mut r0 = 0;
    for c in 0..m.cols {
        if r0 == m.rows {
            break;
        }
        let Some(p) = (r0..m.rows).find(|&r| !ring.is_zero(m.get(r, c))) else {
            continue;
        };
        if p != r0 {
            for k in 0..m.cols {
                m.data.swap(p * m.cols + k, r0 * m.cols + k);
            }
            swaps += 1;
        }
        let inv = ring.inv(m.get(r0, c)).expect("pivot is nonzero");
        if full {
            for k in c..m.cols {
                let v = ring.mul(m.get(r0, k), &inv);
                m.set(r0, k, v);
            }
        }
        let rows: Box<dyn Iterator<Item = usize>> = if full {
            Box::new(0..m.rows)
        } else {
            Box::new(r0 + 1..m.rows)
        };
        for r in rows {
            if r == r0 || ring.is_zero(m.get(r, c)) {
                continue;
            }
            let f = if full {
                m.get(r, c).clone()
            } else {
                ring.mul(m.get(r, c), &inv)
            };
            for k in c..m.cols {
                let v = ring.sub(m.get(r, k), &ring.mul(&f, m.get(r0, k)));
                m.set(r, k, v);
            }
        }
        pivots.push(c);
        r0 += 1;
    }
    Echelon { m, pivots, swaps }
}

impl<T: Clone + PartialEq + Debug + Send + Sync> Matrix<T> {
    pub fn rank<R: DivRing<Elem = T>>(&self, ring: &R) -> usize {
        row_reduce(ring, self.clone(), false).pivots.len()
    }

    /// Determinant by Gaussian elimination.
    pub fn det<R: DivRing<Elem = T>>(&self, ring: &R) -> Result<T> {
        if !self.is_square() {
            return Err(Error::Dimension("determinant of a non-square matrix".into()));
        }
        let e = row_reduce(ring, self.clone(), false);
        if e.pivots.len() < self.rows {
            return Ok(ring.zero());
        }
        let mut d = ring.one();
        for i in 0..self.rows {
            d = ring.mul(&d, e.m.get(i, i));
        }
        if e.swaps % 2 == 1 {
            d = ring.neg(&d);
        }
        Ok(d)
    }

    pub fn inverse<R: DivRing<Elem = T>>(&self, ring: &R) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let aug = self.hstack(&Self::identity(ring, n))?;
        let e = row_reduce(ring, aug, true);
        if e.pivots.len() < n || e.pivots[n - 1] != n - 1 {
            return Err(Error::Singular);
        }
        Ok(e.m.block(0, n, n, n))
    }

    /// Solves M x = y for square nonsingular M.
    pub fn solve<R: DivRing<Elem = T>>(&self, ring: &R, y: &[T]) -> Result<Vec<T>> {
        if !self.is_square() {
            return Err(Error::Dimension("solve needs a square matrix".into()));
        }
        let x = self.solve_consistent(ring, y)?;
        x.ok_or(Error::Singular)
    }

    /// Solves M x = y for a matrix of full column rank (possibly tall).
    /// Returns `Ok(None)` when the system is inconsistent and an error when
    /// the columns are dependent.
    pub fn solve_consistent<R: DivRing<Elem = T>>(
        &self,
        ring: &R,
        y: &[T],
    ) -> Result<Option<Vec<T>>> {
        if y.len() != self.rows {
            return Err(Error::Dimension("right-hand side length".into()));
        }
        let aug = self.hstack(&Self::column_vector(y.to_vec()))?;
        let e = row_reduce(ring, aug, true);
        let n = self.cols;
        if e.pivots.iter().take_while(|&&c| c < n).count() < n {
            return Err(Error::Singular);
        }
        if e.pivots.len() > n {
            return Ok(None);
        }
        Ok(Some((0..n).map(|r| e.m.get(r, n).clone()).collect()))
    }

    /// Indices of a maximal set of linearly independent columns (greedy, left to right).
    pub fn independent_columns<R: DivRing<Elem = T>>(&self, ring: &R) -> Vec<usize> {
        row_reduce(ring, self.clone(), false).pivots
    }
}

impl FieldMatrix {
    pub fn format(&self, field: &Field) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|&x| field.format(x)).collect())
            .collect()
    }

    pub fn map_field(&self, emb: &Embedding) -> Self {
        self.map(|&x| emb.map(x))
    }
}

impl PolyMatrix {
    /// Entrywise evaluation at D = c.
    pub fn eval(&self, field: &Field, c: Fe) -> FieldMatrix {
        self.map(|p| p.eval(field, c))
    }

    pub fn map_field(&self, emb: &Embedding) -> Self {
        self.map(|p| p.map(emb))
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.entries().filter_map(|p| p.degree()).max()
    }

    /// Coefficient matrix of D^d.
    pub fn coeff_matrix(&self, field: &Field, d: usize) -> FieldMatrix {
        self.map(|p| p.coeff(field, d))
    }

    pub fn format(&self, field: &Field) -> Vec<Vec<String>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|p| p.format(field)).collect())
            .collect()
    }
}

/// Exact determinant of a square polynomial matrix by evaluation and
/// interpolation. The degree bound is rows · max entry degree; when the field
/// has too few points the computation moves to an extension and the
/// coefficients are pulled back.
pub fn polymat_det(field: &Field, m: &PolyMatrix) -> Result<DelayPoly> {
    if !m.is_square() {
        return Err(Error::Dimension("determinant of a non-square matrix".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(DelayPoly::constant(field.one()));
    }
    let Some(maxdeg) = m.max_degree() else {
        return Ok(DelayPoly::zero());
    };
    let bound = n * maxdeg;
    let needed = bound as u64 + 1;
    if field.order() >= needed {
        return Ok(interpolate_det(field, m, bound));
    }
    let mut b = field.degree();
    while field.characteristic().checked_pow(b).map_or(false, |q| q < needed) {
        b += field.degree();
    }
    let ext = field.extension(b)?;
    let emb = Embedding::new(field, &ext)?;
    let d = interpolate_det(&ext, &m.map_field(&emb), bound);
    let coeffs = d
        .coeffs()
        .iter()
        .map(|&c| {
            emb.pullback(c)
                .ok_or_else(|| Error::InvalidField("determinant left the base field".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayPoly::from_coeffs(coeffs))
}

fn interpolate_det(field: &Field, m: &PolyMatrix, bound: usize) -> DelayPoly {
    let xs: Vec<Fe> = field.elements().take(bound + 1).collect();
    let ys: Vec<Fe> = xs
        .iter()
        .map(|&x| m.eval(field, x).det(field).expect("square"))
        .collect();
    interpolate(field, &xs, &ys)
}

/// Newton interpolation through distinct points.
pub fn interpolate(field: &Field, xs: &[Fe], ys: &[Fe]) -> DelayPoly {
    let n = xs.len();
    let mut dd = ys.to_vec();
    for level in 1..n {
        for i in (level..n).rev() {
            let num = field.sub(&dd[i], &dd[i - 1]);
            let den = field.sub(&xs[i], &xs[i - level]);
            dd[i] = field.mul(&num, &DivRing::inv(field, &den).expect("distinct points"));
        }
    }
    let mut poly = DelayPoly::zero();
    for i in (0..n).rev() {
        // poly = poly * (D - x_i) + dd[i]
        let lin = DelayPoly::from_coeffs(vec![field.neg(&xs[i]), field.one()]);
        poly = poly.mul(field, &lin).add(field, &DelayPoly::constant(dd[i]));
    }
    poly
}

/// Determinant by fraction-free (Bareiss) elimination over GF(q)[D].
pub fn polymat_det_bareiss(field: &Field, m: &PolyMatrix) -> Result<DelayPoly> {
    if !m.is_square() {
        return Err(Error::Dimension("determinant of a non-square matrix".into()));
    }
    let n = m.rows();
    let mut a = m.to_rows();
    let mut prev = DelayPoly::constant(field.one());
    let mut negate = false;
    for k in 0..n {
        let Some(p) = (k..n).find(|&r| !a[r][k].is_zero()) else {
            return Ok(DelayPoly::zero());
        };
        if p != k {
            a.swap(p, k);
            negate = !negate;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = a[i][j]
                    .mul(field, &a[k][k])
                    .sub(field, &a[i][k].mul(field, &a[k][j]));
                let (q, r) = t.divrem(field, &prev)?;
                debug_assert!(r.is_zero());
                a[i][j] = q;
            }
            a[i][k] = DelayPoly::zero();
        }
        prev = a[k][k].clone();
    }
    let d = if n == 0 {
        DelayPoly::constant(field.one())
    } else {
        a[n - 1][n - 1].clone()
    };
    Ok(if negate {
        d.scale(field, field.neg(&field.one()))
    } else {
        d
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf2() -> Field {
        Field::parse("2").unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = gf2();
        let d25 = DelayPoly::monomial(f.one(), 25);
        assert_eq!(d25.eval(&f, f.one()), f.one());
        assert_eq!(DelayPoly::zero().eval(&f, f.one()), f.zero());
        let g = DelayPoly::parse(&f, "1 + D^2").unwrap();
        assert_eq!(g.eval(&f, f.one()), f.zero());
        assert!(!divides_dminus1(&f, &d25));
        assert!(divides_dminus1(&f, &DelayPoly::zero()));
        assert!(divides_dminus1(&f, &g));
        assert_eq!(DelayPoly::zero().degree(), None);
    }

    #[test]
    fn det_examples() {
        let f = gf2();
        let p = |s: &str| DelayPoly::parse(&f, s).unwrap();
        let m = Matrix::from_rows(vec![vec![p("D^4"), p("D^4 + D^5")], vec![p("0"), p("D")]]).unwrap();
        assert_eq!(polymat_det(&f, &m).unwrap(), p("D^5"));
        assert_eq!(polymat_det_bareiss(&f, &m).unwrap(), p("D^5"));
        let ring = PolyRing { field: f.clone() };
        let id = PolyMatrix::identity(&ring, 4);
        assert_eq!(polymat_det(&f, &id).unwrap(), p("1"));
        let rect = PolyMatrix::zeros(&ring, 2, 3);
        assert!(polymat_det(&f, &rect).is_err());
    }

    #[test]
    fn poly_text_round_trip() {
        let f = Field::parse("2^6:1+x+x^6").unwrap();
        let p = DelayPoly::parse(&f, "b^4 + (1+x)*D + D^3").unwrap();
        assert_eq!(DelayPoly::parse(&f, &p.format(&f)).unwrap(), p);
        assert_eq!(p.degree(), Some(3));
    }

    #[test]
    fn field_matrix_ops() {
        let f = Field::parse("2^6").unwrap();
        let d: Vec<Fe> = (1..=4).map(|k| f.pow(f.primitive(), k)).collect();
        let m = FieldMatrix::diag(&f, &d);
        let inv = m.inverse(&f).unwrap();
        let expect: Vec<Fe> = d.iter().map(|&x| f.inv(&x).unwrap()).collect();
        assert_eq!(inv, FieldMatrix::diag(&f, &expect));
        let sing = FieldMatrix::zeros(&f, 3, 3);
        assert_eq!(sing.inverse(&f), Err(Error::Singular));
        assert_eq!(sing.rank(&f), 0);
    }
}
