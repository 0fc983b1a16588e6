//! Matrices over truncated power series, Frobenius twist and Smith form.

use alloc::sync::Arc;

use alloc::vec::Vec;
use core::fmt;

use crate::error::{precision, Error, Result};
use crate::field::Field;
use crate::series::TruncSeries;

/// Dense row-major matrix of `TruncSeries`; every entry carries the same
/// precision after construction.
#[derive(Clone, PartialEq)]
pub struct SeriesMatrix {
    field: Arc<Field>,
    rows: usize,
    cols: usize,
    data: Vec<TruncSeries>,
}

impl fmt::Debug for SeriesMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[")?;
        for i in 0..self.rows {
            write!(f, "  [")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:?}", self.get(i, j))?;
            }
            writeln!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// `u * m * v = diag(u^d_0, ..., u^d_{r-1}, 0, ...)` with `u`, `v`
/// invertible; `d` is nondecreasing and has one entry per pivot.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub u: SeriesMatrix,
    pub d: Vec<usize>,
    pub v: SeriesMatrix,
}

impl SeriesMatrix {
    /// Builds a matrix and truncates all entries to their common minimum
    /// precision.
    pub fn new(field: &Arc<Field>, rows: usize, cols: usize, data: Vec<TruncSeries>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data has the wrong length");
        let mut m = SeriesMatrix { field: field.clone(), rows, cols, data };
        m.normalize();
        m
    }

    pub fn from_fn(
        field: &Arc<Field>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> TruncSeries,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(field, rows, cols, data)
    }

    /// Integer polynomial entries, each given as dense coefficients.
    pub fn from_int_polys(field: &Arc<Field>, rows: &[&[&[i64]]], prec: usize) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        Self::from_fn(field, r, c, |i, j| TruncSeries::from_ints(field, rows[i][j], prec))
    }

    pub fn zero(field: &Arc<Field>, rows: usize, cols: usize, prec: usize) -> Self {
        Self::from_fn(field, rows, cols, |_, _| TruncSeries::zero(field, prec))
    }

    pub fn identity(field: &Arc<Field>, n: usize, prec: usize) -> Self {
        Self::from_fn(field, n, n, |i, j| {
            if i == j {
                TruncSeries::one(field, prec)
            } else {
                TruncSeries::zero(field, prec)
            }
        })
    }

    /// `diag(u^k_0, u^k_1, ...)`.
    pub fn diag_powers(field: &Arc<Field>, ks: &[usize], prec: usize) -> Self {
        let n = ks.len();
        Self::from_fn(field, n, n, |i, j| {
            if i == j {
                TruncSeries::monomial(field, field.one(), ks[i], prec)
            } else {
                TruncSeries::zero(field, prec)
            }
        })
    }

    fn normalize(&mut self) {
        let p = self.prec();
        for x in self.data.iter_mut() {
            if x.prec() != p {
                *x = x.truncate(p);
            }
        }
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
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

    /// Common precision of the entries; `usize::MAX` for an empty matrix.
    pub fn prec(&self) -> usize {
        self.data.iter().map(|x| x.prec()).min().unwrap_or(usize::MAX)
    }

    pub fn get(&self, i: usize, j: usize) -> &TruncSeries {
        &self.data[i * self.cols + j]
    }

    pub fn entries(&self) -> &[TruncSeries] {
        &self.data
    }

    fn set_raw(&mut self, i: usize, j: usize, x: TruncSeries) {
        self.data[i * self.cols + j] = x;
    }

    pub fn truncate(&self, prec: usize) -> Self {
        let data = self.data.iter().map(|x| x.truncate(prec)).collect();
        Self::new(&self.field, self.rows, self.cols, data)
    }

    /// Declares every entry known to `prec`; only for exact inputs.
    pub fn with_prec(&self, prec: usize) -> Self {
        let data = self.data.iter().map(|x| x.with_prec(prec)).collect();
        Self::new(&self.field, self.rows, self.cols, data)
    }

    pub fn eq_mod(&self, other: &Self, n: usize) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| a.eq_mod(b, n))
    }

    /// Least certified valuation over the entries (the precision for a
    /// matrix that is zero to precision).
    pub fn min_val(&self) -> usize {
        self.data.iter().map(|x| x.val_or_prec()).min().unwrap_or(usize::MAX)
    }

    pub fn map(&self, f: impl Fn(&TruncSeries) -> TruncSeries) -> Self {
        Self::new(&self.field, self.rows, self.cols, self.data.iter().map(f).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.add(b)).collect();
        Self::new(&self.field, self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.sub(b)).collect();
        Self::new(&self.field, self.rows, self.cols, data)
    }

    pub fn neg(&self) -> Self {
        self.map(|x| x.neg())
    }

    /// Multiplication of every entry by `u^k`.
    pub fn shift(&self, k: usize) -> Self {
        self.map(|x| x.shift(k))
    }

    /// Exact division of every entry by `u^k`.
    pub fn div_u(&self, k: usize) -> Result<Self> {
        let data = self.data.iter().map(|x| x.div_u(k)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(&self.field, self.rows, self.cols, data))
    }

    pub fn scale(&self, s: &TruncSeries) -> Self {
        self.map(|x| x.mul(s))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix dimensions do not match");
        let f = &self.field;
        Self::from_fn(f, self.rows, other.cols, |i, j| {
            let mut acc: Option<TruncSeries> = None;
            for k in 0..self.cols {
                let t = self.get(i, k).mul(other.get(k, j));
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.add(&t),
                });
            }
            acc.unwrap_or_else(|| TruncSeries::zero(f, self.prec().min(other.prec())))
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(&self.field, self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    /// Rows `r0..r1`, columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(&self.field, r1 - r0, c1 - c0, |i, j| self.get(r0 + i, c0 + j).clone())
    }

    /// `[[a, b], [c, d]]`.
    pub fn from_blocks(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        let top = a.hstack(b);
        let bottom = c.hstack(d);
        top.vstack(&bottom)
    }

    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(&self.field, self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self.get(i, j).clone()
            } else {
                other.get(i, j - self.cols).clone()
            }
        })
    }

    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        Self::from_fn(&self.field, self.rows + other.rows, self.cols, |i, j| {
            if i < self.rows {
                self.get(i, j).clone()
            } else {
                other.get(i - self.rows, j).clone()
            }
        })
    }

    /// Entrywise Frobenius `u -> u^p`; realizes `phi(M)`.
    pub fn phi_twist(&self) -> Self {
        self.map(|x| x.frobenius())
    }

    fn minor(&self, skip_row: usize, skip_col: usize) -> Self {
        Self::from_fn(&self.field, self.rows - 1, self.cols - 1, |i, j| {
            let i = if i >= skip_row { i + 1 } else { i };
            let j = if j >= skip_col { j + 1 } else { j };
            self.get(i, j).clone()
        })
    }

    /// Determinant by cofactor expansion (ranks here are small).
    pub fn det(&self) -> TruncSeries {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let f = &self.field;
        match self.rows {
            0 => TruncSeries::one(f, usize::MAX / 4),
            1 => self.get(0, 0).clone(),
            2 => self.get(0, 0).mul(self.get(1, 1)).sub(&self.get(0, 1).mul(self.get(1, 0))),
            n => {
                let mut acc = TruncSeries::zero(f, self.prec());
                for j in 0..n {
                    let t = self.get(0, j).mul(&self.minor(0, j).det());
                    acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
                }
                acc
            }
        }
    }

    /// Classical adjugate: `adj(M) * M = det(M) * I`.
    pub fn adjugate(&self) -> Self {
        assert!(self.is_square());
        let f = &self.field;
        let n = self.rows;
        if n == 1 {
            return Self::identity(f, 1, self.prec());
        }
        Self::from_fn(f, n, n, |i, j| {
            let c = self.minor(j, i).det();
            if (i + j) % 2 == 0 {
                c
            } else {
                c.neg()
            }
        })
    }

    /// Inverse of a matrix whose determinant is a certified unit.
    pub fn inverse_unit(&self) -> Result<Self> {
        let det = self.det();
        if !det.is_unit() {
            return Err(Error::SingularMatrix);
        }
        let inv = det.inverse()?;
        Ok(self.adjugate().scale(&inv))
    }

    /// `u^k * M^{-1}`, provided it is integral.
    pub fn scaled_inverse(&self, k: usize) -> Result<Self> {
        let s = smith_form(self)?;
        if s.d.iter().any(|&d| d > k) {
            return Err(Error::InvalidInput("u^k * M^-1 is not integral".into()));
        }
        let prec = s.u.prec().min(s.v.prec());
        let ks: Vec<usize> = s.d.iter().map(|&d| k - d).collect();
        let mid = Self::diag_powers(&self.field, &ks, prec);
        Ok(s.v.mul(&mid).mul(&s.u))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.rows {
                self.data.swap(i * self.cols + a, i * self.cols + b);
            }
        }
    }

    fn row_scale(&mut self, r: usize, s: &TruncSeries) {
        for j in 0..self.cols {
            let x = self.get(r, j).mul(s);
            self.set_raw(r, j, x);
        }
    }

    /// `row[target] -= c * row[src]`.
    fn row_axpy(&mut self, target: usize, src: usize, c: &TruncSeries) {
        for j in 0..self.cols {
            let x = self.get(target, j).sub(&c.mul(self.get(src, j)));
            self.set_raw(target, j, x);
        }
    }

    /// `col[target] -= c * col[src]`.
    fn col_axpy(&mut self, target: usize, src: usize, c: &TruncSeries) {
        for i in 0..self.rows {
            let x = self.get(i, target).sub(&self.get(i, src).mul(c));
            self.set_raw(i, target, x);
        }
    }
}

/// Smith form of an arbitrary matrix; stops at the first block that is zero
/// to precision, so `d.len()` is the certified rank.
pub fn smith_general(m: &SeriesMatrix) -> Result<SmithForm> {
    let f = m.field().clone();
    let (r, c) = (m.rows, m.cols);
    let prec = m.prec();
    let mut w = m.clone();
    let mut u = SeriesMatrix::identity(&f, r, prec);
    let mut v = SeriesMatrix::identity(&f, c, prec);
    let mut d = Vec::new();
    for k in 0..r.min(c) {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in k..r {
            for j in k..c {
                if let Some(val) = w.get(i, j).valuation() {
                    if best.is_none_or(|(bv, _, _)| val < bv) {
                        best = Some((val, i, j));
                    }
                }
            }
        }
        let Some((dv, pi, pj)) = best else { break };
        w.swap_rows(k, pi);
        u.swap_rows(k, pi);
        w.swap_cols(k, pj);
        v.swap_cols(k, pj);
        let unit = w.get(k, k).div_u(dv)?;
        let inv = unit.inverse()?;
        w.row_scale(k, &inv);
        u.row_scale(k, &inv);
        for i in k + 1..r {
            let ci = w.get(i, k).div_u(dv)?;
            if !ci.is_zero() {
                w.row_axpy(i, k, &ci);
                u.row_axpy(i, k, &ci);
            }
        }
        for j in k + 1..c {
            let cj = w.get(k, j).div_u(dv)?;
            if !cj.is_zero() {
                w.col_axpy(j, k, &cj);
                v.col_axpy(j, k, &cj);
            }
        }
        d.push(dv);
    }
    u.normalize();
    v.normalize();
    Ok(SmithForm { u, d, v })
}

/// Smith form of a square matrix of full rank.
pub fn smith_form(m: &SeriesMatrix) -> Result<SmithForm> {
    assert!(m.is_square(), "smith_form expects a square matrix");
    let s = smith_general(m)?;
    if s.d.len() < m.rows {
        return Err(Error::SingularMatrix);
    }
    Ok(s)
}

/// Whether the column span of `x` lies in the column span of `y` plus
/// `u^k` times the ambient lattice.
pub fn span_contained_mod(x: &SeriesMatrix, y: &SeriesMatrix, k: usize) -> Result<bool> {
    assert_eq!(x.rows(), y.rows());
    let s = smith_general(y)?;
    let z = s.u.mul(x);
    for i in 0..z.rows() {
        let bound = s.d.get(i).map_or(k, |&d| d.min(k));
        for j in 0..z.cols() {
            let e = z.get(i, j);
            match e.valuation() {
                Some(v) if v < bound => return Ok(false),
                Some(_) => {}
                None if e.prec() < bound => {
                    return Err(precision("span comparison needs more precision"));
                }
                None => {}
            }
        }
    }
    Ok(true)
}

/// Equality of column spans modulo `u^k`.
pub fn spans_equal_mod(x: &SeriesMatrix, y: &SeriesMatrix, k: usize) -> Result<bool> {
    Ok(span_contained_mod(x, y, k)? && span_contained_mod(y, x, k)?)
}

/// Certified rank over `k((u))`.
pub fn rank(m: &SeriesMatrix) -> Result<usize> {
    Ok(smith_general(m)?.d.len())
}
