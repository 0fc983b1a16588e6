//! Truncated power series in `u` over a finite field.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{precision, Result};
use crate::field::{Fe, Field};

/// An element of `F_q[[u]]` known modulo `u^prec`.
///
/// Coefficients are stored densely; `coeffs.len() <= prec` and the last
/// stored coefficient is nonzero.
#[derive(Clone)]
pub struct TruncSeries {
    field: Arc<Field>,
    coeffs: Vec<Fe>,
    prec: usize,
}

impl PartialEq for TruncSeries {
    fn eq(&self, other: &Self) -> bool {
        self.prec == other.prec && self.coeffs == other.coeffs && *self.field == *other.field
    }
}

impl fmt::Debug for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if self.field.degree() == 1 {
                write!(f, "{}", c[0])?;
            } else {
                write!(f, "{:?}", c.as_slice())?;
            }
            if i > 0 {
                write!(f, "*u^{i}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(u^{})", self.prec)
    }
}

impl TruncSeries {
    pub fn zero(field: &Arc<Field>, prec: usize) -> Self {
        TruncSeries { field: field.clone(), coeffs: Vec::new(), prec }
    }

    pub fn one(field: &Arc<Field>, prec: usize) -> Self {
        Self::monomial(field, field.one(), 0, prec)
    }

    pub fn constant(field: &Arc<Field>, c: Fe, prec: usize) -> Self {
        Self::monomial(field, c, 0, prec)
    }

    /// `c u^k` modulo `u^prec`.
    pub fn monomial(field: &Arc<Field>, c: Fe, k: usize, prec: usize) -> Self {
        let mut s = Self::zero(field, prec);
        if k < prec && !field.is_zero(&c) {
            s.coeffs = vec![field.zero(); k + 1];
            s.coeffs[k] = c;
        }
        s
    }

    /// Dense constructor; entries at or beyond `prec` are dropped.
    pub fn from_coeffs(field: &Arc<Field>, mut coeffs: Vec<Fe>, prec: usize) -> Self {
        coeffs.truncate(prec);
        let mut s = TruncSeries { field: field.clone(), coeffs, prec };
        s.trim();
        s
    }

    /// Dense constructor from integers (prime-field coefficients).
    pub fn from_ints(field: &Arc<Field>, coeffs: &[i64], prec: usize) -> Self {
        Self::from_coeffs(field, coeffs.iter().map(|&c| field.from_i64(c)).collect(), prec)
    }

    /// Sparse constructor from `(exponent, coefficient)` pairs; repeated
    /// exponents are summed.
    pub fn from_terms(field: &Arc<Field>, terms: &[(usize, Fe)], prec: usize) -> Self {
        let len = terms.iter().map(|(k, _)| k + 1).max().unwrap_or(0).min(prec);
        let mut coeffs = vec![field.zero(); len];
        for (k, c) in terms {
            if *k < prec {
                coeffs[*k] = field.add(&coeffs[*k], c);
            }
        }
        Self::from_coeffs(field, coeffs, prec)
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| self.field.is_zero(c)) {
            self.coeffs.pop();
        }
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn prec(&self) -> usize {
        self.prec
    }

    pub fn coeff(&self, i: usize) -> Fe {
        self.coeffs.get(i).cloned().unwrap_or_else(|| self.field.zero())
    }

    /// Nonzero terms in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, &Fe)> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| !self.field.is_zero(c))
    }

    pub fn dense(&self) -> &[Fe] {
        &self.coeffs
    }

    /// Least exponent with a nonzero coefficient; `None` when the series is
    /// zero to its precision.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !self.field.is_zero(c))
    }

    pub fn certified_valuation(&self) -> Result<usize> {
        self.valuation().ok_or_else(|| precision("series is zero to its precision"))
    }

    /// Valuation lower bound: the precision when the series is zero to it.
    pub fn val_or_prec(&self) -> usize {
        self.valuation().unwrap_or(self.prec)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_unit(&self) -> bool {
        self.valuation() == Some(0)
    }

    pub fn truncate(&self, prec: usize) -> Self {
        let prec = prec.min(self.prec);
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(prec);
        let mut s = TruncSeries { field: self.field.clone(), coeffs, prec };
        s.trim();
        s
    }

    /// Sets the precision without checking; used for exact polynomials.
    pub fn with_prec(&self, prec: usize) -> Self {
        let mut s = self.clone();
        s.prec = prec;
        s.coeffs.truncate(prec);
        s.trim();
        s
    }

    /// Equality of both series modulo `u^n`; `n` must not exceed either precision.
    pub fn eq_mod(&self, other: &Self, n: usize) -> bool {
        (0..n).all(|i| self.coeff(i) == other.coeff(i))
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        let f = &self.field;
        let n = self.coeffs.len().max(other.coeffs.len()).min(prec);
        let coeffs = (0..n).map(|i| f.add(&self.coeff(i), &other.coeff(i))).collect();
        Self::from_coeffs(f, coeffs, prec)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        let f = &self.field;
        let n = self.coeffs.len().max(other.coeffs.len()).min(prec);
        let coeffs = (0..n).map(|i| f.sub(&self.coeff(i), &other.coeff(i))).collect();
        Self::from_coeffs(f, coeffs, prec)
    }

    pub fn neg(&self) -> Self {
        let f = &self.field;
        TruncSeries { field: f.clone(), coeffs: self.coeffs.iter().map(|c| f.neg(c)).collect(), prec: self.prec }
    }

    pub fn scale(&self, c: &Fe) -> Self {
        let f = &self.field;
        Self::from_coeffs(f, self.coeffs.iter().map(|x| f.mul(x, c)).collect(), self.prec)
    }

    /// Product, known modulo `u^min(prec_a + v_b, prec_b + v_a)`.
    pub fn mul(&self, other: &Self) -> Self {
        let f = &self.field;
        let prec = (self.prec + other.val_or_prec()).min(other.prec + self.val_or_prec());
        let n = (self.coeffs.len() + other.coeffs.len()).saturating_sub(1).min(prec);
        if n == 0 {
            return Self::zero(f, prec);
        }
        if f.degree() == 1 && f.p() < 1 << 16 {
            // small prime field: products fit in 32 bits, sums in u64
            let p = f.p() as u64;
            let b: Vec<u64> = other.coeffs.iter().take(n).map(|c| c[0] as u64).collect();
            let mut acc = vec![0u64; n];
            for (i, a) in self.coeffs.iter().take(n).enumerate() {
                let a = a[0] as u64;
                if a == 0 {
                    continue;
                }
                for (o, &bj) in acc[i..].iter_mut().zip(&b) {
                    *o += a * bj;
                }
            }
            let out = acc.into_iter().map(|c| f.from_u32((c % p) as u32)).collect();
            return Self::from_coeffs(f, out, prec);
        }
        let mut out = vec![f.zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if i >= n || f.is_zero(a) {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(n - i) {
                if !f.is_zero(b) {
                    out[i + j] = f.add(&out[i + j], &f.mul(a, b));
                }
            }
        }
        Self::from_coeffs(f, out, prec)
    }

    /// Multiplication by `u^k`.
    pub fn shift(&self, k: usize) -> Self {
        let f = &self.field;
        if self.coeffs.is_empty() {
            return Self::zero(f, self.prec + k);
        }
        let mut coeffs = vec![f.zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        TruncSeries { field: f.clone(), coeffs, prec: self.prec + k }
    }

    /// Exact division by `u^k`; fails unless the series is certified
    /// divisible.
    pub fn div_u(&self, k: usize) -> Result<Self> {
        if self.prec < k || self.val_or_prec() < k {
            return Err(precision("series not certified divisible by the requested power of u"));
        }
        let coeffs = self.coeffs.get(k..).map(|c| c.to_vec()).unwrap_or_default();
        Ok(TruncSeries { field: self.field.clone(), coeffs, prec: self.prec - k })
    }

    /// Inverse of a unit (valuation zero), to the same precision.
    pub fn inverse(&self) -> Result<Self> {
        let f = &self.field;
        if !self.is_unit() {
            return Err(precision("inverse of a series that is not a certified unit"));
        }
        let n = self.prec;
        let c0_inv = f.inv(&self.coeffs[0]).unwrap();
        let mut out: Vec<Fe> = Vec::with_capacity(n);
        out.push(c0_inv.clone());
        for k in 1..n {
            let mut acc = f.zero();
            for j in 1..=k.min(self.coeffs.len() - 1) {
                acc = f.add(&acc, &f.mul(&self.coeffs[j], &out[k - j]));
            }
            out.push(f.neg(&f.mul(&acc, &c0_inv)));
        }
        Ok(Self::from_coeffs(f, out, n))
    }

    /// `self / other` when the quotient is integral: `other = u^v * unit`
    /// and `self` is certified divisible by `u^v`.
    pub fn div(&self, other: &Self) -> Result<Self> {
        let v = other.certified_valuation()?;
        let unit = other.div_u(v)?;
        Ok(self.div_u(v)?.mul(&unit.inverse()?))
    }

    /// The Frobenius `u -> u^p`, coefficients raised to the `p`-th power.
    pub fn frobenius(&self) -> Self {
        let f = &self.field;
        let p = f.p() as usize;
        let mut coeffs = vec![f.zero(); self.coeffs.len().saturating_sub(1) * p + 1];
        if self.coeffs.is_empty() {
            return Self::zero(f, self.prec * p);
        }
        for (i, c) in self.terms() {
            coeffs[i * p] = f.frob(c);
        }
        TruncSeries { field: f.clone(), coeffs, prec: self.prec * p }
    }
}
