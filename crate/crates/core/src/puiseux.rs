//! Puiseux series: finite sums of `c u^r` with rational `r`, known modulo
//! `u^prec`.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use core::fmt;

use num_integer::Integer;
use num_traits::One;

use crate::error::{precision, Result};
use crate::field::{Fe, Field, FieldRegistry};
use crate::rational::{fmt_q, qi, Q};
use crate::series::TruncSeries;

#[derive(Clone)]
pub struct PuiseuxSeries {
    field: Arc<Field>,
    terms: BTreeMap<Q, Fe>,
    prec: Q,
}

impl PartialEq for PuiseuxSeries {
    fn eq(&self, other: &Self) -> bool {
        self.prec == other.prec && self.terms == other.terms && *self.field == *other.field
    }
}

impl fmt::Debug for PuiseuxSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (e, c) in &self.terms {
            if self.field.degree() == 1 {
                write!(f, "{}*u^{} + ", c[0], fmt_q(e))?;
            } else {
                write!(f, "{:?}*u^{} + ", c.as_slice(), fmt_q(e))?;
            }
        }
        write!(f, "O(u^{})", fmt_q(&self.prec))
    }
}

impl PuiseuxSeries {
    pub fn zero(field: &Arc<Field>, prec: Q) -> Self {
        PuiseuxSeries { field: field.clone(), terms: BTreeMap::new(), prec }
    }

    pub fn monomial(field: &Arc<Field>, c: Fe, exp: Q, prec: Q) -> Self {
        let mut s = Self::zero(field, prec);
        if exp < prec && !field.is_zero(&c) {
            s.terms.insert(exp, c);
        }
        s
    }

    pub fn from_series(s: &TruncSeries) -> Self {
        let mut out = Self::zero(s.field(), qi(s.prec() as i128));
        for (i, c) in s.terms() {
            out.terms.insert(qi(i as i128), c.clone());
        }
        out
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn prec(&self) -> Q {
        self.prec
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Q, &Fe)> + '_ {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, e: &Q) -> Fe {
        self.terms.get(e).cloned().unwrap_or_else(|| self.field.zero())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn valuation(&self) -> Option<Q> {
        self.terms.keys().next().copied()
    }

    pub fn certified_valuation(&self) -> Result<Q> {
        self.valuation().ok_or_else(|| precision("Puiseux series is zero to its precision"))
    }

    pub fn val_or_prec(&self) -> Q {
        self.valuation().unwrap_or(self.prec)
    }

    pub fn leading(&self) -> Option<(Q, Fe)> {
        self.terms.iter().next().map(|(e, c)| (*e, c.clone()))
    }

    /// Least common denominator of the exponents.
    pub fn denominator(&self) -> i128 {
        self.terms.keys().fold(1, |acc, e| acc.lcm(e.denom()))
    }

    pub fn truncate(&self, prec: Q) -> Self {
        let prec = if prec < self.prec { prec } else { self.prec };
        let terms = self.terms.range(..prec).map(|(e, c)| (*e, c.clone())).collect();
        PuiseuxSeries { field: self.field.clone(), terms, prec }
    }

    /// Overrides the precision (only ever lowers it in a sound way when
    /// `prec <= self.prec`).
    pub fn with_prec(&self, prec: Q) -> Self {
        let mut s = self.clone();
        s.prec = prec;
        s.terms.retain(|e, _| *e < prec);
        s
    }

    pub fn eq_mod(&self, other: &Self, prec: Q) -> bool {
        self.truncate(prec).terms == other.truncate(prec).terms
    }

    fn add_term(&mut self, e: Q, c: &Fe) {
        if e >= self.prec || self.field.is_zero(c) {
            return;
        }
        let f = self.field.clone();
        match self.terms.get_mut(&e) {
            Some(x) => {
                *x = f.add(x, c);
                if f.is_zero(x) {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c.clone());
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec.min(other.prec);
        let mut out = self.truncate(prec);
        for (e, c) in other.terms.range(..prec) {
            out.add_term(*e, c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        let f = &self.field;
        let terms = self.terms.iter().map(|(e, c)| (*e, f.neg(c))).collect();
        PuiseuxSeries { field: f.clone(), terms, prec: self.prec }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &Fe) -> Self {
        let f = &self.field;
        if f.is_zero(c) {
            return Self::zero(f, self.prec);
        }
        let terms = self.terms.iter().map(|(e, x)| (*e, f.mul(x, c))).collect();
        PuiseuxSeries { field: f.clone(), terms, prec: self.prec }
    }

    /// Multiplication by `u^r`.
    pub fn shift(&self, r: Q) -> Self {
        let terms = self.terms.iter().map(|(e, c)| (*e + r, c.clone())).collect();
        PuiseuxSeries { field: self.field.clone(), terms, prec: self.prec + r }
    }

    /// Product, known modulo `u^min(prec_a + v_b, prec_b + v_a)`.
    pub fn mul(&self, other: &Self) -> Self {
        let f = &self.field;
        let prec = (self.prec + other.val_or_prec()).min(other.prec + self.val_or_prec());
        let mut out = Self::zero(f, prec);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = *ea + *eb;
                if e >= prec {
                    break;
                }
                out.add_term(e, &f.mul(ca, cb));
            }
        }
        out
    }

    pub fn mul_series(&self, s: &TruncSeries) -> Self {
        self.mul(&Self::from_series(s))
    }

    /// `self^(p^k)`: exponents and precision scale by `p^k`, coefficients
    /// pass through the `k`-th Frobenius.
    pub fn frob_pow(&self, k: u32) -> Self {
        let f = &self.field;
        let pk = qi((f.p() as i128).pow(k));
        let terms = self.terms.iter().map(|(e, c)| (*e * pk, f.frob_n(c, k))).collect();
        PuiseuxSeries { field: f.clone(), terms, prec: self.prec * pk }
    }

    /// The unique `p`-th root.
    pub fn pth_root(&self) -> Self {
        let f = &self.field;
        let p = qi(f.p() as i128);
        let terms = self.terms.iter().map(|(e, c)| (*e / p, f.frob_inv(c))).collect();
        PuiseuxSeries { field: f.clone(), terms, prec: self.prec / p }
    }

    /// Coefficients moved into the top field of `reg`.
    pub fn lift(&self, reg: &FieldRegistry) -> Result<Self> {
        let top = reg.top();
        if **top == *self.field {
            return Ok(self.clone());
        }
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            terms.insert(*e, reg.lift(c, &self.field)?);
        }
        Ok(PuiseuxSeries { field: top.clone(), terms, prec: self.prec })
    }

    /// True when every exponent is an integer.
    pub fn is_integral(&self) -> bool {
        self.terms.keys().all(|e| e.denom().is_one())
    }
}
