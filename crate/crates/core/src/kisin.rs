//! Kisin modules of E-height at most one over `k[[u]]`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::matrix::{smith_form, SeriesMatrix};
use crate::rational::{q, Q};
use crate::series::TruncSeries;

/// A free `k[[u]]`-module of rank `h` with `phi(e_1..e_h) = (e_1..e_h) A`.
///
/// `e` and `cbar0` stand in for `E(u)`, which is `u^e` times the unit
/// `cbar0` modulo `p` and modulo higher terms that never matter here.
#[derive(Clone, Debug, PartialEq)]
pub struct KisinModule {
    field: Arc<Field>,
    e: usize,
    cbar0: Fe,
    a: SeriesMatrix,
}

/// Basis in which Fil^1 is spanned by the first `h - d` vectors modulo `u^e`.
#[derive(Clone, Debug)]
pub struct AdaptedPresentation {
    /// Columns are the adapted basis in terms of the original one.
    pub u: SeriesMatrix,
    pub u_inv: SeriesMatrix,
    /// `U^{-1} A phi(U)`.
    pub a: SeriesMatrix,
    pub d: usize,
    pub p1: SeriesMatrix,
    pub p2: SeriesMatrix,
    pub p3: SeriesMatrix,
    pub p4: SeriesMatrix,
    /// `v_u(det P1)`, untruncated.
    pub v_det_p1: usize,
    pub w: Q,
}

impl KisinModule {
    /// Checks squareness, a nonzero `cbar0`, a nonzero determinant and
    /// E-height at most one.
    pub fn new(field: &Arc<Field>, e: usize, cbar0: Fe, a: SeriesMatrix) -> Result<Self> {
        if e == 0 {
            return Err(Error::InvalidInput("e must be positive".into()));
        }
        if !a.is_square() || a.rows() == 0 {
            return Err(Error::InvalidInput("the phi-matrix must be square and nonempty".into()));
        }
        if *a.field() != *field {
            return Err(Error::InvalidInput("matrix field differs from module field".into()));
        }
        if field.is_zero(&cbar0) {
            return Err(Error::InvalidInput("cbar0 must be nonzero".into()));
        }
        let s = smith_form(&a)?;
        if s.d.iter().any(|&d| d > e) {
            return Err(Error::InvalidInput("E-height exceeds one: u^e A^-1 is not integral".into()));
        }
        Ok(KisinModule { field: field.clone(), e, cbar0, a })
    }

    /// `cbar0 = -1`, the case `E(u) = u^e - p`.
    pub fn with_default_cbar0(field: &Arc<Field>, e: usize, a: SeriesMatrix) -> Result<Self> {
        let c = field.from_i64(-1);
        Self::new(field, e, c, a)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }

    pub fn p(&self) -> u32 {
        self.field.p()
    }

    pub fn e(&self) -> usize {
        self.e
    }

    pub fn cbar0(&self) -> &Fe {
        &self.cbar0
    }

    pub fn h(&self) -> usize {
        self.a.rows()
    }

    pub fn matrix(&self) -> &SeriesMatrix {
        &self.a
    }

    pub fn prec(&self) -> usize {
        self.a.prec()
    }

    pub fn truncate(&self, prec: usize) -> Self {
        KisinModule { a: self.a.truncate(prec), ..self.clone() }
    }

    /// Elementary divisor valuations of `A`.
    pub fn elementary_divisors(&self) -> Result<Vec<usize>> {
        Ok(smith_form(&self.a)?.d)
    }

    /// `(ok, d)`: every divisor valuation lies in `{0, e}`; `d` counts those
    /// equal to `e`.
    pub fn validate_bt1(&self) -> Result<(bool, usize)> {
        let d = self.elementary_divisors()?;
        let ok = d.iter().all(|&x| x == 0 || x == self.e);
        Ok((ok, d.iter().filter(|&&x| x == self.e).count()))
    }

    /// `v_u(det A) / e`.
    pub fn degree(&self) -> Result<Q> {
        let v = self.a.det().certified_valuation()?;
        Ok(q(v as i128, self.e as i128))
    }

    /// The degree from the elementary divisors; agrees with [`Self::degree`].
    pub fn degree_from_divisors(&self) -> Result<Q> {
        let s: usize = self.elementary_divisors()?.iter().sum();
        Ok(q(s as i128, self.e as i128))
    }

    pub fn adapt_basis(&self) -> Result<AdaptedPresentation> {
        let (ok, d) = self.validate_bt1()?;
        if !ok {
            return Err(Error::NotBT1);
        }
        let h = self.h();
        let r = h - d;
        // S A T = diag(1.., u^e..), so U = S^-1 sends colspan(A) mod u^e to
        // the span of the first r basis vectors.
        let s = smith_form(&self.a)?;
        let u_inv = s.u;
        let u = u_inv.inverse_unit()?;
        let a = u_inv.mul(&self.a).mul(&u.phi_twist());
        let p1 = a.block(0, r, 0, r);
        let p2 = a.block(0, r, r, h);
        let p3 = a.block(r, h, 0, r).div_u(self.e)?;
        let p4 = a.block(r, h, r, h).div_u(self.e)?;
        let v_det_p1 = if r == 0 { 0 } else { p1.det().certified_valuation()? };
        let w = q(v_det_p1.min(self.e) as i128, self.e as i128);
        Ok(AdaptedPresentation { u, u_inv, a, d, p1, p2, p3, p4, v_det_p1, w })
    }

    /// `min(v_u(det P1), e) / e`.
    pub fn hodge_height(&self) -> Result<Q> {
        Ok(self.adapt_basis()?.w)
    }

    /// Matrix `(u^e / cbar0) (tA)^-1`.
    pub fn dual(&self) -> Result<Self> {
        let f = &self.field;
        let inv = self.a.scaled_inverse(self.e)?.transpose();
        let c = f.inv(&self.cbar0).ok_or(Error::SingularMatrix)?;
        let a = inv.scale(&TruncSeries::constant(f, c, usize::MAX / 4));
        Ok(KisinModule { a, ..self.clone() })
    }

    /// Matrix `U^-1 A phi(U)` for an invertible `U`.
    pub fn base_change(&self, u: &SeriesMatrix) -> Result<Self> {
        let inv = u.inverse_unit()?;
        let a = inv.mul(&self.a).mul(&u.phi_twist());
        Ok(KisinModule { a, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f3() -> Arc<Field> {
        Arc::new(Field::prime(3).unwrap())
    }

    fn worked(prec: usize) -> KisinModule {
        let f = f3();
        let a = SeriesMatrix::from_int_polys(&f, &[&[&[0, 1], &[1]], &[&[0, 0, 0, 0, 1], &[]]], prec);
        KisinModule::with_default_cbar0(&f, 4, a).unwrap()
    }

    #[test]
    fn worked_instance_invariants() {
        let m = worked(40);
        assert_eq!(m.validate_bt1().unwrap(), (true, 1));
        assert_eq!(m.degree().unwrap(), q(1, 1));
        assert_eq!(m.degree_from_divisors().unwrap(), q(1, 1));
        let ad = m.adapt_basis().unwrap();
        assert!(ad.u.eq_mod(&SeriesMatrix::identity(m.field(), 2, 40), 30));
        assert_eq!(ad.w, q(1, 4));
        let f = m.field();
        let one = TruncSeries::one(f, 30);
        assert!(ad.p1.get(0, 0).eq_mod(&TruncSeries::monomial(f, f.one(), 1, 30), 30));
        assert!(ad.p2.get(0, 0).eq_mod(&one, 30));
        assert!(ad.p3.get(0, 0).eq_mod(&one, 30));
        assert!(ad.p4.get(0, 0).is_zero());
    }

    #[test]
    fn dual_of_worked_instance() {
        let m = worked(40);
        let d = m.dual().unwrap();
        let f = m.field();
        let want = SeriesMatrix::from_int_polys(f, &[&[&[], &[0, 0, 0, 0, 2]], &[&[2], &[0, 1]]], 40);
        assert!(d.matrix().eq_mod(&want, d.prec()));
        assert!(d.prec() >= 32);
        assert_eq!(d.hodge_height().unwrap(), q(1, 4));
        let dd = d.dual().unwrap();
        assert!(dd.matrix().eq_mod(m.matrix(), dd.prec()));
    }

    #[test]
    fn diagonal_and_non_bt1() {
        let f = f3();
        let a = SeriesMatrix::diag_powers(&f, &[0, 4], 30);
        let m = KisinModule::with_default_cbar0(&f, 4, a).unwrap();
        assert_eq!(m.hodge_height().unwrap(), q(0, 1));
        let d = m.dual().unwrap();
        let want = SeriesMatrix::from_int_polys(&f, &[&[&[0, 0, 0, 0, 2], &[]], &[&[], &[2]]], 30);
        assert!(d.matrix().eq_mod(&want, d.prec()));
        let b = SeriesMatrix::diag_powers(&f, &[2, 2], 30);
        let n = KisinModule::with_default_cbar0(&f, 4, b).unwrap();
        assert_eq!(n.validate_bt1().unwrap().0, false);
        assert!(matches!(n.adapt_basis(), Err(Error::NotBT1)));
        let c = SeriesMatrix::diag_powers(&f, &[0, 5], 30);
        assert!(KisinModule::with_default_cbar0(&f, 4, c).is_err());
    }

    #[test]
    fn swap_base_change() {
        let m = worked(40);
        let f = m.field();
        let swap = SeriesMatrix::from_int_polys(f, &[&[&[], &[1]], &[&[1], &[]]], 40);
        let b = m.base_change(&swap).unwrap();
        let want = SeriesMatrix::from_int_polys(f, &[&[&[], &[0, 0, 0, 0, 1]], &[&[1], &[0, 1]]], 40);
        assert!(b.matrix().eq_mod(&want, 40));
        let ad = b.adapt_basis().unwrap();
        assert!(ad.u.eq_mod(&swap, 30));
        assert_eq!(ad.w, q(1, 4));
    }
}
