//! The level-one canonical subgroup: the fixed point `B`, the submodule
//! `L` spanned by `e_j + u^{e(1-w)} (B e)_j`, and the quotient `N = M / L`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{precision, Error, Result};
use crate::kisin::{AdaptedPresentation, KisinModule};
use crate::matrix::{spans_equal_mod, SeriesMatrix};
use crate::rational::{q, Q};

#[derive(Clone, Debug)]
pub struct CanSubResult {
    pub w: Q,
    /// `e w`, an integer.
    pub ew: usize,
    /// `d x (h - d)`.
    pub b: SeriesMatrix,
    /// Matrix of `phi` on `L`.
    pub d_matrix: SeriesMatrix,
    /// `[I; u^{e(1-w)} B]` in the adapted basis.
    pub l_basis: SeriesMatrix,
    /// `U L_basis`, the same submodule in the original basis.
    pub l_orig: SeriesMatrix,
    /// Matrix of `phi` on `N`.
    pub n_matrix: SeriesMatrix,
    pub iterations: usize,
    /// Certified valuation of the fixed-point residual (the precision when
    /// it vanishes).
    pub residual_val: usize,
    /// Valuation of the phi-stability residual.
    pub stability_val: usize,
    /// Digits below which `B` is certified.
    pub certified_prec: usize,
    pub adapted: AdaptedPresentation,
}

/// Working digits given up to certify equalities.
pub fn slack(m: &KisinModule) -> usize {
    m.e() * m.p() as usize
}

struct Recursion<'a> {
    ad: &'a AdaptedPresentation,
    p3_hat: SeriesMatrix,
    p1_hat: SeriesMatrix,
    gamma: usize,
    epw: usize,
}

impl Recursion<'_> {
    /// `P3 P1^ - u^gamma B P2 phi(B) P1^ + u^{ep(1-w)} P4 phi(B) P1^`.
    fn step(&self, b: &SeriesMatrix) -> SeriesMatrix {
        let pb = b.phi_twist();
        let quad = b.mul(&self.ad.p2).mul(&pb).mul(&self.p1_hat).shift(self.gamma);
        let lin = self.ad.p4.mul(&pb).mul(&self.p1_hat).shift(self.epw);
        self.p3_hat.sub(&quad).add(&lin)
    }
}

fn check_shape(m: &KisinModule, ad: &AdaptedPresentation) -> Result<(usize, usize)> {
    let h = m.h();
    if ad.d == 0 || ad.d == h {
        return Err(Error::InvalidInput(format!("dimension must satisfy 0 < d < h, got d = {}", ad.d)));
    }
    let p = m.p() as i128;
    if ad.w >= q(p, p + 1) {
        return Err(Error::HodgeTooLarge);
    }
    let ew = ad.v_det_p1;
    assert!(ew < m.e(), "e w must be an integer below e");
    Ok((h - ad.d, ew))
}

/// Solves from the recursion's constant term.
pub fn solve_canonical(m: &KisinModule) -> Result<CanSubResult> {
    solve_canonical_from(m, None)
}

/// Solves from an optional integral start `B_0` (`d x (h - d)`).
pub fn solve_canonical_from(m: &KisinModule, start: Option<&SeriesMatrix>) -> Result<CanSubResult> {
    let ad = m.adapt_basis()?;
    let (_, ew) = check_shape(m, &ad)?;
    let e = m.e();
    let p = m.p() as usize;
    let epw = p * (e - ew);
    if epw <= ew {
        return Err(Error::NonConvergence("contraction exponent is not positive".into()));
    }
    let gamma = epw - ew;
    let p1_hat = if ew == 0 { ad.p1.inverse_unit()? } else { ad.p1.scaled_inverse(ew)? };
    let rec = Recursion { ad: &ad, p3_hat: ad.p3.mul(&p1_hat), p1_hat: p1_hat.clone(), gamma, epw };

    let step = gamma.min(epw);
    let bound = rec.p3_hat.prec() / step + 3;
    let mut b = match start {
        Some(b0) => b0.clone(),
        None => rec.p3_hat.clone(),
    };
    let mut last_diff: Option<usize> = None;
    let mut iterations = 0;
    loop {
        let next = rec.step(&b);
        iterations += 1;
        let diff = next.sub(&b);
        let v = diff.min_val();
        let zero = v >= diff.prec();
        if let Some(prev) = last_diff {
            if !zero && v < prev + step {
                return Err(Error::NonConvergence(format!(
                    "contraction failed: {v} after {prev} at iteration {iterations}"
                )));
            }
        }
        b = next;
        if zero {
            break;
        }
        last_diff = Some(v);
        if iterations > bound {
            return Err(Error::NonConvergence(format!("no fixed point after {iterations} iterations")));
        }
    }

    let res = assemble(m, ad, b, iterations)?;
    if res.residual_val < res.certified_prec {
        return Err(precision("fixed-point residual is not small enough"));
    }
    let adapted_module = KisinModule::new(m.field(), e, m.cbar0().clone(), res.adapted.a.clone())?;
    quotient_presentation(&adapted_module, &res.l_basis)?;
    Ok(res)
}

/// Derived data for a given `B`; no certification beyond recording the
/// residual valuations.
fn assemble(m: &KisinModule, ad: AdaptedPresentation, b: SeriesMatrix, iterations: usize) -> Result<CanSubResult> {
    let (r, ew) = check_shape(m, &ad)?;
    let e = m.e();
    let epw = m.p() as usize * (e - ew);
    let p1_hat = if ew == 0 { ad.p1.inverse_unit()? } else { ad.p1.scaled_inverse(ew)? };
    let rec = Recursion { ad: &ad, p3_hat: ad.p3.mul(&p1_hat), p1_hat, gamma: epw - ew, epw };
    let residual = rec.step(&b).sub(&b);
    let residual_val = residual.min_val();
    let certified_prec = m.prec().saturating_sub(slack(m));

    let f = m.field();
    let h = m.h();
    let pb = b.phi_twist();
    let d_matrix = ad.p1.add(&ad.p2.mul(&pb).shift(epw));
    let ident = SeriesMatrix::identity(f, r, b.prec());
    let l_basis = ident.vstack(&b.shift(e - ew));
    let l_orig = ad.u.mul(&l_basis);
    let phi_l = SeriesMatrix::identity(f, r, pb.prec()).vstack(&pb.shift(epw));
    let stab = ad.a.mul(&phi_l).sub(&l_basis.mul(&d_matrix));
    let stability_val = stab.min_val();

    // T = [L | (0; I)] has T^-1 = [[I, 0], [-X, I]] for L = [I; X].
    let x = l_basis.block(r, h, 0, r);
    let lower = SeriesMatrix::identity(f, h - r, x.prec());
    let t = l_basis.hstack(&SeriesMatrix::zero(f, r, h - r, x.prec()).vstack(&lower));
    let t_inv = SeriesMatrix::identity(f, r, x.prec())
        .hstack(&SeriesMatrix::zero(f, r, h - r, x.prec()))
        .vstack(&x.neg().hstack(&lower));
    let n_matrix = t_inv.mul(&ad.a).mul(&t.phi_twist()).block(r, h, r, h);

    Ok(CanSubResult {
        w: ad.w,
        ew,
        b,
        d_matrix,
        l_basis,
        l_orig,
        n_matrix,
        iterations,
        residual_val,
        stability_val,
        certified_prec,
        adapted: ad,
    })
}

impl CanSubResult {
    /// The same data rebuilt from `B + delta`; used for negative controls.
    pub fn perturbed(&self, m: &KisinModule, delta: &SeriesMatrix) -> Result<CanSubResult> {
        assemble(m, self.adapted.clone(), self.b.add(delta), self.iterations)
    }
}

/// Whether `L` and the adapted `Fil^1` agree modulo `u^{e i}`.
pub fn verify_frobenius_kernel(res: &CanSubResult, m: &KisinModule, i: Q) -> Result<bool> {
    let ei = i * q(m.e() as i128, 1);
    if !ei.is_integer() || ei <= q(0, 1) || ei > q(m.e() as i128, 1) {
        return Err(Error::InvalidInput("e i must be an integer in 1..=e".into()));
    }
    let k = *ei.numer() as usize;
    let r = m.h() - res.adapted.d;
    let fil = res.adapted.u.block(0, m.h(), 0, r);
    spans_equal_mod(&res.l_orig, &fil, k)
}

/// Matrix of `phi` on `M / L` for a `phi`-stable direct summand `L`
/// (columns in the basis of `m`).
pub fn quotient_presentation(m: &KisinModule, l_basis: &SeriesMatrix) -> Result<KisinModule> {
    let h = m.h();
    let r = l_basis.cols();
    let f = m.field();
    let prec = l_basis.prec();
    let mut chosen: Option<SeriesMatrix> = None;
    for cols in subsets(h, h - r) {
        let comp = SeriesMatrix::from_fn(f, h, h - r, |i, j| {
            if cols[j] == i {
                crate::series::TruncSeries::one(f, prec)
            } else {
                crate::series::TruncSeries::zero(f, prec)
            }
        });
        let t = l_basis.hstack(&comp);
        if t.det().is_unit() {
            chosen = Some(t);
            break;
        }
    }
    let t = chosen.ok_or(Error::NotDirectSummand)?;
    let t_inv = t.inverse_unit()?;
    let a = t_inv.mul(m.matrix()).mul(&t.phi_twist());
    let lower_left = a.block(r, h, 0, r);
    if lower_left.min_val() < lower_left.prec() {
        return Err(Error::NotDirectSummand);
    }
    let n = a.block(r, h, r, h);
    KisinModule::new(f, m.e(), m.cbar0().clone(), n)
}

/// Increasing `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `ann(L)` in the dual basis: `U^{-t} [-X^t; I]` for `L = U [I; X]`.
pub fn annihilator(res: &CanSubResult) -> Result<SeriesMatrix> {
    let ad = &res.adapted;
    let h = ad.u.rows();
    let r = h - ad.d;
    let x = res.l_basis.block(r, h, 0, r);
    let f = ad.u.field();
    let lower = SeriesMatrix::identity(f, ad.d, x.prec());
    let y = x.transpose().neg().vstack(&lower);
    Ok(ad.u_inv.transpose().mul(&y))
}

/// Outcome of comparing the dual's canonical submodule with `ann(L)`.
#[derive(Clone, Debug)]
pub struct DualityOutcome {
    pub equal: bool,
    /// Modulus `u^k` at which the spans were compared.
    pub compared_mod: usize,
    pub dual: CanSubResult,
}

pub fn duality_check_detailed(m: &KisinModule, res: &CanSubResult) -> Result<DualityOutcome> {
    let dual_module = m.dual()?;
    let dual = solve_canonical(&dual_module)?;
    let ann = annihilator(res)?;
    let k = ann.prec().min(dual.l_orig.prec()).min(dual.certified_prec).saturating_sub(slack(m));
    if k == 0 {
        return Err(precision("no digits left to compare dual spans"));
    }
    let equal = spans_equal_mod(&dual.l_orig, &ann, k)?;
    Ok(DualityOutcome { equal, compared_mod: k, dual })
}

pub fn duality_check(m: &KisinModule) -> Result<bool> {
    let res = solve_canonical(m)?;
    Ok(duality_check_detailed(m, &res)?.equal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::series::TruncSeries;
    use alloc::sync::Arc;

    fn worked(prec: usize) -> KisinModule {
        let f = Arc::new(Field::prime(3).unwrap());
        let a = SeriesMatrix::from_int_polys(&f, &[&[&[0, 1], &[1]], &[&[0, 0, 0, 0, 1], &[]]], prec);
        KisinModule::with_default_cbar0(&f, 4, a).unwrap()
    }

    #[test]
    fn subsets_enumerate() {
        assert_eq!(subsets(3, 2), alloc::vec![alloc::vec![0, 1], alloc::vec![0, 2], alloc::vec![1, 2]]);
        assert_eq!(subsets(2, 0), alloc::vec![Vec::<usize>::new()]);
    }

    #[test]
    fn worked_instance() {
        let m = worked(80);
        let res = solve_canonical(&m).unwrap();
        let f = m.field();
        let b = TruncSeries::from_terms(f, &[(0, f.one()), (8, f.from_i64(-1)), (16, f.one())], 24);
        assert!(res.b.get(0, 0).eq_mod(&b, 24));
        assert_eq!(res.ew, 1);
        assert_eq!(res.d_matrix.det().valuation(), Some(1));
        assert!(res.stability_val >= res.certified_prec);
        let n = res.n_matrix.get(0, 0);
        assert_eq!(n.valuation(), Some(3));
        // N = -u^3 B
        assert!(n.eq_mod(&res.b.get(0, 0).shift(3).neg(), 60));
        assert!(verify_frobenius_kernel(&res, &m, q(3, 4)).unwrap());
        assert!(!verify_frobenius_kernel(&res, &m, q(1, 1)).unwrap());
        assert!(duality_check(&m).unwrap());
    }

    #[test]
    fn ordinary_instance() {
        let f = Arc::new(Field::prime(3).unwrap());
        let a = SeriesMatrix::diag_powers(&f, &[0, 4], 60);
        let m = KisinModule::with_default_cbar0(&f, 4, a).unwrap();
        let res = solve_canonical(&m).unwrap();
        assert!(res.b.get(0, 0).is_zero());
        assert!(res.d_matrix.get(0, 0).eq_mod(&TruncSeries::one(&f, 40), 40));
        assert!(res.n_matrix.eq_mod(&SeriesMatrix::diag_powers(&f, &[4], 40), 40));
        assert!(verify_frobenius_kernel(&res, &m, q(1, 1)).unwrap());
        assert!(duality_check(&m).unwrap());
    }
}
