//! Roots of additive polynomials `sum_k c_k y^(p^k)` over Puiseux series,
//! by Newton-polygon recursion.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{precision, Error, Result};
use crate::field::{Fe, Field, FieldRegistry};
use crate::poly;
use crate::puiseux::PuiseuxSeries;
use crate::rational::{qi, Q};

/// A slope of the Newton polygon: `p^b - p^a` roots of valuation `val`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub a: usize,
    pub b: usize,
    pub val: Q,
}

/// Solution set of `P(y) = rhs`: `particular + span_Fp(basis)`.
#[derive(Clone, Debug)]
pub struct RootSpace {
    pub particular: PuiseuxSeries,
    /// Homogeneous roots, deepest valuation first.
    pub basis: Vec<PuiseuxSeries>,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Stop refining a root once the next correction lies at or beyond
    /// this exponent.
    pub target: Q,
    /// Largest admitted exponent denominator; reaching it ends refinement
    /// with the precision reached so far.
    pub denom_cap: i128,
    pub max_steps: usize,
}

impl RootSpace {
    /// All `p^n` solutions; the index's base-`p` digits are the
    /// coordinates on `basis`.
    pub fn all(&self) -> Vec<PuiseuxSeries> {
        let p = self.particular.field().p() as usize;
        let mut out = vec![self.particular.clone()];
        for b in &self.basis {
            let mut next = Vec::with_capacity(out.len() * p);
            let mut mult = b.clone();
            let mut multiples = vec![PuiseuxSeries::zero(b.field(), exact())];
            for _ in 1..p {
                multiples.push(mult.clone());
                mult = mult.add(b);
            }
            for m in &multiples {
                for x in &out {
                    next.push(x.add(m));
                }
            }
            out = next;
        }
        out
    }
}

fn lift_all(reg: &FieldRegistry, xs: &mut [PuiseuxSeries]) -> Result<()> {
    for x in xs.iter_mut() {
        *x = x.lift(reg)?;
    }
    Ok(())
}

/// Nonzero coefficients as `(k, v_k)`; fails if the top one is not certified.
fn vertices(coeffs: &[PuiseuxSeries]) -> Result<Vec<(usize, Q)>> {
    let pts: Vec<(usize, Q)> =
        coeffs.iter().enumerate().filter_map(|(k, c)| c.valuation().map(|v| (k, v))).collect();
    match (pts.last(), coeffs.len()) {
        (None, _) => Err(Error::InvalidInput("additive polynomial is zero".into())),
        (Some(&(k, _)), n) if k + 1 != n => {
            Err(precision("leading coefficient of the additive polynomial is zero to precision"))
        }
        _ => Ok(pts),
    }
}

/// Lower convex hull of `(p^k, v_k)`, segments ordered from the left
/// (deepest roots first).
pub fn newton_polygon(coeffs: &[PuiseuxSeries], p: u32) -> Result<Vec<Segment>> {
    let pts = vertices(coeffs)?;
    let x = |k: usize| qi((p as i128).pow(k as u32));
    let mut hull: Vec<(usize, Q)> = Vec::new();
    for &(k, v) in &pts {
        while hull.len() >= 2 {
            let (k1, v1) = hull[hull.len() - 2];
            let (k2, v2) = hull[hull.len() - 1];
            // drop the middle point unless it lies strictly below the chord
            let lhs = (v2 - v1) * (x(k) - x(k1));
            let rhs = (v - v1) * (x(k2) - x(k1));
            if lhs >= rhs {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((k, v));
    }
    // coefficients that are zero only to precision must sit strictly above
    for (k, c) in coeffs.iter().enumerate() {
        if c.valuation().is_none() && k > pts[0].0 {
            let seg = hull.windows(2).find(|w| w[0].0 < k && k < w[1].0);
            if let Some(w) = seg {
                let (k1, v1) = w[0];
                let (k2, v2) = w[1];
                let at = v1 + (v2 - v1) * (x(k) - x(k1)) / (x(k2) - x(k1));
                if c.prec() <= at {
                    return Err(precision("a vanishing coefficient may touch the Newton polygon"));
                }
            }
        }
    }
    Ok(hull
        .windows(2)
        .map(|w| Segment { a: w[0].0, b: w[1].0, val: (w[0].1 - w[1].1) / (x(w[1].0) - x(w[0].0)) })
        .collect())
}

struct Solver<'a> {
    reg: &'a mut FieldRegistry,
    coeffs: Vec<PuiseuxSeries>,
    verts: Vec<(usize, Q)>,
    p: u32,
    opts: SolveOptions,
}

impl Solver<'_> {
    fn top(&self) -> alloc::sync::Arc<Field> {
        self.reg.top().clone()
    }

    fn sync(&mut self) -> Result<()> {
        lift_all(self.reg, &mut self.coeffs)
    }

    fn pk(&self, k: usize) -> Q {
        qi((self.p as i128).pow(k as u32))
    }

    /// Least `mu` with `min_k (v_k + p^k mu) = v`.
    fn f_inv(&self, v: Q) -> Q {
        self.verts.iter().map(|&(k, vk)| (v - vk) / self.pk(k)).max().unwrap()
    }

    fn eval(&self, y: &PuiseuxSeries) -> PuiseuxSeries {
        eval_additive(&self.coeffs, y)
    }

    /// Leading coefficient of `c_k`, in the current top field.
    fn lc(&self, k: usize) -> Fe {
        self.coeffs[k].leading().map(|(_, c)| c).unwrap_or_else(|| self.top().zero())
    }

    /// Polynomial `sum_{k in S} lc_k s^(p^(k - a)) - c` in `s`, `a = min S`.
    fn leading_poly(&self, ks: &[usize], c: &Fe) -> Vec<Fe> {
        let f = self.top();
        let a = ks[0];
        let deg = (self.p as usize).pow((ks[ks.len() - 1] - a) as u32);
        let mut out = vec![f.zero(); deg + 1];
        for &k in ks {
            let d = (self.p as usize).pow((k - a) as u32);
            out[d] = f.add(&out[d], &self.lc(k));
        }
        out[0] = f.neg(c);
        out
    }

    /// One solution `t` of `sum_{k in S} lc_k t^(p^k) = c`.
    fn leading_solve(&mut self, ks: &[usize], c: &Fe) -> Result<Fe> {
        let a = ks[0];
        let s = if ks.len() == 1 {
            let f = self.top();
            f.div(c, &self.lc(a)).unwrap()
        } else {
            let old = self.top();
            let poly0 = self.leading_poly(ks, c);
            self.reg.ensure_root(&poly0)?;
            self.sync()?;
            let f = self.top();
            let c = self.reg.lift(c, &old)?;
            let poly1 = self.leading_poly(ks, &c);
            poly::roots(&f, &poly1).into_iter().next().expect("ensure_root guarantees a root")
        };
        Ok(self.top().frob_inv_n(&s, a as u32))
    }

    /// Refines `y0` towards a solution of `P(y) = rhs`.
    fn particular(&mut self, rhs: &PuiseuxSeries, y0: &PuiseuxSeries) -> Result<PuiseuxSeries> {
        let mut y = y0.lift(self.reg)?;
        let mut r = rhs.lift(self.reg)?.sub(&self.eval(&y));
        let mut steps = 0;
        let cert = loop {
            let Some((v, lc)) = r.leading() else {
                break self.f_inv(r.prec());
            };
            let mu = self.f_inv(v);
            if mu >= self.opts.target || *mu.denom() > self.opts.denom_cap || steps >= self.opts.max_steps {
                break mu;
            }
            let ks: Vec<usize> =
                self.verts.iter().filter(|&&(k, vk)| vk + self.pk(k) * mu == v).map(|&(k, _)| k).collect();
            let before = self.reg.levels().len();
            let t = self.leading_solve(&ks, &lc)?;
            if self.reg.levels().len() != before {
                y = y.lift(self.reg)?;
                r = r.lift(self.reg)?;
            }
            let f = self.top();
            let term = PuiseuxSeries::monomial(&f, t, mu, exact());
            let y_next = y.add(&term);
            let r_next = r.sub(&self.eval(&term));
            if r_next.val_or_prec() <= v {
                return Err(Error::NonConvergence("Newton step did not raise the residual".into()));
            }
            y = y_next;
            r = r_next;
            steps += 1;
        };
        Ok(y.with_prec(cert))
    }

    fn homogeneous_basis(&mut self, segments: &[Segment]) -> Result<Vec<PuiseuxSeries>> {
        let mut basis: Vec<PuiseuxSeries> = Vec::new();
        for seg in segments {
            let ks: Vec<usize> = self
                .verts
                .iter()
                .filter(|&&(k, vk)| k >= seg.a && k <= seg.b && vk + self.pk(k) * seg.val == self.line_at(seg))
                .map(|&(k, _)| k)
                .collect();
            let zero = self.top().zero();
            let poly0 = self.leading_poly(&ks, &zero);
            let before = self.reg.levels().len();
            self.reg.ensure_splits(&poly0)?;
            if self.reg.levels().len() != before {
                self.sync()?;
                lift_all(self.reg, &mut basis)?;
            }
            let f = self.top();
            let poly1 = self.leading_poly(&ks, &f.zero());
            let roots = poly::roots(&f, &poly1);
            let chosen = fp_basis(&f, &roots, seg.b - seg.a);
            for s in chosen {
                let t = f.frob_inv_n(&s, seg.a as u32);
                let y0 = PuiseuxSeries::monomial(&f, t, seg.val, exact());
                let zero = PuiseuxSeries::zero(&f, exact());
                let before = self.reg.levels().len();
                let y = self.particular(&zero, &y0)?;
                if self.reg.levels().len() != before {
                    lift_all(self.reg, &mut basis)?;
                }
                basis.push(y);
            }
        }
        lift_all(self.reg, &mut basis)?;
        Ok(basis)
    }

    /// Common value `v_k + p^k val` along a segment.
    fn line_at(&self, seg: &Segment) -> Q {
        let va = self.verts.iter().find(|&&(k, _)| k == seg.a).unwrap().1;
        va + self.pk(seg.a) * seg.val
    }
}

/// Greedy `F_p`-independent subset of `roots` of size `n` (nonzero roots,
/// sorted order).
fn fp_basis(f: &Field, roots: &[Fe], n: usize) -> Vec<Fe> {
    let p = f.p();
    let mut span: Vec<Fe> = vec![f.zero()];
    let mut out = Vec::new();
    for r in roots {
        if out.len() == n {
            break;
        }
        if span.contains(r) {
            continue;
        }
        let mut next = Vec::with_capacity(span.len() * p as usize);
        for c in 0..p {
            let m = f.scale(r, c);
            for s in &span {
                next.push(f.add(s, &m));
            }
        }
        span = next;
        out.push(r.clone());
    }
    assert_eq!(out.len(), n, "additive polynomial has too few roots in its splitting field");
    out
}

/// All solutions of `sum_k coeffs[k] y^(p^k) = rhs`.
///
/// Coefficients below the first nonzero one are treated as exact zeros.
/// Coefficient fields must be levels of `reg`; results live in its top.
pub fn solve_additive(
    coeffs: &[PuiseuxSeries],
    rhs: &PuiseuxSeries,
    opts: SolveOptions,
    reg: &mut FieldRegistry,
) -> Result<RootSpace> {
    let p = reg.base().p();
    let segments = newton_polygon(coeffs, p)?;
    let verts = vertices(coeffs)?;
    let mut coeffs = coeffs.to_vec();
    lift_all(reg, &mut coeffs)?;
    let mut s = Solver { reg, coeffs, verts, p, opts };
    let basis = s.homogeneous_basis(&segments)?;
    let particular = if rhs.is_zero() {
        rhs.lift(s.reg)?
    } else {
        let f = s.top();
        s.particular(rhs, &PuiseuxSeries::zero(&f, exact()))?
    };
    let mut basis = basis;
    lift_all(s.reg, &mut basis)?;
    let particular = particular.lift(s.reg)?;
    Ok(RootSpace { particular, basis, segments })
}

/// `sum_k coeffs[k] y^(p^k)`.
pub fn eval_additive(coeffs: &[PuiseuxSeries], y: &PuiseuxSeries) -> PuiseuxSeries {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c.mul(&y.frob_pow(k as u32)))
        .reduce(|a, b| a.add(&b))
        .expect("at least one coefficient")
}

/// Precision standing in for "exact" on finite sums.
pub fn exact() -> Q {
    qi(1 << 60)
}
