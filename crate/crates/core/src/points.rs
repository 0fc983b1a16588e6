//! Points of `Hom_phi(M, R)` as vectors of Puiseux series, with lower
//! ramification breaks, the Cartier pairing, upper ramification subgroups
//! and Hodge-Tate kernels.
//!
//! A point is a row vector `x` with `x^p = x A` coordinatewise. Iterating
//! gives `x^(p^k) = x M_k` with `M_k = A phi(A) ... phi^(k-1)(A)`. For a
//! column functional `g` put `v_k = M_k phi^k(g)` and `V = [v_0 .. v_{h-1}]`;
//! then `y = x g` satisfies the additive equation
//! `sum_{k<h} (adj(V) v_h)_k y^(p^k) - det(V) y^(p^h) = 0`, and
//! `x = (y, y^p, ..., y^(p^(h-1))) adj(V) / det(V)` recovers the point.
//!
//! Upper subgroups come from the duality `G^j⊥ = (G^∨)_{l(j)+}` with
//! `l(j) = 1/(p-1) - j/p`. Intersecting over `j' > j` and using that `l` is
//! continuous and decreasing turns the strict dual filtration into the
//! non-strict one: `G^{j+} = ((G^∨)_{l(j)})⊥`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::additive::{exact, solve_additive, Segment, SolveOptions};
use crate::cansub::CanSubResult;
use crate::error::{precision, Error, Result};
use crate::field::FieldRegistry;
use crate::kisin::{AdaptedPresentation, KisinModule};
use crate::matrix::SeriesMatrix;
use crate::puiseux::PuiseuxSeries;
use crate::rational::{q, qi, Q};
use crate::series::TruncSeries;

pub const DEFAULT_MAX_H: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct PointOptions {
    /// Refinement target for roots, in `u`-exponent units; `None` means
    /// `e (h + 2)`.
    pub target: Option<Q>,
    /// `None` means `e (p^h - 1) p^8`.
    pub denom_cap: Option<i128>,
    pub max_h: usize,
    pub max_steps: usize,
}

impl Default for PointOptions {
    fn default() -> Self {
        PointOptions { target: None, denom_cap: None, max_h: DEFAULT_MAX_H, max_steps: 400 }
    }
}

impl PointOptions {
    pub fn solve_options(&self, m: &KisinModule) -> SolveOptions {
        let e = m.e() as i128;
        let h = m.h() as u32;
        let p = m.p() as i128;
        SolveOptions {
            target: self.target.unwrap_or_else(|| qi(e * (h as i128 + 2))),
            denom_cap: self.denom_cap.unwrap_or_else(|| e * (p.pow(h) - 1) * p.pow(8)),
            max_steps: self.max_steps,
        }
    }
}

/// The `p^h` points; `points[i]` is `sum_k a_k basis[k]` where `a_k` are
/// the base-`p` digits of `i`.
#[derive(Clone, Debug)]
pub struct PointSet {
    pub p: u32,
    pub e: usize,
    pub h: usize,
    pub basis: Vec<Vec<PuiseuxSeries>>,
    pub points: Vec<Vec<PuiseuxSeries>>,
    /// Least coordinate precision of each basis point.
    pub basis_prec: Vec<Q>,
    /// Precision to which `x^p - x A` is certified zero, per basis point.
    pub residual_prec: Vec<Q>,
    /// Name of the functional used for the additive equation.
    pub functional: String,
    /// Newton polygon of that equation.
    pub segments: Vec<Segment>,
}

/// Coordinates of point index `i` on the basis.
pub fn digits(p: u32, h: usize, mut i: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(h);
    for _ in 0..h {
        out.push((i % p as usize) as u32);
        i /= p as usize;
    }
    out
}

pub fn index_of(p: u32, a: &[u32]) -> usize {
    a.iter().rev().fold(0, |acc, &d| acc * p as usize + d as usize)
}

/// All `F_p`-combinations of `basis`, in digit order.
fn combinations(p: u32, basis: &[Vec<PuiseuxSeries>]) -> Vec<Vec<PuiseuxSeries>> {
    let h = basis.first().map_or(0, |b| b.len());
    let f = basis[0][0].field().clone();
    let mut out = vec![vec![PuiseuxSeries::zero(&f, exact()); h]];
    for b in basis {
        let mut multiples = vec![vec![PuiseuxSeries::zero(&f, exact()); h]];
        for c in 1..p {
            multiples.push(b.iter().map(|x| x.scale(&f.from_u32(c))).collect());
        }
        let mut next = Vec::with_capacity(out.len() * p as usize);
        for m in &multiples {
            for x in &out {
                next.push(x.iter().zip(m).map(|(a, b)| a.add(b)).collect());
            }
        }
        out = next;
    }
    out
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Moves every coordinate into the top field of `reg`.
    pub fn lift(&self, reg: &FieldRegistry) -> Result<PointSet> {
        let lift = |v: &Vec<Vec<PuiseuxSeries>>| -> Result<Vec<Vec<PuiseuxSeries>>> {
            v.iter().map(|x| x.iter().map(|c| c.lift(reg)).collect()).collect()
        };
        Ok(PointSet { basis: lift(&self.basis)?, points: lift(&self.points)?, ..self.clone() })
    }

    pub fn coords(&self, i: usize) -> Vec<u32> {
        digits(self.p, self.h, i)
    }
}

/// `M_0 = I, M_1 = A, ..., M_k = A phi(A) ... phi^(k-1)(A)`.
pub fn frobenius_powers(m: &KisinModule, k_max: usize) -> Vec<SeriesMatrix> {
    let a = m.matrix();
    let mut out = vec![SeriesMatrix::identity(m.field(), m.h(), a.prec())];
    let mut phi_k = a.clone();
    for k in 0..k_max {
        out.push(out[k].mul(&phi_k));
        if k + 1 < k_max {
            phi_k = phi_k.phi_twist();
        }
    }
    out
}

fn phi_col(g: &SeriesMatrix, k: usize) -> SeriesMatrix {
    (0..k).fold(g.clone(), |acc, _| acc.phi_twist())
}

/// Columns `v_k = M_k phi^k(g)` for `k = 0..=h`.
fn orbit(ms: &[SeriesMatrix], g: &SeriesMatrix) -> Vec<SeriesMatrix> {
    ms.iter().enumerate().map(|(k, mk)| mk.mul(&phi_col(g, k))).collect()
}

fn hcat(cols: &[SeriesMatrix]) -> SeriesMatrix {
    cols[1..].iter().fold(cols[0].clone(), |acc, c| acc.hstack(c))
}

/// Minimal-length relation `sum_k c_k M_k e_var = 0`; the additive
/// polynomial `sum_k c_k y^(p^k)` vanishes on coordinate `var` of every
/// point.
pub fn additive_resultant(m: &KisinModule, var: usize) -> Result<Vec<TruncSeries>> {
    let h = m.h();
    let f = m.field();
    let ms = frobenius_powers(m, h);
    let g = SeriesMatrix::from_fn(f, h, 1, |i, _| {
        if i == var {
            TruncSeries::one(f, m.prec())
        } else {
            TruncSeries::zero(f, m.prec())
        }
    });
    let v = orbit(&ms, &g);
    for n in 1..=h {
        let w = hcat(&v[..n]);
        // the n x n minor of least determinant valuation
        let mut best: Option<(usize, Vec<usize>, TruncSeries)> = None;
        for rows in row_subsets(h, n) {
            let sub = SeriesMatrix::from_fn(f, n, n, |i, j| w.get(rows[i], j).clone());
            let d = sub.det();
            if let Some(val) = d.valuation() {
                if best.as_ref().is_none_or(|(bv, _, _)| val < *bv) {
                    best = Some((val, rows, d));
                }
            }
        }
        let Some((_, rows, det)) = best else {
            return Err(precision("Frobenius orbit of the coordinate is degenerate at precision"));
        };
        let sub = SeriesMatrix::from_fn(f, n, n, |i, j| w.get(rows[i], j).clone());
        let rhs = SeriesMatrix::from_fn(f, n, 1, |i, _| v[n].get(rows[i], 0).clone());
        let sol = sub.adjugate().mul(&rhs);
        let mut c: Vec<TruncSeries> = (0..n).map(|k| sol.get(k, 0).clone()).collect();
        c.push(det.neg());
        let check = (0..=n).fold(SeriesMatrix::zero(f, h, 1, m.prec()), |acc, k| acc.add(&v[k].scale(&c[k])));
        if check.min_val() >= check.prec() {
            return Ok(c);
        }
    }
    Err(precision("no relation found among the Frobenius orbit"))
}

fn row_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Candidate functionals: coordinates first, then `u`-power mixtures.
fn candidate_functionals(m: &KisinModule) -> Vec<(String, SeriesMatrix)> {
    let h = m.h();
    let f = m.field();
    let n = m.prec();
    let mut out = Vec::new();
    for var in 0..h {
        let g = SeriesMatrix::from_fn(f, h, 1, |i, _| {
            if i == var {
                TruncSeries::one(f, n)
            } else {
                TruncSeries::zero(f, n)
            }
        });
        out.push((format!("x{}", var + 1), g));
    }
    for step in 1..=2usize {
        let g = SeriesMatrix::from_fn(f, h, 1, |i, _| TruncSeries::monomial(f, f.one(), step * i, n));
        out.push((format!("sum u^({step}i) x_i"), g));
        let g = SeriesMatrix::from_fn(f, h, 1, |i, _| TruncSeries::monomial(f, f.one(), step * (h - 1 - i), n));
        out.push((format!("sum u^({step}(h-1-i)) x_i"), g));
    }
    out
}

fn pz(s: &TruncSeries, reg: &FieldRegistry) -> Result<PuiseuxSeries> {
    PuiseuxSeries::from_series(s).lift(reg)
}

fn lift_matrix(m: &SeriesMatrix, reg: &FieldRegistry) -> Result<Vec<Vec<PuiseuxSeries>>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| pz(m.get(i, j), reg)).collect()).collect()
}

fn row_times(x: &[PuiseuxSeries], m: &[Vec<PuiseuxSeries>]) -> Vec<PuiseuxSeries> {
    let cols = m[0].len();
    (0..cols)
        .map(|j| {
            x.iter()
                .zip(m)
                .map(|(xi, row)| xi.mul(&row[j]))
                .reduce(|a, b| a.add(&b))
                .expect("nonempty row")
        })
        .collect()
}

/// `x^p - x A`, coordinatewise.
pub fn point_residual(x: &[PuiseuxSeries], a: &[Vec<PuiseuxSeries>]) -> Vec<PuiseuxSeries> {
    let xa = row_times(x, a);
    x.iter().zip(&xa).map(|(xi, r)| xi.frob_pow(1).sub(r)).collect()
}

/// Basis of the points obtained through one functional.
struct Via {
    functional: String,
    basis: Vec<Vec<PuiseuxSeries>>,
    segments: Vec<Segment>,
}

fn points_via(
    m: &KisinModule,
    ms: &[SeriesMatrix],
    name: &str,
    g: &SeriesMatrix,
    opts: &PointOptions,
    reg: &mut FieldRegistry,
) -> Result<Via> {
    let h = m.h();
    let p = m.p();
    let v = orbit(ms, g);
    let vmat = hcat(&v[..h]);
    let det = vmat.det();
    let dv = det.valuation().ok_or_else(|| precision("recovery matrix is singular to precision"))?;
    let adj = vmat.adjugate();
    let rel = adj.mul(&v[h]);
    let mut coeffs: Vec<PuiseuxSeries> = (0..h).map(|k| pz(rel.get(k, 0), reg)).collect::<Result<_>>()?;
    coeffs.push(pz(&det.neg(), reg)?);

    let sopts = opts.solve_options(m);
    let zero = PuiseuxSeries::zero(reg.top(), exact());
    let roots = solve_additive(&coeffs, &zero, sopts, reg)?;
    if roots.basis.len() != h {
        return Err(Error::EnumerationIncomplete {
            found: p.pow(roots.basis.len() as u32) as usize,
            expected: p.pow(h as u32) as usize,
        });
    }
    let adj_p = lift_matrix(&adj, reg)?;
    let unit_inv = pz(&det.div_u(dv)?.inverse()?, reg)?;
    let shift = -qi(dv as i128);
    let basis = roots
        .basis
        .iter()
        .map(|y| {
            let ys: Vec<PuiseuxSeries> = (0..h).map(|k| y.frob_pow(k as u32)).collect();
            row_times(&ys, &adj_p).into_iter().map(|c| c.mul(&unit_inv).shift(shift)).collect()
        })
        .collect();
    Ok(Via { functional: name.into(), basis, segments: roots.segments })
}

fn lift_points(v: &[Vec<PuiseuxSeries>], reg: &FieldRegistry) -> Result<Vec<Vec<PuiseuxSeries>>> {
    v.iter().map(|x| x.iter().map(|c| c.lift(reg)).collect()).collect()
}

fn min_prec(x: &[PuiseuxSeries]) -> Q {
    x.iter().map(|c| c.prec()).min().expect("nonempty point")
}

/// Whether `x` differs in a certified term from every point of `span`.
fn outside(x: &[PuiseuxSeries], span: &[Vec<PuiseuxSeries>]) -> bool {
    span.iter().all(|y| x.iter().zip(y).any(|(a, b)| a.sub(b).valuation().is_some()))
}

/// Recomputes the coordinates of `x` outside the `k` most precise ones from
/// the point equation. The columns of `x^p = x A` indexed by the known set
/// `K` are linear in the unknowns; a unit minor eliminates all unknowns but
/// one, `t`, which then solves `c_1 t^p + c_0 t = rhs` in one unknown column.
/// No recovery determinant is divided out.
fn complete_with(
    x: &[PuiseuxSeries],
    known: &[usize],
    m: &KisinModule,
    a_p: &[Vec<PuiseuxSeries>],
    sopts: SolveOptions,
    reg: &mut FieldRegistry,
) -> Result<Option<Vec<PuiseuxSeries>>> {
    let h = m.h();
    let unknown: Vec<usize> = (0..h).filter(|i| !known.contains(i)).collect();
    let n = unknown.len();
    if n == 0 || known.len() + 1 < n {
        return Ok(None);
    }
    let a = m.matrix();
    for &f in &unknown {
        let rest: Vec<usize> = unknown.iter().copied().filter(|&i| i != f).collect();
        for cols in row_subsets(known.len(), n - 1) {
            let cols: Vec<usize> = cols.iter().map(|&c| known[c]).collect();
            // the registry may have grown in an earlier attempt
            let x = lift_points(&[x.to_vec()], reg)?.remove(0);
            let a_p = lift_points(a_p, reg)?;
            // r_j = x_j^p - sum_{i in K} x_i a_ij for j in K
            let r_of = |j: usize| known.iter().fold(x[j].frob_pow(1), |acc, &i| acc.sub(&x[i].mul(&a_p[i][j])));
            // x_rest = alpha + beta t with N = A[rest, cols]^-1
            let (alpha, beta) = if rest.is_empty() {
                (Vec::new(), Vec::new())
            } else {
                let minor = SeriesMatrix::from_fn(m.field(), n - 1, n - 1, |i, j| a.get(rest[i], cols[j]).clone());
                let Ok(inv) = minor.inverse_unit() else { continue };
                let inv = lift_matrix(&inv, reg)?;
                let r: Vec<PuiseuxSeries> = cols.iter().map(|&j| r_of(j)).collect();
                let af: Vec<PuiseuxSeries> = cols.iter().map(|&j| a_p[f][j].neg()).collect();
                (row_times(&r, &inv), row_times(&af, &inv))
            };
            let top = reg.top().clone();
            let one = PuiseuxSeries::monomial(&top, top.one(), qi(0), exact());
            let zero = PuiseuxSeries::zero(&top, exact());
            let affine = |i: usize| -> (PuiseuxSeries, PuiseuxSeries) {
                if i == f {
                    (zero.clone(), one.clone())
                } else {
                    let k = rest.iter().position(|&r| r == i).expect("unknown index");
                    (alpha[k].clone(), beta[k].clone())
                }
            };
            // column f: (alpha_f + beta_f t)^p = sum_U (alpha_i + beta_i t) a_if + sum_K x_i a_if
            let mut c0 = zero.clone();
            let mut rhs = known.iter().fold(zero.clone(), |acc, &i| acc.add(&x[i].mul(&a_p[i][f])));
            for &i in &unknown {
                let (al, be) = affine(i);
                c0 = c0.sub(&be.mul(&a_p[i][f]));
                rhs = rhs.add(&al.mul(&a_p[i][f]));
            }
            let coeffs = [c0, one.clone()];
            let Ok(roots) = solve_additive(&coeffs, &rhs, sopts, reg) else { continue };
            let x = lift_points(&[x], reg)?.remove(0);
            let a_p = lift_points(&a_p, reg)?;
            let mut best: Option<Vec<PuiseuxSeries>> = None;
            for t in roots.all() {
                let mut y = x.clone();
                for &i in &unknown {
                    let (al, be) = affine(i);
                    let (al, be) = (al.lift(reg)?, be.lift(reg)?);
                    y[i] = al.add(&be.mul(&t));
                }
                let consistent = point_residual(&y, &a_p).iter().all(|r| r.is_zero())
                    && !y.iter().zip(&x).any(|(s, t)| s.sub(t).valuation().is_some());
                if consistent && best.as_ref().is_none_or(|b| min_prec(&y) > min_prec(b)) {
                    best = Some(y);
                }
            }
            if best.is_some() {
                return Ok(best);
            }
        }
    }
    Ok(None)
}

/// Tries [`complete_with`] on the most precise coordinates of `x`, keeping
/// the most precise consistent result.
fn complete_point(
    x: &[PuiseuxSeries],
    m: &KisinModule,
    a_p: &[Vec<PuiseuxSeries>],
    sopts: SolveOptions,
    reg: &mut FieldRegistry,
) -> Result<Vec<PuiseuxSeries>> {
    let h = m.h();
    let mut order: Vec<usize> = (0..h).collect();
    order.sort_by_key(|&i| core::cmp::Reverse(x[i].prec()));
    let mut best = x.to_vec();
    for k in (1..h).rev() {
        let known = &order[..k];
        if let Some(y) = complete_with(x, known, m, a_p, sopts, reg)? {
            if min_prec(&y) > min_prec(&best) {
                best = y;
            }
        }
    }
    lift_points(&[best], reg).map(|mut v| v.remove(0))
}

/// Enumerates `Hom_phi(M, R)`. Coefficient fields grow inside `reg`, whose
/// base must be the module's field; returned points live in its top.
///
/// Candidate basis points come from the functional with the
/// best-conditioned recovery matrix and from every coordinate functional;
/// the most precise certified-independent ones form the basis.
pub fn enumerate_points(m: &KisinModule, opts: &PointOptions, reg: &mut FieldRegistry) -> Result<PointSet> {
    let h = m.h();
    if h > opts.max_h {
        return Err(Error::InvalidInput(format!("rank {h} exceeds the point-enumeration bound {}", opts.max_h)));
    }
    if **reg.base() != **m.field() {
        return Err(Error::InvalidInput("registry base differs from the module field".into()));
    }
    let p = m.p();
    let ms = frobenius_powers(m, h);
    let mut ranked: Vec<(usize, usize, String, SeriesMatrix)> = Vec::new();
    for (idx, (name, g)) in candidate_functionals(m).into_iter().enumerate() {
        if let Some(val) = hcat(&orbit(&ms, &g)[..h]).det().valuation() {
            ranked.push((val, idx, name, g));
        }
    }
    ranked.sort_by_key(|r| (r.0, r.1));
    let Some((_, _, name, g)) = ranked.first() else {
        return Err(Error::EnumerationIncomplete { found: 0, expected: p.pow(h as u32) as usize });
    };
    let primary = points_via(m, &ms, name, g, opts, reg)?;
    let mut pool = primary.basis.clone();
    for (_, idx, name, g) in ranked.iter().skip(1) {
        if *idx < h {
            if let Ok(other) = points_via(m, &ms, name, g, opts, reg) {
                pool.extend(other.basis);
            }
        }
    }
    // Most precise points first; keep those certified independent.
    let mut pool = lift_points(&pool, reg)?;
    pool.sort_by_key(|x| core::cmp::Reverse(min_prec(x)));
    let mut basis: Vec<Vec<PuiseuxSeries>> = Vec::with_capacity(h);
    for x in pool {
        if basis.len() == h {
            break;
        }
        if basis.is_empty() || outside(&x, &combinations(p, &basis)) {
            basis.push(x);
        }
    }
    if basis.len() < h {
        return Err(Error::EnumerationIncomplete { found: p.pow(basis.len() as u32) as usize, expected: p.pow(h as u32) as usize });
    }

    // Recover imprecise coordinates from the precise ones; the refined basis
    // must stay certified independent.
    let a_p = lift_matrix(m.matrix(), reg)?;
    let sopts = opts.solve_options(m);
    let mut refined = Vec::with_capacity(h);
    for x in &basis {
        refined.push(complete_point(x, m, &a_p, sopts, reg)?);
    }
    let refined = lift_points(&refined, reg)?;
    if (1..h).all(|k| outside(&refined[k], &combinations(p, &refined[..k]))) {
        basis = refined;
    }
    let basis = lift_points(&basis, reg)?;
    let a_p = lift_matrix(m.matrix(), reg)?;
    let mut basis_prec = Vec::with_capacity(h);
    let mut residual_prec = Vec::with_capacity(h);
    for (found, x) in basis.iter().enumerate() {
        let res = point_residual(x, &a_p);
        if res.iter().any(|r| !r.is_zero()) {
            return Err(Error::EnumerationIncomplete { found, expected: h });
        }
        basis_prec.push(x.iter().map(|c| c.prec()).min().unwrap());
        residual_prec.push(res.iter().map(|r| r.prec()).min().unwrap());
    }
    let points = combinations(p, &basis);
    Ok(PointSet {
        p,
        e: m.e(),
        h,
        basis,
        points,
        basis_prec,
        residual_prec,
        functional: primary.functional,
        segments: primary.segments,
    })
}

/// `v_R` of the least coordinate; `None` for the zero point.
///
/// Nonzero points of a module of E-height at most one have every
/// coordinate-minimum at most `e/(p-1)` in `u`-units, so a vector known to
/// vanish beyond that is zero. Coordinates of points are integral, so a
/// coordinate known only to negative precision still has valuation `>= 0`.
pub fn point_break(x: &[PuiseuxSeries], p: u32, e: usize) -> Result<Option<Q>> {
    let bound = qi(e as i128) / qi(p as i128 - 1);
    let least = x.iter().filter_map(|c| c.valuation()).min();
    let floor = x.iter().filter(|c| c.is_zero()).map(|c| c.prec().max(qi(0))).min();
    match (least, floor) {
        (Some(v), Some(fl)) if fl < v => Err(precision("a vanishing coordinate hides the break")),
        (Some(v), _) => Ok(Some(v / qi(e as i128))),
        (None, Some(fl)) if fl > bound => Ok(None),
        (None, _) => Err(precision("point is zero to precision below the break bound")),
    }
}

/// Whether a point (any vector satisfying a point equation of E-height at
/// most one) is zero.
pub fn is_zero_point(x: &[PuiseuxSeries], p: u32, e: usize) -> Result<bool> {
    Ok(point_break(x, p, e)?.is_none())
}

#[derive(Clone, Debug)]
pub struct RamificationReport {
    /// `(v_R, multiplicity)`, increasing.
    pub breaks: Vec<(Q, usize)>,
    /// Break of every point (`None` for zero).
    pub point_breaks: Vec<Option<Q>>,
}

impl RamificationReport {
    /// Indices of `G_i` (`v >= i`), or of `G_{i+}` (`v > i`) when `strict`.
    pub fn subgroup(&self, i: Q, strict: bool) -> Vec<usize> {
        (0..self.point_breaks.len())
            .filter(|&k| match self.point_breaks[k] {
                None => true,
                Some(v) => {
                    if strict {
                        v > i
                    } else {
                        v >= i
                    }
                }
            })
            .collect()
    }

    pub fn order(&self, i: Q, strict: bool) -> usize {
        self.subgroup(i, strict).len()
    }
}

pub fn lower_breaks(ps: &PointSet) -> Result<RamificationReport> {
    let point_breaks = ps.points.iter().map(|x| point_break(x, ps.p, ps.e)).collect::<Result<Vec<_>>>()?;
    let mut vals: Vec<Q> = point_breaks.iter().flatten().copied().collect();
    vals.sort();
    let mut breaks: Vec<(Q, usize)> = Vec::new();
    for v in vals {
        match breaks.last_mut() {
            Some((b, n)) if *b == v => *n += 1,
            _ => breaks.push((v, 1)),
        }
    }
    Ok(RamificationReport { breaks, point_breaks })
}

/// Points whose image `x L` under restriction to the submodule spanned by
/// the columns of `l` vanishes.
/// Points of `M` pulled back from the quotient `N = M / L`: with
/// `T = [L | (0; I)]` the point `y` of `N` becomes `[0 | y] T^-1 U^-1`.
/// Each pullback of a basis point is matched to the points of `M` not
/// certified to differ from it; that avoids projecting shallow points.
pub fn quotient_kernel(
    ps: &PointSet,
    m: &KisinModule,
    res: &CanSubResult,
    opts: &PointOptions,
    reg: &mut FieldRegistry,
) -> Result<Vec<usize>> {
    let h = m.h();
    let r = res.l_basis.cols();
    let n_mod = KisinModule::new(m.field(), m.e(), m.cbar0().clone(), res.n_matrix.clone())?;
    let nps = enumerate_points(&n_mod, opts, reg)?;
    let ps = ps.lift(reg)?;
    let p = ps.p;
    let x = res.l_basis.block(r, h, 0, r).neg();
    let back = x.hstack(&SeriesMatrix::identity(m.field(), h - r, x.prec())).mul(&res.adapted.u_inv);
    let back = lift_matrix(&back, reg)?;
    let mut nbasis = lift_points(&nps.basis, reg)?;
    nbasis.sort_by_key(|y| core::cmp::Reverse(min_prec(y)));
    let mut gens: Vec<Vec<u32>> = Vec::new();
    for y in &nbasis {
        let pulled = row_times(y, &back);
        let cands: Vec<usize> = (0..ps.len())
            .filter(|&i| ps.points[i].iter().zip(&pulled).all(|(a, b)| a.sub(b).valuation().is_none()))
            .collect();
        let Some(&c0) = cands.first() else {
            return Err(precision("pulled-back quotient point matches no certified point"));
        };
        // Candidates in one coset of the span so far give the same span.
        let span = span_indices(p, h, &gens);
        let base = digits(p, h, c0);
        for &c in &cands[1..] {
            let diff: Vec<u32> = digits(p, h, c).iter().zip(&base).map(|(a, b)| (a + p - b) % p).collect();
            if !span.contains(&index_of(p, &diff)) {
                return Err(precision("pulled-back quotient point is ambiguous"));
            }
        }
        gens.push(base);
    }
    if fp_rank(p, &gens) != gens.len() {
        return Err(precision("pulled-back quotient points are dependent"));
    }
    let mut out = span_indices(p, h, &gens);
    out.sort_unstable();
    Ok(out)
}

fn span_indices(p: u32, h: usize, gens: &[Vec<u32>]) -> Vec<usize> {
    let mut out = vec![0usize];
    for g in gens {
        let mut next = Vec::with_capacity(out.len() * p as usize);
        for c in 0..p {
            for &i in &out {
                let v: Vec<u32> = digits(p, h, i).iter().zip(g).map(|(a, b)| (a + c * b) % p).collect();
                next.push(index_of(p, &v));
            }
        }
        out = next;
    }
    out
}

pub fn restriction_kernel(ps: &PointSet, l: &SeriesMatrix, reg: &FieldRegistry) -> Result<Vec<usize>> {
    let lp = lift_matrix(l, reg)?;
    let mut out = Vec::new();
    for (i, x) in ps.points.iter().enumerate() {
        let img = row_times(x, &lp);
        if is_zero_point(&img, ps.p, ps.e)? {
            out.push(i);
        }
    }
    Ok(out)
}

/// Points with `v_R((x U)_i) >= b` for the first `r` adapted coordinates.
/// Points whose Fil^1 coordinates vanish modulo valuation `b` (in `v_R`).
///
/// In the adapted basis `A' = diag(I, u^e) S` with `S` invertible, so the
/// Fil^1 coordinates of `x' = x U` equal the first `r` entries of
/// `x'^p S^-1`; this reads them at `p` times the precision of `x`.
pub fn ht_kernel(ps: &PointSet, ad: &AdaptedPresentation, b: Q, reg: &FieldRegistry) -> Result<Vec<usize>> {
    let r = ad.p1.rows();
    let ps = ps.lift(reg)?;
    let s_inv = SeriesMatrix::from_blocks(&ad.p1, &ad.p2, &ad.p3, &ad.p4).inverse_unit()?;
    let up = lift_matrix(&ad.u, reg)?;
    let sp = lift_matrix(&s_inv.block(0, s_inv.rows(), 0, r), reg)?;
    let bound = b * qi(ps.e as i128);
    let mut out = Vec::new();
    for (i, x) in ps.points.iter().enumerate() {
        let xp: Vec<PuiseuxSeries> = row_times(x, &up).iter().map(|c| c.frob_pow(1)).collect();
        let xa = row_times(&xp, &sp);
        let mut inside = true;
        for c in &xa {
            match c.valuation() {
                Some(v) if v < bound => {
                    inside = false;
                    break;
                }
                Some(_) => {}
                None if c.prec() < bound => {
                    return Err(precision("Hodge-Tate coordinate is zero only below the bound"));
                }
                None => {}
            }
        }
        if inside {
            out.push(i);
        }
    }
    Ok(out)
}

/// The rank-one target `z^p = cbar0^-1 u^e z` of the Cartier pairing and its
/// reference solution `z0 = t0 u^(e/(p-1))`.
#[derive(Clone, Debug)]
pub struct PairingTarget {
    pub p: u32,
    pub e: usize,
    pub coeffs: Vec<PuiseuxSeries>,
    pub z0: PuiseuxSeries,
}

impl PairingTarget {
    pub fn new(m: &KisinModule, reg: &mut FieldRegistry) -> Result<Self> {
        let f = m.field();
        let c = f.inv(m.cbar0()).ok_or(Error::SingularMatrix)?;
        let e = m.e() as i128;
        let coeffs =
            vec![PuiseuxSeries::monomial(f, f.neg(&c), qi(e), exact()), PuiseuxSeries::monomial(f, f.one(), qi(0), exact())];
        let zero = PuiseuxSeries::zero(f, exact());
        let opts = SolveOptions { target: qi(e * 4), denom_cap: e * (m.p() as i128 - 1), max_steps: 4 };
        let roots = solve_additive(&coeffs, &zero, opts, reg)?;
        let z0 = roots.basis[0].clone();
        let coeffs = coeffs.iter().map(|c| c.lift(reg)).collect::<Result<Vec<_>>>()?;
        Ok(PairingTarget { p: m.p(), e: m.e(), coeffs, z0 })
    }

    pub fn lift(&self, reg: &FieldRegistry) -> Result<Self> {
        Ok(PairingTarget {
            coeffs: self.coeffs.iter().map(|c| c.lift(reg)).collect::<Result<_>>()?,
            z0: self.z0.lift(reg)?,
            ..self.clone()
        })
    }

    /// Exponent `e/(p-1)` of the reference solution.
    pub fn level(&self) -> Q {
        q(self.e as i128, self.p as i128 - 1)
    }
}

/// `t` in `F_p` with `sum_i x_i y_i = t z0`.
pub fn cartier_pairing(target: &PairingTarget, x: &[PuiseuxSeries], y: &[PuiseuxSeries]) -> Result<u32> {
    let z = x.iter().zip(y).map(|(a, b)| a.mul(b)).reduce(|a, b| a.add(&b)).expect("nonempty point");
    let level = target.level();
    let resid = z.frob_pow(1).add(&target.coeffs[0].mul(&z));
    if !resid.is_zero() {
        return Err(Error::PairingInconsistent);
    }
    match z.leading() {
        None if z.prec() > level => Ok(0),
        None => Err(precision("pairing value is zero only to insufficient precision")),
        Some((v, _)) if v < level => Err(Error::PairingInconsistent),
        Some((v, _)) if v > level => Ok(0),
        Some((_, c)) => {
            let f = z.field();
            let (_, c0) = target.z0.leading().expect("reference solution is nonzero");
            let t = f.div(&c, &c0).expect("nonzero reference");
            f.as_prime(&t).ok_or(Error::PairingInconsistent)
        }
    }
}

/// Pairings of basis points; entry `[i][k] = <x_i, y_k>`.
pub fn pairing_gram(target: &PairingTarget, ps: &PointSet, dual: &PointSet) -> Vec<Vec<Result<u32>>> {
    ps.basis.iter().map(|x| dual.basis.iter().map(|y| cartier_pairing(target, x, y)).collect()).collect()
}

/// `<point i of ps, point k of dual>` from the Gram matrix, touching only
/// the entries that are needed.
pub fn pairing_value(gram: &[Vec<Result<u32>>], p: u32, a: &[u32], b: &[u32]) -> Result<u32> {
    let mut acc = 0u64;
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (k, &bk) in b.iter().enumerate() {
            if bk == 0 {
                continue;
            }
            let g = gram[i][k].clone()?;
            acc = (acc + ai as u64 * bk as u64 * g as u64) % p as u64;
        }
    }
    Ok(acc as u32)
}

/// Greedy `F_p`-basis of the coordinate vectors of a subgroup.
pub fn fp_generators(p: u32, h: usize, subgroup: &[usize]) -> Vec<Vec<u32>> {
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut gens = Vec::new();
    for &i in subgroup {
        let v = digits(p, h, i);
        if fp_rank(p, &[rows.clone(), vec![v.clone()]].concat()) > rows.len() {
            rows.push(v.clone());
            gens.push(v);
        }
    }
    gens
}

/// Rank over `F_p`.
pub fn fp_rank(p: u32, rows: &[Vec<u32>]) -> usize {
    let mut m: Vec<Vec<u64>> = rows.iter().map(|r| r.iter().map(|&x| x as u64 % p as u64).collect()).collect();
    let p = p as u64;
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, piv);
        let inv = pow_mod(m[rank][c], p - 2, p);
        for r in 0..m.len() {
            if r != rank && m[r][c] != 0 {
                let f = m[r][c] * inv % p;
                for k in 0..cols {
                    m[r][k] = (m[r][k] + p * p - f * m[rank][k] % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

fn pow_mod(mut a: u64, mut n: u64, p: u64) -> u64 {
    let mut r = 1;
    a %= p;
    while n > 0 {
        if n & 1 == 1 {
            r = r * a % p;
        }
        a = a * a % p;
        n >>= 1;
    }
    r
}

/// `{x : <x, y> = 0 for all y in h}` for a subgroup `h` of the dual points.
pub fn orthogonal(gram: &[Vec<Result<u32>>], ps: &PointSet, dual: &PointSet, h: &[usize]) -> Result<Vec<usize>> {
    let gens = fp_generators(dual.p, dual.h, h);
    let mut out = Vec::new();
    for i in 0..ps.len() {
        let a = ps.coords(i);
        // One decided nonzero value excludes the point, whatever the rest.
        let mut undecided = None;
        let mut excluded = false;
        for g in &gens {
            match pairing_value(gram, ps.p, &a, g) {
                Ok(0) => {}
                Ok(_) => {
                    excluded = true;
                    break;
                }
                Err(e) => undecided = Some(e),
            }
        }
        match (excluded, undecided) {
            (true, _) => {}
            (false, None) => out.push(i),
            (false, Some(e)) => return Err(e),
        }
    }
    Ok(out)
}

/// Whether the Gram matrix is invertible for every value of its undecided
/// entries. Its determinant is multilinear in them, and a multilinear
/// polynomial over `F_p` is constant as a function only when it is constant
/// as a polynomial.
pub fn gram_invertible(gram: &[Vec<Result<u32>>], p: u32) -> Result<bool> {
    let n = gram.len();
    let pm = p as u64;
    let mut terms: alloc::collections::BTreeMap<u64, u64> = alloc::collections::BTreeMap::new();
    for perm in permutations(n) {
        let mut inversions = 0;
        for i in 0..n {
            for j in i + 1..n {
                if perm[i] > perm[j] {
                    inversions += 1;
                }
            }
        }
        let mut coeff = if inversions % 2 == 0 { 1 } else { pm - 1 };
        let mut mask = 0u64;
        for (i, &j) in perm.iter().enumerate() {
            match &gram[i][j] {
                Ok(g) => coeff = coeff * *g as u64 % pm,
                Err(_) => mask |= 1 << (i * n + j),
            }
        }
        let t = terms.entry(mask).or_insert(0);
        *t = (*t + coeff) % pm;
    }
    let constant = terms.get(&0).copied().unwrap_or(0);
    if terms.iter().any(|(mask, c)| *mask != 0 && *c != 0) {
        return Err(precision("Gram determinant depends on undecided pairings"));
    }
    Ok(constant != 0)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..n {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Extends `gens` to an `F_p`-basis of `F_p^h` by standard vectors.
fn complete_basis(p: u32, h: usize, gens: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let mut all = gens.to_vec();
    let mut extra = Vec::new();
    for i in 0..h {
        let mut e = vec![0u32; h];
        e[i] = 1;
        let mut trial = all.clone();
        trial.push(e.clone());
        if fp_rank(p, &trial) > all.len() {
            all.push(e.clone());
            extra.push(e);
        }
    }
    extra
}

/// Lower bound for the `F_p`-rank of the pairing `G x G^∨ -> F_p` using
/// subgroups `c ⊂ G`, `c_dual ⊂ G^∨` with `<c, c_dual> = 0`: in adapted
/// bases the Gram matrix is `[[0, X], [Y, Z]]`, so its rank is at least
/// `rank X + rank Y` whatever `Z` is. Entries of `Z` are never evaluated.
pub fn certified_pairing_rank(
    gram: &[Vec<Result<u32>>],
    ps: &PointSet,
    dual: &PointSet,
    c: &[usize],
    c_dual: &[usize],
) -> Result<usize> {
    let p = ps.p;
    let gc = fp_generators(p, ps.h, c);
    let gd = fp_generators(p, dual.h, c_dual);
    let nc = complete_basis(p, ps.h, &gc);
    let nd = complete_basis(p, dual.h, &gd);
    for a in &gc {
        for b in &gd {
            if pairing_value(gram, p, a, b)? != 0 {
                return Err(Error::PairingInconsistent);
            }
        }
    }
    let block = |rows: &[Vec<u32>], cols: &[Vec<u32>]| -> Result<Vec<Vec<u32>>> {
        rows.iter().map(|a| cols.iter().map(|b| pairing_value(gram, p, a, b)).collect()).collect()
    };
    let x = block(&gc, &nd)?;
    let y = block(&nc, &gd)?;
    Ok(fp_rank(p, &x) + fp_rank(p, &y))
}

/// `l(j) = 1/(p-1) - j/p`.
pub fn l_of(p: u32, j: Q) -> Q {
    q(1, p as i128 - 1) - j / qi(p as i128)
}

/// `G^{j+} = ((G^∨)_{l(j)})⊥` when `plus`, else `G^j = ((G^∨)_{l(j)+})⊥`.
pub fn upper_subgroup(
    gram: &[Vec<Result<u32>>],
    ps: &PointSet,
    dual: &PointSet,
    dual_report: &RamificationReport,
    j: Q,
    plus: bool,
) -> Result<Vec<usize>> {
    let h = dual_report.subgroup(l_of(ps.p, j), !plus);
    orthogonal(gram, ps, dual, &h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cansub::solve_canonical;
    use crate::field::Field;
    use alloc::sync::Arc;

    fn f3() -> Arc<Field> {
        Arc::new(Field::prime(3).unwrap())
    }

    fn worked(prec: usize) -> KisinModule {
        let f = f3();
        let a = SeriesMatrix::from_int_polys(&f, &[&[&[0, 1], &[1]], &[&[0, 0, 0, 0, 1], &[]]], prec);
        KisinModule::with_default_cbar0(&f, 4, a).unwrap()
    }

    #[test]
    fn frobenius_power_two() {
        let m = worked(40);
        let ms = frobenius_powers(&m, 2);
        let f = m.field();
        let want = SeriesMatrix::from_int_polys(
            f,
            &[&[&[0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 1], &[0, 1]], &[&[0, 0, 0, 0, 0, 0, 0, 1], &[0, 0, 0, 0, 1]]],
            40,
        );
        assert!(ms[2].eq_mod(&want, 40));
        assert!(ms[1].eq_mod(m.matrix(), 40));
    }

    #[test]
    fn resultants() {
        let m = worked(40);
        let c = additive_resultant(&m, 1).unwrap();
        let f = m.field();
        let want = [
            TruncSeries::from_ints(f, &[0, 0, 0, 0, 1], 30),
            TruncSeries::from_ints(f, &[0, 1], 30),
            TruncSeries::from_ints(f, &[-1], 30),
        ];
        // equal up to a global sign
        let sign = if c[2].coeff(0) == want[2].coeff(0) { 1 } else { -1 };
        for (a, b) in c.iter().zip(&want) {
            let b = if sign == 1 { b.clone() } else { b.neg() };
            assert!(a.eq_mod(&b, 30));
        }
        let id = KisinModule::with_default_cbar0(f, 4, SeriesMatrix::identity(f, 2, 20)).unwrap();
        let c = additive_resultant(&id, 0).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c[0].add(&c[1]).is_zero());
    }

    #[test]
    fn worked_instance_points() {
        let m = worked(60);
        let mut reg = FieldRegistry::new(m.field().clone());
        let ps = enumerate_points(&m, &PointOptions::default(), &mut reg).unwrap();
        assert_eq!(ps.len(), 9);
        let rep = lower_breaks(&ps).unwrap();
        assert_eq!(rep.breaks, vec![(q(1, 24), 6), (q(3, 8), 2)]);
        let res = solve_canonical(&m).unwrap();
        let ker = restriction_kernel(&ps, &res.l_orig, &reg).unwrap();
        assert_eq!(ker, rep.subgroup(q(3, 8), false));
        assert_eq!(ker.len(), 3);
        let ht = ht_kernel(&ps, &res.adapted, q(3, 4), &reg).unwrap();
        assert_eq!(ht, ker);
        assert_eq!(ht_kernel(&ps, &res.adapted, q(0, 1), &reg).unwrap().len(), 9);

        let dual = m.dual().unwrap();
        let dps = enumerate_points(&dual, &PointOptions::default(), &mut reg).unwrap();
        let ps = ps.lift(&reg).unwrap();
        let target = PairingTarget::new(&m, &mut reg).unwrap();
        let ps = ps.lift(&reg).unwrap();
        let dps = dps.lift(&reg).unwrap();
        let drep = lower_breaks(&dps).unwrap();
        assert_eq!(drep.breaks, vec![(q(1, 24), 6), (q(3, 8), 2)]);
        let gram = pairing_gram(&target, &ps, &dps);
        let up = upper_subgroup(&gram, &ps, &dps, &drep, q(1, 2), true).unwrap();
        assert_eq!(up, ker);
        let dker = drep.subgroup(q(3, 8), false);
        assert_eq!(certified_pairing_rank(&gram, &ps, &dps, &ker, &dker).unwrap(), 2);
    }

    #[test]
    fn rank_one_breaks() {
        let f = f3();
        for s in 1..=4usize {
            let a = SeriesMatrix::diag_powers(&f, &[s], 40);
            let m = KisinModule::with_default_cbar0(&f, 4, a).unwrap();
            let mut reg = FieldRegistry::new(f.clone());
            let ps = enumerate_points(&m, &PointOptions::default(), &mut reg).unwrap();
            let rep = lower_breaks(&ps).unwrap();
            assert_eq!(rep.breaks, vec![(q(s as i128, 8), 2)]);
        }
    }

    #[test]
    fn etale_identity() {
        let f = f3();
        let m = KisinModule::with_default_cbar0(&f, 4, SeriesMatrix::identity(&f, 2, 30)).unwrap();
        let mut reg = FieldRegistry::new(f.clone());
        let ps = enumerate_points(&m, &PointOptions::default(), &mut reg).unwrap();
        assert_eq!(ps.len(), 9);
        let rep = lower_breaks(&ps).unwrap();
        assert_eq!(rep.breaks, vec![(q(0, 1), 8)]);
        for x in &ps.points {
            for c in x {
                assert!(c.terms().all(|(e, _)| *e == qi(0)));
            }
        }
    }
}
