//! Whole-theorem verification of a BT1 module: one result per clause.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::cansub::{
    annihilator, slack, solve_canonical, solve_canonical_from, verify_frobenius_kernel, CanSubResult,
};
use crate::error::{Error, Result};
use crate::field::FieldRegistry;
use crate::kisin::KisinModule;
use crate::matrix::{spans_equal_mod, SeriesMatrix};
use crate::points::{
    certified_pairing_rank, enumerate_points, fp_rank, gram_invertible, ht_kernel, lower_breaks, pairing_gram, quotient_kernel, upper_subgroup,
    PairingTarget, PointOptions, PointSet, RamificationReport,
};
use crate::rational::{fmt_q, q, qi, Q};
use crate::series::TruncSeries;

pub const CLAUSES: [&str; 9] = [
    "frobenius_kernel",
    "stability",
    "degree_of_quotient",
    "duality",
    "lower_ram",
    "upper_ram",
    "ht_kernel",
    "lowramdeg_bound",
    "uniqueness",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ClauseResult {
    pub name: String,
    pub applicable: bool,
    pub pass: bool,
    /// Engine error that prevented a verdict.
    pub error: Option<String>,
    pub details: Vec<(String, String)>,
}

impl ClauseResult {
    fn skipped(name: &str, why: &str) -> Self {
        ClauseResult {
            name: name.into(),
            applicable: false,
            pass: false,
            error: None,
            details: vec![("reason".into(), why.into())],
        }
    }

    fn from_outcome(name: &str, out: Result<(bool, Vec<(String, String)>)>) -> Self {
        match out {
            Ok((pass, details)) => ClauseResult { name: name.into(), applicable: true, pass, error: None, details },
            Err(e) => ClauseResult {
                name: name.into(),
                applicable: true,
                pass: false,
                error: Some(e.to_string()),
                details: Vec::new(),
            },
        }
    }

    pub fn errored(&self) -> bool {
        self.error.is_some()
    }
}

/// Sample points per quantified range.
#[derive(Clone, Copy, Debug)]
pub struct SampleGrid {
    pub points: usize,
    pub point_options: PointOptions,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid { points: 5, point_options: PointOptions::default() }
    }
}

impl SampleGrid {
    /// `n` samples of `(lo, hi]`, `hi` included.
    pub fn open_closed(&self, lo: Q, hi: Q) -> Vec<Q> {
        let n = self.points as i128;
        (1..=n).map(|k| lo + (hi - lo) * q(k, n)).collect()
    }

    /// `n` samples of `[lo, hi)`, `lo` included.
    pub fn closed_open(&self, lo: Q, hi: Q) -> Vec<Q> {
        let n = self.points as i128;
        (0..n).map(|k| lo + (hi - lo) * q(k, n)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub p: u32,
    pub m: usize,
    pub e: usize,
    pub h: usize,
    pub d: usize,
    pub degree: Q,
    pub w: Q,
    pub clauses: Vec<ClauseResult>,
    /// Milliseconds per phase, as reported by the supplied clock.
    pub timing_ms: Vec<(String, u64)>,
}

impl VerifyReport {
    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn any_failed(&self) -> bool {
        self.clauses.iter().any(|c| c.applicable && !c.pass && !c.errored())
    }

    pub fn any_errored(&self) -> bool {
        self.clauses.iter().any(|c| c.applicable && c.errored())
    }

    /// Every applicable clause passed.
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| !c.applicable || c.pass)
    }
}

fn kv(k: &str, v: impl Into<String>) -> (String, String) {
    (k.into(), v.into())
}

fn fmt_breaks(r: &RamificationReport) -> String {
    let parts: Vec<String> = r.breaks.iter().map(|(v, n)| format!("({},{})", fmt_q(v), n)).collect();
    format!("[{}]", parts.join(","))
}

fn fmt_qs(xs: &[Q]) -> String {
    let parts: Vec<String> = xs.iter().map(fmt_q).collect();
    format!("[{}]", parts.join(","))
}

/// Points of `M`, of its dual, the pairing, and the canonical subgroup.
struct PointData {
    reg: FieldRegistry,
    ps: PointSet,
    report: RamificationReport,
    canonical: Vec<usize>,
}

fn point_data(m: &KisinModule, res: &CanSubResult, opts: &PointOptions) -> Result<PointData> {
    let mut reg = FieldRegistry::new(m.field().clone());
    let ps = enumerate_points(m, opts, &mut reg)?;
    let report = lower_breaks(&ps)?;
    let canonical = quotient_kernel(&ps, m, res, opts, &mut reg)?;
    let ps = ps.lift(&reg)?;
    Ok(PointData { reg, ps, report, canonical })
}

/// Largest break of the points of a module, in `v_R`.
fn max_break(m: &KisinModule, opts: &PointOptions) -> Result<Q> {
    let mut reg = FieldRegistry::new(m.field().clone());
    let ps = enumerate_points(m, opts, &mut reg)?;
    let r = lower_breaks(&ps)?;
    Ok(r.breaks.last().map_or(qi(0), |b| b.0))
}

pub fn verify_instance(m: &KisinModule, grid: &SampleGrid) -> Result<VerifyReport> {
    verify_instance_with_clock(m, grid, &|| 0)
}

pub fn verify_instance_with_clock(m: &KisinModule, grid: &SampleGrid, clock: &dyn Fn() -> u64) -> Result<VerifyReport> {
    let t0 = clock();
    let solved = solve_canonical(m);
    let t1 = clock();
    let mut report = match solved {
        Ok(res) => verify_with_result_inner(m, Ok(&res), grid, clock)?,
        Err(e @ (Error::NotBT1 | Error::InvalidInput(_))) => return Err(e),
        Err(e) => verify_with_result_inner(m, Err(e), grid, clock)?,
    };
    report.timing_ms.insert(0, ("solve".into(), t1 - t0));
    Ok(report)
}

/// Runs every clause against a supplied (possibly corrupted) result.
pub fn verify_with_result(m: &KisinModule, res: &CanSubResult, grid: &SampleGrid) -> Result<VerifyReport> {
    verify_with_result_inner(m, Ok(res), grid, &|| 0)
}

fn verify_with_result_inner(
    m: &KisinModule,
    res: core::result::Result<&CanSubResult, Error>,
    grid: &SampleGrid,
    clock: &dyn Fn() -> u64,
) -> Result<VerifyReport> {
    let (ok, d) = m.validate_bt1()?;
    if !ok {
        return Err(Error::NotBT1);
    }
    let ad = m.adapt_basis()?;
    let w = ad.w;
    let degree = m.degree()?;
    let p = m.p();
    let pq = qi(p as i128);
    let pm1 = qi(p as i128 - 1);
    let mut report =
        VerifyReport { p, m: m.field().degree(), e: m.e(), h: m.h(), d, degree, w, clauses: Vec::new(), timing_ms: Vec::new() };

    if w * qi(p as i128 + 1) >= pq {
        for name in CLAUSES {
            report.clauses.push(ClauseResult::skipped(name, "needs w < p/(p+1)"));
        }
        return Ok(report);
    }
    let res = match res {
        Ok(r) => r,
        Err(e) => {
            let msg = e.to_string();
            for name in CLAUSES {
                report.clauses.push(ClauseResult::from_outcome(name, Err(Error::NonConvergence(msg.clone()))));
            }
            return Ok(report);
        }
    };

    let mut lap = clock();
    let mut tick = |report: &mut VerifyReport, phase: &str| {
        let now = clock();
        report.timing_ms.push((phase.into(), now - lap));
        lap = now;
    };

    let ew = res.ew;
    let push = |report: &mut VerifyReport, name: &str, out: Result<(bool, Vec<(String, String)>)>| {
        report.clauses.push(ClauseResult::from_outcome(name, out));
    };

    push(&mut report, "frobenius_kernel", (|| {
        let i = qi(1) - w;
        let at = verify_frobenius_kernel(res, m, i)?;
        Ok((at, vec![kv("i", fmt_q(&i)), kv("equal_mod_u^(e i)", at.to_string())]))
    })());

    push(&mut report, "stability", (|| {
        let det_val = res.d_matrix.det().certified_valuation()?;
        // recomputed from the submodule itself, in the original basis
        let stab = m.matrix().mul(&res.l_orig.phi_twist()).sub(&res.l_orig.mul(&res.d_matrix));
        let stability_val = stab.min_val();
        let pass = stability_val >= res.certified_prec && res.residual_val >= res.certified_prec && det_val == ew;
        Ok((
            pass,
            vec![
                kv("stability_val", stability_val.to_string()),
                kv("residual_val", res.residual_val.to_string()),
                kv("certified_prec", res.certified_prec.to_string()),
                kv("v_det_D", det_val.to_string()),
                kv("ew", ew.to_string()),
                kv("iterations", res.iterations.to_string()),
            ],
        ))
    })());

    push(&mut report, "degree_of_quotient", (|| {
        let e = qi(m.e() as i128);
        let deg_l = qi(res.d_matrix.det().certified_valuation()? as i128) / e;
        let deg_n = qi(res.n_matrix.det().certified_valuation()? as i128) / e;
        let pass = deg_l == w && deg_l + deg_n == degree;
        Ok((
            pass,
            vec![kv("deg_L", fmt_q(&deg_l)), kv("deg_N", fmt_q(&deg_n)), kv("deg_M", fmt_q(&degree)), kv("w", fmt_q(&w))],
        ))
    })());

    push(&mut report, "duality", (|| {
        let dual = m.dual()?;
        let dres = solve_canonical(&dual)?;
        let ann = annihilator(res)?;
        let k = ann.prec().min(dres.l_orig.prec()).min(dres.certified_prec).saturating_sub(slack(m));
        if k == 0 {
            return Err(crate::error::precision("no digits left to compare dual spans"));
        }
        let equal = spans_equal_mod(&dres.l_orig, &ann, k)?;
        let w_dual = dual.hodge_height()?;
        Ok((equal && w_dual == w, vec![kv("compared_mod_u^k", k.to_string()), kv("w_dual", fmt_q(&w_dual))]))
    })());
    tick(&mut report, "module_clauses");

    let feasible = m.h() <= grid.point_options.max_h;
    let data = if feasible { Some(point_data(m, res, &grid.point_options)) } else { None };
    tick(&mut report, "points");
    let lo_l = w / pm1;
    let hi_l = (qi(1) - w) / pm1;

    // lower ramification: C = G_b on (w/(p-1), (1-w)/(p-1)]
    if !feasible {
        report.clauses.push(ClauseResult::skipped("lower_ram", "rank exceeds point-enumeration bound"));
    } else if w >= q(1, 2) {
        report.clauses.push(ClauseResult::skipped("lower_ram", "needs w < 1/2"));
    } else {
        push(&mut report, "lower_ram", (|| {
            let pd = data.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
            let bs = grid.open_closed(lo_l, hi_l);
            let canonical_break = pd.canonical.iter().filter_map(|&i| pd.report.point_breaks[i]).min();
            let mut pass = pd.canonical.len() == (p as usize).pow(d as u32);
            let mut fails = Vec::new();
            for b in &bs {
                if pd.report.subgroup(*b, false) != pd.canonical {
                    pass = false;
                    fails.push(*b);
                }
            }
            Ok((
                pass,
                vec![
                    kv("samples", fmt_qs(&bs)),
                    kv("failed_samples", fmt_qs(&fails)),
                    kv("breaks", fmt_breaks(&pd.report)),
                    kv("canonical_order", pd.canonical.len().to_string()),
                    kv("canonical_break", canonical_break.map_or("none".into(), |b| fmt_q(&b))),
                    kv("expected_canonical_break", fmt_q(&hi_l)),
                ],
            ))
        })());
    }

    // upper ramification: C = G^{j+} on [pw/(p-1), p(1-w)/(p-1))
    if !feasible {
        report.clauses.push(ClauseResult::skipped("upper_ram", "rank exceeds point-enumeration bound"));
    } else if w >= q(1, 2) {
        report.clauses.push(ClauseResult::skipped("upper_ram", "needs w < 1/2"));
    } else {
        push(&mut report, "upper_ram", (|| {
            let pd = data.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
            let mut reg = pd.reg.clone();
            let dual = m.dual()?;
            let dps = enumerate_points(&dual, &grid.point_options, &mut reg)?;
            let target = PairingTarget::new(m, &mut reg)?;
            let ps = pd.ps.lift(&reg)?;
            let dps = dps.lift(&reg)?;
            let target = target.lift(&reg)?;
            let drep = lower_breaks(&dps)?;
            let gram = pairing_gram(&target, &ps, &dps);
            let js = grid.closed_open(pq * w / pm1, pq * (qi(1) - w) / pm1);
            let mut pass = true;
            let mut fails = Vec::new();
            for j in &js {
                if upper_subgroup(&gram, &ps, &dps, &drep, *j, true)? != pd.canonical {
                    pass = false;
                    fails.push(*j);
                }
            }
            let decided: Vec<Vec<u32>> =
                gram.iter().map(|row| row.iter().map(|g| g.clone().unwrap_or(u32::MAX)).collect()).collect();
            let undecided = decided.iter().flatten().filter(|&&g| g == u32::MAX).count();
            let mut details = vec![
                kv("samples", fmt_qs(&js)),
                kv("failed_samples", fmt_qs(&fails)),
                kv("dual_breaks", fmt_breaks(&drep)),
                kv("gram_undecided_entries", undecided.to_string()),
            ];
            let rank = if undecided == 0 {
                fp_rank(p, &decided)
            } else if let Ok(true) = gram_invertible(&gram, p) {
                m.h()
            } else {
                let dual_c = drep.subgroup((qi(1) - w) / pm1, false);
                certified_pairing_rank(&gram, &ps, &dps, &pd.canonical, &dual_c)?
            };
            details.push(kv("gram_rank_certified", rank.to_string()));
            Ok((pass && rank == m.h(), details))
        })());
    }
    tick(&mut report, "ramification");

    // Hodge-Tate kernel: C = Ker HT_b on (w/(p-1), 1-w]
    if !feasible {
        report.clauses.push(ClauseResult::skipped("ht_kernel", "rank exceeds point-enumeration bound"));
    } else if w >= (pq - qi(1)) / pq {
        report.clauses.push(ClauseResult::skipped("ht_kernel", "needs w < (p-1)/p"));
    } else {
        push(&mut report, "ht_kernel", (|| {
            let pd = data.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
            let bs = grid.open_closed(lo_l, qi(1) - w);
            let mut pass = true;
            let mut fails = Vec::new();
            for b in &bs {
                if ht_kernel(&pd.ps, &res.adapted, *b, &pd.reg)? != pd.canonical {
                    pass = false;
                    fails.push(*b);
                }
            }
            Ok((pass, vec![kv("samples", fmt_qs(&bs)), kv("failed_samples", fmt_qs(&fails))]))
        })());
    }

    // G_i = 0 for i > deg/(p-1), on M, L and N
    if !feasible {
        report.clauses.push(ClauseResult::skipped("lowramdeg_bound", "rank exceeds point-enumeration bound"));
    } else {
        push(&mut report, "lowramdeg_bound", (|| {
            let pd = data.as_ref().unwrap().as_ref().map_err(Clone::clone)?;
            let top_m = pd.report.breaks.last().map_or(qi(0), |b| b.0);
            let l_mod = KisinModule::new(m.field(), m.e(), m.cbar0().clone(), res.d_matrix.clone())?;
            let n_mod = KisinModule::new(m.field(), m.e(), m.cbar0().clone(), res.n_matrix.clone())?;
            let top_l = max_break(&l_mod, &grid.point_options)?;
            let top_n = max_break(&n_mod, &grid.point_options)?;
            let bounds = [degree / pm1, l_mod.degree()? / pm1, n_mod.degree()? / pm1];
            let tops = [top_m, top_l, top_n];
            let pass = tops.iter().zip(&bounds).all(|(t, b)| t <= b);
            Ok((pass, vec![kv("max_breaks_M_L_N", fmt_qs(&tops)), kv("bounds_M_L_N", fmt_qs(&bounds))]))
        })());
    }
    tick(&mut report, "point_clauses");

    push(&mut report, "uniqueness", (|| {
        let f = m.field();
        let bp = res.b.prec();
        let (rows, cols) = (res.b.rows(), res.b.cols());
        let starts = [
            SeriesMatrix::zero(f, rows, cols, bp),
            res.b.add(&SeriesMatrix::from_fn(f, rows, cols, |_, _| TruncSeries::one(f, bp))),
            res.b.add(&SeriesMatrix::from_fn(f, rows, cols, |i, j| {
                TruncSeries::monomial(f, f.from_u32(1 + ((i + j) as u32 % (m.p() - 1))), 1 + i + j, bp)
            })),
        ];
        let mut agree = 0;
        for s in &starts {
            let other = solve_canonical_from(m, Some(s))?;
            let k = other.certified_prec.min(res.certified_prec);
            if other.b.eq_mod(&res.b, k) {
                agree += 1;
            }
        }
        Ok((agree == starts.len(), vec![kv("starts", starts.len().to_string()), kv("agreeing", agree.to_string())]))
    })());
    tick(&mut report, "uniqueness");
    Ok(report)
}
