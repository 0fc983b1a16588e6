//! Seeded generation of BT1 Kisin modules with prescribed `(h, d, w)`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::field::{Fe, Field};
use crate::kisin::KisinModule;
use crate::matrix::SeriesMatrix;
use crate::rational::{qi, Q};
use crate::series::TruncSeries;

pub const RETRY_BOUND: usize = 64;

/// Degree bound of random polynomial entries.
const ENTRY_DEGREE: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub p: u32,
    pub m: usize,
    pub e: usize,
    pub h: usize,
    pub d: usize,
    pub w: Q,
    pub seed: u64,
    pub precision: usize,
    /// Produce an upper-triangular matrix.
    pub triangular_hint: bool,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidInput(s.into()));
        if self.e == 0 {
            return bad("e must be positive");
        }
        if self.d == 0 || self.d >= self.h {
            return bad("need 0 < d < h");
        }
        if self.m == 0 {
            return bad("field degree must be positive");
        }
        let ew = self.w * qi(self.e as i128);
        if !ew.is_integer() || ew < qi(0) || ew >= qi(self.e as i128) {
            return bad("e w must be an integer in 0..e");
        }
        if self.precision <= self.e {
            return bad("precision must exceed e");
        }
        Field::prime(self.p)?;
        Ok(())
    }

    pub fn ew(&self) -> usize {
        (self.w * qi(self.e as i128)).to_integer() as usize
    }
}

struct Gen {
    rng: ChaCha8Rng,
    field: Arc<Field>,
    prec: usize,
}

impl Gen {
    fn below(&mut self, n: u32) -> u32 {
        self.rng.next_u32() % n
    }

    fn elem(&mut self) -> Fe {
        let coords: Vec<u32> = (0..self.field.degree()).map(|_| self.below(self.field.p())).collect();
        self.field.from_coords(&coords).expect("coordinates are reduced")
    }

    fn nonzero_elem(&mut self) -> Fe {
        loop {
            let x = self.elem();
            if !self.field.is_zero(&x) {
                return x;
            }
        }
    }

    fn poly(&mut self) -> TruncSeries {
        let coeffs: Vec<Fe> = (0..=ENTRY_DEGREE).map(|_| self.elem()).collect();
        TruncSeries::from_coeffs(&self.field, coeffs, self.prec)
    }

    fn matrix(&mut self, r: usize, c: usize) -> SeriesMatrix {
        let data = (0..r * c).map(|_| self.poly()).collect();
        SeriesMatrix::new(&self.field, r, c, data)
    }

    /// Random invertible matrix with unit determinant.
    fn unit_matrix(&mut self, n: usize) -> Result<SeriesMatrix> {
        for _ in 0..RETRY_BOUND {
            let m = self.matrix(n, n);
            if m.det().is_unit() {
                return Ok(m);
            }
        }
        Err(Error::GenerationFailed)
    }

    /// `P L U` with unitriangular `L`, `U` and a permutation `P`; its
    /// inverse is again polynomial.
    fn polynomial_unit(&mut self, n: usize) -> SeriesMatrix {
        let f = self.field.clone();
        let prec = self.prec;
        let mut lower = SeriesMatrix::identity(&f, n, prec);
        let mut upper = SeriesMatrix::identity(&f, n, prec);
        let mut entries_l = Vec::new();
        let mut entries_u = Vec::new();
        for _ in 0..n * n {
            entries_l.push(self.poly());
            entries_u.push(self.poly());
        }
        lower = SeriesMatrix::from_fn(&f, n, n, |i, j| if i > j { entries_l[i * n + j].clone() } else { lower.get(i, j).clone() });
        upper = SeriesMatrix::from_fn(&f, n, n, |i, j| if i < j { entries_u[i * n + j].clone() } else { upper.get(i, j).clone() });
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.below(i as u32 + 1) as usize;
            perm.swap(i, j);
        }
        let pm = SeriesMatrix::from_fn(&f, n, n, |i, j| {
            if perm[i] == j {
                TruncSeries::one(&f, prec)
            } else {
                TruncSeries::zero(&f, prec)
            }
        });
        pm.mul(&lower).mul(&upper)
    }

    /// Random composition of `total` into `parts` non-negative integers.
    fn composition(&mut self, total: usize, parts: usize) -> Vec<usize> {
        let mut out = alloc::vec![0usize; parts];
        for _ in 0..total {
            let i = self.below(parts as u32) as usize;
            out[i] += 1;
        }
        out
    }
}

fn check(spec: &GenSpec, m: &KisinModule) -> Result<bool> {
    let (ok, d) = m.validate_bt1()?;
    Ok(ok && d == spec.d && m.degree()? == qi(spec.d as i128) && m.hodge_height()? == spec.w)
}

/// Deterministic in `spec`; the output is re-validated (BT1, dimension,
/// degree and Hodge height) before being returned.
pub fn gen_bt1(spec: &GenSpec) -> Result<KisinModule> {
    spec.validate()?;
    let field = Arc::new(Field::find(spec.p, spec.m)?);
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(spec.seed), field: field.clone(), prec: spec.precision };
    let cbar0 = field.from_i64(-1);
    if spec.triangular_hint {
        return gen_triangular(spec, &mut g, cbar0);
    }
    let (h, d, e) = (spec.h, spec.d, spec.e);
    let r = h - d;
    for _ in 0..RETRY_BOUND {
        // [[P1, P2], [P3, P4]] is a unit only if P1 mod u has rank >= r - d
        let mut ts = g.composition(spec.ew(), r.min(d));
        ts.resize(r, 0);
        let v1 = g.unit_matrix(r)?;
        let v2 = g.unit_matrix(r)?;
        let p1 = v1.mul(&SeriesMatrix::diag_powers(&field, &ts, spec.precision)).mul(&v2);
        let p2 = g.matrix(r, d);
        let p3 = g.matrix(d, r);
        let p4 = g.matrix(d, d);
        if !SeriesMatrix::from_blocks(&p1, &p2, &p3, &p4).det().is_unit() {
            continue;
        }
        let a0 = SeriesMatrix::from_blocks(&p1, &p2, &p3.shift(e), &p4.shift(e)).truncate(spec.precision);
        let w = g.polynomial_unit(h);
        let w_inv = w.inverse_unit()?;
        let a = w_inv.mul(&a0).mul(&w.phi_twist()).truncate(spec.precision);
        let m = KisinModule::new(&field, e, cbar0.clone(), a)?;
        if check(spec, &m)? {
            return Ok(m);
        }
    }
    Err(Error::GenerationFailed)
}

fn gen_triangular(spec: &GenSpec, g: &mut Gen, cbar0: Fe) -> Result<KisinModule> {
    let (h, d, e) = (spec.h, spec.d, spec.e);
    let field = g.field.clone();
    let prec = spec.precision;
    for attempt in 0..RETRY_BOUND * 4 {
        // diagonal exponents with total e d; h = 2 gets [ew, e - ew] first
        let s: Vec<usize> = if h == 2 && d == 1 && attempt == 0 {
            alloc::vec![spec.ew(), e - spec.ew()]
        } else {
            let mut s = alloc::vec![0usize; h];
            let mut left = e * d;
            while left > 0 {
                let i = g.below(h as u32) as usize;
                if s[i] < e {
                    s[i] += 1;
                    left -= 1;
                }
            }
            s
        };
        let a = SeriesMatrix::from_fn(&field, h, h, |i, j| {
            if i == j {
                TruncSeries::monomial(&field, field.one(), s[i], prec)
            } else {
                TruncSeries::zero(&field, prec)
            }
        });
        let mut entries = Vec::new();
        for _ in 0..h * h {
            let c = g.nonzero_elem();
            entries.push(g.poly().add(&TruncSeries::constant(&field, c, prec)));
        }
        let a = SeriesMatrix::from_fn(&field, h, h, |i, j| if i < j { entries[i * h + j].clone() } else { a.get(i, j).clone() });
        let m = match KisinModule::new(&field, e, cbar0.clone(), a) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if check(spec, &m)? {
            return Ok(m);
        }
    }
    Err(Error::GenerationFailed)
}

/// Short text form of a spec, for diagnostics.
pub fn describe(spec: &GenSpec) -> alloc::string::String {
    format!(
        "p={} m={} e={} h={} d={} w={} seed={}",
        spec.p,
        spec.m,
        spec.e,
        spec.h,
        spec.d,
        crate::rational::fmt_q(&spec.w),
        spec.seed
    )
}
