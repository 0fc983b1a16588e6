//! Finite fields `F_{p^m}` in a power basis, and a registry of nested
//! extensions with explicit embeddings.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::poly;

/// Field element: coordinates in the power basis `1, g, ..., g^{m-1}`.
pub type Fe = SmallVec<[u32; 4]>;

pub const DEFAULT_MAX_FIELD_DEGREE: usize = 64;

/// `F_{p^m} = F_p[x]/(f)` with `f` monic irreducible of degree `m`.
pub struct Field {
    p: u32,
    degree: usize,
    /// Monic, `degree + 1` coefficients, low to high.
    modulus: Vec<u32>,
    /// `frob[i] = (g^i)^p`.
    frob: Vec<Fe>,
    frob_inv: Vec<Fe>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.modulus == other.modulus
    }
}

impl Eq for Field {}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}^{} mod {:?}", self.p, self.degree, self.modulus)
    }
}

fn is_odd_prime(p: u32) -> bool {
    if p < 3 || p % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

impl Field {
    /// The prime field `F_p`, `p` an odd prime.
    pub fn prime(p: u32) -> Result<Field> {
        if !is_odd_prime(p) {
            return Err(Error::InvalidInput(alloc::format!("p = {p} is not an odd prime")));
        }
        Ok(Self::build(p, vec![0, 1]))
    }

    /// `F_p[x]/(modulus)`; `modulus` is given low to high and must be monic
    /// and irreducible.
    pub fn new(p: u32, modulus: &[u32]) -> Result<Field> {
        let fp = Self::prime(p)?;
        let mut m: Vec<u32> = modulus.iter().map(|&c| c % p).collect();
        while m.len() > 1 && *m.last().unwrap() == 0 {
            m.pop();
        }
        if m.len() < 2 || *m.last().unwrap() != 1 {
            return Err(Error::InvalidInput("defining polynomial must be monic of degree >= 1".into()));
        }
        let as_poly: Vec<Fe> = m.iter().map(|&c| fp.from_u32(c)).collect();
        if !poly::is_irreducible(&fp, &as_poly) {
            return Err(Error::InvalidInput("defining polynomial is not irreducible".into()));
        }
        Ok(Self::build(p, m))
    }

    /// The first monic irreducible polynomial of degree `n` over `F_p` in a
    /// fixed enumeration order; deterministic.
    pub fn find(p: u32, n: usize) -> Result<Field> {
        let fp = Self::prime(p)?;
        if n == 1 {
            return Ok(fp);
        }
        // Sparse candidates first: x^n + a x + b, then x^n + a x^2 + b x + c, ...
        let mut k: u64 = 1;
        loop {
            let mut coeffs = vec![0u32; n + 1];
            coeffs[n] = 1;
            let mut rest = k;
            let mut i = 0;
            while rest > 0 && i < n {
                coeffs[i] = (rest % p as u64) as u32;
                rest /= p as u64;
                i += 1;
            }
            if rest == 0 && coeffs[0] != 0 {
                let as_poly: Vec<Fe> = coeffs.iter().map(|&c| fp.from_u32(c)).collect();
                if poly::is_irreducible(&fp, &as_poly) {
                    return Ok(Self::build(p, coeffs));
                }
            }
            k += 1;
        }
    }

    fn build(p: u32, modulus: Vec<u32>) -> Field {
        let degree = modulus.len() - 1;
        let mut field = Field { p, degree, modulus, frob: Vec::new(), frob_inv: Vec::new() };
        let mut frob = Vec::with_capacity(degree);
        let mut gi = field.one();
        let g = field.generator();
        for _ in 0..degree {
            frob.push(field.pow(&gi, p as u128));
            gi = field.mul(&gi, &g);
        }
        let frob_inv = invert_fp_matrix(p, &frob).expect("Frobenius is bijective on a finite field");
        field.frob = frob;
        field.frob_inv = frob_inv;
        field
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    /// `p^degree`, if it fits.
    pub fn order(&self) -> Option<u128> {
        (self.p as u128).checked_pow(self.degree as u32)
    }

    pub fn zero(&self) -> Fe {
        SmallVec::from_elem(0, self.degree)
    }

    pub fn one(&self) -> Fe {
        self.from_u32(1)
    }

    pub fn from_u32(&self, c: u32) -> Fe {
        let mut z = self.zero();
        z[0] = c % self.p;
        z
    }

    pub fn from_i64(&self, c: i64) -> Fe {
        self.from_u32(c.rem_euclid(self.p as i64) as u32)
    }

    /// Coordinates in the power basis; reduced mod `p`, padded or rejected.
    pub fn from_coords(&self, coords: &[u32]) -> Result<Fe> {
        if coords.len() != self.degree {
            return Err(Error::InvalidInput(alloc::format!(
                "coefficient has {} coordinates, field degree is {}",
                coords.len(),
                self.degree
            )));
        }
        if coords.iter().any(|&c| c >= self.p) {
            return Err(Error::InvalidInput("coordinate outside [0, p)".into()));
        }
        Ok(coords.iter().copied().collect())
    }

    pub fn generator(&self) -> Fe {
        if self.degree == 1 {
            // x mod (x - a) = a
            return self.from_u32((self.p - self.modulus[0]) % self.p);
        }
        let mut z = self.zero();
        z[1] = 1;
        z
    }

    /// Deterministic enumeration of the field's elements (base-`p` digits).
    pub fn element(&self, mut index: u128) -> Fe {
        let mut z = self.zero();
        for c in z.iter_mut() {
            *c = (index % self.p as u128) as u32;
            index /= self.p as u128;
        }
        z
    }

    pub fn is_zero(&self, a: &Fe) -> bool {
        a.iter().all(|&c| c == 0)
    }

    pub fn is_one(&self, a: &Fe) -> bool {
        a[0] == 1 && a[1..].iter().all(|&c| c == 0)
    }

    /// The element as an integer in `[0, p)` when it lies in the prime field.
    pub fn as_prime(&self, a: &Fe) -> Option<u32> {
        if a[1..].iter().all(|&c| c == 0) {
            Some(a[0])
        } else {
            None
        }
    }

    pub fn add(&self, a: &Fe, b: &Fe) -> Fe {
        let p = self.p;
        a.iter().zip(b.iter()).map(|(&x, &y)| (x + y) % p).collect()
    }

    pub fn sub(&self, a: &Fe, b: &Fe) -> Fe {
        let p = self.p;
        a.iter().zip(b.iter()).map(|(&x, &y)| (x + p - y) % p).collect()
    }

    pub fn neg(&self, a: &Fe) -> Fe {
        let p = self.p;
        a.iter().map(|&x| (p - x) % p).collect()
    }

    pub fn scale(&self, a: &Fe, c: u32) -> Fe {
        let p = self.p as u64;
        a.iter().map(|&x| ((x as u64 * c as u64) % p) as u32).collect()
    }

    pub fn mul(&self, a: &Fe, b: &Fe) -> Fe {
        let p = self.p as u64;
        if self.degree == 1 {
            let mut z = Fe::new();
            z.push(((a[0] as u64 * b[0] as u64) % p) as u32);
            return z;
        }
        let n = self.degree;
        let mut prod = vec![0u64; 2 * n - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p;
            }
        }
        for i in (n..2 * n - 1).rev() {
            let c = prod[i];
            if c == 0 {
                continue;
            }
            prod[i] = 0;
            for j in 0..n {
                let m = self.modulus[j] as u64;
                prod[i - n + j] = (prod[i - n + j] + (p - c) * m) % p;
            }
        }
        prod[..n].iter().map(|&c| c as u32).collect()
    }

    pub fn pow(&self, a: &Fe, mut n: u128) -> Fe {
        let mut base = a.clone();
        let mut acc = self.one();
        while n > 0 {
            if n & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            n >>= 1;
            if n > 0 {
                base = self.mul(&base, &base);
            }
        }
        acc
    }

    /// Multiplicative inverse via the extended Euclidean algorithm in `F_p[x]`.
    pub fn inv(&self, a: &Fe) -> Option<Fe> {
        if self.is_zero(a) {
            return None;
        }
        let p = self.p;
        if self.degree == 1 {
            return Some(self.from_u32(inv_mod(a[0], p)));
        }
        let mut r0: Vec<u32> = self.modulus.clone();
        let mut r1: Vec<u32> = a.to_vec();
        trim_u32(&mut r1);
        let mut s0: Vec<u32> = vec![0];
        let mut s1: Vec<u32> = vec![1];
        while !(r1.len() == 1 && r1[0] == 0) {
            let (quo, rem) = divrem_u32(&r0, &r1, p);
            let qs = mul_u32(&quo, &s1, p);
            let s2 = sub_u32(&s0, &qs, p);
            r0 = core::mem::replace(&mut r1, rem);
            s0 = core::mem::replace(&mut s1, s2);
        }
        // r0 is a nonzero constant.
        let c = inv_mod(r0[0], p);
        let mut z = self.zero();
        for (i, &s) in s0.iter().enumerate().take(self.degree) {
            z[i] = ((s as u64 * c as u64) % p as u64) as u32;
        }
        Some(z)
    }

    pub fn div(&self, a: &Fe, b: &Fe) -> Option<Fe> {
        self.inv(b).map(|bi| self.mul(a, &bi))
    }

    /// `a^p`, applied as the `F_p`-linear Frobenius matrix.
    pub fn frob(&self, a: &Fe) -> Fe {
        self.apply_linear(&self.frob, a)
    }

    /// The unique `b` with `b^p = a`.
    pub fn frob_inv(&self, a: &Fe) -> Fe {
        self.apply_linear(&self.frob_inv, a)
    }

    pub fn frob_n(&self, a: &Fe, n: u32) -> Fe {
        let mut x = a.clone();
        for _ in 0..n {
            x = self.frob(&x);
        }
        x
    }

    pub fn frob_inv_n(&self, a: &Fe, n: u32) -> Fe {
        let mut x = a.clone();
        for _ in 0..n {
            x = self.frob_inv(&x);
        }
        x
    }

    fn apply_linear(&self, cols: &[Fe], a: &Fe) -> Fe {
        if self.degree == 1 {
            return a.clone();
        }
        let p = self.p as u64;
        let mut acc = vec![0u64; self.degree];
        for (i, &c) in a.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for (k, &v) in cols[i].iter().enumerate() {
                acc[k] = (acc[k] + c as u64 * v as u64) % p;
            }
        }
        acc.into_iter().map(|c| c as u32).collect()
    }

    /// Lexicographic order on coordinates, highest coordinate first.
    pub fn cmp_elems(&self, a: &Fe, b: &Fe) -> core::cmp::Ordering {
        a.iter().rev().cmp(b.iter().rev())
    }
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p as i64, a as i64);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    t.rem_euclid(p as i64) as u32
}

fn trim_u32(a: &mut Vec<u32>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
    if a.is_empty() {
        a.push(0);
    }
}

fn mul_u32(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
        }
    }
    let mut out: Vec<u32> = out.into_iter().map(|c| c as u32).collect();
    trim_u32(&mut out);
    out
}

fn sub_u32(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
    let n = a.len().max(b.len());
    let mut out: Vec<u32> = (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(0);
            let y = b.get(i).copied().unwrap_or(0);
            (x + p - y) % p
        })
        .collect();
    trim_u32(&mut out);
    out
}

fn divrem_u32(a: &[u32], b: &[u32], p: u32) -> (Vec<u32>, Vec<u32>) {
    let mut rem: Vec<u32> = a.to_vec();
    trim_u32(&mut rem);
    let db = b.len() - 1;
    let lead_inv = inv_mod(b[db], p) as u64;
    if rem.len() < b.len() {
        return (vec![0], rem);
    }
    let mut quo = vec![0u32; rem.len() - db];
    for i in (db..rem.len()).rev() {
        let c = (rem[i] as u64 * lead_inv % p as u64) as u32;
        quo[i - db] = c;
        if c == 0 {
            continue;
        }
        for j in 0..=db {
            let t = (c as u64 * b[j] as u64 % p as u64) as u32;
            rem[i - db + j] = (rem[i - db + j] + p - t) % p;
        }
    }
    rem.truncate(db.max(1));
    trim_u32(&mut rem);
    trim_u32(&mut quo);
    (quo, rem)
}

/// Inverse of the `F_p`-linear map whose column `i` is `cols[i]`.
fn invert_fp_matrix(p: u32, cols: &[Fe]) -> Option<Vec<Fe>> {
    let n = cols.len();
    let pp = p as u64;
    // Row-major augmented matrix [M | I], M[r][c] = cols[c][r].
    let mut m: Vec<Vec<u64>> = (0..n)
        .map(|r| {
            let mut row: Vec<u64> = (0..n).map(|c| cols[c][r] as u64).collect();
            row.extend((0..n).map(|c| (c == r) as u64));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| m[r][col] != 0)?;
        m.swap(col, piv);
        let inv = inv_mod(m[col][col] as u32, p) as u64;
        for v in m[col].iter_mut() {
            *v = *v * inv % pp;
        }
        for r in 0..n {
            if r != col && m[r][col] != 0 {
                let f = m[r][col];
                for c in 0..2 * n {
                    let t = f * m[col][c] % pp;
                    m[r][c] = (m[r][c] + pp - t) % pp;
                }
            }
        }
    }
    Some((0..n).map(|c| (0..n).map(|r| m[r][n + c] as u32).collect()).collect())
}

/// A chain `F_{p^{m_0}} ⊂ F_{p^{m_1}} ⊂ ...` of fields with embeddings.
///
/// Level 0 is the coefficient field of the module. Each later level is a
/// finite extension of the previous one; `gen_images[i]` is the image of the
/// generator of level `i` inside level `i + 1`, so every embedding is a
/// composite of these steps.
#[derive(Clone, Debug)]
pub struct FieldRegistry {
    levels: Vec<Arc<Field>>,
    gen_images: Vec<Fe>,
    max_degree: usize,
}

impl FieldRegistry {
    pub fn new(base: Arc<Field>) -> Self {
        Self::with_max_degree(base, DEFAULT_MAX_FIELD_DEGREE)
    }

    pub fn with_max_degree(base: Arc<Field>, max_degree: usize) -> Self {
        FieldRegistry { levels: vec![base], gen_images: Vec::new(), max_degree }
    }

    pub fn base(&self) -> &Arc<Field> {
        &self.levels[0]
    }

    pub fn top(&self) -> &Arc<Field> {
        self.levels.last().unwrap()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn levels(&self) -> &[Arc<Field>] {
        &self.levels
    }

    pub fn level_of(&self, field: &Field) -> Option<usize> {
        self.levels.iter().position(|f| f.degree() == field.degree() && **f == *field)
    }

    fn embed_step(&self, level: usize, a: &Fe) -> Fe {
        let target = &self.levels[level + 1];
        let r = &self.gen_images[level];
        // Horner in the target field; coordinates of `a` are in F_p.
        let mut acc = target.zero();
        for &c in a.iter().rev() {
            acc = target.mul(&acc, r);
            acc = target.add(&acc, &target.from_u32(c));
        }
        acc
    }

    /// Image of `a` (an element of level `from`) in level `to >= from`.
    pub fn embed(&self, a: &Fe, from: usize, to: usize) -> Fe {
        let mut x = a.clone();
        for level in from..to {
            x = self.embed_step(level, &x);
        }
        x
    }

    /// Image of an element of `field` (a registered level) in the top field.
    pub fn lift(&self, a: &Fe, field: &Field) -> Result<Fe> {
        let from = self
            .level_of(field)
            .ok_or_else(|| Error::InvalidInput("field is not registered".into()))?;
        Ok(self.embed(a, from, self.levels.len() - 1))
    }

    /// Replaces the top field by an extension of relative degree `t`.
    pub fn extend(&mut self, t: usize) -> Result<()> {
        if t <= 1 {
            return Ok(());
        }
        let old = self.top().clone();
        let needed = old.degree() * t;
        if needed > self.max_degree {
            return Err(Error::FieldTooSmall { needed, max: self.max_degree });
        }
        let new = Field::find(old.p(), needed)?;
        let f: Vec<Fe> = old.modulus().iter().map(|&c| new.from_u32(c)).collect();
        let roots = poly::roots(&new, &f);
        let r = roots.into_iter().next().expect("an irreducible polynomial splits in the extension of its degree");
        self.levels.push(Arc::new(new));
        self.gen_images.push(r);
        Ok(())
    }

    /// Extends the top field until `f` (coefficients in the top field)
    /// splits into linear factors.
    pub fn ensure_splits(&mut self, f: &Vec<Fe>) -> Result<()> {
        let degrees = poly::factor_degrees(self.top(), f);
        let t = degrees.iter().fold(1usize, |acc, &d| num_integer::lcm(acc, d));
        self.extend(t)
    }

    /// Extends the top field until `f` has at least one root.
    pub fn ensure_root(&mut self, f: &Vec<Fe>) -> Result<()> {
        let degrees = poly::factor_degrees(self.top(), f);
        let t = degrees.iter().copied().min().unwrap_or(1);
        self.extend(t)
    }
}
