//! Dense univariate polynomials over a [`Field`]: Euclidean arithmetic,
//! irreducibility testing, distinct-degree factor degrees and root finding.

use alloc::vec;
use alloc::vec::Vec;

use crate::field::{Fe, Field};

/// Coefficients low to high; trimmed so the last entry is nonzero
/// (the zero polynomial is empty).
pub type Poly = Vec<Fe>;

pub fn trim(f: &Field, a: &mut Poly) {
    while a.last().is_some_and(|c| f.is_zero(c)) {
        a.pop();
    }
}

pub fn degree(a: &Poly) -> Option<usize> {
    a.len().checked_sub(1)
}

pub fn x(f: &Field) -> Poly {
    vec![f.zero(), f.one()]
}

pub fn add(f: &Field, a: &Poly, b: &Poly) -> Poly {
    let n = a.len().max(b.len());
    let z = f.zero();
    let mut out: Poly = (0..n).map(|i| f.add(a.get(i).unwrap_or(&z), b.get(i).unwrap_or(&z))).collect();
    trim(f, &mut out);
    out
}

pub fn sub(f: &Field, a: &Poly, b: &Poly) -> Poly {
    let n = a.len().max(b.len());
    let z = f.zero();
    let mut out: Poly = (0..n).map(|i| f.sub(a.get(i).unwrap_or(&z), b.get(i).unwrap_or(&z))).collect();
    trim(f, &mut out);
    out
}

pub fn mul(f: &Field, a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![f.zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if f.is_zero(x) {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = f.add(&out[i + j], &f.mul(x, y));
        }
    }
    trim(f, &mut out);
    out
}

/// Quotient and remainder; `b` must be nonzero.
pub fn divrem(f: &Field, a: &Poly, b: &Poly) -> (Poly, Poly) {
    let db = degree(b).expect("division by the zero polynomial");
    let mut rem = a.clone();
    trim(f, &mut rem);
    if rem.len() <= db {
        return (Vec::new(), rem);
    }
    let lead_inv = f.inv(&b[db]).unwrap();
    let mut quo = vec![f.zero(); rem.len() - db];
    for i in (db..rem.len()).rev() {
        let c = f.mul(&rem[i], &lead_inv);
        if f.is_zero(&c) {
            continue;
        }
        for j in 0..=db {
            rem[i - db + j] = f.sub(&rem[i - db + j], &f.mul(&c, &b[j]));
        }
        quo[i - db] = c;
    }
    rem.truncate(db);
    trim(f, &mut rem);
    trim(f, &mut quo);
    (quo, rem)
}

pub fn rem(f: &Field, a: &Poly, b: &Poly) -> Poly {
    divrem(f, a, b).1
}

pub fn monic(f: &Field, a: &Poly) -> Poly {
    match a.last() {
        None => Vec::new(),
        Some(lc) => {
            let inv = f.inv(lc).unwrap();
            a.iter().map(|c| f.mul(c, &inv)).collect()
        }
    }
}

/// Monic greatest common divisor.
pub fn gcd(f: &Field, a: &Poly, b: &Poly) -> Poly {
    let mut r0 = a.clone();
    let mut r1 = b.clone();
    trim(f, &mut r0);
    trim(f, &mut r1);
    while !r1.is_empty() {
        let r2 = rem(f, &r0, &r1);
        r0 = core::mem::replace(&mut r1, r2);
    }
    monic(f, &r0)
}

pub fn mulmod(f: &Field, a: &Poly, b: &Poly, m: &Poly) -> Poly {
    rem(f, &mul(f, a, b), m)
}

pub fn powmod(f: &Field, a: &Poly, mut n: u128, m: &Poly) -> Poly {
    let mut base = rem(f, a, m);
    let mut acc = rem(f, &vec![f.one()], m);
    while n > 0 {
        if n & 1 == 1 {
            acc = mulmod(f, &acc, &base, m);
        }
        n >>= 1;
        if n > 0 {
            base = mulmod(f, &base, &base, m);
        }
    }
    acc
}

/// `a^(q^times) mod m`, `q` the field order.
pub fn qpow_mod(f: &Field, a: &Poly, times: usize, m: &Poly) -> Poly {
    let mut h = rem(f, a, m);
    for _ in 0..times * f.degree() {
        h = powmod(f, &h, f.p() as u128, m);
    }
    h
}

pub fn eval(f: &Field, a: &Poly, x: &Fe) -> Fe {
    let mut acc = f.zero();
    for c in a.iter().rev() {
        acc = f.add(&f.mul(&acc, x), c);
    }
    acc
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rabin's test over the field `f`.
pub fn is_irreducible(f: &Field, a: &Poly) -> bool {
    let mut a = a.clone();
    trim(f, &mut a);
    let n = match degree(&a) {
        None | Some(0) => return false,
        Some(1) => return true,
        Some(n) => n,
    };
    let xp = x(f);
    if qpow_mod(f, &xp, n, &a) != rem(f, &xp, &a) {
        return false;
    }
    for r in prime_factors(n) {
        let h = qpow_mod(f, &xp, n / r, &a);
        let g = gcd(f, &a, &sub(f, &h, &xp));
        if degree(&g) != Some(0) {
            return false;
        }
    }
    true
}

/// Degrees of the irreducible factors of a squarefree `a`, with repetition
/// collapsed: the extension of degree `lcm(result)` splits `a`.
pub fn factor_degrees(f: &Field, a: &Poly) -> Vec<usize> {
    let mut rest = monic(f, a);
    trim(f, &mut rest);
    let mut out = Vec::new();
    let xp = x(f);
    let mut h = xp.clone();
    let mut i = 1;
    while degree(&rest).is_some_and(|d| d >= 2 * i) {
        h = qpow_mod(f, &h, 1, &rest);
        let g = gcd(f, &rest, &sub(f, &h, &xp));
        if degree(&g).is_some_and(|d| d > 0) {
            out.push(i);
            rest = divrem(f, &rest, &g).0;
            h = rem(f, &h, &rest);
        }
        i += 1;
    }
    if let Some(d) = degree(&rest) {
        if d > 0 {
            out.push(d);
        }
    }
    out
}

/// All distinct roots of `a` lying in `f`, sorted by [`Field::cmp_elems`].
pub fn roots(f: &Field, a: &Poly) -> Vec<Fe> {
    let mut a = a.clone();
    trim(f, &mut a);
    if degree(&a).is_none_or(|d| d == 0) {
        return Vec::new();
    }
    let xp = x(f);
    let xq = qpow_mod(f, &xp, 1, &a);
    let g = gcd(f, &a, &sub(f, &xq, &xp));
    let mut out = Vec::new();
    split_linear(f, &g, &mut out);
    out.sort_by(|u, v| f.cmp_elems(u, v));
    out
}

/// Equal-degree splitting of a monic product of distinct linear factors
/// (odd characteristic), with a deterministic sequence of shifts.
fn split_linear(f: &Field, g: &Poly, out: &mut Vec<Fe>) {
    match degree(g) {
        None | Some(0) => return,
        Some(1) => {
            out.push(f.neg(&f.div(&g[0], &g[1]).unwrap()));
            return;
        }
        _ => {}
    }
    let half_p = ((f.p() - 1) / 2) as u128;
    let one = vec![f.one()];
    let mut index: u128 = 0;
    loop {
        let delta = f.element(index);
        index += 1;
        // A root at -delta splits off directly.
        if f.is_zero(&eval(f, g, &f.neg(&delta))) {
            let lin = vec![delta.clone(), f.one()];
            out.push(f.neg(&delta));
            let (quo, _) = divrem(f, g, &lin);
            split_linear(f, &quo, out);
            return;
        }
        // (x + delta)^((q - 1)/2) = b^(1 + p + ... + p^(m-1)), b = (x + delta)^((p-1)/2)
        let b = powmod(f, &vec![delta.clone(), f.one()], half_p, g);
        let mut acc = b.clone();
        let mut cur = b;
        for _ in 1..f.degree() {
            cur = powmod(f, &cur, f.p() as u128, g);
            acc = mulmod(f, &acc, &cur, g);
        }
        let d = gcd(f, g, &sub(f, &acc, &one));
        if let Some(dd) = degree(&d) {
            if dd > 0 && dd < degree(g).unwrap() {
                let (quo, _) = divrem(f, g, &d);
                split_linear(f, &d, out);
                split_linear(f, &quo, out);
                return;
            }
        }
    }
}
