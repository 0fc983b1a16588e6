//! Exact rational exponents and valuations.

use alloc::format;
use alloc::string::String;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Exact rational number used for exponents, valuations and Hodge heights.
pub type Q = Ratio<i128>;

pub fn q(num: i128, den: i128) -> Q {
    Q::new(num, den)
}

pub fn qi(n: i128) -> Q {
    Q::from_integer(n)
}

pub fn is_integral(x: &Q) -> bool {
    x.denom().is_one()
}

/// `"3"` or `"1/4"`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        format!("{}", x.numer())
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"3"`, `"-1/4"` or a finite decimal such as `"0.2"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let bad = || Error::InvalidInput(format!("not a rational number: {s:?}"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let int_part: i128 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let den = 10i128.pow(frac.len() as u32);
        let f: i128 = frac.parse().map_err(|_| bad())?;
        let mag = Q::new(int_part.abs() * den + f, den);
        return Ok(if neg { -mag } else { mag });
    }
    s.parse::<i128>().map(Q::from_integer).map_err(|_| bad())
}

pub fn lcm(a: i128, b: i128) -> i128 {
    a.lcm(&b)
}

pub fn zero() -> Q {
    Q::zero()
}
