//! Parsing and rationalizing probability inputs.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Parses `"a/b"`, an integer, or a plain decimal such as `"0.125"` exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let bad = || Error::InvalidMarginals(format!("cannot read `{text}` as a rational number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad())?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = BigRational::new(numer, denom);
    Ok(if negative { -value } else { value })
}

/// Closest rational to `x` with denominator at most `max_den`
/// (continued-fraction convergents and the best semiconvergent).
pub fn rationalize(x: f64, max_den: u64) -> Result<BigRational> {
    let exact = BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidMarginals(format!("{x} is not a finite number")))?;
    Ok(limit_denominator(&exact, &BigInt::from(max_den.max(1))))
}

pub fn limit_denominator(value: &BigRational, max_den: &BigInt) -> BigRational {
    if value.denom() <= max_den {
        return value.clone();
    }
    let (mut p0, mut q0, mut p1, mut q1) = (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (value.numer().clone(), value.denom().clone());
    loop {
        let a = n.div_floor(&d);
        let q2 = &q0 + &a * &q1;
        if &q2 > max_den {
            break;
        }
        let p2 = &p0 + &a * &p1;
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let r = &n - &a * &d;
        n = std::mem::replace(&mut d, r);
        if d.is_zero() {
            break;
        }
    }
    let k = (max_den - &q0).div_floor(&q1);
    let bound1 = BigRational::new(&p0 + &k * &p1, &q0 + &k * &q1);
    let bound2 = BigRational::new(p1, q1);
    if (&bound2 - value).abs() <= (&bound1 - value).abs() {
        bound2
    } else {
        bound1
    }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("1/3").unwrap(), q(1, 3));
        assert_eq!(parse_rational(" 0.125 ").unwrap(), q(1, 8));
        assert_eq!(parse_rational("1").unwrap(), q(1, 1));
        assert_eq!(parse_rational(".5").unwrap(), q(1, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), q(-1, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1e-3").is_err());
    }

    #[test]
    fn float_rationalization() {
        assert_eq!(rationalize(1.0 / 3.0, 1_000_000).unwrap(), q(1, 3));
        assert_eq!(rationalize(0.1, 1_000_000).unwrap(), q(1, 10));
        assert_eq!(rationalize(0.333, 1_000_000).unwrap(), q(333, 1000));
        assert_eq!(rationalize(std::f64::consts::PI, 1000).unwrap(), q(355, 113));
        assert_eq!(rationalize(0.0, 10).unwrap(), q(0, 1));
        assert!(rationalize(f64::NAN, 10).is_err());
    }
}
