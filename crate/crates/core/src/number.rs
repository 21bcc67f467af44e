//! Scalar fields used throughout the crate.
//!
//! Every time-scale operation is generic over [`Scalar`], which is implemented
//! for exact [`Rational`] values and for `f64`. Exact arithmetic is the ground
//! truth; floats only show up inside iterative solvers and for expressions
//! involving transcendental functions.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Arithmetic needed by grid functions, integrals and expression evaluation.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const EXACT: bool;

    fn zero_value() -> Self;
    fn one_value() -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn as_f64(&self) -> f64;
    fn is_zero_value(&self) -> bool;
    fn magnitude(&self) -> Self;
    fn to_number(&self) -> Number;
    /// Division that reports a zero divisor instead of producing inf/NaN or panicking.
    fn checked_div(&self, rhs: &Self) -> Result<Self>;
    fn pow(&self, exponent: &Self) -> Result<Self>;
    fn sin(&self) -> Result<Self>;
    fn cos(&self) -> Result<Self>;
    fn exp(&self) -> Result<Self>;
    fn ln(&self) -> Result<Self>;
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn zero_value() -> Self {
        Zero::zero()
    }
    fn one_value() -> Self {
        One::one()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero_value(&self) -> bool {
        Zero::is_zero(self)
    }
    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
    fn to_number(&self) -> Number {
        Number::Exact(self.clone())
    }
    fn checked_div(&self, rhs: &Self) -> Result<Self> {
        if Zero::is_zero(rhs) {
            return Err(Error::eval("division by zero"));
        }
        Ok(self / rhs)
    }
    fn pow(&self, exponent: &Self) -> Result<Self> {
        if !exponent.is_integer() {
            return Err(Error::eval("non-integer exponent in exact arithmetic"));
        }
        let e = exponent
            .to_integer()
            .to_i32()
            .ok_or_else(|| Error::eval("exponent out of range"))?;
        if e < 0 && Zero::is_zero(self) {
            return Err(Error::eval("division by zero"));
        }
        Ok(num_traits::Pow::pow(self, e))
    }
    fn sin(&self) -> Result<Self> {
        Err(Error::eval("sin is not rational-closed"))
    }
    fn cos(&self) -> Result<Self> {
        Err(Error::eval("cos is not rational-closed"))
    }
    fn exp(&self) -> Result<Self> {
        Err(Error::eval("exp is not rational-closed"))
    }
    fn ln(&self) -> Result<Self> {
        Err(Error::eval("log is not rational-closed"))
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn zero_value() -> Self {
        0.0
    }
    fn one_value() -> Self {
        1.0
    }
    fn from_rational(r: &Rational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn is_zero_value(&self) -> bool {
        *self == 0.0
    }
    fn magnitude(&self) -> Self {
        f64::abs(*self)
    }
    fn to_number(&self) -> Number {
        Number::Float(*self)
    }
    fn checked_div(&self, rhs: &Self) -> Result<Self> {
        if *rhs == 0.0 {
            return Err(Error::eval("division by zero"));
        }
        Ok(self / rhs)
    }
    fn pow(&self, exponent: &Self) -> Result<Self> {
        let r = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
            if *exponent < 0.0 && *self == 0.0 {
                return Err(Error::eval("division by zero"));
            }
            self.powi(*exponent as i32)
        } else {
            self.powf(*exponent)
        };
        finite(r, "power")
    }
    fn sin(&self) -> Result<Self> {
        Ok(f64::sin(*self))
    }
    fn cos(&self) -> Result<Self> {
        Ok(f64::cos(*self))
    }
    fn exp(&self) -> Result<Self> {
        finite(f64::exp(*self), "exp")
    }
    fn ln(&self) -> Result<Self> {
        if *self <= 0.0 {
            return Err(Error::eval("log of a non-positive value"));
        }
        Ok(f64::ln(*self))
    }
}

fn finite(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::eval(format!("{what} produced a non-finite value")))
    }
}

/// A figure that is either exact or a float approximation.
#[derive(Debug, Clone, PartialEq)]
pub enum Number {
    Exact(Rational),
    Float(f64),
}

impl Number {
    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => Scalar::as_f64(r),
            Number::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Number::Exact(r) => Some(r),
            Number::Float(_) => None,
        }
    }

    pub fn mode(&self) -> &'static str {
        if self.is_exact() {
            "exact"
        } else {
            "numeric"
        }
    }

    /// Text rendering: `p/q` for exact values, 17 significant digits otherwise.
    pub fn render(&self) -> String {
        match self {
            Number::Exact(r) => format_rational(r),
            Number::Float(x) => format_float(*x),
        }
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn rational(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `p/q`, an integer, or a finite decimal such as `-0.125` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Value(format!("`{s}` is not a rational number"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Value(format!("`{s}` has a zero denominator")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        if !whole_digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole_digits}{frac}");
        let numer = BigInt::from_str(&digits).map_err(|_| bad())?;
        let denom = num_traits::pow(BigInt::from(10), frac.len());
        let r = Rational::new(numer, denom);
        return Ok(if negative { -r } else { r });
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Continued-fraction reconstruction: the last convergent of `x` whose
/// denominator does not exceed `max_denominator`.
pub fn reconstruct_rational(x: f64, max_denominator: u64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let bound = BigInt::from(max_denominator);
    let mut rest = Rational::from_float(x)?;
    // convergents h/k
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let mut best: Option<Rational> = None;
    for _ in 0..64 {
        let a = rest.floor().to_integer();
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        if k_next > bound {
            break;
        }
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        best = Some(Rational::new(h.clone(), k.clone()));
        let frac = &rest - Rational::from_integer(a);
        if Zero::is_zero(&frac) {
            break;
        }
        rest = frac.recip();
    }
    best
}

/// Exact rational equal to the binary value of `x`.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| Error::Value(format!("{x} is not finite")))
}

/// `a` and `b` agree to within `tol` relative to their size.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub(crate) fn gcd_free_denominator_ok(r: &Rational) -> bool {
    // denominators built only from 2s and 5s have a finite decimal expansion
    let mut d = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while d.is_even() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

/// Finite decimal rendering, only valid when [`gcd_free_denominator_ok`] holds.
pub(crate) fn format_decimal(r: &Rational) -> String {
    let negative = r.is_negative();
    let r = Signed::abs(r);
    let mut scale = 0usize;
    let mut scaled = r.clone();
    while !scaled.is_integer() {
        scaled *= int(10);
        scale += 1;
    }
    let digits = scaled.to_integer().to_string();
    let body = if scale == 0 {
        digits
    } else {
        let padded = format!("{digits:0>width$}", width = scale + 1);
        let (w, f) = padded.split_at(padded.len() - scale);
        format!("{w}.{f}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_integers_and_decimals() {
        assert_eq!(parse_rational("105/242").unwrap(), rational(105, 242));
        assert_eq!(parse_rational("-3").unwrap(), int(-3));
        assert_eq!(parse_rational("0.125").unwrap(), rational(1, 8));
        assert_eq!(parse_rational("-1.5").unwrap(), rational(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn formats_rationals() {
        assert_eq!(format_rational(&rational(-11, 3)), "-11/3");
        assert_eq!(format_rational(&int(4)), "4");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn reconstructs_small_fractions() {
        for (n, d) in [(9, 11), (69, 77), (-11, 3), (143, 21), (1345, 1078), (0, 1), (7, 1)] {
            let x = n as f64 / d as f64;
            assert_eq!(reconstruct_rational(x, 1_000_000), Some(rational(n, d)), "{n}/{d}");
        }
        let perturbed = 9.0 / 11.0 + 1e-13;
        assert_eq!(reconstruct_rational(perturbed, 1_000_000), Some(rational(9, 11)));
    }

    #[test]
    fn decimal_rendering() {
        assert!(gcd_free_denominator_ok(&rational(3, 40)));
        assert!(!gcd_free_denominator_ok(&rational(1, 3)));
        assert_eq!(format_decimal(&rational(3, 40)), "0.075");
        assert_eq!(format_decimal(&rational(-5, 2)), "-2.5");
        assert_eq!(format_decimal(&int(12)), "12");
    }

    #[test]
    fn exact_scalar_rejects_transcendentals_and_zero_division() {
        let z: Rational = Scalar::zero_value();
        assert!(Scalar::checked_div(&int(1), &z).is_err());
        assert!(Scalar::sin(&int(1)).is_err());
        assert!(Scalar::pow(&int(2), &rational(1, 2)).is_err());
        assert_eq!(Scalar::pow(&int(2), &int(-2)).unwrap(), rational(1, 4));
        assert!(Scalar::ln(&-1.0f64).is_err());
    }
}
