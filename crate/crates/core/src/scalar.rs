//! Scalar abstraction shared by networks and piecewise-linear functions.
//!
//! Builders produce networks over [`Rational`] so that weight-set claims can be
//! checked as exact set statements; evaluation usually runs on an `f64` mirror
//! obtained with [`crate::ReluNetwork::to_f64`].

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary precision rational number, always kept in reduced form with a
/// positive denominator.
pub type Rational = BigRational;

/// Numeric type usable as a network weight.
pub trait Scalar: Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + Send + Sync + 'static {
    /// Whether arithmetic in this type is exact.
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    /// Conversion from `f64`. Exact for [`Rational`] (every finite double is a
    /// dyadic rational), rounding for `f32`.
    fn from_f64_value(v: f64) -> Self;

    /// Exact rational value when it exists.
    fn to_rational(&self) -> Option<Rational>;

    fn from_rational(q: &Rational) -> Self;

    fn floor_value(&self) -> Self;

    fn relu(&self) -> Self {
        if *self > Self::zero() {
            self.clone()
        } else {
            Self::zero()
        }
    }

    fn from_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("integer fits the scalar type")
    }

    fn from_i64_value(n: i64) -> Self {
        <Self as FromPrimitive>::from_i64(n).expect("integer fits the scalar type")
    }

    /// JSON encoding used by the network file format.
    fn to_json(&self) -> serde_json::Value;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_f64_value(v: f64) -> Self {
        v
    }
    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }
    fn from_rational(q: &Rational) -> Self {
        rational_to_f64(q)
    }
    fn floor_value(&self) -> Self {
        self.floor()
    }
    fn to_json(&self) -> serde_json::Value {
        if self.fract() == 0.0 && self.abs() < 9.0e15 {
            serde_json::Value::from(*self as i64)
        } else {
            serde_json::Value::from(*self)
        }
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn from_f64_value(v: f64) -> Self {
        v as f32
    }
    fn to_rational(&self) -> Option<Rational> {
        Rational::from_float(*self)
    }
    fn from_rational(q: &Rational) -> Self {
        rational_to_f64(q) as f32
    }
    fn floor_value(&self) -> Self {
        self.floor()
    }
    fn to_json(&self) -> serde_json::Value {
        (*self as f64).to_json()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn from_f64_value(v: f64) -> Self {
        Rational::from_float(v).expect("finite value")
    }
    fn to_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
    fn floor_value(&self) -> Self {
        self.floor()
    }
    fn to_json(&self) -> serde_json::Value {
        if self.is_integer() {
            if let Some(v) = self.numer().to_i64() {
                return serde_json::Value::from(v);
            }
            return serde_json::Value::from(self.numer().to_string());
        }
        serde_json::Value::from(format!("{}/{}", self.numer(), self.denom()))
    }
}

/// Correctly rounded enough conversion that survives huge numerators and
/// denominators (a plain `to_f64` on each part would overflow).
pub fn rational_to_f64(q: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && n.abs() < 9.0e15 && d < 9.0e15 {
            return n / d;
        }
    }
    let nb = q.numer().bits() as i64;
    let db = q.denom().bits() as i64;
    // scale so that the quotient carries 64 significant bits
    let shift = 64 - (nb - db);
    let (num, den) = if shift >= 0 {
        (q.numer() << (shift as usize), q.denom().clone())
    } else {
        (q.numer().clone(), q.denom() << ((-shift) as usize))
    };
    let quotient: BigInt = num / den;
    let mantissa = quotient.to_f64().unwrap_or(0.0);
    mantissa * 2f64.powi(-(shift as i32))
}

/// Rational from an integer pair.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational from an integer.
pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, an integer, or a decimal literal (`"0.25"`, `"1e-3"`) into an
/// exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational number: {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((p, q)) = t.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::InvalidArgument(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Ok(n) = t.parse::<BigInt>() {
        return Ok(Rational::from_integer(n));
    }
    parse_decimal(t).ok_or_else(bad)
}

fn parse_decimal(t: &str) -> Option<Rational> {
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let n: BigInt = if all.is_empty() {
        BigInt::zero()
    } else {
        all.parse().ok()?
    };
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut q = Rational::from_integer(n);
    if scale >= 0 {
        q *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        q /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -q } else { q })
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: usize) -> usize {
    assert!(n >= 1);
    let mut levels = 0;
    while (1usize << levels) < n {
        levels += 1;
    }
    levels
}

/// Exact `k/K` rational.
pub fn frac(k: usize, den: usize) -> Rational {
    Rational::new(BigInt::from(k), BigInt::from(den))
}
