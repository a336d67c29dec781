//! Scalar abstraction shared by points, extensions and polytope tests.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Num, One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational used for polytope arithmetic.
///
/// Denominators in this crate stay small (the grid `1/q`, orbit sizes, LP
/// minors of 0/1 matrices on at most 16 rows), so `i128` components suffice.
pub type Rational = Ratio<i128>;

pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    fn from_i64(v: i64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Slack allowed in comparisons: zero for exact types.
    fn tolerance() -> Self;
    fn to_json(&self) -> serde_json::Value;

    fn ratio(p: i64, q: i64) -> Self {
        Self::from_i64(p) / Self::from_i64(q)
    }

    fn le_tol(&self, other: &Self) -> bool {
        *self <= other.clone() + Self::tolerance()
    }

    fn eq_tol(&self, other: &Self) -> bool {
        (self.clone() - other.clone()).abs() <= Self::tolerance()
    }
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn tolerance() -> Self {
        1e-12
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

impl Scalar for f32 {
    fn from_i64(v: i64) -> Self {
        v as f32
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn tolerance() -> Self {
        1e-6
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self)
    }
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(v as i128)
    }

    /// Exact for every finite double whose binary expansion fits in `i128`,
    /// which covers integer-valued and short dyadic oracle values.
    fn from_f64(v: f64) -> Self {
        assert!(v.is_finite(), "non-finite value {v} has no rational form");
        if v == 0.0 {
            return Self::zero();
        }
        let bits = v.to_bits();
        let sign: i128 = if bits >> 63 == 0 { 1 } else { -1 };
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let mantissa = if exp == 0 {
            (bits & 0xf_ffff_ffff_ffff) << 1
        } else {
            (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
        } as i128;
        let e = exp - 1075;
        if e >= 0 {
            if e <= 70 {
                return Ratio::from_integer(sign * (mantissa << e));
            }
        } else {
            let tz = mantissa.trailing_zeros() as i32;
            let shift = (-e).min(tz);
            let (m, e) = (mantissa >> shift, e + shift);
            if -e <= 120 {
                return Ratio::new(sign * m, 1i128 << (-e));
            }
        }
        Ratio::approximate_float(v).expect("value out of rational range")
    }

    fn to_f64(&self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }

    fn tolerance() -> Self {
        Self::zero()
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(format_rational(self))
    }
}

/// `"p/q"`, or `"p"` for integers.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"r/q"` or an integer exactly; never goes through floating point.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::invalid(format!("not a rational \"r/q\": {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i128 = p.trim().parse().map_err(|_| bad())?;
            let q: i128 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Ratio::new(p, q))
        }
        None => Ok(Ratio::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub mod serde_rational {
    //! Serde helpers writing rationals as `"p/q"` strings.
    use serde::{Deserialize, Deserializer, Serializer};

    use super::{format_rational, parse_rational, Rational};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_conversion_is_exact() {
        assert_eq!(Rational::from_f64(0.5), Rational::new(1, 2));
        assert_eq!(Rational::from_f64(-3.0), Rational::from_integer(-3));
        assert_eq!(Rational::from_f64(0.375), Rational::new(3, 8));
        let r = Rational::from_f64(0.1);
        assert_eq!(r.to_f64(), 0.1);
    }

    #[test]
    fn parses_exactly() {
        assert_eq!(parse_rational("3/8").unwrap(), Rational::new(3, 8));
        assert_eq!(parse_rational(" 2/4 ").unwrap(), Rational::new(1, 2));
        assert_eq!(parse_rational("1").unwrap(), Rational::one());
        assert!(parse_rational("0.5").is_err());
        assert!(parse_rational("1/0").is_err());
        assert_eq!(format_rational(&Rational::new(6, 4)), "3/2");
    }
}
