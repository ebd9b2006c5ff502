//! Coefficient backends.
//!
//! Polynomials are generic over [`Coeff`]. Two backends ship: [`Rational`]
//! for identity checks that must hold exactly, and `f64` for the solver.
//! A single polynomial never mixes the two; conversion is explicit through
//! [`Coeff::as_f64`] and [`crate::ncalg::NCPoly::to_float`].

use std::fmt::Debug;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, NumAssign, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational scalar.
pub type Rational = BigRational;

/// Coefficients below this magnitude are pruned from float polynomials.
pub const FLOAT_PRUNE_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse coefficient {input:?}: {reason}")]
pub struct ParseCoeffError {
    pub input: String,
    pub reason: &'static str,
}

pub trait Coeff: Clone + Debug + PartialEq + NumAssign + Signed + Send + Sync + 'static {
    fn from_int(v: i64) -> Self;
    fn from_count(v: u128) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn as_f64(&self) -> f64;
    /// Pruning test: exact zero for rationals, a tiny floor for floats.
    fn is_negligible(&self) -> bool;
    fn to_decimal_string(&self) -> String;
    fn parse_decimal(s: &str) -> Result<Self, ParseCoeffError>;

    fn abs_f64(&self) -> f64 {
        self.as_f64().abs()
    }
}

impl Coeff for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }

    fn from_count(v: u128) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn as_f64(&self) -> f64 {
        *self
    }

    fn is_negligible(&self) -> bool {
        self.abs() < FLOAT_PRUNE_FLOOR
    }

    fn to_decimal_string(&self) -> String {
        // Display prints the shortest string that parses back to the same bits.
        format!("{self}")
    }

    fn parse_decimal(s: &str) -> Result<Self, ParseCoeffError> {
        let t = s.trim();
        if let Some((num, den)) = t.split_once('/') {
            let r = parse_rational(&format!("{}/{}", num.trim(), den.trim()))?;
            return Ok(ToPrimitive::to_f64(&r).unwrap_or(f64::NAN));
        }
        let v = f64::from_str(t).map_err(|_| ParseCoeffError {
            input: s.to_string(),
            reason: "not a decimal number",
        })?;
        if !v.is_finite() {
            return Err(ParseCoeffError {
                input: s.to_string(),
                reason: "non-finite value",
            });
        }
        Ok(v)
    }
}

impl Coeff for Rational {
    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_count(v: u128) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn to_decimal_string(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }

    fn parse_decimal(s: &str) -> Result<Self, ParseCoeffError> {
        parse_rational(s)
    }
}

/// Parses `p/q`, integers, and decimal literals with an optional exponent
/// (`-1.25e-3`) into an exact rational.
fn parse_rational(s: &str) -> Result<Rational, ParseCoeffError> {
    let err = |reason| ParseCoeffError {
        input: s.to_string(),
        reason,
    };
    let t = s.trim();
    if t.is_empty() {
        return Err(err("empty string"));
    }
    if let Some((num, den)) = t.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| err("bad numerator"))?;
        let d = BigInt::from_str(den.trim()).map_err(|_| err("bad denominator"))?;
        if d.is_zero() {
            return Err(err("zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => {
            let e = i32::from_str(&t[pos + 1..]).map_err(|_| err("bad exponent"))?;
            (&t[..pos], e)
        }
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err("no digits"));
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err("not a decimal number"));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits })
        .map_err(|_| err("not a decimal number"))?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(value)
}

/// Converts a float into the exact rational with the same binary value.
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    Rational::from_f64(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimal_forms_exactly() {
        assert_eq!(Rational::parse_decimal("5e-5").unwrap(), Rational::from_ratio(1, 20000));
        assert_eq!(Rational::parse_decimal("-1.25").unwrap(), Rational::from_ratio(-5, 4));
        assert_eq!(Rational::parse_decimal("3/6").unwrap(), Rational::from_ratio(1, 2));
        assert_eq!(Rational::parse_decimal("0.005").unwrap(), Rational::from_ratio(1, 200));
        assert_eq!(Rational::parse_decimal("12E2").unwrap(), Rational::from_int(1200));
        assert!(Rational::parse_decimal("1/0").is_err());
        assert!(Rational::parse_decimal("abc").is_err());
        assert!(Rational::parse_decimal("").is_err());
    }

    #[test]
    fn float_strings_round_trip() {
        for v in [0.1, 1e-300, -3.75, 5e-5, std::f64::consts::PI] {
            let s = v.to_decimal_string();
            assert_eq!(f64::parse_decimal(&s).unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(f64::parse_decimal("1/4").unwrap(), 0.25);
        assert!(f64::parse_decimal("inf").is_err());
    }

    #[test]
    fn rational_strings_round_trip() {
        for (n, d) in [(1, 3), (-7, 2), (4, 1), (0, 5)] {
            let r = Rational::from_ratio(n, d);
            assert_eq!(Rational::parse_decimal(&r.to_decimal_string()).unwrap(), r);
        }
    }

    #[test]
    fn pruning_rules() {
        assert!(Rational::zero().is_negligible());
        assert!(!Rational::from_ratio(1, 1_000_000_000).is_negligible());
        assert!(1e-301_f64.is_negligible());
        assert!(!1e-200_f64.is_negligible());
    }
}
