//! Scalar abstraction shared by the cost model and the optimizer.
//!
//! Closed-form costs are evaluated either exactly (over [`Rational`]) when they
//! are compared against packet-level simulation, or in floating point when the
//! optimizer needs derivatives. Both paths go through the same generic code.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational used for every exact cost quantity.
pub type Rational = BigRational;

/// Number type the cost formulas are generic over.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + Send + Sync
{
    /// Whether arithmetic on this type is exact.
    const EXACT: bool;

    /// Slack allowed when checking equality constraints (zero for exact types).
    fn feasibility_tol() -> Self;

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("integer representable in scalar type")
    }

    fn from_count(v: usize) -> Self {
        Self::from_int(i64::try_from(v).expect("index fits in i64"))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    /// Lossy conversion used for reporting and for handing exact inputs to the
    /// floating-point optimizer.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts from another scalar type. Exact types receive the exact binary
    /// value of floating-point inputs.
    fn convert<U: Scalar>(from: &U) -> Self;

    /// `|a - b| <= feasibility_tol()`.
    fn approx_eq(a: &Self, b: &Self) -> bool {
        (a.clone() - b.clone()).abs() <= Self::feasibility_tol()
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn feasibility_tol() -> Self {
        1e-9
    }

    fn convert<U: Scalar>(from: &U) -> Self {
        from.to_f64_lossy()
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn feasibility_tol() -> Self {
        1e-5
    }

    fn convert<U: Scalar>(from: &U) -> Self {
        from.to_f32().unwrap_or(f32::NAN)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn feasibility_tol() -> Self {
        Rational::zero()
    }

    fn from_int(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn convert<U: Scalar>(from: &U) -> Self {
        if U::EXACT {
            // Round-trip through the textual form keeps rationals exact.
            parse_rational(&from.to_string()).expect("exact scalar renders as a rational")
        } else {
            Rational::from_f64(from.to_f64_lossy()).expect("finite value")
        }
    }
}

/// Floating-point scalars usable by the optimizer.
pub trait Real: Scalar + Float {
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite literal")
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Parses `"3"`, `"-2/7"`, `"0.125"` or `"1e-3"` into an exact rational.
///
/// Decimal inputs are interpreted as written (`"0.1"` is exactly 1/10), not as
/// their nearest binary float.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().ok()?;
        let den: BigInt = d.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        return Some(Rational::new(num, den));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let digits = digits / BigInt::from(10);
    let scale = exponent - i32::try_from(frac_part.len()).ok()?;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Renders a rational as `p/q`, or `p` when it is an integer.
pub fn format_rational(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("28/3"), Some(Rational::ratio(28, 3)));
        assert_eq!(parse_rational("0.1"), Some(Rational::ratio(1, 10)));
        assert_eq!(parse_rational("-1.25"), Some(Rational::ratio(-5, 4)));
        assert_eq!(parse_rational("65"), Some(Rational::from_int(65)));
        assert_eq!(parse_rational("5e-2"), Some(Rational::ratio(1, 20)));
        assert_eq!(parse_rational(".5"), Some(Rational::ratio(1, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn format_round_trips() {
        for r in [Rational::ratio(28, 3), Rational::from_int(-4), Rational::ratio(2, 3)] {
            assert_eq!(parse_rational(&format_rational(&r)), Some(r));
        }
    }

    #[test]
    fn convert_between_scalars() {
        let q = Rational::ratio(1, 4);
        assert_eq!(f64::convert(&q), 0.25);
        assert_eq!(Rational::convert(&0.25f64), q);
        assert_eq!(Rational::convert(&q), q);
        assert_eq!(f32::convert(&q), 0.25f32);
    }
}
