//! Exact rational numbers and their canonical text form.
//!
//! Every price, valuation and coordinate in the engine is a `Ratio<i128>`.
//! The canonical text form is `"n"` for integers and `"n/d"` (reduced,
//! positive denominator) otherwise. Parsing also accepts plain decimals
//! such as `"2.5"` and JSON integers.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational number {0:?}")]
pub struct ParseRationalError(pub String);

pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: i128 = num.trim().parse().map_err(|_| err())?;
        let den: i128 = den.trim().parse().map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(Ratio::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let int_part: i128 = match int {
            "" | "-" | "+" => 0,
            _ => int.parse().map_err(|_| err())?,
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 30 {
            return Err(err());
        }
        let scale = 10i128.checked_pow(frac.len() as u32).ok_or_else(err)?;
        let frac_part: i128 = frac.parse().map_err(|_| err())?;
        let frac = Ratio::new(frac_part, scale);
        let int = Rational::from_integer(int_part.abs());
        let magnitude = int + frac;
        return Ok(if negative { -magnitude } else { magnitude });
    }
    s.parse::<i128>().map(Rational::from_integer).map_err(|_| err())
}

pub fn format_rational(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Midpoint of two rationals.
pub fn midpoint(a: Rational, b: Rational) -> Rational {
    (a + b) / Rational::from_integer(2)
}

/// Lossy conversion for display and timing code only.
pub fn to_f64(value: &Rational) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

pub fn is_integral(value: &Rational) -> bool {
    value.denom().is_one()
}

pub fn floor_to_int(value: &Rational) -> i128 {
    value.numer().div_floor(value.denom())
}

/// Serde adapter: serializes as the canonical string, deserializes from a
/// string or a JSON integer. JSON floats are rejected since they cannot be
/// read back exactly.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        deserializer.deserialize_any(RationalVisitor)
    }

    struct RationalVisitor;

    impl Visitor<'_> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an integer or a string such as \"7\", \"7/2\" or \"3.5\"")
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v as i128))
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v as i128))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            Err(E::custom(format!(
                "floating point value {v} is not exact; write it as a string like \"{v}\""
            )))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            parse_rational(v).map_err(E::custom)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Ratio::new(n, d)
    }

    #[test]
    fn parses_all_accepted_forms() {
        assert_eq!(parse_rational("7").unwrap(), r(7, 1));
        assert_eq!(parse_rational("14/4").unwrap(), r(7, 2));
        assert_eq!(parse_rational("12.5").unwrap(), r(25, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), r(-1, 4));
        assert_eq!(parse_rational(" 3 / 6 ").unwrap(), r(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1/0", "abc", "1.", "1.2.3", "0x10", "1/2/3"] {
            assert!(parse_rational(bad).is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn canonical_format() {
        assert_eq!(format_rational(&r(25, 2)), "25/2");
        assert_eq!(format_rational(&r(6, 3)), "2");
        assert_eq!(format_rational(&r(-3, 6)), "-1/2");
        assert_eq!(midpoint(r(5, 1), r(20, 1)), r(25, 2));
    }

    proptest::proptest! {
        #[test]
        fn format_parse_roundtrip(n in -1_000_000i128..1_000_000, d in 1i128..10_000) {
            let v = r(n, d);
            proptest::prop_assert_eq!(parse_rational(&format_rational(&v)).unwrap(), v);
        }
    }
}
