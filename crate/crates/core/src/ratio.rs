//! Text form of exact rationals: an integer, or a string `"p"`, `"p/q"` or a
//! finite decimal such as `"0.25"`.

use std::fmt;

use num_traits::One;
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

use crate::domain::Rational;

const MAX_PART: i128 = 1_000_000_000_000_000_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
#[error("invalid rational {text:?}: {reason}")]
pub struct ParseRationalError {
    text: String,
    reason: &'static str,
}

fn err(text: &str, reason: &'static str) -> ParseRationalError {
    ParseRationalError { text: text.to_owned(), reason }
}

fn parse_int(text: &str, part: &str) -> Result<i128, ParseRationalError> {
    let v: i128 = part.trim().parse().map_err(|_| err(text, "not an integer"))?;
    if v.abs() > MAX_PART {
        return Err(err(text, "out of range"));
    }
    Ok(v)
}

pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    if let Some((n, d)) = text.split_once('/') {
        let n = parse_int(text, n)?;
        let d = parse_int(text, d)?;
        if d == 0 {
            return Err(err(text, "zero denominator"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = text.trim().split_once('.') {
        if frac.is_empty() || frac.len() > 15 || !frac.bytes().all(|c| c.is_ascii_digit()) {
            return Err(err(text, "bad decimal fraction"));
        }
        let negative = int.trim_start().starts_with('-');
        let whole = if int.is_empty() || int == "-" { 0 } else { parse_int(text, int)?.abs() };
        let den = 10i128.pow(frac.len() as u32);
        let num = whole.checked_mul(den).and_then(|w| w.checked_add(frac.parse::<i128>().ok()?));
        let num = num.filter(|n| *n <= MAX_PART).ok_or_else(|| err(text, "out of range"))?;
        let r = Rational::new(num, den);
        return Ok(if negative { -r } else { r });
    }
    Ok(Rational::from(parse_int(text, text)?))
}

/// `"p/q"`, or `"p"` when the value is an integer.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Serde adapter: integers serialize as JSON numbers, fractions as `"p/q"`.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, ser: S) -> Result<S::Ok, S::Error> {
        if r.denom().is_one() && r.numer().abs() <= i64::MAX as i128 {
            ser.serialize_i64(*r.numer() as i64)
        } else {
            ser.serialize_str(&format_rational(r))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Rational, D::Error> {
        de.deserialize_any(RationalVisitor)
    }
}

struct RationalVisitor;

impl Visitor<'_> for RationalVisitor {
    type Value = Rational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an integer or a rational string such as \"3/2\"")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
        Ok(Rational::from(v as i128))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
        Ok(Rational::from(v as i128))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
        // Only accept floats that are exact short decimals.
        if !v.is_finite() {
            return Err(E::custom("non-finite number"));
        }
        parse_rational(&format!("{v}")).map_err(E::custom)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
        parse_rational(v).map_err(E::custom)
    }
}
