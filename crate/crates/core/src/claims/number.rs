//! Normalization of numbers as they appear in published reports.
//!
//! | written          | value     | precision       |
//! |------------------|-----------|-----------------|
//! | `1234`           | 1234      | `EXACT`         |
//! | `1,200,000`      | 1200000   | `ROUNDED(2)`    |
//! | `1.2M`           | 1200000   | `ROUNDED(2)`    |
//! | `12.50%`         | 0.125     | `ROUNDED(4)`    |
//! | `~5%`            | 0.05      | `APPROXIMATE`   |
//!
//! Suffixes are `K`=10³, `M`=10⁶ and `B`=10⁹ (either case). Only a bare
//! digit string is exact; anything formatted for display carries the
//! precision of its significant digits.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Metric;

/// Exact non-negative rational, serialized as `"n"` or `"n/d"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactValue(BigRational);

impl ExactValue {
    pub fn zero() -> Self {
        ExactValue(BigRational::zero())
    }

    pub fn from_integer(n: u64) -> Self {
        ExactValue(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        assert!(denominator > 0, "ratio with zero denominator");
        ExactValue(BigRational::new(BigInt::from(numerator), BigInt::from(denominator)))
    }

    /// Exact binary value of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(ExactValue)
    }

    /// The decimal a finite, non-negative `f64` prints as, so `0.05`
    /// becomes exactly 1/20 rather than its binary approximation.
    pub fn from_decimal_f64(x: f64) -> Option<Self> {
        if !x.is_finite() || x < 0.0 {
            return None;
        }
        let text = format!("{x}");
        let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
        let n: BigInt = format!("{int}{frac}").parse().ok()?;
        Some(ExactValue(BigRational::new(n, BigInt::from(10u32).pow(frac.len() as u32))))
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn abs_diff(&self, other: &ExactValue) -> ExactValue {
        ExactValue((&self.0 - &other.0).abs())
    }

    pub fn add(&self, other: &ExactValue) -> ExactValue {
        ExactValue(&self.0 + &other.0)
    }

    pub fn mul(&self, other: &ExactValue) -> ExactValue {
        ExactValue(&self.0 * &other.0)
    }

    pub fn div(&self, other: &ExactValue) -> Option<ExactValue> {
        (!other.0.is_zero()).then(|| ExactValue(&self.0 / &other.0))
    }

    /// `10^exp` for any integer exponent.
    pub fn pow10(exp: i32) -> ExactValue {
        let p = BigInt::from(10u32).pow(exp.unsigned_abs());
        if exp >= 0 {
            ExactValue(BigRational::from_integer(p))
        } else {
            ExactValue(BigRational::new(BigInt::one(), p))
        }
    }

    /// `floor(log10(self))` for a positive value.
    pub fn decimal_exponent(&self) -> Option<i32> {
        if !self.0.is_positive() {
            return None;
        }
        let estimate = self.to_f64().log10().floor();
        let mut e = if estimate.is_finite() { estimate as i32 } else { 0 };
        // the float estimate can be off by one at powers of ten
        while ExactValue::pow10(e) > *self {
            e -= 1;
        }
        while ExactValue::pow10(e + 1) <= *self {
            e += 1;
        }
        Some(e)
    }

    /// Rounds half-up to the nearest integer.
    pub fn round_half_up(&self) -> BigInt {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        (&self.0 + half).floor().to_integer()
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for ExactValue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.parse::<BigInt>().map_err(|e| format!("`{s}`: {e}"));
        let r = match s.split_once('/') {
            Some((n, d)) => {
                let d = parse(d)?;
                if d.is_zero() {
                    return Err(format!("`{s}`: zero denominator"));
                }
                BigRational::new(parse(n)?, d)
            }
            None => BigRational::from_integer(parse(s)?),
        };
        Ok(ExactValue(r))
    }
}

impl Serialize for ExactValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExactValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// How precisely a reported number was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ValuePrecision {
    Exact,
    Rounded { significant_digits: u32 },
    Approximate,
}

impl fmt::Display for ValuePrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValuePrecision::Exact => f.write_str("EXACT"),
            ValuePrecision::Rounded { significant_digits } => write!(f, "ROUNDED({significant_digits})"),
            ValuePrecision::Approximate => f.write_str("APPROXIMATE"),
        }
    }
}

/// A number as written in a report, with its normalized value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportedValue {
    pub text: String,
    pub value: ExactValue,
    pub precision: ValuePrecision,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot read `{text}` as a reported value: {reason}")]
pub struct NumberError {
    pub text: String,
    pub reason: String,
}

const APPROX_MARKERS: [&str; 2] = ["~", "approximately"];

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    let head = s.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &s[prefix.len()..])
}

fn valid_mantissa(m: &str) -> bool {
    let (int, frac) = match m.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (m, None),
    };
    if frac.is_some_and(|f| f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit())) {
        return false;
    }
    if int.is_empty() {
        return false;
    }
    if int.contains(',') {
        let mut groups = int.split(',');
        let first = groups.next().unwrap_or_default();
        (1..=3).contains(&first.len())
            && first.bytes().all(|b| b.is_ascii_digit())
            && groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()))
    } else {
        int.bytes().all(|b| b.is_ascii_digit())
    }
}

/// Significant digits of a separator-free mantissa. Trailing zeros of an
/// integer are not significant; after a decimal point they are.
fn significant_digits(mantissa: &str) -> u32 {
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let trimmed = digits.trim_start_matches('0');
    let trimmed = if mantissa.contains('.') { trimmed } else { trimmed.trim_end_matches('0') };
    (trimmed.len() as u32).max(1)
}

fn mantissa_value(mantissa: &str) -> ExactValue {
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits: String = int.chars().filter(char::is_ascii_digit).chain(frac.chars()).collect();
    let n: BigInt = digits.parse().expect("validated digits");
    ExactValue(BigRational::new(n, BigInt::from(10u32).pow(frac.len() as u32)))
}

/// Parses a number as written in a report for a claim of `metric`.
pub fn parse_reported_value(text: &str, metric: Metric) -> Result<ReportedValue, NumberError> {
    let fail = |reason: &str| NumberError { text: text.to_string(), reason: reason.to_string() };
    let mut s = text.trim();
    let mut approximate = false;
    for marker in APPROX_MARKERS {
        if let Some(rest) = strip_prefix_ci(s, marker) {
            approximate = true;
            s = rest.trim_start();
            break;
        }
    }
    let percent = s.ends_with('%');
    if percent {
        s = s[..s.len() - 1].trim_end();
    }
    let multiplier = match s.chars().last() {
        Some('K' | 'k') => Some(3),
        Some('M' | 'm') => Some(6),
        Some('B' | 'b') => Some(9),
        _ => None,
    };
    if multiplier.is_some() {
        if percent {
            return Err(fail("a magnitude suffix cannot be combined with `%`"));
        }
        s = s[..s.len() - 1].trim_end();
    }
    if !valid_mantissa(s) {
        return Err(fail("expected digits with optional `,` grouping and decimal point"));
    }

    let mut value = mantissa_value(s);
    if let Some(exp) = multiplier {
        value = value.mul(&ExactValue::pow10(exp));
    }
    if percent {
        value = value.mul(&ExactValue::pow10(-2));
    }

    match metric {
        Metric::Count if percent => return Err(fail("a COUNT cannot be a percentage")),
        Metric::Share if value > ExactValue::from_integer(1) => {
            return Err(fail("a SHARE must lie in [0, 1] after normalization"))
        }
        _ => {}
    }

    let bare_integer = multiplier.is_none() && !percent && s.bytes().all(|b| b.is_ascii_digit());
    let precision = if approximate {
        ValuePrecision::Approximate
    } else if bare_integer {
        ValuePrecision::Exact
    } else {
        ValuePrecision::Rounded { significant_digits: significant_digits(s) }
    };
    Ok(ReportedValue { text: text.to_string(), value, precision })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, metric: Metric) -> (String, ValuePrecision) {
        let v = parse_reported_value(text, metric).unwrap();
        (v.value.to_string(), v.precision)
    }

    fn rounded(d: u32) -> ValuePrecision {
        ValuePrecision::Rounded { significant_digits: d }
    }

    #[test]
    fn rule_table() {
        assert_eq!(parse("1,200,000", Metric::Count), ("1200000".into(), rounded(2)));
        assert_eq!(parse("1.2M", Metric::Count), ("1200000".into(), rounded(2)));
        assert_eq!(parse("1.20M", Metric::Count), ("1200000".into(), rounded(3)));
        assert_eq!(parse("3 k", Metric::Count), ("3000".into(), rounded(1)));
        assert_eq!(parse("2.5B", Metric::Count), ("2500000000".into(), rounded(2)));
        assert_eq!(parse("0", Metric::Count), ("0".into(), ValuePrecision::Exact));
        assert_eq!(parse("1200", Metric::Count), ("1200".into(), ValuePrecision::Exact));
        assert_eq!(parse(" 42 ", Metric::Count), ("42".into(), ValuePrecision::Exact));
        assert_eq!(parse("~5%", Metric::Share), ("1/20".into(), ValuePrecision::Approximate));
        assert_eq!(parse("approximately 1.5K", Metric::Count), ("1500".into(), ValuePrecision::Approximate));
        assert_eq!(parse("94%", Metric::Share), ("47/50".into(), rounded(2)));
        assert_eq!(parse("12.50%", Metric::Share), ("1/8".into(), rounded(4)));
        assert_eq!(parse("0.94", Metric::Share), ("47/50".into(), rounded(2)));
        assert_eq!(parse("0.05%", Metric::Share), ("1/2000".into(), rounded(1)));
        assert_eq!(parse("1", Metric::Share), ("1".into(), ValuePrecision::Exact));
    }

    #[test]
    fn rejects() {
        for bad in ["", "abc", "-5", "1,20,000", "1.", ".5", "5%%", "12KM", "3%K", "1e6", "N/A"] {
            assert!(parse_reported_value(bad, Metric::Count).is_err(), "{bad}");
        }
        assert!(parse_reported_value("5%", Metric::Count).is_err());
        assert!(parse_reported_value("120%", Metric::Share).is_err());
        assert!(parse_reported_value("2", Metric::Share).is_err());
        let err = parse_reported_value("lots", Metric::Count).unwrap_err();
        assert_eq!(err.text, "lots");
    }

    #[test]
    fn decimal_exponent_is_exact_at_powers_of_ten() {
        for e in -6..12 {
            let p = ExactValue::pow10(e);
            assert_eq!(p.decimal_exponent(), Some(e));
            let below = ExactValue(p.as_rational() - BigRational::new(BigInt::one(), BigInt::from(10u64.pow(9))));
            assert_eq!(below.decimal_exponent(), Some(e - 1));
        }
        assert_eq!(ExactValue::zero().decimal_exponent(), None);
    }

    #[test]
    fn exact_value_text_round_trip() {
        for v in [ExactValue::ratio(3, 10), ExactValue::from_integer(7), ExactValue::zero()] {
            assert_eq!(v.to_string().parse::<ExactValue>().unwrap(), v);
        }
        assert!("1/0".parse::<ExactValue>().is_err());
    }

    fn group(n: u64) -> String {
        let digits = n.to_string();
        let mut out = String::new();
        for (i, c) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i) % 3 == 0 {
                out.push(',');
            }
            out.push(c);
        }
        out
    }

    proptest! {
        #[test]
        fn plain_integers_are_exact(n in 0u64..1_000_000_000_000) {
            let v = parse_reported_value(&n.to_string(), Metric::Count).unwrap();
            prop_assert_eq!(v.value, ExactValue::from_integer(n));
            prop_assert_eq!(v.precision, ValuePrecision::Exact);
        }

        #[test]
        fn grouped_integers_keep_value(n in 0u64..1_000_000_000_000) {
            let text = group(n);
            let v = parse_reported_value(&text, Metric::Count).unwrap();
            prop_assert_eq!(v.value, ExactValue::from_integer(n));
            let expect = if n < 1000 { ValuePrecision::Exact } else { rounded(significant_digits(&n.to_string())) };
            prop_assert_eq!(v.precision, expect);
        }

        #[test]
        fn suffixed_values(mantissa in 1u64..100_000, frac_digits in 0u32..3, suffix in 0usize..3, lower in any::<bool>()) {
            let (letter, exp) = [("K", 3), ("M", 6), ("B", 9)][suffix];
            let scale = 10u64.pow(frac_digits);
            let text = if frac_digits == 0 {
                format!("{mantissa}{}", if lower { letter.to_lowercase() } else { letter.to_string() })
            } else {
                format!("{}.{:0width$}{letter}", mantissa / scale, mantissa % scale, width = frac_digits as usize)
            };
            let v = parse_reported_value(&text, Metric::Count).unwrap();
            let expect = ExactValue::ratio(mantissa, scale).mul(&ExactValue::pow10(exp));
            prop_assert_eq!(v.value, expect);
            prop_assert!(matches!(v.precision, ValuePrecision::Rounded { .. }), "{:?}", v.precision);
        }

        #[test]
        fn percentages(basis_points in 0u64..=10_000, approx in any::<bool>()) {
            let text = format!("{}{}.{:02}%", if approx { "~" } else { "" }, basis_points / 100, basis_points % 100);
            let v = parse_reported_value(&text, Metric::Share).unwrap();
            prop_assert_eq!(v.value, ExactValue::ratio(basis_points, 10_000));
            if approx {
                prop_assert_eq!(v.precision, ValuePrecision::Approximate);
            }
        }
    }
}
