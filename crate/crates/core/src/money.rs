//! Exact money arithmetic.
//!
//! Amounts are signed integers in minor units (scale 2). Exchange rates are
//! fixed-point with six fractional digits. Conversions round half to even at
//! minor-unit scale.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of fractional digits of every supported currency.
pub const MINOR_UNIT_SCALE: u32 = 2;

const RATE_DIGITS: u32 = 6;
const RATE_DENOMINATOR: i128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoneyError {
    #[error("invalid currency code {0:?}")]
    InvalidCurrency(String),
    #[error("invalid amount {0:?}")]
    InvalidAmount(String),
    #[error("invalid exchange rate {0:?}")]
    InvalidRate(String),
    #[error("currency mismatch: {0} vs {1}")]
    CurrencyMismatch(CurrencyCode, CurrencyCode),
    #[error("amount overflow")]
    Overflow,
}

/// ISO-4217 alphabetic code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CurrencyCode(String);

impl CurrencyCode {
    pub fn new(code: &str) -> Result<Self, MoneyError> {
        if code.len() == 3 && code.bytes().all(|b| b.is_ascii_uppercase()) {
            Ok(Self(code.to_owned()))
        } else {
            Err(MoneyError::InvalidCurrency(code.to_owned()))
        }
    }

    pub fn eur() -> Self {
        Self("EUR".to_owned())
    }

    pub fn is_eur(&self) -> bool {
        self.0 == "EUR"
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for CurrencyCode {
    type Error = MoneyError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(&value)
    }
}

impl From<CurrencyCode> for String {
    fn from(code: CurrencyCode) -> Self {
        code.0
    }
}

impl FromStr for CurrencyCode {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl fmt::Display for CurrencyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A signed amount in minor units of a currency.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MoneyMinor {
    pub amount_minor: i64,
    pub currency: CurrencyCode,
}

impl MoneyMinor {
    pub fn new(amount_minor: i64, currency: CurrencyCode) -> Self {
        Self {
            amount_minor,
            currency,
        }
    }

    pub fn zero(currency: CurrencyCode) -> Self {
        Self::new(0, currency)
    }

    pub fn checked_add(&self, other: &MoneyMinor) -> Result<MoneyMinor, MoneyError> {
        if self.currency != other.currency {
            return Err(MoneyError::CurrencyMismatch(
                self.currency.clone(),
                other.currency.clone(),
            ));
        }
        let amount_minor = self
            .amount_minor
            .checked_add(other.amount_minor)
            .ok_or(MoneyError::Overflow)?;
        Ok(MoneyMinor::new(amount_minor, self.currency.clone()))
    }
}

impl fmt::Display for MoneyMinor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", format_minor(self.amount_minor), self.currency)
    }
}

/// Exchange rate to EUR with exactly six fractional digits, stored as
/// millionths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rate(i64);

impl Rate {
    pub const ONE: Rate = Rate(1_000_000);

    /// Builds a rate from millionths; must be strictly positive.
    pub fn from_micros(micros: i64) -> Result<Self, MoneyError> {
        if micros > 0 {
            Ok(Rate(micros))
        } else {
            Err(MoneyError::InvalidRate(micros.to_string()))
        }
    }

    pub fn micros(self) -> i64 {
        self.0
    }
}

impl FromStr for Rate {
    type Err = MoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let micros = parse_fixed(s, RATE_DIGITS)
            .and_then(|v| i64::try_from(v).ok())
            .ok_or_else(|| MoneyError::InvalidRate(s.to_owned()))?;
        Rate::from_micros(micros).map_err(|_| MoneyError::InvalidRate(s.to_owned()))
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// Parses decimal text such as `-1234.56` into minor units.
///
/// At most two fractional digits are accepted; anything that cannot be
/// represented exactly is rejected.
pub fn parse_minor(text: &str) -> Result<i64, MoneyError> {
    parse_fixed(text, MINOR_UNIT_SCALE)
        .and_then(|v| i64::try_from(v).ok())
        .ok_or_else(|| MoneyError::InvalidAmount(text.to_owned()))
}

/// Formats minor units as dot-decimal text with two fractional digits.
pub fn format_minor(minor: i64) -> String {
    let sign = if minor < 0 { "-" } else { "" };
    let abs = minor.unsigned_abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

fn parse_fixed(text: &str, scale: u32) -> Option<i128> {
    let text = text.trim();
    let (negative, body) = match text.as_bytes().first()? {
        b'-' => (true, &text[1..]),
        b'+' => (false, &text[1..]),
        _ => (false, text),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut value: i128 = 0;
    for b in int_part.bytes() {
        value = value.checked_mul(10)?.checked_add(i128::from(b - b'0'))?;
    }
    let frac = frac_part.unwrap_or("");
    if frac_part.is_some() && frac.is_empty() {
        return None;
    }
    if frac.len() > scale as usize || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    for i in 0..scale as usize {
        let digit = frac.as_bytes().get(i).map_or(0, |b| b - b'0');
        value = value.checked_mul(10)?.checked_add(i128::from(digit))?;
    }
    if value > i128::from(i64::MAX) {
        return None;
    }
    Some(if negative { -value } else { value })
}

/// Integer division rounding half to even. `den` must be positive.
pub fn div_round_half_even(num: i128, den: i128) -> i128 {
    assert!(den > 0, "denominator must be positive");
    let quot = num.div_euclid(den);
    let rem = num.rem_euclid(den);
    match (2 * rem).cmp(&den) {
        std::cmp::Ordering::Less => quot,
        std::cmp::Ordering::Greater => quot + 1,
        std::cmp::Ordering::Equal => {
            if quot % 2 == 0 {
                quot
            } else {
                quot + 1
            }
        }
    }
}

/// Converts minor units with a rate, rounding half to even.
pub fn convert_minor(amount_minor: i64, rate: Rate) -> i64 {
    let product = i128::from(amount_minor) * i128::from(rate.micros());
    div_round_half_even(product, RATE_DENOMINATOR) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_amounts() {
        assert_eq!(parse_minor("-1234.56").unwrap(), -123456);
        assert_eq!(parse_minor("12").unwrap(), 1200);
        assert_eq!(parse_minor("12.5").unwrap(), 1250);
        assert_eq!(parse_minor("+0.01").unwrap(), 1);
        for bad in ["abc", "", "1.234", "1.", ".5", "1,50", "--1", "1e3"] {
            assert!(parse_minor(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_rates() {
        assert_eq!("0.905550".parse::<Rate>().unwrap().micros(), 905_550);
        assert_eq!("1".parse::<Rate>().unwrap(), Rate::ONE);
        assert!("0".parse::<Rate>().is_err());
        assert!("-0.9".parse::<Rate>().is_err());
        assert!("0.1234567".parse::<Rate>().is_err());
        assert_eq!(Rate::from_micros(899_999).unwrap().to_string(), "0.899999");
    }

    #[test]
    fn converts_with_half_even() {
        assert_eq!(convert_minor(10000, "0.900000".parse().unwrap()), 9000);
        // 9055.5 -> 9056, the even neighbour
        assert_eq!(convert_minor(10000, "0.905550".parse().unwrap()), 9056);
        // 9054.5 -> 9054
        assert_eq!(convert_minor(10000, "0.905450".parse().unwrap()), 9054);
        assert_eq!(convert_minor(-10000, "0.905550".parse().unwrap()), -9056);
        assert_eq!(convert_minor(12345, Rate::ONE), 12345);
    }

    #[test]
    fn half_even_division() {
        assert_eq!(div_round_half_even(5, 2), 2);
        assert_eq!(div_round_half_even(7, 2), 4);
        assert_eq!(div_round_half_even(-5, 2), -2);
        assert_eq!(div_round_half_even(-7, 2), -4);
        assert_eq!(div_round_half_even(10, 3), 3);
        assert_eq!(div_round_half_even(-10, 3), -3);
    }

    #[test]
    fn currency_codes() {
        assert!(CurrencyCode::new("usd").is_err());
        assert!(CurrencyCode::new("EURO").is_err());
        let eur = CurrencyCode::eur();
        let usd = CurrencyCode::new("USD").unwrap();
        assert!(MoneyMinor::zero(eur).checked_add(&MoneyMinor::zero(usd)).is_err());
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(minor in -1_000_000_000_000i64..1_000_000_000_000) {
            prop_assert_eq!(parse_minor(&format_minor(minor)).unwrap(), minor);
        }

        #[test]
        fn rounding_error_at_most_half(num in -1_000_000_000i128..1_000_000_000, den in 1i128..10_000) {
            let q = div_round_half_even(num, den);
            prop_assert!((2 * (q * den - num)).abs() <= den);
        }
    }
}
