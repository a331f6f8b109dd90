//! Exact currency values.
//!
//! All payoff math runs on reduced rationals. Conversion to integer cents or
//! milli-euros happens only at the wire and log boundaries, and rendering to a
//! two-decimal string reports whether it had to round.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use num_rational::Ratio;

/// Exact rational number used for multipliers and means.
pub type Rational = Ratio<i64>;

/// An amount of euros, stored as a reduced fraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(Rational);

/// Two-decimal rendering of a [`Money`] value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    /// `false` when the value is not a whole number of cents and was rounded.
    pub exact: bool,
}

impl Money {
    pub const ZERO: Money = Money(Ratio::new_raw(0, 1));

    pub fn from_ratio(value: Rational) -> Self {
        Money(value)
    }

    pub fn from_cents(cents: i64) -> Self {
        Money(Ratio::new(cents, 100))
    }

    pub fn from_milli(milli: i64) -> Self {
        Money(Ratio::new(milli, 1000))
    }

    pub fn from_euros(euros: i64) -> Self {
        Money(Ratio::from_integer(euros))
    }

    pub fn ratio(&self) -> Rational {
        self.0
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        *self.0.numer() == 0
    }

    pub fn is_negative(&self) -> bool {
        *self.0.numer() < 0
    }

    /// Multiply by an exact rational factor.
    pub fn scale(self, factor: Rational) -> Self {
        Money(self.0 * factor)
    }

    /// Divide by a positive integer.
    pub fn div_int(self, divisor: i64) -> Self {
        assert!(divisor > 0, "divisor must be positive");
        Money(self.0 / divisor)
    }

    /// Whole cents, or `None` when the value is not cent-exact.
    pub fn to_cents(&self) -> Option<i64> {
        to_units(self.0, 100)
    }

    /// Whole milli-euros, or `None` when the value is not milli-exact.
    pub fn to_milli(&self) -> Option<i64> {
        to_units(self.0, 1000)
    }

    /// Render as euros with two fraction digits, rounding half away from zero.
    pub fn render(&self) -> Rendered {
        Rendered {
            text: render_decimal(self.0, 2),
            exact: (self.0 * 100).is_integer(),
        }
    }
}

/// Fixed-point rendering with `digits` fraction digits, rounding half away from zero.
pub fn render_decimal(value: Rational, digits: u32) -> String {
    let unit = 10i64.pow(digits);
    let scaled = (value * unit).round().to_integer();
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let unit = unit as u64;
    if digits == 0 {
        return format!("{sign}{abs}");
    }
    format!("{sign}{}.{:0width$}", abs / unit, abs % unit, width = digits as usize)
}

fn to_units(value: Rational, per_euro: i64) -> Option<i64> {
    let scaled = value * per_euro;
    scaled.is_integer().then(|| scaled.to_integer())
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render().text)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Money> for Money {
    fn sum<I: Iterator<Item = &'a Money>>(iter: I) -> Money {
        iter.copied().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as an exact rational")]
pub struct ParseRationalError(pub String);

/// Parse `"8/5"`, `"1.6"` or `"2"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError(text.to_string());
    let s = text.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| err())?;
        let d: i64 = d.trim().parse().map_err(|_| err())?;
        if d == 0 {
            return Err(err());
        }
        return Ok(Ratio::new(n, d));
    }
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if (int_part.is_empty() && frac_part.is_empty())
        || !all_digits(int_part)
        || !all_digits(frac_part)
        || frac_part.len() > 12
    {
        return Err(err());
    }
    let denom = 10i64.pow(frac_part.len() as u32);
    let int: i64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| err())? };
    let frac: i64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| err())? };
    let numer = int
        .checked_mul(denom)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(err)?;
    Ok(Ratio::new(if negative { -numer } else { numer }, denom))
}

impl FromStr for Money {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rational(s.trim().trim_end_matches('€').trim()).map(Money)
    }
}
