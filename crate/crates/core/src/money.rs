//! Exact currency arithmetic.
//!
//! Costs are integers in units of 1e-12 currency. Prices are quoted per one
//! million tokens with at most six decimal places, which keeps
//! `tokens * price / 1e6` an exact integer in that unit.

use core::fmt;
use core::iter::Sum;
use core::ops::{Add, AddAssign};
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Integer picos (1e-12) per currency unit.
pub const PICOS_PER_UNIT: u64 = 1_000_000_000_000;

/// Integer micros per currency unit; prices are stored in micros per 1M tokens.
pub const MICROS_PER_UNIT: u64 = 1_000_000;

/// An exact non-negative amount of currency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(u64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_picos(picos: u64) -> Self {
        Money(picos)
    }

    pub const fn picos(self) -> u64 {
        self.0
    }

    /// Whole micro-currency units, truncated.
    pub const fn micros(self) -> u64 {
        self.0 / MICROS_PER_UNIT
    }

    pub const fn from_micros(micros: u64) -> Self {
        Money(micros * MICROS_PER_UNIT)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, other: Money) -> Option<Money> {
        self.0.checked_add(other.0).map(Money)
    }

    pub fn saturating_sub(self, other: Money) -> Money {
        Money(self.0.saturating_sub(other.0))
    }

    /// Lossy conversion for display and plotting only.
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / PICOS_PER_UNIT as f64
    }

    /// Nearest representable amount for a float; negative and NaN map to zero.
    pub fn from_f64(value: f64) -> Money {
        if !(value > 0.0) {
            return Money::ZERO;
        }
        Money(libm::round(value * PICOS_PER_UNIT as f64) as u64)
    }
}

impl Add for Money {
    type Output = Money;

    fn add(self, rhs: Money) -> Money {
        Money(self.0.checked_add(rhs.0).expect("money overflow"))
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        *self = *self + rhs;
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

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / PICOS_PER_UNIT;
        let frac = self.0 % PICOS_PER_UNIT;
        write!(f, "{whole}.{frac:012}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid amount `{0}`: expected a non-negative decimal")]
pub struct ParseMoneyError(pub alloc::string::String);

impl FromStr for Money {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_decimal(s, 12).map(Money).ok_or_else(|| ParseMoneyError(s.into()))
    }
}

/// Price per one million tokens, stored as integer micros.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PricePerMillion(u64);

impl PricePerMillion {
    pub const FREE: PricePerMillion = PricePerMillion(0);

    pub const fn from_micros(micros: u64) -> Self {
        PricePerMillion(micros)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    /// Nearest price with six decimals; rejects negative or non-finite input.
    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() || value < 0.0 {
            return None;
        }
        Some(PricePerMillion(libm::round(value * MICROS_PER_UNIT as f64) as u64))
    }

    /// Exact cost of `tokens` at this price.
    ///
    /// `tokens * micros_per_million` is already in picos: the 1e-6 of the
    /// price unit and the 1e-6 of "per million" combine to 1e-12.
    pub fn cost(self, tokens: u64) -> Money {
        Money(tokens.checked_mul(self.0).expect("cost overflow"))
    }
}

impl FromStr for PricePerMillion {
    type Err = ParseMoneyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_decimal(s, 6).map(PricePerMillion).ok_or_else(|| ParseMoneyError(s.into()))
    }
}

impl fmt::Display for PricePerMillion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / MICROS_PER_UNIT;
        let frac = self.0 % MICROS_PER_UNIT;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let digits = alloc::format!("{frac:06}");
            write!(f, "{whole}.{}", digits.trim_end_matches('0'))
        }
    }
}

/// Parse a plain decimal into an integer scaled by `10^scale`.
fn parse_decimal(s: &str, scale: u32) -> Option<u64> {
    let s = s.trim();
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if frac_part.len() > scale as usize {
        return None;
    }
    let unit = 10u64.checked_pow(scale)?;
    let whole: u64 = if int_part.is_empty() { 0 } else { int_part.parse().ok()? };
    let mut frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().ok()? };
    frac *= 10u64.pow(scale - frac_part.len() as u32);
    whole.checked_mul(unit)?.checked_add(frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn hand_computed_exchange_cost() {
        // 400 prompt tokens at 2.5/1M plus 100 completion tokens at 10/1M.
        let price_in: PricePerMillion = "2.5".parse().unwrap();
        let price_out: PricePerMillion = "10".parse().unwrap();
        let total = price_in.cost(400) + price_out.cost(100);
        assert_eq!(total, "0.002".parse().unwrap());
        assert_eq!(total.micros(), 2000);
    }

    #[test]
    fn fractional_micro_costs_stay_exact() {
        let price: PricePerMillion = "0.15".parse().unwrap();
        assert_eq!(price.cost(7).picos(), 1_050_000);
    }

    #[test]
    fn display_and_parse() {
        let m: Money = "1.25".parse().unwrap();
        assert_eq!(m.to_string(), "1.250000000000");
        assert!("-1".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
        assert!("0.0000001".parse::<PricePerMillion>().is_err());
        assert_eq!("2.50".parse::<PricePerMillion>().unwrap().to_string(), "2.5");
    }

    #[test]
    fn float_conversion() {
        assert_eq!(PricePerMillion::from_f64(2.5), Some(PricePerMillion::from_micros(2_500_000)));
        assert_eq!(PricePerMillion::from_f64(-1.0), None);
        assert_eq!(Money::from_f64(0.001), Money::from_micros(1000));
    }
}
