//! Exact currency amounts in integer micro-pounds.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

const MICROS_PER_POUND: i128 = 1_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Money(i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i128) -> Self {
        Self(micros)
    }

    pub const fn from_whole_pounds(pounds: i64) -> Self {
        Self(pounds as i128 * MICROS_PER_POUND)
    }

    /// Rounds to the nearest micro-pound.
    pub fn from_pounds(pounds: f64) -> Self {
        Self((pounds * MICROS_PER_POUND as f64).round() as i128)
    }

    pub const fn micros(self) -> i128 {
        self.0
    }

    pub fn pounds(self) -> f64 {
        self.0 as f64 / MICROS_PER_POUND as f64
    }

    pub fn millions(self) -> f64 {
        self.pounds() / 1e6
    }

    pub fn billions(self) -> f64 {
        self.pounds() / 1e9
    }

    /// Exact decimal pounds without a currency sign, e.g. `-1.500000`.
    pub fn to_plain_string(self) -> String {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / MICROS_PER_POUND as u128;
        let frac = abs % MICROS_PER_POUND as u128;
        format!("{sign}{whole}.{frac:06}")
    }

    /// `volume × price` for one settlement period, rounded once.
    pub fn of_energy(volume_mwh: f64, price_per_mwh: f64) -> Self {
        Self::from_pounds(volume_mwh * price_per_mwh)
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

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plain = self.to_plain_string();
        match plain.strip_prefix('-') {
            Some(rest) => write!(f, "-£{rest}"),
            None => write!(f, "£{plain}"),
        }
    }
}
