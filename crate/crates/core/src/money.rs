use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::exact::{self, ParseRationalError, Rational};

/// An exact amount of money. Signed so that utilities and deltas can be
/// represented; valuations and prices are checked to be non-negative where
/// they enter the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(Rational);

impl Money {
    pub const ZERO: Money = Money(Rational::new_raw(0, 1));

    pub fn new(numer: i128, denom: i128) -> Self {
        Money(Rational::new(numer, denom))
    }

    pub fn from_int(value: i128) -> Self {
        Money(Rational::from_integer(value))
    }

    pub fn from_rational(value: Rational) -> Self {
        Money(value)
    }

    pub fn rational(&self) -> Rational {
        self.0
    }

    pub fn midpoint(a: Money, b: Money) -> Money {
        Money(exact::midpoint(a.0, b.0))
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        exact::to_f64(&self.0)
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&exact::format_rational(&self.0))
    }
}

impl FromStr for Money {
    type Err = ParseRationalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        exact::parse_rational(s).map(Money)
    }
}

impl From<i64> for Money {
    fn from(value: i64) -> Self {
        Money::from_int(value as i128)
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl Neg for Money {
    type Output = Money;
    fn neg(self) -> Money {
        Money(-self.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Money {
    fn sub_assign(&mut self, rhs: Money) {
        self.0 -= rhs.0;
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

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        exact::serde_rational::serialize(&self.0, serializer)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        exact::serde_rational::deserialize(deserializer).map(Money)
    }
}
