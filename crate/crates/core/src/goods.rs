//! Identifiers, good vectors, and exact money.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// Exact rational amount of value. Never rounded.
pub type Money = BigRational;

/// Parse a money literal: an integer (`"7"`, `"-2"`) or a fraction `"p/q"`.
pub fn parse_money(text: &str) -> Option<Money> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    text.parse::<BigRational>().ok()
}

/// Convert an integer to money.
pub fn money(n: i64) -> Money {
    BigRational::from_integer(n.into())
}

/// Build `num/den` as money. Panics on a zero denominator.
pub fn ratio(num: i64, den: i64) -> Money {
    BigRational::new(num.into(), den.into())
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

string_id!(
    /// Token naming a good type in the game's registry.
    GoodId
);
string_id!(
    /// Token naming a company (a player).
    CompanyId
);

/// Nonnegative integer quantity per good type. Absent keys are zero; zero
/// entries are never stored, so structural equality is vector equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GoodVector {
    counts: BTreeMap<GoodId, u64>,
}

impl GoodVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, good: &GoodId) -> u64 {
        self.counts.get(good).copied().unwrap_or(0)
    }

    pub fn set(&mut self, good: GoodId, count: u64) {
        if count == 0 {
            self.counts.remove(&good);
        } else {
            self.counts.insert(good, count);
        }
    }

    pub fn add_to(&mut self, good: &GoodId, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(good.clone()).or_insert(0) += count;
    }

    /// Removes `count` units of `good`. Panics if fewer are present.
    pub fn take(&mut self, good: &GoodId, count: u64) {
        let have = self.get(good);
        assert!(have >= count, "removing {count} {good} from {have}");
        self.set(good.clone(), have - count);
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }

    /// Good types with a positive count, in id order.
    pub fn support(&self) -> impl Iterator<Item = &GoodId> {
        self.counts.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GoodId, u64)> {
        self.counts.iter().map(|(g, &c)| (g, c))
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Componentwise `self ≤ other` over the union of keys.
    pub fn le(&self, other: &GoodVector) -> bool {
        self.counts.iter().all(|(g, &c)| c <= other.get(g))
    }

    pub fn scaled(&self, factor: u64) -> GoodVector {
        let mut out = GoodVector::new();
        for (g, c) in self.iter() {
            out.set(g.clone(), c * factor);
        }
        out
    }

    /// Componentwise `max(self - other, 0)`.
    pub fn saturating_sub(&self, other: &GoodVector) -> GoodVector {
        let mut out = GoodVector::new();
        for (g, c) in self.iter() {
            out.set(g.clone(), c.saturating_sub(other.get(g)));
        }
        out
    }
}

impl<G: Into<GoodId>> FromIterator<(G, u64)> for GoodVector {
    fn from_iter<I: IntoIterator<Item = (G, u64)>>(iter: I) -> Self {
        let mut out = GoodVector::new();
        for (g, c) in iter {
            out.add_to(&g.into(), c);
        }
        out
    }
}

impl AddAssign<&GoodVector> for GoodVector {
    fn add_assign(&mut self, rhs: &GoodVector) {
        for (g, c) in rhs.iter() {
            self.add_to(g, c);
        }
    }
}

impl Add<&GoodVector> for &GoodVector {
    type Output = GoodVector;

    fn add(self, rhs: &GoodVector) -> GoodVector {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl fmt::Display for GoodVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("-");
        }
        for (n, (g, c)) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{g}:{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gv(items: &[(&str, u64)]) -> GoodVector {
        items.iter().map(|&(g, c)| (g, c)).collect()
    }

    #[test]
    fn zero_entries_are_dropped() {
        let mut v = gv(&[("a", 0), ("b", 2)]);
        assert_eq!(v, gv(&[("b", 2)]));
        v.take(&"b".into(), 2);
        assert!(v.is_zero());
        assert_eq!(v, GoodVector::new());
    }

    #[test]
    fn le_uses_union_of_keys() {
        assert!(gv(&[("a", 1)]).le(&gv(&[("a", 1), ("b", 5)])));
        assert!(!gv(&[("a", 1), ("c", 1)]).le(&gv(&[("a", 3)])));
        assert!(GoodVector::new().le(&GoodVector::new()));
    }

    #[test]
    fn money_literals() {
        assert_eq!(parse_money("7/2"), Some(ratio(7, 2)));
        assert_eq!(parse_money("14/4"), Some(ratio(7, 2)));
        assert_eq!(parse_money("-3"), Some(money(-3)));
        assert_eq!(parse_money("1/0"), None);
        assert_eq!(parse_money("0.5"), None);
        assert_eq!(parse_money(""), None);
        assert_eq!(ratio(9, 2).to_string(), "9/2");
        assert_eq!(money(14).to_string(), "14");
    }
}
