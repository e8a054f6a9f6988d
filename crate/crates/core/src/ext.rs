//! Costs on the extended half-line `[0, ∞]`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use crate::error::Error;

/// A nonnegative cost that may be infinite.
///
/// Negative values and NaN cannot be represented, so the ordering is total
/// and `∞` absorbs under addition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtCost {
    Finite(f64),
    Infinite,
}

impl ExtCost {
    pub const ZERO: ExtCost = ExtCost::Finite(0.0);
    pub const ONE: ExtCost = ExtCost::Finite(1.0);
    pub const INF: ExtCost = ExtCost::Infinite;

    /// Checked constructor. `f64::INFINITY` maps to [`ExtCost::Infinite`].
    pub fn new(value: f64) -> Result<Self, Error> {
        if value.is_nan() {
            return Err(Error::InvalidCost(value));
        }
        if value < 0.0 {
            return Err(Error::InvalidCost(value));
        }
        if value == f64::INFINITY {
            return Ok(ExtCost::Infinite);
        }
        // normalizes -0.0
        Ok(ExtCost::Finite(value + 0.0))
    }

    /// Panicking constructor for literals in fixtures and tests.
    pub fn of(value: f64) -> Self {
        Self::new(value).unwrap_or_else(|_| panic!("invalid extended cost {value}"))
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtCost::Infinite)
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    pub fn is_zero(self) -> bool {
        self == ExtCost::ZERO
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtCost::Finite(v) => Some(v),
            ExtCost::Infinite => None,
        }
    }

    /// The value as an `f64`, with `∞` mapped to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtCost::Finite(v) => v,
            ExtCost::Infinite => f64::INFINITY,
        }
    }

    /// `|a - b|` with `∞ - ∞ = 0` and `|∞ - finite| = ∞`.
    pub fn distance(self, other: ExtCost) -> f64 {
        match (self, other) {
            (ExtCost::Finite(a), ExtCost::Finite(b)) => (a - b).abs(),
            (ExtCost::Infinite, ExtCost::Infinite) => 0.0,
            _ => f64::INFINITY,
        }
    }

    /// Nonnegative scaling; `0 · ∞ = 0` so that zero interpolation weights
    /// never pull in an infinite corner.
    pub fn scale(self, weight: f64) -> ExtCost {
        debug_assert!(weight >= 0.0);
        if weight == 0.0 {
            return ExtCost::ZERO;
        }
        match self {
            ExtCost::Finite(v) => ExtCost::from_sum(v * weight),
            ExtCost::Infinite => ExtCost::Infinite,
        }
    }

    fn from_sum(v: f64) -> ExtCost {
        if v.is_finite() {
            ExtCost::Finite(v + 0.0)
        } else {
            ExtCost::Infinite
        }
    }
}

/// Extended addition; `∞` is absorbing.
pub fn ext_add(a: ExtCost, b: ExtCost) -> ExtCost {
    match (a, b) {
        (ExtCost::Finite(x), ExtCost::Finite(y)) => ExtCost::from_sum(x + y),
        _ => ExtCost::Infinite,
    }
}

impl Add for ExtCost {
    type Output = ExtCost;

    fn add(self, rhs: ExtCost) -> ExtCost {
        ext_add(self, rhs)
    }
}

impl Sum for ExtCost {
    fn sum<I: Iterator<Item = ExtCost>>(iter: I) -> ExtCost {
        iter.fold(ExtCost::ZERO, ext_add)
    }
}

impl Eq for ExtCost {}

impl Ord for ExtCost {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtCost::Finite(a), ExtCost::Finite(b)) => a.total_cmp(b),
            (ExtCost::Finite(_), ExtCost::Infinite) => Ordering::Less,
            (ExtCost::Infinite, ExtCost::Finite(_)) => Ordering::Greater,
            (ExtCost::Infinite, ExtCost::Infinite) => Ordering::Equal,
        }
    }
}

impl PartialOrd for ExtCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Default for ExtCost {
    fn default() -> Self {
        ExtCost::ZERO
    }
}

impl fmt::Display for ExtCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtCost::Finite(v) => write!(f, "{v}"),
            ExtCost::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtCost {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(ExtCost::Infinite);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Parse(format!("not a cost value: {s:?}")))?;
        ExtCost::new(v)
    }
}

impl TryFrom<f64> for ExtCost {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        ExtCost::new(value)
    }
}

/// Writes a cost with 17 significant digits so it re-parses bit-exactly.
pub fn format_exact(c: ExtCost) -> String {
    match c {
        ExtCost::Finite(v) => format_f64_exact(v),
        ExtCost::Infinite => "inf".to_string(),
    }
}

pub(crate) fn format_f64_exact(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{v:.16e}")
}
