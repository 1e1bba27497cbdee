use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Values at or below this are treated as exact zeros by [`ExtendedScalar::ratio`].
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// A nonnegative real or `+inf`.
///
/// Serializes finite values as JSON numbers and infinity as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedScalar {
    Finite(f64),
    Infinite,
}

impl ExtendedScalar {
    pub fn finite(x: f64) -> Self {
        if x.is_infinite() {
            ExtendedScalar::Infinite
        } else {
            ExtendedScalar::Finite(x)
        }
    }

    /// `num / den` with `0/0 = 1` and `x/0 = inf`.
    pub fn ratio(num: f64, den: f64) -> Self {
        let num_zero = num.abs() <= ZERO_THRESHOLD;
        let den_zero = den.abs() <= ZERO_THRESHOLD;
        match (num_zero, den_zero) {
            (true, true) => ExtendedScalar::Finite(1.0),
            (false, true) => ExtendedScalar::Infinite,
            _ => ExtendedScalar::Finite(num / den),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedScalar::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            ExtendedScalar::Finite(x) => Some(*x),
            ExtendedScalar::Infinite => None,
        }
    }

    /// Lossy conversion, infinity maps to `f64::INFINITY`.
    pub fn to_f64(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            ExtendedScalar::Finite(x) => ExtendedScalar::finite(f(x)),
            ExtendedScalar::Infinite => ExtendedScalar::Infinite,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.to_f64() <= other.to_f64() {
            self
        } else {
            other
        }
    }

    /// `self <= other + slack`, with `inf <= inf`.
    pub fn le_with_slack(&self, other: &Self, slack: f64) -> bool {
        match (self, other) {
            (_, ExtendedScalar::Infinite) => true,
            (ExtendedScalar::Infinite, ExtendedScalar::Finite(_)) => false,
            (ExtendedScalar::Finite(a), ExtendedScalar::Finite(b)) => *a <= *b + slack,
        }
    }
}

impl From<f64> for ExtendedScalar {
    fn from(x: f64) -> Self {
        ExtendedScalar::finite(x)
    }
}

impl fmt::Display for ExtendedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedScalar::Finite(x) => write!(f, "{x}"),
            ExtendedScalar::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtendedScalar {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtendedScalar::Finite(x) => s.serialize_f64(*x),
            ExtendedScalar::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedScalar {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtendedScalar;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(ExtendedScalar::finite(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(ExtendedScalar::Finite(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(ExtendedScalar::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == "inf" {
                    Ok(ExtendedScalar::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}
