use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A nonnegative-friendly real extended by `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PositiveInfinity,
}

pub use ExtendedReal::{Finite, PositiveInfinity};

impl ExtendedReal {
    pub const ZERO: ExtendedReal = Finite(0.0);
    pub const INFINITY: ExtendedReal = PositiveInfinity;

    /// Maps `f64::INFINITY` to `PositiveInfinity`. NaN and `-inf` are rejected.
    pub fn from_f64(x: f64) -> ExtendedReal {
        assert!(!x.is_nan() && x != f64::NEG_INFINITY, "not representable: {x}");
        if x == f64::INFINITY {
            PositiveInfinity
        } else {
            Finite(x)
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PositiveInfinity)
    }

    pub fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Finite(x) => Some(x),
            PositiveInfinity => None,
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            Finite(x) => x,
            PositiveInfinity => f64::INFINITY,
        }
    }

    /// `x^e` for `e > 0`; `∞^e = ∞`.
    pub fn powf(self, e: f64) -> ExtendedReal {
        debug_assert!(e > 0.0);
        match self {
            Finite(x) => ExtendedReal::from_f64(x.powf(e)),
            PositiveInfinity => PositiveInfinity,
        }
    }

    pub fn ln(self) -> f64 {
        self.to_f64().ln()
    }

    pub fn max(self, other: ExtendedReal) -> ExtendedReal {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: ExtendedReal) -> ExtendedReal {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        ExtendedReal::from_f64(x)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtendedReal::from_f64(a + b),
            _ => PositiveInfinity,
        }
    }
}

impl Add<f64> for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: f64) -> ExtendedReal {
        self + ExtendedReal::from_f64(rhs)
    }
}

/// `c·∞ = ∞` for `c > 0` and `0·∞ = 0` (measure-theoretic convention).
impl Mul<f64> for ExtendedReal {
    type Output = ExtendedReal;
    fn mul(self, c: f64) -> ExtendedReal {
        match self {
            Finite(a) => ExtendedReal::from_f64(a * c),
            PositiveInfinity if c > 0.0 => PositiveInfinity,
            PositiveInfinity if c == 0.0 => Finite(0.0),
            PositiveInfinity => panic!("negative multiple of infinity"),
        }
    }
}

impl Mul for ExtendedReal {
    type Output = ExtendedReal;
    fn mul(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtendedReal::from_f64(a * b),
            (PositiveInfinity, Finite(c)) | (Finite(c), PositiveInfinity) => PositiveInfinity * c,
            (PositiveInfinity, PositiveInfinity) => PositiveInfinity,
        }
    }
}

impl Sum for ExtendedReal {
    fn sum<I: Iterator<Item = ExtendedReal>>(iter: I) -> Self {
        iter.fold(Finite(0.0), |a, b| a + b)
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (Finite(_), PositiveInfinity) => Ordering::Less,
            (PositiveInfinity, Finite(_)) => Ordering::Greater,
            (PositiveInfinity, PositiveInfinity) => Ordering::Equal,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finite(x) => write!(f, "{x:e}"),
            PositiveInfinity => f.write_str("inf"),
        }
    }
}

// JSON has no infinity: finite values are numbers, `+∞` is the string "inf".
impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Finite(x) => s.serialize_f64(*x),
            PositiveInfinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x.is_finite() => Ok(Finite(x)),
            Raw::Str(s) if s == "inf" => Ok(PositiveInfinity),
            _ => Err(serde::de::Error::custom("expected a finite number or \"inf\"")),
        }
    }
}
