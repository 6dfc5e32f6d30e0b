//! Nonnegative-extended reals: a finite value or an explicit `+∞` marker.
//!
//! Divergent integrals and unbounded symbols are legal results in this crate,
//! so they are carried as [`Extended::PosInfinity`] instead of an overflowed
//! float.

use std::fmt;
use std::ops::Add;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInfinity,
}

impl Extended {
    pub const ZERO: Extended = Extended::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInfinity => None,
        }
    }

    /// Value as `f64`, mapping the marker to `f64::INFINITY` (display and comparisons only).
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn scale(self, k: f64) -> Extended {
        match self {
            Extended::Finite(v) => Extended::Finite(v * k),
            Extended::PosInfinity if k > 0.0 => Extended::PosInfinity,
            Extended::PosInfinity if k == 0.0 => Extended::ZERO,
            Extended::PosInfinity => panic!("negative scaling of +inf marker"),
        }
    }
}

impl From<f64> for Extended {
    fn from(v: f64) -> Self {
        Extended::Finite(v)
    }
}

impl Add for Extended {
    type Output = Extended;
    fn add(self, rhs: Extended) -> Extended {
        match (self, rhs) {
            (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + b),
            _ => Extended::PosInfinity,
        }
    }
}

impl Add<f64> for Extended {
    type Output = Extended;
    fn add(self, rhs: f64) -> Extended {
        self + Extended::Finite(rhs)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInfinity => f.write_str("+inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Extended::Finite(v) => s.serialize_f64(*v),
            Extended::PosInfinity => s.serialize_str("+inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Extended;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"+inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Extended, E> {
                Ok(Extended::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Extended, E> {
                match v {
                    "+inf" | "inf" => Ok(Extended::PosInfinity),
                    _ => Err(E::custom(format!("unexpected marker {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Serde adapter for `f64` fields that may legitimately hold `±∞` or NaN
/// (margins of violated inequalities); these are written as strings.
pub mod signed_float {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("+inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"+inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "+inf" | "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => Err(E::custom(format!("unexpected marker {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}
