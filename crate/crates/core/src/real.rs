use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number that may be `+∞`; serialized as a JSON number or the string
/// `"infinity"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedReal(pub f64);

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("infinity")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtendedReal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"infinity\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtendedReal, E> {
                Ok(ExtendedReal(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtendedReal, E> {
                Ok(ExtendedReal(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtendedReal, E> {
                Ok(ExtendedReal(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtendedReal, E> {
                match v {
                    "infinity" | "inf" | "Infinity" => Ok(ExtendedReal(f64::INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Time-scale separation `ε`; `Infinite` freezes the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeScale {
    Finite(f64),
    Infinite,
}

impl TimeScale {
    /// `1/ε`, zero for the frozen environment.
    pub fn rate(self) -> f64 {
        match self {
            TimeScale::Finite(e) => 1.0 / e,
            TimeScale::Infinite => 0.0,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            TimeScale::Finite(e) => e,
            TimeScale::Infinite => f64::INFINITY,
        }
    }

    pub fn from_value(v: f64) -> Self {
        if v.is_infinite() {
            TimeScale::Infinite
        } else {
            TimeScale::Finite(v)
        }
    }
}

impl Serialize for TimeScale {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ExtendedReal(self.value()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TimeScale {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(TimeScale::from_value(ExtendedReal::deserialize(d)?.0))
    }
}

impl fmt::Display for TimeScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeScale::Finite(e) => write!(f, "{e}"),
            TimeScale::Infinite => f.write_str("infinity"),
        }
    }
}
