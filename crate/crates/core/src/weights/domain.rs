use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serde helper for extended reals: finite numbers as JSON numbers,
/// infinities as the strings `"inf"` / `"-inf"`.
pub mod ext_real {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    struct ExtVisitor;

    impl Visitor<'_> for ExtVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"+inf\", \"-inf\"")
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
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtVisitor)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(serde::Deserialize)]
            struct Ext(#[serde(with = "super")] f64);
            let v: Option<Ext> = serde::Deserialize::deserialize(d)?;
            Ok(v.map(|e| e.0))
        }
    }
}

/// Open interval `(left, right)` with possibly infinite endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain1D {
    #[serde(with = "ext_real")]
    pub left: f64,
    #[serde(with = "ext_real")]
    pub right: f64,
    #[serde(default)]
    pub name: String,
}

impl Domain1D {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        Self::named(left, right, "")
    }

    pub fn named(left: f64, right: f64, name: impl Into<String>) -> Result<Self> {
        let d = Domain1D {
            left,
            right,
            name: name.into(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn half_line(a: f64) -> Self {
        Domain1D {
            left: a,
            right: f64::INFINITY,
            name: String::new(),
        }
    }

    pub fn real_line() -> Self {
        Domain1D {
            left: f64::NEG_INFINITY,
            right: f64::INFINITY,
            name: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.left.is_nan() || self.right.is_nan() {
            return Err(Error::Parameter("domain endpoint is NaN".into()));
        }
        if self.left == f64::INFINITY || self.right == f64::NEG_INFINITY {
            return Err(Error::Parameter(
                "domain endpoint infinite on the wrong side".into(),
            ));
        }
        if !(self.left < self.right) {
            return Err(Error::Parameter(format!(
                "domain requires left < right, got ({}, {})",
                self.left, self.right
            )));
        }
        Ok(())
    }

    pub fn is_bounded(&self) -> bool {
        self.left.is_finite() && self.right.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.left && x < self.right
    }

    pub fn check(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                x,
                left: self.left,
                right: self.right,
            })
        }
    }

    /// True when `self` is contained in `other` (closed containment of endpoints).
    pub fn is_subset_of(&self, other: &Domain1D) -> bool {
        self.left >= other.left && self.right <= other.right
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_endpoints_roundtrip() {
        let d = Domain1D::real_line();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: Domain1D = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_bad_order() {
        assert!(Domain1D::new(1.0, 0.0).is_err());
        assert!(Domain1D::new(f64::INFINITY, 1.0).is_err());
        assert!(Domain1D::new(0.0, 0.0).is_err());
    }

    #[test]
    fn numbers_parse() {
        let d: Domain1D = serde_json::from_str(r#"{"left": 0, "right": "inf"}"#).unwrap();
        assert_eq!(d.left, 0.0);
        assert!(d.right.is_infinite());
        assert!(
            serde_json::from_str::<Domain1D>(r#"{"left": 0, "right": 1, "extra": 2}"#).is_err()
        );
    }
}
