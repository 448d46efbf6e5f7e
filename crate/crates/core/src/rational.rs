//! Exact rationals and their canonical `"p/q"` text form.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Q = BigRational;

pub fn q(num: i64, den: i64) -> Q {
    Q::new(BigInt::from(num), BigInt::from(den))
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

/// Parses `"p/q"` or an integer literal. Zero denominators are rejected.
pub fn parse_q(s: &str) -> Result<Q> {
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| Error::Parse(format!("malformed rational {s:?}")))?;
        let d = BigInt::from_str(d.trim()).map_err(|_| Error::Parse(format!("malformed rational {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(Q::new(n, d))
    } else {
        let n = BigInt::from_str(t).map_err(|_| Error::Parse(format!("malformed rational {s:?}")))?;
        Ok(Q::from_integer(n))
    }
}

/// Canonical form: always `"p/q"` in lowest terms with positive denominator.
pub fn fmt_q(v: &Q) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

pub fn to_f64(v: &Q) -> f64 {
    // Shift both parts so that huge numerators/denominators do not overflow.
    let n = v.numer();
    let d = v.denom();
    let nb = n.bits() as i64;
    let db = d.bits() as i64;
    let shift = (nb.max(db) - 60).max(0);
    let nf = (n >> shift as usize).to_string().parse::<f64>().unwrap_or(0.0);
    let df = (d >> shift as usize).to_string().parse::<f64>().unwrap_or(1.0);
    if df == 0.0 {
        // denominator collapsed by the shift: value is astronomically large
        return if v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    nf / df
}

pub fn is_probability(v: &Q) -> bool {
    !v.is_negative() && *v <= Q::one()
}

/// Serde adapter storing a rational as its canonical string.
pub mod serde_q {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_q(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_q_vec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&fmt_q(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Q>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter().map(|s| parse_q(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// Serde adapter for string-keyed maps of rationals.
pub mod serde_q_map {
    use super::*;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(v: &BTreeMap<String, Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(v.len()))?;
        for (k, x) in v {
            map.serialize_entry(k, &fmt_q(x))?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<String, Q>, D::Error> {
        let raw = BTreeMap::<String, String>::deserialize(d)?;
        raw.into_iter().map(|(k, s)| parse_q(&s).map(|q| (k, q)).map_err(serde::de::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_reduces() {
        assert_eq!(fmt_q(&parse_q("6/-4").unwrap()), "-3/2");
        assert_eq!(fmt_q(&parse_q("7").unwrap()), "7/1");
        assert_eq!(fmt_q(&parse_q(" 0/3 ").unwrap()), "0/1");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("a/2").is_err());
        assert!(parse_q("").is_err());
    }

    #[test]
    fn float_conversion_handles_large_parts() {
        let big = Q::new(BigInt::from(3) << 400usize, BigInt::from(4) << 400usize);
        assert!((to_f64(&big) - 0.75).abs() < 1e-12);
    }
}
