//! Integer text encoding shared by key files, curve files, the wire protocol
//! and the CLI: lowercase big-endian hexadecimal, no leading zeros, `"0"` for
//! zero.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

pub fn to_hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

/// Strict parse: rejects uppercase digits, prefixes, signs, empty strings and
/// leading zeros.
pub fn from_hex(s: &str) -> Result<BigUint> {
    if s.is_empty() {
        return Err(Error::Parse("empty hex string".into()));
    }
    if !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(Error::Parse(format!("not lowercase hex: {s:?}")));
    }
    if s.len() > 1 && s.starts_with('0') {
        return Err(Error::Parse(format!("leading zero in {s:?}")));
    }
    let v = BigUint::parse_bytes(s.as_bytes(), 16)
        .ok_or_else(|| Error::Parse(format!("bad hex {s:?}")))?;
    debug_assert!(s != "0" || v.is_zero());
    Ok(v)
}

/// `#[serde(with = "hex")]` adapter for `BigUint`.
pub mod hex {
    use num_bigint::BigUint;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_hex(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        super::from_hex(&s).map_err(D::Error::custom)
    }
}

/// `#[serde(with = "hex_vec")]` adapter for `Vec<BigUint>`.
pub mod hex_vec {
    use num_bigint::BigUint;
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&super::to_hex(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| super::from_hex(s).map_err(D::Error::custom))
            .collect()
    }
}
