//! Canonical hex encoding for big integers on the wire: lowercase, no sign,
//! no leading zeros ("0" encodes zero). Anything else is rejected so that a
//! given integer has exactly one wire form.

use num_bigint::BigUint;
use num_traits::Num;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HexError {
    #[error("empty hex value")]
    Empty,
    #[error("non-canonical hex value: {0}")]
    NotCanonical(String),
}

pub fn to_hex(x: &BigUint) -> String {
    x.to_str_radix(16)
}

pub fn parse_hex(s: &str) -> Result<BigUint, HexError> {
    if s.is_empty() {
        return Err(HexError::Empty);
    }
    if !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
        return Err(HexError::NotCanonical(format!(
            "invalid character in {s:?}"
        )));
    }
    if s.len() > 1 && s.starts_with('0') {
        return Err(HexError::NotCanonical(format!("leading zeros in {s:?}")));
    }
    BigUint::from_str_radix(s, 16).map_err(|e| HexError::NotCanonical(e.to_string()))
}

/// serde adapter: `#[serde(with = "hexfmt::serde_hex")]` on a `BigUint`.
pub mod serde_hex {
    use super::*;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&to_hex(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(de)?;
        parse_hex(&s).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        for v in [0u64, 1, 255, 256, u64::MAX] {
            let x = BigUint::from(v);
            assert_eq!(parse_hex(&to_hex(&x)).unwrap(), x);
        }
    }

    #[test]
    fn rejects_non_canonical() {
        assert_eq!(parse_hex(""), Err(HexError::Empty));
        assert!(matches!(parse_hex("00ff"), Err(HexError::NotCanonical(_))));
        assert!(matches!(parse_hex("0F"), Err(HexError::NotCanonical(_))));
        assert!(matches!(parse_hex("xyz"), Err(HexError::NotCanonical(_))));
        assert!(matches!(parse_hex("-1"), Err(HexError::NotCanonical(_))));
        assert_eq!(parse_hex("0").unwrap(), BigUint::from(0u32));
    }
}
