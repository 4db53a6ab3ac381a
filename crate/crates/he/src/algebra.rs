//! Scheme-agnostic ciphertext algebra. Distance computation and the
//! comparison protocol run over either carrier through this layer, so the
//! rest of the code never needs to know which cryptosystem is underneath.

use crate::dgk::DgkPublicKey;
use crate::error::HeError;
use crate::hexfmt;
use crate::paillier::PaillierPublicKey;
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, Zero};
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// Which cryptosystem a ciphertext or key belongs to.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Paillier,
    Dgk,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Paillier => write!(f, "paillier"),
            Scheme::Dgk => write!(f, "dgk"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paillier" => Ok(Scheme::Paillier),
            "dgk" => Ok(Scheme::Dgk),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

/// Short binding between a ciphertext and the public key that produced it
/// (first 8 bytes of a SHA-256 over the public parameters).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct KeyFingerprint([u8; 8]);

impl KeyFingerprint {
    pub(crate) fn compute(label: &str, parts: &[&BigUint]) -> Self {
        let mut h = Sha256::new();
        h.update(label.as_bytes());
        for part in parts {
            let bytes = part.to_bytes_be();
            h.update((bytes.len() as u64).to_be_bytes());
            h.update(&bytes);
        }
        let digest = h.finalize();
        let mut out = [0u8; 8];
        out.copy_from_slice(&digest[..8]);
        KeyFingerprint(out)
    }

    pub fn to_hex(self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Self, String> {
        if s.len() != 16 || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
            return Err(format!("bad key fingerprint {s:?}"));
        }
        let mut out = [0u8; 8];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16).unwrap() as u8;
            let lo = (chunk[1] as char).to_digit(16).unwrap() as u8;
            out[i] = (hi << 4) | lo;
        }
        Ok(KeyFingerprint(out))
    }
}

impl fmt::Display for KeyFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

impl Serialize for KeyFingerprint {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for KeyFingerprint {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        KeyFingerprint::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Scheme-tagged ciphertext bound to the producing public key.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Ciphertext {
    pub scheme: Scheme,
    #[serde(rename = "c", with = "hexfmt::serde_hex")]
    pub value: BigUint,
    #[serde(rename = "kf")]
    pub key_fingerprint: KeyFingerprint,
}

/// Plaintext modulus of a carrier (n for Paillier, u for DGK) together with
/// the centered signed encoding on it. Values with `|v| < M/2` round-trip;
/// anything larger is reported as an overflow rather than silently wrapped,
/// which is how plaintext-space exhaustion surfaces to callers.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MessageSpace {
    modulus: BigUint,
}

impl MessageSpace {
    pub fn new(modulus: BigUint) -> Result<Self, HeError> {
        if modulus < BigUint::from(3u32) {
            return Err(HeError::Parameters("message space below 3".into()));
        }
        Ok(MessageSpace { modulus })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn bits(&self) -> u64 {
        self.modulus.bits()
    }

    /// `v mod M` for `|v| < M/2`.
    pub fn encode_signed(&self, v: &BigInt) -> Result<BigUint, HeError> {
        let doubled = v.magnitude() << 1;
        if doubled >= self.modulus {
            return Err(HeError::SignedOverflow);
        }
        if v.is_negative() {
            Ok(&self.modulus - v.magnitude())
        } else {
            Ok(v.magnitude().clone())
        }
    }

    /// Inverse of `encode_signed`: residues at or below M/2 are positive.
    pub fn decode_signed(&self, r: &BigUint) -> Result<BigInt, HeError> {
        if r >= &self.modulus {
            return Err(HeError::PlaintextRange);
        }
        if (r << 1) <= self.modulus {
            Ok(BigInt::from(r.clone()))
        } else {
            Ok(BigInt::from(r.clone()) - BigInt::from(self.modulus.clone()))
        }
    }
}

/// Carrier public key: the operations shared by both cryptosystems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PublicKey {
    Paillier(PaillierPublicKey),
    Dgk(DgkPublicKey),
}

impl PublicKey {
    pub fn scheme(&self) -> Scheme {
        match self {
            PublicKey::Paillier(_) => Scheme::Paillier,
            PublicKey::Dgk(_) => Scheme::Dgk,
        }
    }

    pub fn fingerprint(&self) -> KeyFingerprint {
        match self {
            PublicKey::Paillier(pk) => pk.fingerprint(),
            PublicKey::Dgk(pk) => pk.fingerprint(),
        }
    }

    pub fn message_space(&self) -> MessageSpace {
        let modulus = match self {
            PublicKey::Paillier(pk) => pk.n().clone(),
            PublicKey::Dgk(pk) => pk.u().clone(),
        };
        MessageSpace { modulus }
    }

    fn ciphertext_modulus(&self) -> &BigUint {
        match self {
            PublicKey::Paillier(pk) => pk.n_squared(),
            PublicKey::Dgk(pk) => pk.n(),
        }
    }

    /// Both ciphertexts must come from this key.
    pub fn check_compat(&self, ct: &Ciphertext) -> Result<(), HeError> {
        if ct.scheme != self.scheme() || ct.key_fingerprint != self.fingerprint() {
            return Err(HeError::Incompatible);
        }
        if &ct.value >= self.ciphertext_modulus() {
            return Err(HeError::CiphertextRange);
        }
        Ok(())
    }

    pub fn encrypt<R: Rng + CryptoRng>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        match self {
            PublicKey::Paillier(pk) => pk.encrypt(m, rng),
            PublicKey::Dgk(pk) => pk.encrypt(m, rng),
        }
    }

    pub fn encrypt_signed<R: Rng + CryptoRng>(
        &self,
        v: &BigInt,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        let encoded = self.message_space().encode_signed(v)?;
        self.encrypt(&encoded, rng)
    }

    /// Homomorphic addition: multiply ciphertext values.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_compat(a)?;
        self.check_compat(b)?;
        let modulus = self.ciphertext_modulus();
        Ok(Ciphertext {
            scheme: a.scheme,
            value: &a.value * &b.value % modulus,
            key_fingerprint: a.key_fingerprint,
        })
    }

    /// Homomorphic plaintext-by-scalar multiplication: exponentiate the
    /// ciphertext by `k mod M`. Small negative scalars take the complement
    /// exponent and invert, which keeps negation and subtraction cheap.
    pub fn scalar_mul(&self, c: &Ciphertext, k: &BigInt) -> Result<Ciphertext, HeError> {
        self.check_compat(c)?;
        let space = self.message_space();
        let k_red = k.mod_floor(&BigInt::from(space.modulus.clone()));
        let k_red = k_red.to_biguint().expect("mod_floor is non-negative");
        let modulus = self.ciphertext_modulus();
        let complement = &space.modulus - &k_red;
        let value = if !k_red.is_zero() && complement.bits() + 64 < k_red.bits() {
            let pow = c.value.modpow(&complement, modulus);
            crate::numutil::mod_inverse(&pow, modulus).ok_or(HeError::CiphertextRange)?
        } else {
            c.value.modpow(&k_red, modulus)
        };
        Ok(Ciphertext {
            scheme: c.scheme,
            value,
            key_fingerprint: c.key_fingerprint,
        })
    }

    /// Homomorphic subtraction: `a + (-1) * b`.
    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        let neg_b = self.scalar_mul(b, &BigInt::from(-1))?;
        self.add(a, &neg_b)
    }

    pub fn encrypt_u64<R: Rng + CryptoRng>(
        &self,
        m: u64,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        self.encrypt(&BigUint::from(m), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_encoding_m23_exhaustive() {
        let space = MessageSpace::new(BigUint::from(23u32)).unwrap();
        for v in -11i64..=11 {
            let enc = space.encode_signed(&BigInt::from(v)).unwrap();
            assert!(enc < BigUint::from(23u32));
            assert_eq!(space.decode_signed(&enc).unwrap(), BigInt::from(v));
        }
        assert_eq!(
            space.encode_signed(&BigInt::from(-5)).unwrap(),
            BigUint::from(18u32)
        );
        assert_eq!(
            space.decode_signed(&BigUint::from(18u32)).unwrap(),
            BigInt::from(-5)
        );
        assert_eq!(
            space.encode_signed(&BigInt::from(0)).unwrap(),
            BigUint::zero()
        );
        for v in [12i64, -12, 100] {
            assert_eq!(
                space.encode_signed(&BigInt::from(v)),
                Err(HeError::SignedOverflow)
            );
        }
    }

    #[test]
    fn message_space_floor() {
        assert!(MessageSpace::new(BigUint::from(2u32)).is_err());
        assert!(MessageSpace::new(BigUint::from(3u32)).is_ok());
    }

    #[test]
    fn fingerprint_hex_roundtrip() {
        let fp = KeyFingerprint::compute("test", &[&BigUint::from(12345u32)]);
        let hex = fp.to_hex();
        assert_eq!(hex.len(), 16);
        assert_eq!(KeyFingerprint::from_hex(&hex).unwrap(), fp);
        assert!(KeyFingerprint::from_hex("zz").is_err());
    }

    #[test]
    fn cross_key_and_cross_scheme_combinations_are_rejected() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(40);
        let (pk_a, _) = crate::paillier::keygen(256, &mut rng).unwrap();
        let (pk_b, _) = crate::paillier::keygen(256, &mut rng).unwrap();
        let (dgk_pk, _) =
            crate::dgk::keygen(crate::dgk::DgkParams::new(512, 160, 10), &mut rng).unwrap();
        let m = BigUint::from(7u32);
        let ct_a = pk_a.encrypt(&m, &mut rng).unwrap();
        let ct_b = pk_b.encrypt(&m, &mut rng).unwrap();
        let ct_d = dgk_pk.encrypt(&m, &mut rng).unwrap();
        let key_a = PublicKey::Paillier(pk_a);
        assert_eq!(key_a.add(&ct_a, &ct_b), Err(HeError::Incompatible));
        assert_eq!(key_a.add(&ct_a, &ct_d), Err(HeError::Incompatible));
        assert_eq!(
            key_a.scalar_mul(&ct_d, &BigInt::from(2)),
            Err(HeError::Incompatible)
        );
        let key_d = PublicKey::Dgk(dgk_pk);
        assert_eq!(key_d.sub(&ct_d, &ct_a), Err(HeError::Incompatible));
        assert!(key_a.add(&ct_a, &ct_a).is_ok());
    }
}
