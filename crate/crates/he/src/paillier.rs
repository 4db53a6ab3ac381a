//! Paillier cryptosystem with the standard `g = n + 1` variant, so that
//! encryption is `(1 + m*n) * r^n mod n^2` and needs a single modular
//! exponentiation. Decryption runs through the CRT over p^2 and q^2;
//! the textbook `L(c^lambda mod n^2) * mu mod n` form is kept as an
//! internal cross-check.

use crate::algebra::{Ciphertext, KeyFingerprint, Scheme};
use crate::error::HeError;
use crate::hexfmt;
use crate::numutil;
use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};

/// Smallest accepted modulus size. Toy keys below this are rejected;
/// deterministic fixtures should seed the RNG instead.
pub const MIN_KEY_BITS: u64 = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PublicRecord", into = "PublicRecord")]
pub struct PaillierPublicKey {
    n: BigUint,
    n_squared: BigUint,
    fingerprint: KeyFingerprint,
}

#[derive(Serialize, Deserialize)]
struct PublicRecord {
    #[serde(with = "hexfmt::serde_hex")]
    n: BigUint,
}

impl From<PaillierPublicKey> for PublicRecord {
    fn from(pk: PaillierPublicKey) -> Self {
        PublicRecord { n: pk.n }
    }
}

impl TryFrom<PublicRecord> for PaillierPublicKey {
    type Error = String;
    fn try_from(rec: PublicRecord) -> Result<Self, String> {
        if !rec.n.bit(0) || rec.n < BigUint::from(15u32) {
            return Err("paillier modulus must be odd and non-trivial".into());
        }
        Ok(PaillierPublicKey::from_modulus(rec.n))
    }
}

impl PaillierPublicKey {
    fn from_modulus(n: BigUint) -> Self {
        let n_squared = &n * &n;
        let fingerprint = KeyFingerprint::compute("paillier", &[&n]);
        PaillierPublicKey {
            n,
            n_squared,
            fingerprint,
        }
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn n_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn key_bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn fingerprint(&self) -> KeyFingerprint {
        self.fingerprint
    }

    /// Encrypt `m in [0, n)` with fresh randomness.
    pub fn encrypt<R: Rng + CryptoRng>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        let r = loop {
            let candidate = numutil::random_range(&BigUint::one(), &self.n, rng);
            if candidate.gcd(&self.n).is_one() {
                break candidate;
            }
        };
        self.encrypt_with_randomness(m, &r)
    }

    /// Deterministic encryption with caller-chosen randomness. Used by the
    /// tests to pin ciphertext fixtures; production paths go through
    /// [`encrypt`](Self::encrypt).
    pub fn encrypt_with_randomness(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext, HeError> {
        if m >= &self.n {
            return Err(HeError::PlaintextRange);
        }
        if r < &BigUint::one() || r >= &self.n || !r.gcd(&self.n).is_one() {
            return Err(HeError::Parameters("bad encryption randomness".into()));
        }
        // (n+1)^m = 1 + m*n mod n^2
        let g_m = (BigUint::one() + m * &self.n) % &self.n_squared;
        let r_n = r.modpow(&self.n, &self.n_squared);
        Ok(Ciphertext {
            scheme: Scheme::Paillier,
            value: g_m * r_n % &self.n_squared,
            key_fingerprint: self.fingerprint,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PrivateRecord", into = "PrivateRecord")]
pub struct PaillierPrivateKey {
    p: BigUint,
    q: BigUint,
    lambda: BigUint,
    mu: BigUint,
    public: PaillierPublicKey,
    // CRT decryption material, derived from p and q on construction.
    p_squared: BigUint,
    q_squared: BigUint,
    hp: BigUint,
    hq: BigUint,
    q_inv_p: BigUint,
}

#[derive(Serialize, Deserialize)]
struct PrivateRecord {
    #[serde(with = "hexfmt::serde_hex")]
    p: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    q: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    lambda: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    mu: BigUint,
}

impl From<PaillierPrivateKey> for PrivateRecord {
    fn from(sk: PaillierPrivateKey) -> Self {
        PrivateRecord {
            p: sk.p,
            q: sk.q,
            lambda: sk.lambda,
            mu: sk.mu,
        }
    }
}

impl TryFrom<PrivateRecord> for PaillierPrivateKey {
    type Error = String;
    fn try_from(rec: PrivateRecord) -> Result<Self, String> {
        let (_, sk) = keypair_from_primes(&rec.p, &rec.q).map_err(|e| e.to_string())?;
        if sk.lambda != rec.lambda || sk.mu != rec.mu {
            return Err("inconsistent paillier private key record".into());
        }
        Ok(sk)
    }
}

impl PaillierPrivateKey {
    pub fn public(&self) -> &PaillierPublicKey {
        &self.public
    }

    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// Decrypt to a residue in `[0, n)`.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<BigUint, HeError> {
        if ct.scheme != Scheme::Paillier || ct.key_fingerprint != self.public.fingerprint {
            return Err(HeError::WrongKey);
        }
        if ct.value >= self.public.n_squared {
            return Err(HeError::CiphertextRange);
        }
        Ok(self.decrypt_crt(&ct.value))
    }

    /// CRT decryption: per prime, `c^(p-1) mod p^2 = 1 + m*(p-1)*n mod p^2`,
    /// so `L_p` recovers `m*(p-1)*q mod p` and `hp` strips the factor.
    fn decrypt_crt(&self, c: &BigUint) -> BigUint {
        let one = BigUint::one();
        let cp = c.modpow(&(&self.p - &one), &self.p_squared);
        let lp = (cp - &one) / &self.p;
        let mp = lp * &self.hp % &self.p;
        let cq = c.modpow(&(&self.q - &one), &self.q_squared);
        let lq = (cq - &one) / &self.q;
        let mq = lq * &self.hq % &self.q;
        // Garner: m = mq + q * ((mp - mq) * q^-1 mod p)
        let diff = ((&mp + &self.p) - (&mq % &self.p)) % &self.p;
        mq + &self.q * (diff * &self.q_inv_p % &self.p)
    }

    /// Textbook decryption `L(c^lambda mod n^2) * mu mod n`; cross-checked
    /// against the CRT path in the unit tests.
    #[cfg(test)]
    fn decrypt_via_lambda(&self, c: &BigUint) -> BigUint {
        let u = c.modpow(&self.lambda, &self.public.n_squared);
        let l = (u - BigUint::one()) / &self.public.n;
        l * &self.mu % &self.public.n
    }
}

/// Generate a fresh keypair with an exactly `key_bits`-bit modulus.
pub fn keygen<R: Rng + CryptoRng>(
    key_bits: u64,
    rng: &mut R,
) -> Result<(PaillierPublicKey, PaillierPrivateKey), HeError> {
    if key_bits < MIN_KEY_BITS || key_bits % 2 != 0 {
        return Err(HeError::Parameters(format!(
            "paillier key_bits must be even and at least {MIN_KEY_BITS}, got {key_bits}"
        )));
    }
    let half = key_bits / 2;
    let p = numutil::gen_prime(half, rng);
    let q = loop {
        let q = numutil::gen_prime(half, rng);
        if q != p {
            break q;
        }
    };
    let pair = keypair_from_primes(&p, &q)?;
    debug_assert_eq!(pair.0.key_bits(), key_bits);
    Ok(pair)
}

/// Build a keypair from caller-supplied primes. The caller is responsible
/// for primality; this is the deterministic-fixture hook used by tests.
pub fn keypair_from_primes(
    p: &BigUint,
    q: &BigUint,
) -> Result<(PaillierPublicKey, PaillierPrivateKey), HeError> {
    let one = BigUint::one();
    if p == q || p <= &one || q <= &one || !p.bit(0) || !q.bit(0) {
        return Err(HeError::KeyGeneration("need two distinct odd primes".into()));
    }
    let n = p * q;
    let p_minus = p - &one;
    let q_minus = q - &one;
    let lambda = p_minus.lcm(&q_minus);
    let mu = numutil::mod_inverse(&lambda, &n)
        .ok_or_else(|| HeError::KeyGeneration("lambda not invertible mod n".into()))?;
    let public = PaillierPublicKey::from_modulus(n.clone());
    let hp = numutil::mod_inverse(&(&p_minus * (q % p) % p), p)
        .ok_or_else(|| HeError::KeyGeneration("degenerate CRT constant".into()))?;
    let hq = numutil::mod_inverse(&(&q_minus * (p % q) % q), q)
        .ok_or_else(|| HeError::KeyGeneration("degenerate CRT constant".into()))?;
    let q_inv_p = numutil::mod_inverse(&(q % p), p)
        .ok_or_else(|| HeError::KeyGeneration("p and q not coprime".into()))?;
    let sk = PaillierPrivateKey {
        p: p.clone(),
        q: q.clone(),
        lambda,
        mu,
        public: public.clone(),
        p_squared: p * p,
        q_squared: q * q,
        hp,
        hq,
        q_inv_p,
    };
    Ok((public, sk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::RandBigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> (PaillierPublicKey, PaillierPrivateKey) {
        keypair_from_primes(&BigUint::from(11u32), &BigUint::from(13u32)).unwrap()
    }

    #[test]
    fn toy_key_material() {
        let (pk, sk) = toy();
        assert_eq!(pk.n(), &BigUint::from(143u32));
        assert_eq!(sk.lambda(), &BigUint::from(60u32));
        assert_eq!(
            sk.lambda() * sk.mu() % pk.n(),
            BigUint::one(),
            "lambda * mu must be 1 mod n"
        );
    }

    #[test]
    fn toy_ciphertext_matches_textbook_formula() {
        let (pk, sk) = toy();
        let m = BigUint::from(4u32);
        let r = BigUint::from(2u32);
        let ct = pk.encrypt_with_randomness(&m, &r).unwrap();
        // independent oracle: (1 + 4*143) * 2^143 mod 143^2
        let nn = BigUint::from(143u32 * 143);
        let expected =
            (BigUint::one() + &m * &BigUint::from(143u32)) * r.modpow(&BigUint::from(143u32), &nn)
                % &nn;
        assert_eq!(ct.value, expected);
        assert_eq!(sk.decrypt(&ct).unwrap(), m);
    }

    #[test]
    fn roundtrip_512() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (pk, sk) = keygen(512, &mut rng).unwrap();
        assert_eq!(pk.key_bits(), 512);
        let m = BigUint::from(123_456_789u64);
        let ct = pk.encrypt(&m, &mut rng).unwrap();
        assert_eq!(sk.decrypt(&ct).unwrap(), m);
    }

    #[test]
    fn plaintext_boundaries() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let (pk, sk) = keygen(256, &mut rng).unwrap();
        let zero = BigUint::from(0u32);
        let top = pk.n() - BigUint::one();
        assert_eq!(sk.decrypt(&pk.encrypt(&zero, &mut rng).unwrap()).unwrap(), zero);
        assert_eq!(sk.decrypt(&pk.encrypt(&top, &mut rng).unwrap()).unwrap(), top);
        assert_eq!(pk.encrypt(pk.n(), &mut rng), Err(HeError::PlaintextRange));
    }

    #[test]
    fn fresh_randomness_gives_distinct_ciphertexts() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let (pk, _) = keygen(256, &mut rng).unwrap();
        let m = BigUint::from(57u32);
        let a = pk.encrypt(&m, &mut rng).unwrap();
        let b = pk.encrypt(&m, &mut rng).unwrap();
        assert_ne!(a.value, b.value);
    }

    #[test]
    fn homomorphic_sum_of_ciphertexts() {
        let mut rng = ChaCha20Rng::seed_from_u64(14);
        let (pk, sk) = keygen(256, &mut rng).unwrap();
        let a = BigUint::from(1234u32);
        let b = BigUint::from(8765u32);
        let ca = pk.encrypt(&a, &mut rng).unwrap();
        let cb = pk.encrypt(&b, &mut rng).unwrap();
        let sum = Ciphertext {
            scheme: Scheme::Paillier,
            value: &ca.value * &cb.value % pk.n_squared(),
            key_fingerprint: ca.key_fingerprint,
        };
        assert_eq!(sk.decrypt(&sum).unwrap(), (&a + &b) % pk.n());
    }

    #[test]
    fn crt_equals_lambda_formula() {
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let (pk, sk) = keygen(256, &mut rng).unwrap();
        for _ in 0..25 {
            let m = rng.gen_biguint_below(pk.n());
            let ct = pk.encrypt(&m, &mut rng).unwrap();
            assert_eq!(sk.decrypt_crt(&ct.value), sk.decrypt_via_lambda(&ct.value));
            assert_eq!(sk.decrypt(&ct).unwrap(), m);
        }
    }

    #[test]
    fn rejects_wrong_key_and_ranges() {
        let mut rng = ChaCha20Rng::seed_from_u64(16);
        let (pk1, _sk1) = keygen(256, &mut rng).unwrap();
        let (_pk2, sk2) = keygen(256, &mut rng).unwrap();
        let ct = pk1.encrypt(&BigUint::from(5u32), &mut rng).unwrap();
        assert_eq!(sk2.decrypt(&ct), Err(HeError::WrongKey));
        let oversized = Ciphertext {
            scheme: Scheme::Paillier,
            value: pk1.n_squared().clone(),
            key_fingerprint: pk1.fingerprint(),
        };
        let (_, sk1) = (pk1.clone(), _sk1);
        assert_eq!(sk1.decrypt(&oversized), Err(HeError::CiphertextRange));
    }

    #[test]
    fn keygen_rejects_bad_sizes() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        assert!(matches!(keygen(128, &mut rng), Err(HeError::Parameters(_))));
        assert!(matches!(keygen(255, &mut rng), Err(HeError::Parameters(_))));
        assert!(matches!(keygen(258, &mut rng), Ok(_)));
    }

    #[test]
    fn key_serde_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(18);
        let (pk, sk) = keygen(256, &mut rng).unwrap();
        let pk_json = serde_json::to_string(&pk).unwrap();
        let pk2: PaillierPublicKey = serde_json::from_str(&pk_json).unwrap();
        assert_eq!(pk, pk2);
        let sk_json = serde_json::to_string(&sk).unwrap();
        let sk2: PaillierPrivateKey = serde_json::from_str(&sk_json).unwrap();
        let ct = pk.encrypt(&BigUint::from(99u32), &mut rng).unwrap();
        assert_eq!(sk2.decrypt(&ct).unwrap(), BigUint::from(99u32));
    }
}
