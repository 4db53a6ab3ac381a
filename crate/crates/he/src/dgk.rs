//! DGK cryptosystem: additively homomorphic with a deliberately small
//! plaintext space Z_u, a fast zero test, and full decryption by
//! baby-step/giant-step discrete log in the order-u subgroup mod p.
//!
//! Construction: primes `p`, `q` with `u * v_p | p - 1` and `u * v_q | q - 1`
//! (u dividing both sides keeps the zero check a single exponentiation mod
//! n), `g` of order `u * v_p * v_q`, `h` of order `v_p * v_q`. A ciphertext
//! is `g^m * h^r mod n` with `r` of 2.5t bits.

use crate::algebra::{Ciphertext, KeyFingerprint, Scheme};
use crate::error::HeError;
use crate::hexfmt;
use crate::montgomery::{MontElem, Montgomery};
use crate::numutil;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const MIN_KEY_BITS: u64 = 512;
pub const DEFAULT_T_BITS: u64 = 160;
/// Above this the baby-step table stops being a sensible use of memory.
pub const MAX_U_BITS: u64 = 48;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DgkParams {
    pub key_bits: u64,
    pub t_bits: u64,
    pub u_bits: u64,
}

impl DgkParams {
    pub fn new(key_bits: u64, t_bits: u64, u_bits: u64) -> Self {
        DgkParams {
            key_bits,
            t_bits,
            u_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PublicRecord", into = "PublicRecord")]
pub struct DgkPublicKey {
    n: BigUint,
    g: BigUint,
    h: BigUint,
    u: BigUint,
    fingerprint: KeyFingerprint,
    /// randomness length for encryption, 2.5 * t rounded up
    r_bits: u64,
}

#[derive(Serialize, Deserialize)]
struct PublicRecord {
    #[serde(with = "hexfmt::serde_hex")]
    n: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    g: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    h: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    u: BigUint,
    t_bits: u64,
}

impl From<DgkPublicKey> for PublicRecord {
    fn from(pk: DgkPublicKey) -> Self {
        PublicRecord {
            n: pk.n,
            g: pk.g,
            h: pk.h,
            u: pk.u,
            t_bits: pk.r_bits * 2 / 5,
        }
    }
}

impl TryFrom<PublicRecord> for DgkPublicKey {
    type Error = String;
    fn try_from(rec: PublicRecord) -> Result<Self, String> {
        DgkPublicKey::assemble(rec.n, rec.g, rec.h, rec.u, rec.t_bits).map_err(|e| e.to_string())
    }
}

impl DgkPublicKey {
    fn assemble(
        n: BigUint,
        g: BigUint,
        h: BigUint,
        u: BigUint,
        t_bits: u64,
    ) -> Result<Self, HeError> {
        let two = BigUint::from(2u32);
        if u <= two || !u.bit(0) {
            return Err(HeError::Parameters("u must be an odd prime above 2".into()));
        }
        if u.bits() > MAX_U_BITS {
            return Err(HeError::Parameters(format!(
                "u wider than {MAX_U_BITS} bits is unsupported"
            )));
        }
        if g < two || g >= n || h < two || h >= n {
            return Err(HeError::Parameters("generators out of range".into()));
        }
        let fingerprint = KeyFingerprint::compute("dgk", &[&n, &g, &h, &u]);
        Ok(DgkPublicKey {
            n,
            g,
            h,
            u,
            fingerprint,
            r_bits: (5 * t_bits + 1) / 2,
        })
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn h(&self) -> &BigUint {
        &self.h
    }

    /// Plaintext-space prime.
    pub fn u(&self) -> &BigUint {
        &self.u
    }

    pub fn key_bits(&self) -> u64 {
        self.n.bits()
    }

    pub fn fingerprint(&self) -> KeyFingerprint {
        self.fingerprint
    }

    pub fn encrypt<R: Rng + CryptoRng>(
        &self,
        m: &BigUint,
        rng: &mut R,
    ) -> Result<Ciphertext, HeError> {
        let r = numutil::random_exact_bits(self.r_bits, rng);
        self.encrypt_with_randomness(m, &r)
    }

    /// Deterministic-randomness hook for fixtures; production encryption is
    /// [`encrypt`](Self::encrypt).
    pub fn encrypt_with_randomness(&self, m: &BigUint, r: &BigUint) -> Result<Ciphertext, HeError> {
        if m >= &self.u {
            return Err(HeError::PlaintextRange);
        }
        let g_m = self.g.modpow(m, &self.n);
        let h_r = self.h.modpow(r, &self.n);
        Ok(Ciphertext {
            scheme: Scheme::Dgk,
            value: g_m * h_r % &self.n,
            key_fingerprint: self.fingerprint,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PrivateRecord", into = "PrivateRecord")]
pub struct DgkPrivateKey {
    public: DgkPublicKey,
    p: BigUint,
    q: BigUint,
    v_p: BigUint,
    v_q: BigUint,
    // derived; never serialized, rebuilt on load
    v_pq: BigUint,
    dlog: BsgsTable,
}

#[derive(Serialize, Deserialize)]
struct PrivateRecord {
    public: DgkPublicKey,
    #[serde(with = "hexfmt::serde_hex")]
    p: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    q: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    v_p: BigUint,
    #[serde(with = "hexfmt::serde_hex")]
    v_q: BigUint,
}

impl From<DgkPrivateKey> for PrivateRecord {
    fn from(sk: DgkPrivateKey) -> Self {
        PrivateRecord {
            public: sk.public,
            p: sk.p,
            q: sk.q,
            v_p: sk.v_p,
            v_q: sk.v_q,
        }
    }
}

impl TryFrom<PrivateRecord> for DgkPrivateKey {
    type Error = String;
    fn try_from(rec: PrivateRecord) -> Result<Self, String> {
        if &rec.p * &rec.q != *rec.public.n() {
            return Err("p * q does not match the public modulus".into());
        }
        DgkPrivateKey::assemble(rec.public, rec.p, rec.q, rec.v_p, rec.v_q)
            .map_err(|e| e.to_string())
    }
}

impl DgkPrivateKey {
    fn assemble(
        public: DgkPublicKey,
        p: BigUint,
        q: BigUint,
        v_p: BigUint,
        v_q: BigUint,
    ) -> Result<Self, HeError> {
        let dlog = BsgsTable::build(&p, public.g(), &v_p, public.u())?;
        Ok(DgkPrivateKey {
            v_pq: &v_p * &v_q,
            public,
            p,
            q,
            v_p,
            v_q,
            dlog,
        })
    }

    pub fn public(&self) -> &DgkPublicKey {
        &self.public
    }

    fn check(&self, ct: &Ciphertext) -> Result<(), HeError> {
        if ct.scheme != Scheme::Dgk || ct.key_fingerprint != self.public.fingerprint {
            return Err(HeError::WrongKey);
        }
        if ct.value >= *self.public.n() {
            return Err(HeError::CiphertextRange);
        }
        Ok(())
    }

    /// Full decryption: discrete log of `c^v_p mod p` base `g^v_p mod p`.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<BigUint, HeError> {
        self.check(ct)?;
        let y = ct.value.modpow(&self.v_p, &self.p);
        self.dlog
            .find(&y)
            .map(BigUint::from)
            .ok_or(HeError::Decryption)
    }

    /// True iff the plaintext is 0 mod u: `c^(v_p * v_q) mod n == 1`.
    /// One exponentiation, no discrete log, so it stays well below the
    /// cost of a full decryption.
    pub fn is_zero(&self, ct: &Ciphertext) -> Result<bool, HeError> {
        self.check(ct)?;
        Ok(ct.value.modpow(&self.v_pq, self.public.n()).is_one())
    }
}

/// The table keys are low limbs of Montgomery residues, already uniform;
/// hashing them again would only slow the giant-step scan down.
#[derive(Clone, Copy, Default)]
struct LimbHasher(u64);

impl std::hash::Hasher for LimbHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, _: &[u8]) {
        unreachable!("only u64 keys go into the dlog table")
    }
    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

type LimbMap = HashMap<u64, u32, std::hash::BuildHasherDefault<LimbHasher>>;

/// Baby-step table of `ceil(sqrt(u))` entries over the order-u subgroup of
/// Z_p^*, keyed by the low 64 bits of the Montgomery form. Collisions spill
/// into a side list and every hit is verified, so lookups are exact.
#[derive(Clone, Debug)]
struct BsgsTable {
    mont: Montgomery,
    base: BigUint,
    p: BigUint,
    u: u64,
    steps: u64,
    giant: MontElem,
    table: LimbMap,
    spill: Vec<(u64, u32)>,
}

impl BsgsTable {
    fn build(p: &BigUint, g: &BigUint, v_p: &BigUint, u: &BigUint) -> Result<Self, HeError> {
        let u64_u = u
            .to_u64()
            .ok_or_else(|| HeError::Parameters("u too large for the dlog table".into()))?;
        let mut steps = (u64_u as f64).sqrt().ceil() as u64;
        while steps * steps < u64_u {
            steps += 1;
        }
        let base = g.modpow(v_p, p);
        let mont =
            Montgomery::new(p).ok_or_else(|| HeError::Parameters("p must be odd".into()))?;
        let base_m = mont.to_mont(&base);
        let mut table =
            LimbMap::with_capacity_and_hasher(steps as usize, Default::default());
        let mut spill = Vec::new();
        let mut gamma = mont.one();
        let mut scratch = vec![0u64; mont.limbs() + 2];
        let mut next = vec![0u64; mont.limbs()];
        for j in 0..steps {
            let key = gamma[0];
            if table.contains_key(&key) {
                spill.push((key, j as u32));
            } else {
                table.insert(key, j as u32);
            }
            mont.mul_into(&gamma, &base_m, &mut scratch, &mut next);
            std::mem::swap(&mut gamma, &mut next);
        }
        // gv has order u and steps < u, so gv^-steps = gv^(u - steps)
        let giant_plain = base.modpow(&BigUint::from(u64_u - steps), p);
        let giant = mont.to_mont(&giant_plain);
        Ok(BsgsTable {
            mont,
            base,
            p: p.clone(),
            u: u64_u,
            steps,
            giant,
            table,
            spill,
        })
    }

    fn verify(&self, e: u64, y: &BigUint) -> bool {
        self.base.modpow(&BigUint::from(e), &self.p) == *y
    }

    fn find(&self, y: &BigUint) -> Option<u64> {
        if y >= &self.p {
            return None;
        }
        let mut gamma = self.mont.to_mont(y);
        let mut scratch = vec![0u64; self.mont.limbs() + 2];
        let mut next = vec![0u64; self.mont.limbs()];
        let max_giant = (self.u - 1) / self.steps;
        for i in 0..=max_giant {
            let key = gamma[0];
            if let Some(&j) = self.table.get(&key) {
                let e = i * self.steps + j as u64;
                if e < self.u && self.verify(e, y) {
                    return Some(e);
                }
            }
            if !self.spill.is_empty() {
                for &(k, j) in &self.spill {
                    if k == key {
                        let e = i * self.steps + j as u64;
                        if e < self.u && self.verify(e, y) {
                            return Some(e);
                        }
                    }
                }
            }
            self.mont.mul_into(&gamma, &self.giant, &mut scratch, &mut next);
            std::mem::swap(&mut gamma, &mut next);
        }
        None
    }
}

/// Generate a DGK keypair. `u_bits` is sized by the caller for the role the
/// key plays (see the comparison-protocol parameter rules).
pub fn keygen<R: Rng + CryptoRng>(
    params: DgkParams,
    rng: &mut R,
) -> Result<(DgkPublicKey, DgkPrivateKey), HeError> {
    if params.u_bits < 2 || params.u_bits > MAX_U_BITS {
        return Err(HeError::Parameters(format!(
            "u_bits must lie in [2, {MAX_U_BITS}]"
        )));
    }
    let u = numutil::gen_prime(params.u_bits, rng);
    keygen_with_u(params.key_bits, params.t_bits, u, rng)
}

/// Keygen with a caller-chosen plaintext prime `u`; exposed so the tests can
/// pin exact toy plaintext spaces.
pub fn keygen_with_u<R: Rng + CryptoRng>(
    key_bits: u64,
    t_bits: u64,
    u: BigUint,
    rng: &mut R,
) -> Result<(DgkPublicKey, DgkPrivateKey), HeError> {
    if key_bits < MIN_KEY_BITS || key_bits % 2 != 0 {
        return Err(HeError::Parameters(format!(
            "dgk key_bits must be even and at least {MIN_KEY_BITS}"
        )));
    }
    if t_bits < 16 {
        return Err(HeError::Parameters("t_bits must be at least 16".into()));
    }
    if u < BigUint::from(3u32)
        || u.bits() > MAX_U_BITS
        || !numutil::is_probable_prime(&u, numutil::MILLER_RABIN_ROUNDS, rng)
    {
        return Err(HeError::Parameters("u must be a small odd prime".into()));
    }
    let half = key_bits / 2;
    if u.bits() + t_bits + 3 > half {
        return Err(HeError::KeyGeneration(format!(
            "cannot fit u ({} bits) and v ({} bits) below a {half}-bit prime",
            u.bits(),
            t_bits
        )));
    }
    let v_p = numutil::gen_prime(t_bits, rng);
    let v_q = loop {
        let v = numutil::gen_prime(t_bits, rng);
        if v != v_p {
            break v;
        }
    };
    let (p, _) = numutil::gen_prime_with_stride(half, &(&u * &v_p), rng)
        .ok_or_else(|| HeError::KeyGeneration("no room for the prime stride".into()))?;
    let q = loop {
        let (q, _) = numutil::gen_prime_with_stride(half, &(&u * &v_q), rng)
            .ok_or_else(|| HeError::KeyGeneration("no room for the prime stride".into()))?;
        if q != p && (&p * &q).bits() == key_bits {
            break q;
        }
    };
    let g_p = subgroup_generator(&p, &(&u * &v_p), &[&u, &v_p], rng);
    let g_q = subgroup_generator(&q, &(&u * &v_q), &[&u, &v_q], rng);
    let g = numutil::crt_pair(&g_p, &g_q, &p, &q);
    let h_p = subgroup_generator(&p, &v_p, &[&v_p], rng);
    let h_q = subgroup_generator(&q, &v_q, &[&v_q], rng);
    let h = numutil::crt_pair(&h_p, &h_q, &p, &q);
    let n = &p * &q;
    let public = DgkPublicKey::assemble(n, g, h, u, t_bits)?;
    let private = DgkPrivateKey::assemble(public.clone(), p, q, v_p, v_q)?;
    Ok((public, private))
}

/// Random element of order exactly `order` in Z_p^*, where `order | p - 1`
/// and `prime_factors` lists the distinct primes of `order`.
fn subgroup_generator<R: Rng + CryptoRng>(
    p: &BigUint,
    order: &BigUint,
    prime_factors: &[&BigUint],
    rng: &mut R,
) -> BigUint {
    let one = BigUint::one();
    let exp = (p - &one) / order;
    loop {
        let x = numutil::random_range(&BigUint::from(2u32), p, rng);
        let candidate = x.modpow(&exp, p);
        if candidate.is_one() {
            continue;
        }
        let full_order = prime_factors
            .iter()
            .all(|f| !candidate.modpow(&(order / *f), p).is_one());
        if full_order {
            return candidate;
        }
    }
}
