//! Big-integer helpers shared by both cryptosystems: probable-prime
//! generation, modular inverses and uniform sampling.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{CryptoRng, Rng};
use std::sync::OnceLock;

/// Miller-Rabin rounds used for every generated prime. 64 rounds push the
/// per-candidate error probability below 2^-128.
pub const MILLER_RABIN_ROUNDS: usize = 64;

const SIEVE_LIMIT: u64 = 10_000;

fn small_primes() -> &'static [u64] {
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = SIEVE_LIMIT as usize;
        let mut composite = vec![false; limit];
        let mut primes = Vec::new();
        for i in 2..limit {
            if !composite[i] {
                primes.push(i as u64);
                let mut j = i * i;
                while j < limit {
                    composite[j] = true;
                    j += i;
                }
            }
        }
        primes
    })
}

/// Uniform sample in `[0, bound)`.
pub fn random_below<R: Rng + CryptoRng>(bound: &BigUint, rng: &mut R) -> BigUint {
    rng.gen_biguint_below(bound)
}

/// Uniform sample in `[low, high)`.
pub fn random_range<R: Rng + CryptoRng>(low: &BigUint, high: &BigUint, rng: &mut R) -> BigUint {
    rng.gen_biguint_range(low, high)
}

/// Uniform sample of exactly `bits` bits (top bit set).
pub fn random_exact_bits<R: Rng + CryptoRng>(bits: u64, rng: &mut R) -> BigUint {
    let mut x = rng.gen_biguint(bits);
    x.set_bit(bits - 1, true);
    x
}

/// Multiplicative inverse of `a` modulo `m`, if `gcd(a, m) == 1`.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from(a.clone());
    let m_int = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return None;
    }
    let mut inv = ext.x % &m_int;
    if inv.sign() == num_bigint::Sign::Minus {
        inv += &m_int;
    }
    inv.to_biguint()
}

/// Miller-Rabin probable-prime test with `rounds` random bases.
pub fn is_probable_prime<R: Rng + CryptoRng>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in small_primes() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
        if &(&p * &p) > n {
            return true;
        }
    }
    // n - 1 = d * 2^s with d odd
    let n_minus_1 = n - BigUint::one();
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let n_minus_2 = n - &two;
    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_2);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn passes_sieve(n: &BigUint) -> bool {
    for &p in small_primes() {
        let p_big = BigUint::from(p);
        if &p_big * &p_big > *n {
            return true;
        }
        if (n % &p_big).is_zero() {
            return n == &p_big;
        }
    }
    true
}

/// Random probable prime of exactly `bits` bits. The top two bits are set so
/// that the product of two such primes has exactly `2 * bits` bits.
pub fn gen_prime<R: Rng + CryptoRng>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 2, "prime size too small");
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if !passes_sieve(&candidate) {
            continue;
        }
        // cheap base-2 screen before the full round count
        if !is_probable_prime(&candidate, 1, rng) {
            continue;
        }
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}

/// Random probable prime `p` of exactly `bits` bits with `stride | p - 1`,
/// drawn from `[sqrt(2) * 2^(bits-1), 2^bits)` so that the product of two
/// such primes always has exactly `2 * bits` bits. Returns the prime and
/// the cofactor `f` such that `p = 2 * stride * f + 1`.
pub fn gen_prime_with_stride<R: Rng + CryptoRng>(
    bits: u64,
    stride: &BigUint,
    rng: &mut R,
) -> Option<(BigUint, BigUint)> {
    let step: BigUint = stride << 1u32;
    if step.bits() + 2 > bits {
        return None;
    }
    let one = BigUint::one();
    let low: BigUint = (BigUint::one() << (2 * bits - 1)).sqrt() + &one;
    let high: BigUint = (BigUint::one() << bits) - &one;
    // candidate = step * f + 1 must land in [low, high]
    let f_lo: BigUint = (&low - &one + &step - &one) / &step;
    let f_hi: BigUint = (&high - &one) / &step;
    if f_lo >= f_hi {
        return None;
    }
    loop {
        let f = random_range(&f_lo, &(&f_hi + &one), rng);
        let candidate = &step * &f + &one;
        debug_assert_eq!(candidate.bits(), bits);
        if !passes_sieve(&candidate) {
            continue;
        }
        if !is_probable_prime(&candidate, 1, rng) {
            continue;
        }
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return Some((candidate, f));
        }
    }
}

/// CRT combination: the unique `x mod p*q` with `x = a mod p`, `x = b mod q`.
pub fn crt_pair(a: &BigUint, b: &BigUint, p: &BigUint, q: &BigUint) -> BigUint {
    let q_inv = mod_inverse(&(q % p), p).expect("p, q coprime");
    let n = p * q;
    let diff = ((a + p) - (b % p)) % p;
    (b + q * ((diff * q_inv) % p)) % n
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn inverse_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let m = BigUint::from(143u32);
        for _ in 0..50 {
            let a = random_range(&BigUint::one(), &m, &mut rng);
            if let Some(inv) = mod_inverse(&a, &m) {
                assert!((a * inv % &m).is_one());
            }
        }
        assert_eq!(
            mod_inverse(&BigUint::from(60u32), &m),
            Some(BigUint::from(31u32))
        );
        assert_eq!(mod_inverse(&BigUint::from(11u32), &m), None);
    }

    #[test]
    fn miller_rabin_known_values() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for p in [2u64, 3, 23, 10_007, 104_729, 2_147_483_647] {
            assert!(is_probable_prime(&BigUint::from(p), 16, &mut rng), "{p}");
        }
        for c in [1u64, 4, 21, 10_001, 104_731, 2_147_483_649] {
            assert!(!is_probable_prime(&BigUint::from(c), 16, &mut rng), "{c}");
        }
        // Carmichael number 561 must be rejected
        assert!(!is_probable_prime(&BigUint::from(561u32), 16, &mut rng));
    }

    #[test]
    fn generated_primes_have_exact_bits() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for bits in [64u64, 128, 256] {
            let p = gen_prime(bits, &mut rng);
            assert_eq!(p.bits(), bits);
            let q = gen_prime(bits, &mut rng);
            assert_eq!((p * q).bits(), 2 * bits);
        }
    }

    #[test]
    fn stride_prime_divides() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let stride = BigUint::from(23u32 * 1009);
        let (p, _f) = gen_prime_with_stride(96, &stride, &mut rng).unwrap();
        assert_eq!(p.bits(), 96);
        assert!(((&p - BigUint::one()) % &stride).is_zero());
    }

    #[test]
    fn crt_combines() {
        let p = BigUint::from(11u32);
        let q = BigUint::from(13u32);
        let x = crt_pair(&BigUint::from(4u32), &BigUint::from(7u32), &p, &q);
        assert_eq!(&x % &p, BigUint::from(4u32));
        assert_eq!(&x % &q, BigUint::from(7u32));
    }
}
