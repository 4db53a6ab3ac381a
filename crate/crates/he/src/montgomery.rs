//! Fixed-modulus Montgomery multiplication (CIOS on 64-bit limbs).
//!
//! `BigUint::modpow` already uses Montgomery reduction internally, but the
//! discrete-log giant-step loop in DGK decryption needs hundreds of
//! thousands of serial multiplications modulo the same prime; going through
//! a full division per step is several times slower than keeping the
//! operands in Montgomery form for the whole scan.

use num_bigint::BigUint;
use num_traits::One;

/// Residue in Montgomery form: little-endian 64-bit limbs, length fixed by
/// the context that produced it.
pub type MontElem = Vec<u64>;

#[derive(Clone, Debug)]
pub struct Montgomery {
    limbs: usize,
    modulus: Vec<u64>,
    modulus_big: BigUint,
    n0: u64,
    r2: Vec<u64>,
}

fn to_limbs(x: &BigUint, len: usize) -> Vec<u64> {
    let mut v = x.to_u64_digits();
    debug_assert!(v.len() <= len);
    v.resize(len, 0);
    v
}

fn from_limbs(limbs: &[u64]) -> BigUint {
    let mut words = Vec::with_capacity(limbs.len() * 2);
    for &l in limbs {
        words.push(l as u32);
        words.push((l >> 32) as u32);
    }
    BigUint::new(words)
}

impl Montgomery {
    /// Context for an odd modulus `m > 1`.
    pub fn new(m: &BigUint) -> Option<Self> {
        if m <= &BigUint::one() || !m.bit(0) {
            return None;
        }
        let limbs = ((m.bits() + 63) / 64) as usize;
        let modulus = to_limbs(m, limbs);
        // -m^{-1} mod 2^64 by Newton iteration (m odd)
        let m0 = modulus[0];
        let mut inv: u64 = 1;
        for _ in 0..6 {
            inv = inv.wrapping_mul(2u64.wrapping_sub(m0.wrapping_mul(inv)));
        }
        let n0 = inv.wrapping_neg();
        let r2_big = (BigUint::one() << (128 * limbs)) % m;
        let r2 = to_limbs(&r2_big, limbs);
        Some(Montgomery {
            limbs,
            modulus,
            modulus_big: m.clone(),
            n0,
            r2,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus_big
    }

    pub fn to_mont(&self, x: &BigUint) -> MontElem {
        let reduced = x % &self.modulus_big;
        self.mul_limbs(&to_limbs(&reduced, self.limbs), &self.r2)
    }

    pub fn from_mont(&self, a: &MontElem) -> BigUint {
        let mut one = vec![0u64; self.limbs];
        one[0] = 1;
        from_limbs(&self.mul_limbs(a, &one))
    }

    /// `R mod m`, the Montgomery form of 1.
    pub fn one(&self) -> MontElem {
        let mut one = vec![0u64; self.limbs];
        one[0] = 1;
        self.mul_limbs(&self.r2, &one)
    }

    pub fn mul(&self, a: &MontElem, b: &MontElem) -> MontElem {
        self.mul_limbs(a, b)
    }

    pub fn limbs(&self) -> usize {
        self.limbs
    }

    /// Allocation-free multiply for hot loops: `out = a * b / R mod m`,
    /// with `scratch` at least `limbs + 2` long and `out` exactly `limbs`.
    pub fn mul_into(&self, a: &[u64], b: &[u64], scratch: &mut [u64], out: &mut [u64]) {
        let s = self.limbs;
        let m = &self.modulus[..s];
        let a = &a[..s];
        let b = &b[..s];
        let t = &mut scratch[..s + 2];
        t.fill(0);
        for i in 0..s {
            let ai = a[i] as u128;
            let mut carry: u64 = 0;
            for j in 0..s {
                let sum = t[j] as u128 + ai * (b[j] as u128) + carry as u128;
                t[j] = sum as u64;
                carry = (sum >> 64) as u64;
            }
            let sum = t[s] as u128 + carry as u128;
            t[s] = sum as u64;
            t[s + 1] = (sum >> 64) as u64;

            let mi = t[0].wrapping_mul(self.n0) as u128;
            let sum = t[0] as u128 + mi * (m[0] as u128);
            let mut carry = (sum >> 64) as u64;
            for j in 1..s {
                let sum = t[j] as u128 + mi * (m[j] as u128) + carry as u128;
                t[j - 1] = sum as u64;
                carry = (sum >> 64) as u64;
            }
            let sum = t[s] as u128 + carry as u128;
            t[s - 1] = sum as u64;
            t[s] = t[s + 1] + ((sum >> 64) as u64);
            t[s + 1] = 0;
        }
        let overflow = t[s] != 0;
        out.copy_from_slice(&t[..s]);
        if overflow || !less_than(out, m) {
            sub_in_place(out, m, overflow);
        }
    }

    fn mul_limbs(&self, a: &[u64], b: &[u64]) -> MontElem {
        let mut scratch = vec![0u64; self.limbs + 2];
        let mut out = vec![0u64; self.limbs];
        self.mul_into(a, b, &mut scratch, &mut out);
        out
    }
}

fn less_than(a: &[u64], b: &[u64]) -> bool {
    for i in (0..a.len()).rev() {
        if a[i] != b[i] {
            return a[i] < b[i];
        }
    }
    false
}

fn sub_in_place(a: &mut [u64], b: &[u64], extra_high_bit: bool) {
    let mut borrow: u64 = 0;
    for i in 0..a.len() {
        let (d1, b1) = a[i].overflowing_sub(b[i]);
        let (d2, b2) = d1.overflowing_sub(borrow);
        a[i] = d2;
        borrow = (b1 as u64) + (b2 as u64);
    }
    debug_assert!(borrow == extra_high_bit as u64 || borrow == 0);
}
