//! Interactive two-party comparison over encrypted values, plus the k-min
//! selection built on it.
//!
//! The evaluator holds two carrier ciphertexts under the keyholder's keys
//! and learns the single bit `t = (x >= y)`; the keyholder sees only
//! additively masked values and a direction-blinded zero pattern. Six
//! messages flow per comparison:
//!
//! 1. evaluator -> keyholder  [[z + r]] with z = 2^l + x - y
//! 2. keyholder -> evaluator  DGK bits of a' = 2*(d mod 2^l) + 1, [[d >> l]]
//! 3. evaluator -> keyholder  blinded, shuffled per-bit checks
//! 4. keyholder -> evaluator  [[1 if any check was zero]]
//! 5. evaluator -> keyholder  [[t + gamma]]
//! 6. keyholder -> evaluator  t + gamma in the plain
//!
//! Comparing `2*(d mod 2^l) + 1` (odd) against `2*(r mod 2^l)` (even) means
//! the bitwise stage never sees a tie, which removes the equality corner
//! case at the cost of one extra bit.

use crate::algebra::{Ciphertext, PublicKey, Scheme};
use crate::error::HeError;
use crate::hexfmt;
use crate::numutil;
use crate::{PrivateKeySet, PublicKeySet};
use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign};
use thiserror::Error;

/// Statistical masking width for the Paillier carrier.
pub const SIGMA_PAILLIER: u32 = 80;
/// Statistical masking width for the DGK carrier, whose decryption cost is
/// bounded by the discrete-log scan and cannot afford 80 extra bits.
pub const SIGMA_DGK: u32 = 16;
/// Upper bound on the comparison input width.
pub const MAX_INPUT_BITS: u32 = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("comparison setup rejected: {0}")]
    Setup(String),
    #[error("protocol message out of order")]
    OutOfOrder,
    #[error("malformed protocol message: {0}")]
    Malformed(String),
    #[error("comparison channel failed: {0}")]
    Channel(String),
    #[error("comparison result is not a bit; an input exceeded 2^l")]
    NotABit,
    #[error(transparent)]
    He(#[from] HeError),
}

/// Protocol parameters fixed per comparison session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonParams {
    /// l: both plaintext inputs must lie in [0, 2^l).
    pub input_bits: u32,
    /// Statistical masking width sigma.
    pub sigma: u32,
    /// Scheme carrying the compared values.
    pub carrier: Scheme,
}

impl ComparisonParams {
    /// Parameters with the carrier's default masking width.
    pub fn for_carrier(carrier: Scheme, input_bits: u32) -> Self {
        let sigma = match carrier {
            Scheme::Paillier => SIGMA_PAILLIER,
            Scheme::Dgk => SIGMA_DGK,
        };
        ComparisonParams {
            input_bits,
            sigma,
            carrier,
        }
    }

    /// Width of the DGK plaintext prime needed when DGK carries the values:
    /// the masked sum must fit, so u gets l + 1 + sigma + 2 bits.
    pub fn dgk_carrier_u_bits(input_bits: u32, sigma: u32) -> u64 {
        (input_bits + 1 + sigma + 2) as u64
    }

    /// Lower bound on the bitwise-stage plaintext prime.
    pub fn min_bit_space(input_bits: u32) -> u64 {
        3 * (input_bits as u64 + 1) + 6
    }

    pub fn validate(&self, keys: &PublicKeySet) -> Result<(), CompareError> {
        if self.input_bits == 0 || self.input_bits > MAX_INPUT_BITS {
            return Err(CompareError::Setup(format!(
                "input_bits must lie in [1, {MAX_INPUT_BITS}]"
            )));
        }
        if self.sigma < 16 {
            return Err(CompareError::Setup("sigma must be at least 16".into()));
        }
        let l = self.input_bits as u64;
        let needed: BigUint =
            (BigUint::one() << (l + 1)) + (BigUint::one() << (l + 1 + self.sigma as u64));
        let carrier_space = keys.carrier(self.carrier).message_space();
        if carrier_space.modulus() <= &needed {
            return Err(CompareError::Setup(format!(
                "carrier plaintext space ({} bits) cannot absorb l = {} with sigma = {}",
                carrier_space.bits(),
                self.input_bits,
                self.sigma
            )));
        }
        let min_u = BigUint::from(Self::min_bit_space(self.input_bits));
        if keys.bit_key().u() <= &min_u {
            return Err(CompareError::Setup(format!(
                "bitwise plaintext space must exceed {min_u}"
            )));
        }
        Ok(())
    }
}

/// Counts of the primitive operations a party performed; the benchmark
/// reports these as the energy proxy.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub encryptions: u64,
    pub decryptions: u64,
    pub zero_checks: u64,
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: Self) {
        self.encryptions += rhs.encryptions;
        self.decryptions += rhs.decryptions;
        self.zero_checks += rhs.zero_checks;
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(mut self, rhs: Self) -> OpCount {
        self += rhs;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpMsg1 {
    /// [[z + r]] under the carrier.
    pub masked_sum: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpMsg2 {
    /// DGK encryptions of the bits of a' = 2*(d mod 2^l) + 1, most
    /// significant first (l + 1 entries).
    pub bits: Vec<Ciphertext>,
    /// Carrier encryption of d >> l.
    pub high: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpMsg3 {
    /// Multiplicatively blinded per-bit checks in shuffled order.
    pub slots: Vec<Ciphertext>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpMsg4 {
    /// Carrier encryption of the zero-presence flag.
    pub flag: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpMsg5 {
    /// [[t + gamma]] under the carrier.
    pub masked_bit: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpMsg6 {
    /// t + gamma in the plain.
    #[serde(with = "hexfmt::serde_hex")]
    pub revealed: BigUint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum EvalStage {
    Started,
    BitsSent,
    ResultMasked,
}

/// Evaluator half of one comparison. Stage transitions are strictly
/// forward; every mask is fresh per session.
pub struct EvaluatorSession<'a> {
    keys: &'a PublicKeySet,
    params: ComparisonParams,
    carrier: PublicKey,
    bit_key: PublicKey,
    mask: BigUint,
    /// s = -1 when set: flips which operand the zero pattern tracks.
    flip: bool,
    result_mask: BigUint,
    stage: EvalStage,
    ops: OpCount,
}

impl<'a> EvaluatorSession<'a> {
    /// Open a session comparing the plaintexts of `cx` and `cy`, both of
    /// which the caller promises lie in [0, 2^l).
    pub fn start<R: Rng + CryptoRng>(
        cx: &Ciphertext,
        cy: &Ciphertext,
        keys: &'a PublicKeySet,
        params: ComparisonParams,
        rng: &mut R,
    ) -> Result<(Self, CmpMsg1), CompareError> {
        params.validate(keys)?;
        let l = params.input_bits as u64;
        let mask_bound: BigUint = BigUint::one() << (l + 1 + params.sigma as u64);
        let mask = numutil::random_below(&mask_bound, rng);
        let flip = rng.gen::<bool>();
        let result_mask = match params.carrier {
            Scheme::Paillier => {
                numutil::random_below(keys.carrier(params.carrier).message_space().modulus(), rng)
            }
            // DGK decryption cost scales with the value, so the result mask
            // stays sigma-wide instead of spanning the whole space.
            Scheme::Dgk => {
                let bound: BigUint = BigUint::one() << (params.sigma as u64 + 2);
                numutil::random_below(&bound, rng)
            }
        };
        Self::start_with_masks(cx, cy, keys, params, mask, flip, result_mask, rng)
    }

    /// Fixture constructor with caller-chosen masks; skips the parameter
    /// width validation so hand-sized traces can run on toy keys.
    #[allow(clippy::too_many_arguments)]
    pub fn start_with_masks<R: Rng + CryptoRng>(
        cx: &Ciphertext,
        cy: &Ciphertext,
        keys: &'a PublicKeySet,
        params: ComparisonParams,
        mask: BigUint,
        flip: bool,
        result_mask: BigUint,
        rng: &mut R,
    ) -> Result<(Self, CmpMsg1), CompareError> {
        let carrier = keys.carrier(params.carrier);
        carrier.check_compat(cx)?;
        carrier.check_compat(cy)?;
        let l = params.input_bits as u64;
        let mut ops = OpCount::default();
        let diff = carrier.sub(cx, cy)?;
        let offset = carrier.encrypt(&(BigUint::one() << l), rng)?;
        let masked = carrier.encrypt(&(&mask % carrier.message_space().modulus()), rng)?;
        ops.encryptions += 2;
        let sum = carrier.add(&carrier.add(&diff, &offset)?, &masked)?;
        let session = EvaluatorSession {
            keys,
            params,
            bit_key: PublicKey::Dgk(keys.dgk.clone()),
            carrier,
            mask,
            flip,
            result_mask,
            stage: EvalStage::Started,
            ops,
        };
        Ok((session, CmpMsg1 { masked_sum: sum }))
    }

    /// Per-bit checks: with a' the keyholder's decomposition and
    /// b' = 2*(r mod 2^l), slot i encrypts
    /// `(b'_i + s) - a'_i + 3 * sum_{j>i} (a'_j xor b'_j)` blinded by a
    /// fresh unit of Z_u and returned in shuffled order. Exactly one slot
    /// is zero iff the larger of a', b' is the one s points at.
    pub fn bit_stage<R: Rng + CryptoRng>(
        &mut self,
        m2: &CmpMsg2,
        rng: &mut R,
    ) -> Result<CmpMsg3, CompareError> {
        let u = self.keys.dgk.u().clone();
        let count = self.params.input_bits as usize + 1;
        let one = BigUint::one();
        let blinds: Vec<BigUint> = (0..count)
            .map(|_| numutil::random_range(&one, &u, rng))
            .collect();
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(rng);
        self.bit_stage_with_blinds(m2, &blinds, &order, rng)
    }

    /// Deterministic-blinding variant for trace fixtures.
    pub fn bit_stage_with_blinds<R: Rng + CryptoRng>(
        &mut self,
        m2: &CmpMsg2,
        blinds: &[BigUint],
        order: &[usize],
        rng: &mut R,
    ) -> Result<CmpMsg3, CompareError> {
        if self.stage != EvalStage::Started {
            return Err(CompareError::OutOfOrder);
        }
        let l = self.params.input_bits as u64;
        let count = l as usize + 1;
        if m2.bits.len() != count {
            return Err(CompareError::Malformed(format!(
                "expected {count} bit ciphertexts, got {}",
                m2.bits.len()
            )));
        }
        if blinds.len() != count || order.len() != count {
            return Err(CompareError::Malformed("blind or order length".into()));
        }
        for bit in &m2.bits {
            self.bit_key.check_compat(bit)?;
        }
        self.carrier.check_compat(&m2.high)?;

        let space = self.bit_key.message_space();
        let evened: BigUint = (&self.mask % (BigUint::one() << l)) << 1u32;
        let sign = if self.flip { -1i64 } else { 1i64 };
        let one_ct = self.bit_key.encrypt(&BigUint::one(), rng)?;
        self.ops.encryptions += 1;
        // multiplicative identity doubles as an encryption of zero
        let mut xor_sum = Ciphertext {
            scheme: Scheme::Dgk,
            value: BigUint::one(),
            key_fingerprint: self.bit_key.fingerprint(),
        };
        let mut slots = Vec::with_capacity(count);
        for (idx, enc_bit) in m2.bits.iter().enumerate() {
            let position = l - idx as u64;
            let b_bit = evened.bit(position) as i64;
            let s_term = space.encode_signed(&BigInt::from(b_bit + sign))?;
            let fresh = self.bit_key.encrypt(&s_term, rng)?;
            self.ops.encryptions += 1;
            let minus_a = self.bit_key.scalar_mul(enc_bit, &BigInt::from(-1))?;
            let tail = self.bit_key.scalar_mul(&xor_sum, &BigInt::from(3))?;
            let check = self
                .bit_key
                .add(&self.bit_key.add(&fresh, &minus_a)?, &tail)?;
            slots.push(
                self.bit_key
                    .scalar_mul(&check, &BigInt::from(blinds[idx].clone()))?,
            );
            // fold this position's xor into the running tail sum
            let xor_bit = if b_bit == 1 {
                self.bit_key.add(&one_ct, &minus_a)?
            } else {
                enc_bit.clone()
            };
            xor_sum = self.bit_key.add(&xor_sum, &xor_bit)?;
        }
        let shuffled: Vec<Ciphertext> = order.iter().map(|&i| slots[i].clone()).collect();
        self.stage = EvalStage::BitsSent;
        Ok(CmpMsg3 { slots: shuffled })
    }

    /// Combine the zero flag with the high part: `t = high - (r >> l) - beta`
    /// where beta undoes the direction blind, then mask with gamma.
    pub fn mask_result<R: Rng + CryptoRng>(
        &mut self,
        m4: &CmpMsg4,
        high: &Ciphertext,
        rng: &mut R,
    ) -> Result<CmpMsg5, CompareError> {
        if self.stage != EvalStage::BitsSent {
            return Err(CompareError::OutOfOrder);
        }
        self.carrier.check_compat(&m4.flag)?;
        self.carrier.check_compat(high)?;
        let borrow = if self.flip {
            m4.flag.clone()
        } else {
            let one_ct = self.carrier.encrypt(&BigUint::one(), rng)?;
            self.ops.encryptions += 1;
            self.carrier.sub(&one_ct, &m4.flag)?
        };
        let mask_high = &self.mask >> self.params.input_bits as u64;
        let mask_high_ct = self.carrier.encrypt(&mask_high, rng)?;
        let gamma_ct = self.carrier.encrypt(
            &(&self.result_mask % self.carrier.message_space().modulus()),
            rng,
        )?;
        self.ops.encryptions += 2;
        let bit = self.carrier.sub(
            &self.carrier.sub(high, &mask_high_ct)?,
            &borrow,
        )?;
        let masked = self.carrier.add(&bit, &gamma_ct)?;
        self.stage = EvalStage::ResultMasked;
        Ok(CmpMsg5 { masked_bit: masked })
    }

    /// Strip gamma and require the result to be a bit.
    pub fn finish(self, m6: &CmpMsg6) -> Result<CompareOutcome, CompareError> {
        if self.stage != EvalStage::ResultMasked {
            return Err(CompareError::OutOfOrder);
        }
        let modulus = self.carrier.message_space().modulus().clone();
        if m6.revealed >= modulus {
            return Err(CompareError::Malformed(
                "revealed value outside the message space".into(),
            ));
        }
        let gamma = &self.result_mask % &modulus;
        let t = (&m6.revealed + &modulus - gamma) % &modulus;
        let is_ge = if t.is_zero() {
            false
        } else if t.is_one() {
            true
        } else {
            return Err(CompareError::NotABit);
        };
        Ok(CompareOutcome {
            is_ge,
            evaluator_ops: self.ops,
        })
    }

    pub fn ops(&self) -> OpCount {
        self.ops
    }
}

/// What the evaluator learns from one comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompareOutcome {
    /// t = (x >= y).
    pub is_ge: bool,
    pub evaluator_ops: OpCount,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum KeyStage {
    Fresh,
    Decomposed,
    Flagged,
    Closed,
}

/// Keyholder half of one comparison. Holds only the private keys and a
/// stage marker; the decrypted intermediates never outlive the call that
/// produced them.
pub struct KeyholderSession<'a> {
    keys: &'a PrivateKeySet,
    public: PublicKeySet,
    carrier: Scheme,
    input_bits: u32,
    stage: KeyStage,
    ops: OpCount,
}

impl<'a> KeyholderSession<'a> {
    pub fn new(keys: &'a PrivateKeySet, carrier: Scheme, input_bits: u32) -> Self {
        KeyholderSession {
            public: keys.public(),
            keys,
            carrier,
            input_bits,
            stage: KeyStage::Fresh,
            ops: OpCount::default(),
        }
    }

    /// Decrypt the masked sum and return the bitwise decomposition of its
    /// low part (as a' = 2*low + 1) plus the encrypted high part.
    pub fn decompose<R: Rng + CryptoRng>(
        &mut self,
        m1: &CmpMsg1,
        rng: &mut R,
    ) -> Result<CmpMsg2, CompareError> {
        if self.stage != KeyStage::Fresh {
            return Err(CompareError::OutOfOrder);
        }
        if m1.masked_sum.scheme != self.carrier {
            return Err(CompareError::Malformed("carrier scheme mismatch".into()));
        }
        let l = self.input_bits as u64;
        let masked = self.keys.decrypt(&m1.masked_sum)?;
        self.ops.decryptions += 1;
        let low = &masked % (BigUint::one() << l);
        let high = &masked >> l;
        let odd: BigUint = (&low << 1u32) + BigUint::one();
        let bit_pk = PublicKey::Dgk(self.public.dgk.clone());
        let mut bits = Vec::with_capacity(l as usize + 1);
        for idx in 0..=l {
            let position = l - idx;
            let bit = BigUint::from(odd.bit(position) as u8);
            bits.push(bit_pk.encrypt(&bit, rng)?);
        }
        let carrier_pk = self.public.carrier(self.carrier);
        let high_ct = carrier_pk.encrypt(&high, rng)?;
        self.ops.encryptions += l + 2;
        self.stage = KeyStage::Decomposed;
        Ok(CmpMsg2 { bits, high: high_ct })
    }

    /// Zero-check every blinded slot; reply with the encrypted flag.
    pub fn zero_stage<R: Rng + CryptoRng>(
        &mut self,
        m3: &CmpMsg3,
        rng: &mut R,
    ) -> Result<CmpMsg4, CompareError> {
        if self.stage != KeyStage::Decomposed {
            return Err(CompareError::OutOfOrder);
        }
        if m3.slots.is_empty() {
            return Err(CompareError::Malformed("no slots to check".into()));
        }
        let mut any_zero = false;
        for slot in &m3.slots {
            self.ops.zero_checks += 1;
            if self.keys.dgk.is_zero(slot)? {
                any_zero = true;
                break;
            }
        }
        let carrier_pk = self.public.carrier(self.carrier);
        let flag = carrier_pk.encrypt(&BigUint::from(any_zero as u8), rng)?;
        self.ops.encryptions += 1;
        self.stage = KeyStage::Flagged;
        Ok(CmpMsg4 { flag })
    }

    /// Reveal the gamma-masked bit.
    pub fn unmask(&mut self, m5: &CmpMsg5) -> Result<CmpMsg6, CompareError> {
        if self.stage != KeyStage::Flagged {
            return Err(CompareError::OutOfOrder);
        }
        let revealed = self.keys.decrypt(&m5.masked_bit)?;
        self.ops.decryptions += 1;
        self.stage = KeyStage::Closed;
        Ok(CmpMsg6 { revealed })
    }

    pub fn ops(&self) -> OpCount {
        self.ops
    }
}

/// Transport between evaluator and keyholder: one call per round trip.
pub trait KeyholderLink {
    fn decompose(&mut self, m1: CmpMsg1) -> Result<CmpMsg2, CompareError>;
    fn zero_stage(&mut self, m3: CmpMsg3) -> Result<CmpMsg4, CompareError>;
    fn unmask(&mut self, m5: CmpMsg5) -> Result<CmpMsg6, CompareError>;
}

/// In-process keyholder: drives a fresh [`KeyholderSession`] per comparison
/// against the given private keys.
pub struct LocalKeyholder<'a, R> {
    keys: &'a PrivateKeySet,
    carrier: Scheme,
    input_bits: u32,
    rng: R,
    session: Option<KeyholderSession<'a>>,
    pub ops: OpCount,
}

impl<'a, R: Rng + CryptoRng> LocalKeyholder<'a, R> {
    pub fn new(keys: &'a PrivateKeySet, carrier: Scheme, input_bits: u32, rng: R) -> Self {
        LocalKeyholder {
            keys,
            carrier,
            input_bits,
            rng,
            session: None,
            ops: OpCount::default(),
        }
    }
}

impl<'a, R: Rng + CryptoRng> KeyholderLink for LocalKeyholder<'a, R> {
    fn decompose(&mut self, m1: CmpMsg1) -> Result<CmpMsg2, CompareError> {
        let mut session = KeyholderSession::new(self.keys, self.carrier, self.input_bits);
        let reply = session.decompose(&m1, &mut self.rng)?;
        self.session = Some(session);
        Ok(reply)
    }

    fn zero_stage(&mut self, m3: CmpMsg3) -> Result<CmpMsg4, CompareError> {
        let session = self.session.as_mut().ok_or(CompareError::OutOfOrder)?;
        session.zero_stage(&m3, &mut self.rng)
    }

    fn unmask(&mut self, m5: CmpMsg5) -> Result<CmpMsg6, CompareError> {
        let session = self.session.as_mut().ok_or(CompareError::OutOfOrder)?;
        let reply = session.unmask(&m5)?;
        self.ops += session.ops();
        self.session = None;
        Ok(reply)
    }
}

/// Drive one full comparison: the evaluator learns `(x >= y)`.
pub fn joint_compare<L: KeyholderLink, R: Rng + CryptoRng>(
    cx: &Ciphertext,
    cy: &Ciphertext,
    keys: &PublicKeySet,
    params: ComparisonParams,
    link: &mut L,
    rng: &mut R,
) -> Result<CompareOutcome, CompareError> {
    let (mut session, m1) = EvaluatorSession::start(cx, cy, keys, params, rng)?;
    let m2 = link.decompose(m1)?;
    let m3 = session.bit_stage(&m2, rng)?;
    let m4 = link.zero_stage(m3)?;
    let m5 = session.mask_result(&m4, &m2.high, rng)?;
    let m6 = link.unmask(m5)?;
    session.finish(&m6)
}

/// A ciphertext distance with whatever payload rides along with it.
#[derive(Clone, Debug)]
pub struct SortEntry<P> {
    pub dist: Ciphertext,
    pub payload: P,
}

/// Statistics from one k-min selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KMinStats {
    pub comparisons: u64,
    pub evaluator_ops: OpCount,
}

/// Bubble the k smallest encrypted values to the tail of `entries`: after
/// completion `entries[n - p]` holds the p-th smallest for p = 1..=k.
///
/// Pass i sweeps j = 0..n-i-1 and swaps when the left value is less than or
/// equal to the right one (one comparison per step, so exactly
/// sum_{i=0}^{k-1} (n - i - 1) comparisons in total). Swapping on ties keeps
/// the entry with the earliest original position ahead of later duplicates,
/// which is what gives the lowest-index tie-break downstream.
pub fn k_min_select<P, L: KeyholderLink, R: Rng + CryptoRng>(
    entries: &mut [SortEntry<P>],
    k: usize,
    keys: &PublicKeySet,
    params: ComparisonParams,
    link: &mut L,
    rng: &mut R,
) -> Result<KMinStats, CompareError> {
    let n = entries.len();
    if n == 0 {
        return Err(CompareError::Setup("nothing to select from".into()));
    }
    if k == 0 || k > n {
        return Err(CompareError::Setup(format!(
            "k must lie in [1, {n}], got {k}"
        )));
    }
    let mut stats = KMinStats::default();
    for pass in 0..k {
        for j in 0..n - pass - 1 {
            let outcome = joint_compare(
                &entries[j + 1].dist,
                &entries[j].dist,
                keys,
                params,
                link,
                rng,
            )?;
            stats.comparisons += 1;
            stats.evaluator_ops += outcome.evaluator_ops;
            if outcome.is_ge {
                entries.swap(j, j + 1);
            }
        }
    }
    Ok(stats)
}

/// Number of comparisons k-min selection performs on `n` entries.
pub fn expected_comparisons(n: usize, k: usize) -> u64 {
    (0..k).map(|i| (n - i - 1) as u64).sum()
}
