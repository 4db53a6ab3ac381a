//! Additively homomorphic building blocks for privacy-preserving
//! localization: the Paillier and DGK cryptosystems, a scheme-agnostic
//! ciphertext algebra, and an interactive two-party comparison protocol
//! with k-minimum selection over encrypted values.

pub mod algebra;
pub mod compare;
pub mod dgk;
pub mod error;
pub mod hexfmt;
pub mod montgomery;
pub mod numutil;
pub mod paillier;

pub use algebra::{Ciphertext, KeyFingerprint, MessageSpace, PublicKey, Scheme};
pub use error::HeError;

use dgk::{DgkPrivateKey, DgkPublicKey};
use num_bigint::{BigInt, BigUint};
use paillier::{PaillierPrivateKey, PaillierPublicKey};
use serde::{Deserialize, Serialize};

/// Both private keys held by the party that decrypts (the comparison
/// keyholder / localization client). The DGK key always serves the bitwise
/// comparison stage; whichever scheme is selected as carrier also encrypts
/// the values themselves.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrivateKeySet {
    pub paillier: PaillierPrivateKey,
    pub dgk: DgkPrivateKey,
}

impl PrivateKeySet {
    pub fn public(&self) -> PublicKeySet {
        PublicKeySet {
            paillier: self.paillier.public().clone(),
            dgk: self.dgk.public().clone(),
        }
    }

    /// Decrypt by the ciphertext's own scheme tag.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<BigUint, HeError> {
        match ct.scheme {
            Scheme::Paillier => self.paillier.decrypt(ct),
            Scheme::Dgk => self.dgk.decrypt(ct),
        }
    }

    pub fn decrypt_signed(&self, ct: &Ciphertext) -> Result<BigInt, HeError> {
        let residue = self.decrypt(ct)?;
        let space = self.public().carrier(ct.scheme).message_space();
        space.decode_signed(&residue)
    }
}

/// Public halves of a [`PrivateKeySet`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKeySet {
    pub paillier: PaillierPublicKey,
    pub dgk: DgkPublicKey,
}

impl PublicKeySet {
    /// View of the selected carrier key.
    pub fn carrier(&self, scheme: Scheme) -> PublicKey {
        match scheme {
            Scheme::Paillier => PublicKey::Paillier(self.paillier.clone()),
            Scheme::Dgk => PublicKey::Dgk(self.dgk.clone()),
        }
    }

    /// Key for the bitwise stage of the comparison protocol.
    pub fn bit_key(&self) -> &DgkPublicKey {
        &self.dgk
    }
}
