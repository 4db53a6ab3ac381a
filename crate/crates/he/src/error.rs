use thiserror::Error;

/// Errors surfaced by key generation, encryption and ciphertext algebra.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum HeError {
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
    #[error("invalid parameters: {0}")]
    Parameters(String),
    #[error("plaintext outside the message space")]
    PlaintextRange,
    #[error("ciphertext outside the ciphertext space")]
    CiphertextRange,
    #[error("ciphertext was produced under a different key")]
    WrongKey,
    #[error("ciphertexts cannot be combined across schemes or keys")]
    Incompatible,
    #[error("signed value exceeds half the plaintext space")]
    SignedOverflow,
    #[error("decryption failed: no discrete log in the plaintext space")]
    Decryption,
}
