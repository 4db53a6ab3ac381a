//! Privacy-preserving Wi-Fi fingerprint localization.
//!
//! A server holds a fingerprint lookup table; a client holds a fresh RSS
//! scan and the decryption keys. The server computes encrypted squared
//! Euclidean distances to every fingerprint and either returns them all
//! (client-side baseline) or selects the k nearest through an interactive
//! encrypted-comparison protocol and returns only the winning coordinates.

pub mod fingerprint;
pub mod localization;
pub mod net;

pub use fingerprint::{build_lookup_table, generate_synthetic, ingest_csv, LookupTable, V_C};
pub use localization::{LocalizationScan, default_input_bits};
