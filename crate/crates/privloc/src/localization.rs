//! Encrypted squared-Euclidean distance over the lookup table and the two
//! end-to-end modes: the client-side baseline (server returns every row,
//! client decrypts and minimizes) and the server-side mode (encrypted k-min
//! selection, only winning coordinates travel back).
//!
//! The distance identity per AP column j is
//! `(fp_j - scan_j)^2 = fp_j^2 + (-2 * scan_j) * fp_j + scan_j^2`;
//! the client ships `[[-2 * scan_j]]` per column plus `[[sum scan_j^2]]`,
//! the server folds its own plaintext `fp` terms in homomorphically.

use crate::fingerprint::{LookupTable, MacAddr, RSS_MAX, RSS_MIN};
use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use privloc_he::compare::{
    k_min_select, ComparisonParams, KeyholderLink, OpCount, SortEntry,
};
use privloc_he::{Ciphertext, HeError, PrivateKeySet, PublicKey, Scheme};
use rand::{CryptoRng, Rng};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("scan is invalid: {0}")]
    BadScan(String),
    #[error("scan is not aligned to the lookup table")]
    Misaligned,
    #[error("plaintext space exhausted: {0}")]
    PlaintextSpace(HeError),
    #[error("k must lie in [1, {n_f}], got {k}")]
    BadK { k: usize, n_f: usize },
    #[error("encrypted comparison failed: {0}")]
    Compare(#[from] privloc_he::compare::CompareError),
    #[error("no distance row could be decrypted")]
    NothingDecrypted,
    #[error(transparent)]
    He(HeError),
}

impl From<HeError> for LocalizationError {
    fn from(e: HeError) -> Self {
        match e {
            HeError::SignedOverflow => LocalizationError::PlaintextSpace(e),
            other => LocalizationError::He(other),
        }
    }
}

/// A client's localization scan: unique MACs with their observed RSS.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationScan {
    pairs: Vec<(MacAddr, i32)>,
}

impl LocalizationScan {
    pub fn new(pairs: Vec<(MacAddr, i32)>) -> Result<Self, LocalizationError> {
        let mut seen = HashMap::new();
        for (mac, rss) in &pairs {
            if !(RSS_MIN..=RSS_MAX).contains(rss) {
                return Err(LocalizationError::BadScan(format!(
                    "rss {rss} for {mac} outside [{RSS_MIN}, {RSS_MAX}]"
                )));
            }
            if seen.insert(mac.clone(), ()).is_some() {
                return Err(LocalizationError::BadScan(format!("duplicate mac {mac}")));
            }
        }
        Ok(LocalizationScan { pairs })
    }

    pub fn pairs(&self) -> &[(MacAddr, i32)] {
        &self.pairs
    }

    pub fn get(&self, mac: &MacAddr) -> Option<i32> {
        self.pairs
            .iter()
            .find(|(m, _)| m == mac)
            .map(|&(_, rss)| rss)
    }
}

/// Read a scan file: CSV with header `mac,rss`.
pub fn read_scan_csv(path: impl AsRef<Path>) -> Result<LocalizationScan, LocalizationError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path.as_ref())
        .map_err(|e| LocalizationError::BadScan(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| LocalizationError::BadScan(e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != ["mac", "rss"] {
        return Err(LocalizationError::BadScan("header must be `mac,rss`".into()));
    }
    let mut pairs = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| LocalizationError::BadScan(e.to_string()))?;
        if row.len() != 2 {
            return Err(LocalizationError::BadScan("rows must be mac,rss".into()));
        }
        let mac = MacAddr::parse(row[0].trim()).map_err(LocalizationError::BadScan)?;
        let rss: i32 = row[1]
            .trim()
            .parse()
            .map_err(|_| LocalizationError::BadScan(format!("bad rss {:?}", &row[1])))?;
        pairs.push((mac, rss));
    }
    LocalizationScan::new(pairs)
}

pub fn write_scan_csv(
    path: impl AsRef<Path>,
    scan: &LocalizationScan,
) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["mac", "rss"])?;
    for (mac, rss) in scan.pairs() {
        writer.write_record([mac.as_str(), &rss.to_string()])?;
    }
    writer.flush()
}

/// Client-encrypted scan aligned to the table columns: per column j the
/// ciphertext of `-2 * rss_j`, plus one ciphertext of `sum rss_j^2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncryptedScan {
    pub s2: Vec<Ciphertext>,
    pub s3: Ciphertext,
}

impl EncryptedScan {
    pub fn scheme(&self) -> Scheme {
        self.s3.scheme
    }
}

/// Align a scan to the table's column order (absent APs take `v_c`) and
/// encrypt the cross and square terms under the carrier key.
pub fn prepare_scan<R: Rng + CryptoRng>(
    scan: &LocalizationScan,
    ap_columns: &[MacAddr],
    key: &PublicKey,
    v_c: i32,
    rng: &mut R,
    ops: &mut OpCount,
) -> Result<EncryptedScan, LocalizationError> {
    let mut s2 = Vec::with_capacity(ap_columns.len());
    let mut square_sum: i64 = 0;
    for mac in ap_columns {
        let rss = scan.get(mac).unwrap_or(v_c) as i64;
        square_sum += rss * rss;
        let cross = BigInt::from(-2 * rss);
        s2.push(key.encrypt_signed(&cross, rng)?);
    }
    let s3 = key.encrypt_signed(&BigInt::from(square_sum), rng)?;
    ops.encryptions += ap_columns.len() as u64 + 1;
    Ok(EncryptedScan { s2, s3 })
}

/// One per-fingerprint output of the distance loop: the plaintext
/// square-sum accumulator stays server-side, the distance is encrypted.
#[derive(Clone, Debug)]
pub struct DistanceRow {
    pub coord: (i64, i64),
    pub square_sum: i64,
    pub dist: Ciphertext,
}

/// Encrypted squared Euclidean distance of the scan to every fingerprint,
/// in table row order.
pub fn compute_distance_rows<R: Rng + CryptoRng>(
    table: &LookupTable,
    scan: &EncryptedScan,
    key: &PublicKey,
    rng: &mut R,
    ops: &mut OpCount,
) -> Result<Vec<DistanceRow>, LocalizationError> {
    if scan.s2.len() != table.n_aps() {
        return Err(LocalizationError::Misaligned);
    }
    key.check_compat(&scan.s3)?;
    for ct in &scan.s2 {
        key.check_compat(ct)?;
    }
    let mut rows = Vec::with_capacity(table.n_fingerprints());
    for row in &table.rows {
        let mut square_sum: i64 = 0;
        let mut cross: Option<Ciphertext> = None;
        for (j, &rss) in row.rss.iter().enumerate() {
            square_sum += (rss as i64) * (rss as i64);
            let term = key.scalar_mul(&scan.s2[j], &BigInt::from(rss))?;
            cross = Some(match cross {
                Some(acc) => key.add(&acc, &term)?,
                None => term,
            });
        }
        let fp_sq = key.encrypt_signed(&BigInt::from(square_sum), rng)?;
        ops.encryptions += 1;
        let cross = cross.expect("tables always have at least one column");
        let dist = key.add(&key.add(&fp_sq, &cross)?, &scan.s3)?;
        rows.push(DistanceRow {
            coord: row.coord,
            square_sum,
            dist,
        });
    }
    Ok(rows)
}

/// Comparison input width for a table: distances reach
/// `n_aps * max_rss_delta^2` with `max_rss_delta = 120`, so l covers that
/// with one spare bit, capped at 32.
pub fn default_input_bits(n_aps: usize) -> u32 {
    let max_dist = (n_aps as u64) * 120 * 120;
    let bits = 64 - max_dist.leading_zeros(); // ceil(log2(max_dist)) for non-powers
    let bits = if max_dist.is_power_of_two() { bits - 1 } else { bits };
    (bits + 1).min(32)
}

/// Server-side mode: k-min selection over the encrypted distances, then
/// fresh encryptions of the winning coordinates, nearest first.
pub struct ServerModeOutcome {
    /// `(E(x), E(y))` per winner, nearest first.
    pub coords: Vec<(Ciphertext, Ciphertext)>,
    pub comparisons: u64,
    pub evaluator_ops: OpCount,
}

pub fn localize_server_mode<L: KeyholderLink, R: Rng + CryptoRng>(
    table: &LookupTable,
    scan: &EncryptedScan,
    k: usize,
    keys: &privloc_he::PublicKeySet,
    params: ComparisonParams,
    link: &mut L,
    rng: &mut R,
) -> Result<ServerModeOutcome, LocalizationError> {
    let n_f = table.n_fingerprints();
    if k == 0 || k > n_f {
        return Err(LocalizationError::BadK { k, n_f });
    }
    let key = keys.carrier(params.carrier);
    let mut ops = OpCount::default();
    let rows = compute_distance_rows(table, scan, &key, rng, &mut ops)?;
    let mut entries: Vec<SortEntry<(i64, i64)>> = rows
        .into_iter()
        .map(|row| SortEntry {
            dist: row.dist,
            payload: row.coord,
        })
        .collect();
    let stats = k_min_select(&mut entries, k, keys, params, link, rng)?;
    ops += stats.evaluator_ops;
    let mut coords = Vec::with_capacity(k);
    for rank in 1..=k {
        let (x, y) = entries[n_f - rank].payload;
        let ex = key.encrypt_signed(&BigInt::from(x), rng)?;
        let ey = key.encrypt_signed(&BigInt::from(y), rng)?;
        ops.encryptions += 2;
        coords.push((ex, ey));
    }
    Ok(ServerModeOutcome {
        coords,
        comparisons: stats.comparisons,
        evaluator_ops: ops,
    })
}

/// Client-side baseline, server half: every row goes back, coordinates in
/// the plain (the floor map is public; the protected data is RSS).
pub fn localize_client_mode<R: Rng + CryptoRng>(
    table: &LookupTable,
    scan: &EncryptedScan,
    key: &PublicKey,
    rng: &mut R,
    ops: &mut OpCount,
) -> Result<Vec<((i64, i64), Ciphertext)>, LocalizationError> {
    let rows = compute_distance_rows(table, scan, key, rng, ops)?;
    Ok(rows.into_iter().map(|r| (r.coord, r.dist)).collect())
}

/// Client-side baseline, client half: decrypt every distance and take the
/// minimum, lowest row index first on ties. Rows that fail to decrypt are
/// skipped and reported.
pub struct ClientArgmin {
    pub coord: (i64, i64),
    pub failed_rows: Vec<(usize, HeError)>,
    pub ops: OpCount,
}

pub fn client_argmin(
    rows: &[((i64, i64), Ciphertext)],
    keys: &PrivateKeySet,
) -> Result<ClientArgmin, LocalizationError> {
    let mut best: Option<(BigUint, (i64, i64))> = None;
    let mut failed_rows = Vec::new();
    let mut ops = OpCount::default();
    for (idx, (coord, ct)) in rows.iter().enumerate() {
        ops.decryptions += 1;
        match keys.decrypt(ct) {
            Ok(dist) => {
                let better = match &best {
                    Some((current, _)) => dist < *current,
                    None => true,
                };
                if better {
                    best = Some((dist, *coord));
                }
            }
            Err(e) => failed_rows.push((idx, e)),
        }
    }
    match best {
        Some((_, coord)) => Ok(ClientArgmin {
            coord,
            failed_rows,
            ops,
        }),
        None => Err(LocalizationError::NothingDecrypted),
    }
}

/// Plaintext reference: squared Euclidean distance with v_c substitution.
pub fn plaintext_distances(table: &LookupTable, scan: &LocalizationScan) -> Vec<i64> {
    let aligned: Vec<i64> = table
        .ap_columns
        .iter()
        .map(|mac| scan.get(mac).unwrap_or(table.v_c) as i64)
        .collect();
    table
        .rows
        .iter()
        .map(|row| {
            row.rss
                .iter()
                .zip(&aligned)
                .map(|(&fp, &sc)| (fp as i64 - sc) * (fp as i64 - sc))
                .sum()
        })
        .collect()
}

/// Plaintext argmin with the lowest-index tie-break; the oracle both modes
/// must match.
pub fn plaintext_argmin(table: &LookupTable, scan: &LocalizationScan) -> (i64, i64) {
    let dists = plaintext_distances(table, scan);
    let mut best = 0usize;
    for (i, d) in dists.iter().enumerate() {
        if *d < dists[best] {
            best = i;
        }
    }
    table.rows[best].coord
}

/// A plausible scan taken near the given table row: every non-missing cell
/// jittered by up to `noise` dB; cells at `v_c` stay unseen.
pub fn synthetic_scan<R: Rng>(
    table: &LookupTable,
    row: usize,
    noise: i32,
    rng: &mut R,
) -> LocalizationScan {
    let row = &table.rows[row];
    let pairs = table
        .ap_columns
        .iter()
        .zip(&row.rss)
        .filter(|&(_, &rss)| rss != table.v_c)
        .map(|(mac, &rss)| {
            let jitter = if noise > 0 { rng.gen_range(-noise..=noise) } else { 0 };
            (mac.clone(), (rss + jitter).clamp(RSS_MIN, RSS_MAX))
        })
        .collect();
    LocalizationScan::new(pairs).expect("jittered scan stays in range")
}

/// Decode a decrypted coordinate residue.
pub fn decode_coord(
    ct_pair: (&Ciphertext, &Ciphertext),
    keys: &PrivateKeySet,
) -> Result<(i64, i64), LocalizationError> {
    let x = keys.decrypt_signed(ct_pair.0)?;
    let y = keys.decrypt_signed(ct_pair.1)?;
    let (x, y) = (
        x.to_i64().ok_or(LocalizationError::NothingDecrypted)?,
        y.to_i64().ok_or(LocalizationError::NothingDecrypted)?,
    );
    Ok((x, y))
}
