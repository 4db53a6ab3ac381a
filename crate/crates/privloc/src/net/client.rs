//! Localization client: key generation, handshake, scan encryption, the
//! keyholder role during server-mode comparisons, and result decryption.

use super::conn::FramedConn;
use super::metrics::ByteCount;
use super::wire::{HelloBody, Message, Mode, Payload, ResultBody, ScanBody, WireError};
use crate::fingerprint::{MacAddr, V_C};
use crate::localization::{
    client_argmin, decode_coord, prepare_scan, LocalizationError, LocalizationScan,
};
use privloc_he::compare::{ComparisonParams, KeyholderSession, OpCount, SIGMA_DGK};
use privloc_he::dgk::{self, DgkParams};
use privloc_he::{paillier, PrivateKeySet, Scheme};
use rand::rngs::OsRng;
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::net::TcpStream;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Largest table exponent (l) the client provisions its DGK key for. The
/// keys travel in `hello` before the server reveals the table's actual l,
/// so the DGK plaintext space is sized for this bound and the server
/// rejects tables that need more.
pub const DEFAULT_MAX_TABLE_BITS: u32 = 22;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("wire protocol failed during {stage}: {source}")]
    Wire {
        stage: &'static str,
        source: WireError,
    },
    #[error("server error {code} during {stage}: {detail}")]
    Server {
        stage: &'static str,
        code: String,
        detail: String,
    },
    #[error("protocol violation during {stage}: {detail}")]
    Protocol { stage: &'static str, detail: String },
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error("key generation failed: {0}")]
    Keys(privloc_he::HeError),
}

#[derive(Clone, Debug)]
pub struct ClientConfig {
    pub server_addr: String,
    pub scheme: Scheme,
    pub mode: Mode,
    pub k: u32,
    pub key_bits: u64,
    pub max_table_bits: u32,
    /// Reuse pre-generated keys (the bench does this across trials).
    pub keys: Option<PrivateKeySet>,
    /// Deterministic randomness for tests.
    pub seed: Option<u64>,
}

impl ClientConfig {
    pub fn new(server_addr: impl Into<String>, scheme: Scheme, mode: Mode) -> Self {
        ClientConfig {
            server_addr: server_addr.into(),
            scheme,
            mode,
            k: 1,
            key_bits: 2048,
            max_table_bits: DEFAULT_MAX_TABLE_BITS,
            keys: None,
            seed: None,
        }
    }
}

/// Size the DGK plaintext prime for the role the key plays: carrier keys
/// must absorb the masked comparison sums (server mode) or just the signed
/// distance terms (client mode); a bit-stage-only key stays tiny.
pub fn dgk_u_bits(scheme: Scheme, mode: Mode, max_table_bits: u32) -> u64 {
    match (scheme, mode) {
        (Scheme::Paillier, _) => 10,
        (Scheme::Dgk, Mode::Server) => {
            ComparisonParams::dgk_carrier_u_bits(max_table_bits, SIGMA_DGK)
        }
        (Scheme::Dgk, Mode::Client) => max_table_bits as u64 + 2,
    }
}

/// Generate the client's key material for the given scheme and mode.
pub fn generate_keys<R: Rng + CryptoRng>(
    scheme: Scheme,
    mode: Mode,
    key_bits: u64,
    max_table_bits: u32,
    rng: &mut R,
) -> Result<PrivateKeySet, privloc_he::HeError> {
    let (_, paillier_sk) = paillier::keygen(key_bits, rng)?;
    let u_bits = dgk_u_bits(scheme, mode, max_table_bits);
    let (_, dgk_sk) = dgk::keygen(DgkParams::new(key_bits, dgk::DEFAULT_T_BITS, u_bits), rng)?;
    Ok(PrivateKeySet {
        paillier: paillier_sk,
        dgk: dgk_sk,
    })
}

/// One finished localization as the client saw it.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    /// Decrypted coordinates, nearest first (client mode always returns one).
    pub coords: Vec<(i64, i64)>,
    /// Rows in the result payload (N_F in client mode, k in server mode).
    pub result_rows: usize,
    /// Ciphertexts in the result payload.
    pub result_ciphertexts: usize,
    /// Framed byte length of the result message.
    pub result_bytes: usize,
    /// Comparison sessions this client served as keyholder.
    pub comparisons: u64,
    pub ops: OpCount,
    pub bytes: ByteCount,
    pub wall: Duration,
}

/// A connected, handshaken client that can run repeated localizations.
pub struct ClientSession {
    conn: FramedConn,
    keys: PrivateKeySet,
    scheme: Scheme,
    mode: Mode,
    columns: Vec<MacAddr>,
    input_bits: u32,
    rng: ChaCha20Rng,
    sid_counter: u64,
    session_tag: String,
    pub keygen_time: Duration,
}

impl ClientSession {
    pub fn connect(config: ClientConfig) -> Result<Self, ClientError> {
        let mut rng = match config.seed {
            Some(seed) => ChaCha20Rng::seed_from_u64(seed),
            None => {
                let mut seed = [0u8; 32];
                OsRng.fill_bytes(&mut seed);
                ChaCha20Rng::from_seed(seed)
            }
        };
        let keygen_started = Instant::now();
        let keys = match config.keys {
            Some(keys) => keys,
            None => generate_keys(
                config.scheme,
                config.mode,
                config.key_bits,
                config.max_table_bits,
                &mut rng,
            )
            .map_err(ClientError::Keys)?,
        };
        let keygen_time = keygen_started.elapsed();

        let stream = TcpStream::connect(&config.server_addr)?;
        let mut conn = FramedConn::new(stream)?;
        let session_tag = format!("{:08x}", rng.gen::<u32>());
        let public = keys.public();
        conn.send(&Message {
            sid: session_tag.clone(),
            payload: Payload::Hello(HelloBody {
                paillier: public.paillier.clone(),
                dgk: public.dgk.clone(),
                scheme: config.scheme,
                mode: config.mode,
                k: config.k,
            }),
        })
        .map_err(|e| ClientError::Wire {
            stage: "hello",
            source: e,
        })?;
        let reply = conn.recv().map_err(|e| ClientError::Wire {
            stage: "hello",
            source: e,
        })?;
        let columns_body = match reply.payload {
            Payload::Columns(c) => c,
            Payload::Error(e) => {
                return Err(ClientError::Server {
                    stage: "hello",
                    code: e.code,
                    detail: e.detail,
                })
            }
            other => {
                return Err(ClientError::Protocol {
                    stage: "hello",
                    detail: format!("expected columns, got {}", other.kind()),
                })
            }
        };
        let mut columns = Vec::with_capacity(columns_body.ap_columns.len());
        for raw in &columns_body.ap_columns {
            columns.push(MacAddr::parse(raw).map_err(|e| ClientError::Protocol {
                stage: "columns",
                detail: e,
            })?);
        }
        Ok(ClientSession {
            conn,
            keys,
            scheme: config.scheme,
            mode: config.mode,
            columns,
            input_bits: columns_body.l,
            rng,
            sid_counter: 0,
            session_tag,
            keygen_time,
        })
    }

    pub fn columns(&self) -> &[MacAddr] {
        &self.columns
    }

    pub fn input_bits(&self) -> u32 {
        self.input_bits
    }

    pub fn keys(&self) -> &PrivateKeySet {
        &self.keys
    }

    /// Encrypt a scan, send it, serve any comparison rounds, and decrypt
    /// the result.
    pub fn localize(&mut self, scan: &LocalizationScan) -> Result<TrialOutcome, ClientError> {
        let started = Instant::now();
        let bytes_before = self.conn.bytes();
        let mut ops = OpCount::default();
        self.sid_counter += 1;
        let sid = format!("{}-{}", self.session_tag, self.sid_counter);

        let key = self.keys.public().carrier(self.scheme);
        let enc_scan = prepare_scan(scan, &self.columns, &key, V_C, &mut self.rng, &mut ops)?;
        self.conn
            .send(&Message {
                sid: sid.clone(),
                payload: Payload::Scan(ScanBody {
                    s2: enc_scan.s2,
                    s3: enc_scan.s3,
                }),
            })
            .map_err(|e| ClientError::Wire {
                stage: "scan",
                source: e,
            })?;

        let mut comparisons = 0u64;
        let mut keyholder: Option<(String, KeyholderSession)> = None;
        loop {
            let (msg, len) = self.conn.recv_with_len().map_err(|e| ClientError::Wire {
                stage: "exchange",
                source: e,
            })?;
            match msg.payload {
                Payload::Cmp1(m1) => {
                    let mut session =
                        KeyholderSession::new(&self.keys, self.scheme, self.input_bits);
                    let reply = session.decompose(&m1, &mut self.rng).map_err(|e| {
                        ClientError::Protocol {
                            stage: "cmp1",
                            detail: e.to_string(),
                        }
                    })?;
                    comparisons += 1;
                    keyholder = Some((msg.sid.clone(), session));
                    self.conn
                        .send(&Message {
                            sid: msg.sid,
                            payload: Payload::Cmp2(reply),
                        })
                        .map_err(|e| ClientError::Wire {
                            stage: "cmp2",
                            source: e,
                        })?;
                }
                Payload::Cmp3(m3) => {
                    let (current_sid, session) =
                        keyholder.as_mut().ok_or_else(|| ClientError::Protocol {
                            stage: "cmp3",
                            detail: "no open comparison session".into(),
                        })?;
                    if *current_sid != msg.sid {
                        return Err(ClientError::Protocol {
                            stage: "cmp3",
                            detail: format!("unknown session {:?}", msg.sid),
                        });
                    }
                    let reply = session.zero_stage(&m3, &mut self.rng).map_err(|e| {
                        ClientError::Protocol {
                            stage: "cmp3",
                            detail: e.to_string(),
                        }
                    })?;
                    self.conn
                        .send(&Message {
                            sid: msg.sid,
                            payload: Payload::Cmp4(reply),
                        })
                        .map_err(|e| ClientError::Wire {
                            stage: "cmp4",
                            source: e,
                        })?;
                }
                Payload::Cmp5(m5) => {
                    let (current_sid, session) =
                        keyholder.as_mut().ok_or_else(|| ClientError::Protocol {
                            stage: "cmp5",
                            detail: "no open comparison session".into(),
                        })?;
                    if *current_sid != msg.sid {
                        return Err(ClientError::Protocol {
                            stage: "cmp5",
                            detail: format!("unknown session {:?}", msg.sid),
                        });
                    }
                    let reply = session.unmask(&m5).map_err(|e| ClientError::Protocol {
                        stage: "cmp5",
                        detail: e.to_string(),
                    })?;
                    ops += session.ops();
                    keyholder = None;
                    self.conn
                        .send(&Message {
                            sid: msg.sid,
                            payload: Payload::Cmp6(reply),
                        })
                        .map_err(|e| ClientError::Wire {
                            stage: "cmp6",
                            source: e,
                        })?;
                }
                Payload::Result(result) => {
                    let outcome = self.finish_result(
                        result,
                        len,
                        comparisons,
                        ops,
                        bytes_before,
                        started,
                    )?;
                    return Ok(outcome);
                }
                Payload::Error(e) => {
                    return Err(ClientError::Server {
                        stage: "exchange",
                        code: e.code,
                        detail: e.detail,
                    });
                }
                other => {
                    return Err(ClientError::Protocol {
                        stage: "exchange",
                        detail: format!("unexpected {}", other.kind()),
                    });
                }
            }
        }
    }

    fn finish_result(
        &mut self,
        result: ResultBody,
        result_bytes: usize,
        comparisons: u64,
        mut ops: OpCount,
        bytes_before: ByteCount,
        started: Instant,
    ) -> Result<TrialOutcome, ClientError> {
        let (coords, result_rows, result_ciphertexts) = match (self.mode, result) {
            (Mode::Server, ResultBody::Server { coords }) => {
                let mut decoded = Vec::with_capacity(coords.len());
                let ct_count = coords.len() * 2;
                for pair in &coords {
                    ops.decryptions += 2;
                    decoded.push(decode_coord((&pair.x, &pair.y), &self.keys)?);
                }
                (decoded, coords.len(), ct_count)
            }
            (Mode::Client, ResultBody::Client { rows }) => {
                let ct_count = rows.len();
                let plain: Vec<((i64, i64), privloc_he::Ciphertext)> = rows
                    .into_iter()
                    .map(|r| ((r.x, r.y), r.d2))
                    .collect();
                let argmin = client_argmin(&plain, &self.keys)?;
                ops += argmin.ops;
                (vec![argmin.coord], plain.len(), ct_count)
            }
            (mode, other) => {
                return Err(ClientError::Protocol {
                    stage: "result",
                    detail: format!("{mode} mode got a {} result", kind_of(&other)),
                })
            }
        };
        Ok(TrialOutcome {
            coords,
            result_rows,
            result_ciphertexts,
            result_bytes,
            comparisons,
            ops,
            bytes: self.conn.bytes().delta_since(bytes_before),
            wall: started.elapsed(),
        })
    }
}

fn kind_of(result: &ResultBody) -> &'static str {
    match result {
        ResultBody::Server { .. } => "server",
        ResultBody::Client { .. } => "client",
    }
}

/// Connect, localize one scan, disconnect.
pub fn run_client(
    config: ClientConfig,
    scan: &LocalizationScan,
) -> Result<TrialOutcome, ClientError> {
    let mut session = ClientSession::connect(config)?;
    session.localize(scan)
}
