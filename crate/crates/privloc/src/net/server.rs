//! Localization server: accepts connections, serves the lookup-table
//! handshake, computes encrypted distances per scan, and in server mode
//! drives the comparison exchanges as evaluator.

use super::conn::FramedConn;
use super::wire::{
    ColumnsBody, EncCoord, ErrorBody, HelloBody, Message, Mode, Payload, PlainRow, ResultBody,
    ScanBody, WireError,
};
use crate::fingerprint::LookupTable;
use crate::localization::{
    self, default_input_bits, EncryptedScan, LocalizationError,
};
use privloc_he::compare::{
    CmpMsg1, CmpMsg2, CmpMsg3, CmpMsg4, CmpMsg5, CmpMsg6, CompareError, ComparisonParams,
    KeyholderLink, OpCount,
};
use privloc_he::{PublicKeySet, Scheme};
use rand::rngs::OsRng;
use rand::{CryptoRng, Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

/// Per-localization numbers the server measured on its own side; the bench
/// harness collects these through the metrics sink.
#[derive(Clone, Copy, Debug, Default)]
pub struct ServerTrialMetrics {
    pub ops: OpCount,
    pub comparisons: u64,
}

pub type MetricsSink = Arc<Mutex<Vec<ServerTrialMetrics>>>;

pub struct ServeConfig {
    pub listen: String,
    pub table: Arc<LookupTable>,
    pub metrics_sink: Option<MetricsSink>,
    /// Deterministic server randomness for tests.
    pub seed: Option<u64>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    join: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // nudge the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(join) = self.join.take() {
            let _ = join.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.join.is_some() {
            self.shutdown();
        }
    }
}

/// Bind and serve until the handle is stopped. Each connection runs on its
/// own thread; the lookup table is shared read-only.
pub fn serve(config: ServeConfig) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(&config.listen)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = stop.clone();
    let table = config.table;
    let sink = config.metrics_sink;
    let seed = config.seed;
    let join = std::thread::spawn(move || {
        let mut conn_index = 0u64;
        for stream in listener.incoming() {
            if stop_flag.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = stream else { continue };
            let table = table.clone();
            let sink = sink.clone();
            conn_index += 1;
            let conn_seed = seed.map(|s| s.wrapping_add(conn_index));
            std::thread::spawn(move || {
                let _ = handle_connection(stream, &table, sink, conn_seed);
            });
        }
    });
    Ok(ServerHandle {
        addr,
        stop,
        join: Some(join),
    })
}

fn send_error(conn: &mut FramedConn, sid: &str, code: &str, detail: String) {
    let _ = conn.send(&Message {
        sid: sid.to_string(),
        payload: Payload::Error(ErrorBody {
            code: code.into(),
            detail,
        }),
    });
}

/// Receive one message; frame-level failures draw an error reply and end
/// the connection (`Ok(None)`).
fn recv_or_report(conn: &mut FramedConn) -> Result<Option<Message>, WireError> {
    match conn.recv() {
        Ok(msg) => Ok(Some(msg)),
        Err(WireError::Closed) => Ok(None),
        Err(e @ WireError::UnknownType(_)) => {
            send_error(conn, "", "unknown-type", e.to_string());
            Ok(None)
        }
        Err(e @ (WireError::Decode { .. } | WireError::Oversize(_) | WireError::Version(_))) => {
            send_error(conn, "", "bad-frame", e.to_string());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

struct SessionCtx {
    keys: PublicKeySet,
    scheme: Scheme,
    mode: Mode,
    k: u32,
    params: ComparisonParams,
}

fn handle_connection(
    stream: TcpStream,
    table: &LookupTable,
    sink: Option<MetricsSink>,
    seed: Option<u64>,
) -> Result<(), WireError> {
    let mut conn = FramedConn::new(stream)?;
    match seed {
        Some(s) => {
            let rng = ChaCha20Rng::seed_from_u64(s);
            drive_connection(&mut conn, table, sink, rng)
        }
        None => {
            let mut seed_bytes = [0u8; 32];
            OsRng.fill_bytes(&mut seed_bytes);
            let rng = ChaCha20Rng::from_seed(seed_bytes);
            drive_connection(&mut conn, table, sink, rng)
        }
    }
}

fn drive_connection<R: Rng + CryptoRng>(
    conn: &mut FramedConn,
    table: &LookupTable,
    sink: Option<MetricsSink>,
    mut rng: R,
) -> Result<(), WireError> {
    let l = default_input_bits(table.n_aps());

    // hello first, everything else is out of order
    let Some(first) = recv_or_report(conn)? else {
        return Ok(());
    };
    let ctx = match first.payload {
        Payload::Hello(hello) => match accept_hello(&hello, table, l) {
            Ok(ctx) => ctx,
            Err((code, detail)) => {
                send_error(conn, &first.sid, code, detail);
                return Ok(());
            }
        },
        other => {
            send_error(
                conn,
                &first.sid,
                "protocol-order",
                format!("expected hello, got {}", other.kind()),
            );
            return Ok(());
        }
    };
    conn.send(&Message {
        sid: first.sid.clone(),
        payload: Payload::Columns(ColumnsBody {
            ap_columns: table
                .ap_columns
                .iter()
                .map(|m| m.as_str().to_string())
                .collect(),
            l,
        }),
    })?;

    // scan / result rounds until the client hangs up
    loop {
        let Some(msg) = recv_or_report(conn)? else {
            return Ok(());
        };
        let scan = match msg.payload {
            Payload::Scan(scan) => scan,
            other => {
                send_error(
                    conn,
                    &msg.sid,
                    "protocol-order",
                    format!("expected scan, got {}", other.kind()),
                );
                return Ok(());
            }
        };
        match run_localization(conn, table, &ctx, &msg.sid, scan, &mut rng) {
            Ok(metrics) => {
                if let Some(sink) = &sink {
                    sink.lock().unwrap().push(metrics);
                }
            }
            Err(LocalizationFailure::Reported) => return Ok(()),
            Err(LocalizationFailure::Wire(e)) => return Err(e),
        }
    }
}

fn accept_hello(
    hello: &HelloBody,
    table: &LookupTable,
    l: u32,
) -> Result<SessionCtx, (&'static str, String)> {
    if hello.k == 0 || hello.k as usize > table.n_fingerprints() {
        return Err((
            "bad-hello",
            format!(
                "k must lie in [1, {}], got {}",
                table.n_fingerprints(),
                hello.k
            ),
        ));
    }
    let keys = PublicKeySet {
        paillier: hello.paillier.clone(),
        dgk: hello.dgk.clone(),
    };
    let params = ComparisonParams::for_carrier(hello.scheme, l);
    match hello.mode {
        Mode::Server => {
            params
                .validate(&keys)
                .map_err(|e| ("plaintext-space", e.to_string()))?;
        }
        Mode::Client => {
            // no comparisons, but the distances must still fit signed
            let needed = num_bigint::BigUint::from(1u8) << (l as u64 + 1);
            if keys.carrier(hello.scheme).message_space().modulus() <= &needed {
                return Err((
                    "plaintext-space",
                    format!("carrier space cannot hold {l}-bit distances"),
                ));
            }
        }
    }
    Ok(SessionCtx {
        keys,
        scheme: hello.scheme,
        mode: hello.mode,
        k: hello.k,
        params,
    })
}

enum LocalizationFailure {
    /// An error reply went to the client and the connection is done.
    Reported,
    Wire(WireError),
}

fn run_localization<R: Rng + CryptoRng>(
    conn: &mut FramedConn,
    table: &LookupTable,
    ctx: &SessionCtx,
    sid: &str,
    scan: ScanBody,
    rng: &mut R,
) -> Result<ServerTrialMetrics, LocalizationFailure> {
    let enc_scan = EncryptedScan {
        s2: scan.s2,
        s3: scan.s3,
    };
    let key = ctx.keys.carrier(ctx.scheme);
    let mut metrics = ServerTrialMetrics::default();
    let result = match ctx.mode {
        Mode::Client => {
            match localization::localize_client_mode(table, &enc_scan, &key, rng, &mut metrics.ops)
            {
                Ok(rows) => ResultBody::Client {
                    rows: rows
                        .into_iter()
                        .map(|((x, y), d2)| PlainRow { x, y, d2 })
                        .collect(),
                },
                Err(e) => {
                    send_error(conn, sid, "bad-scan", e.to_string());
                    return Err(LocalizationFailure::Reported);
                }
            }
        }
        Mode::Server => {
            let mut link = RemoteKeyholder {
                conn,
                scan_sid: sid.to_string(),
                counter: 0,
            };
            match localization::localize_server_mode(
                table,
                &enc_scan,
                ctx.k as usize,
                &ctx.keys,
                ctx.params,
                &mut link,
                rng,
            ) {
                Ok(outcome) => {
                    metrics.ops += outcome.evaluator_ops;
                    metrics.comparisons = outcome.comparisons;
                    ResultBody::Server {
                        coords: outcome
                            .coords
                            .into_iter()
                            .map(|(x, y)| EncCoord { x, y })
                            .collect(),
                    }
                }
                Err(LocalizationError::Compare(CompareError::Channel(detail))) => {
                    send_error(conn, sid, "comparison-abort", detail);
                    return Err(LocalizationFailure::Reported);
                }
                Err(e) => {
                    send_error(conn, sid, "bad-scan", e.to_string());
                    return Err(LocalizationFailure::Reported);
                }
            }
        }
    };
    conn.send(&Message {
        sid: sid.to_string(),
        payload: Payload::Result(result),
    })
    .map_err(LocalizationFailure::Wire)?;
    Ok(metrics)
}

/// Evaluator-side view of the keyholder across the wire: each comparison
/// session gets its own sub-sid and three request/reply exchanges.
struct RemoteKeyholder<'a> {
    conn: &'a mut FramedConn,
    scan_sid: String,
    counter: u64,
}

impl<'a> RemoteKeyholder<'a> {
    fn exchange(&mut self, sid: &str, payload: Payload) -> Result<Payload, CompareError> {
        self.conn
            .send(&Message {
                sid: sid.to_string(),
                payload,
            })
            .map_err(|e| CompareError::Channel(e.to_string()))?;
        let reply = self
            .conn
            .recv()
            .map_err(|e| CompareError::Channel(e.to_string()))?;
        if reply.sid != sid {
            return Err(CompareError::Channel(format!(
                "reply for session {:?}, expected {:?}",
                reply.sid, sid
            )));
        }
        if let Payload::Error(err) = reply.payload {
            return Err(CompareError::Channel(format!(
                "keyholder error {}: {}",
                err.code, err.detail
            )));
        }
        Ok(reply.payload)
    }

    fn current_sid(&self) -> String {
        format!("{}.{}", self.scan_sid, self.counter)
    }
}

impl<'a> KeyholderLink for RemoteKeyholder<'a> {
    fn decompose(&mut self, m1: CmpMsg1) -> Result<CmpMsg2, CompareError> {
        self.counter += 1;
        let sid = self.current_sid();
        match self.exchange(&sid, Payload::Cmp1(m1))? {
            Payload::Cmp2(m2) => Ok(m2),
            other => Err(CompareError::Channel(format!(
                "expected cmp2, got {}",
                other.kind()
            ))),
        }
    }

    fn zero_stage(&mut self, m3: CmpMsg3) -> Result<CmpMsg4, CompareError> {
        let sid = self.current_sid();
        match self.exchange(&sid, Payload::Cmp3(m3))? {
            Payload::Cmp4(m4) => Ok(m4),
            other => Err(CompareError::Channel(format!(
                "expected cmp4, got {}",
                other.kind()
            ))),
        }
    }

    fn unmask(&mut self, m5: CmpMsg5) -> Result<CmpMsg6, CompareError> {
        let sid = self.current_sid();
        match self.exchange(&sid, Payload::Cmp5(m5))? {
            Payload::Cmp6(m6) => Ok(m6),
            other => Err(CompareError::Channel(format!(
                "expected cmp6, got {}",
                other.kind()
            ))),
        }
    }
}
