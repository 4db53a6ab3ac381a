//! Benchmark harness: runs batches of localizations over loopback for each
//! scheme/mode cell and reports wall times, socket bytes, and per-side
//! operation counts (the energy proxy).

use super::client::{generate_keys, ClientConfig, ClientSession};
use super::server::{serve, MetricsSink, ServeConfig};
use super::wire::Mode;
use crate::fingerprint::{build_lookup_table, generate_synthetic, LookupTable};
use crate::localization::{default_input_bits, plaintext_argmin, synthetic_scan};
use privloc_he::compare::{expected_comparisons, OpCount};
use privloc_he::Scheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bench setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchConfig {
    pub fingerprints: usize,
    pub aps: usize,
    pub key_bits: u64,
    pub trials: usize,
    pub k: u32,
    pub seed: u64,
    pub cells: Vec<(Scheme, Mode)>,
}

impl BenchConfig {
    /// The experiment shape from the evaluation: 19 fingerprints, 26 APs,
    /// 20 localizations, 2048-bit keys, all four scheme/mode cells.
    pub fn paper_preset(seed: u64) -> Self {
        BenchConfig {
            fingerprints: 19,
            aps: 26,
            key_bits: 2048,
            trials: 20,
            k: 1,
            seed,
            cells: vec![
                (Scheme::Paillier, Mode::Client),
                (Scheme::Paillier, Mode::Server),
                (Scheme::Dgk, Mode::Client),
                (Scheme::Dgk, Mode::Server),
            ],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialReport {
    pub wall_ms: f64,
    pub client_bytes_sent: u64,
    pub client_bytes_received: u64,
    pub client_ops: OpCount,
    pub server_ops: OpCount,
    pub comparisons: u64,
    pub result_rows: usize,
    pub result_ciphertexts: usize,
    pub result_bytes: usize,
    /// Coordinate matched the plaintext oracle and, in server mode, the
    /// comparison count matched the selection formula.
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellReport {
    pub scheme: Scheme,
    pub mode: Mode,
    pub key_bits: u64,
    pub fingerprints: usize,
    pub aps: usize,
    pub trials: Vec<TrialReport>,
    pub median_wall_ms: f64,
    pub total_wall_ms: f64,
    pub setup_ms: f64,
    pub failed_trials: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub cells: Vec<CellReport>,
}

impl BenchReport {
    pub fn cell(&self, scheme: Scheme, mode: Mode) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.mode == mode)
    }

    pub fn any_failed(&self) -> bool {
        self.cells.iter().any(|c| c.failed_trials > 0)
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

/// Run every configured cell over loopback and collect the report.
pub fn run_bench(config: BenchConfig) -> Result<BenchReport, BenchError> {
    if config.fingerprints == 0 || config.aps == 0 || config.trials == 0 {
        return Err(BenchError::Setup("empty bench configuration".into()));
    }
    let records = generate_synthetic(config.fingerprints, config.aps, config.seed);
    let table = Arc::new(
        build_lookup_table(&records, 1, crate::fingerprint::V_C)
            .map_err(|e| BenchError::Setup(e.to_string()))?,
    );
    let mut cells = Vec::with_capacity(config.cells.len());
    for &(scheme, mode) in &config.cells {
        cells.push(run_cell(&config, scheme, mode, table.clone())?);
    }
    Ok(BenchReport { config, cells })
}

fn run_cell(
    config: &BenchConfig,
    scheme: Scheme,
    mode: Mode,
    table: Arc<LookupTable>,
) -> Result<CellReport, BenchError> {
    let sink: MetricsSink = Arc::new(Mutex::new(Vec::new()));
    let server = serve(ServeConfig {
        listen: "127.0.0.1:0".into(),
        table: table.clone(),
        metrics_sink: Some(sink.clone()),
        seed: Some(config.seed ^ 0x5eed),
    })?;

    let cell_seed = config
        .seed
        .wrapping_mul(31)
        .wrapping_add(scheme as u64 * 2 + mode as u64);
    let mut rng = ChaCha20Rng::seed_from_u64(cell_seed);

    let setup_started = Instant::now();
    let keys = generate_keys(
        scheme,
        mode,
        config.key_bits,
        default_input_bits(table.n_aps()),
        &mut rng,
    )
    .map_err(|e| BenchError::Setup(e.to_string()))?;
    let mut client_config = ClientConfig::new(server.addr.to_string(), scheme, mode);
    client_config.k = config.k;
    client_config.key_bits = config.key_bits;
    client_config.keys = Some(keys);
    client_config.seed = Some(cell_seed ^ 0xc11e47);
    let mut session =
        ClientSession::connect(client_config).map_err(|e| BenchError::Setup(e.to_string()))?;
    let setup_ms = setup_started.elapsed().as_secs_f64() * 1000.0;

    let expected_cmp = expected_comparisons(table.n_fingerprints(), config.k as usize);
    let mut trials = Vec::with_capacity(config.trials);
    let mut failed = 0usize;
    let total_started = Instant::now();
    for _ in 0..config.trials {
        let row = rng.gen_range(0..table.n_fingerprints());
        let scan = synthetic_scan(&table, row, 3, &mut rng);
        let oracle = plaintext_argmin(&table, &scan);
        let server_metrics_before = sink.lock().unwrap().len();
        match session.localize(&scan) {
            Ok(outcome) => {
                let server_metrics = {
                    let guard = sink.lock().unwrap();
                    guard.get(server_metrics_before).copied().unwrap_or_default()
                };
                let comparisons_ok = match mode {
                    Mode::Server => {
                        outcome.comparisons == expected_cmp
                            && server_metrics.comparisons == expected_cmp
                    }
                    Mode::Client => outcome.comparisons == 0,
                };
                let ok = comparisons_ok && outcome.coords.first() == Some(&oracle);
                if !ok {
                    failed += 1;
                }
                trials.push(TrialReport {
                    wall_ms: outcome.wall.as_secs_f64() * 1000.0,
                    client_bytes_sent: outcome.bytes.sent,
                    client_bytes_received: outcome.bytes.received,
                    client_ops: outcome.ops,
                    server_ops: server_metrics.ops,
                    comparisons: outcome.comparisons,
                    result_rows: outcome.result_rows,
                    result_ciphertexts: outcome.result_ciphertexts,
                    result_bytes: outcome.result_bytes,
                    ok,
                });
            }
            Err(e) => {
                failed += 1;
                eprintln!("bench trial failed ({scheme}/{mode}): {e}");
                trials.push(TrialReport {
                    wall_ms: f64::NAN,
                    client_bytes_sent: 0,
                    client_bytes_received: 0,
                    client_ops: OpCount::default(),
                    server_ops: OpCount::default(),
                    comparisons: 0,
                    result_rows: 0,
                    result_ciphertexts: 0,
                    result_bytes: 0,
                    ok: false,
                });
            }
        }
    }
    let total_wall_ms = total_started.elapsed().as_secs_f64() * 1000.0;
    server.stop();

    let mut walls: Vec<f64> = trials
        .iter()
        .filter(|t| t.ok)
        .map(|t| t.wall_ms)
        .collect();
    Ok(CellReport {
        scheme,
        mode,
        key_bits: config.key_bits,
        fingerprints: table.n_fingerprints(),
        aps: table.n_aps(),
        median_wall_ms: median(&mut walls),
        total_wall_ms,
        setup_ms,
        failed_trials: failed,
        trials,
    })
}
