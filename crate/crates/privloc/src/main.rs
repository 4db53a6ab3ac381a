use clap::{Parser, Subcommand};
use privloc::fingerprint::{build_lookup_table, generate_synthetic, ingest_csv, write_csv, V_C};
use privloc::localization::{read_scan_csv, synthetic_scan, write_scan_csv};
use privloc::net::bench::{BenchConfig, BenchReport};
use privloc::net::client::{run_client, ClientConfig, DEFAULT_MAX_TABLE_BITS};
use privloc::net::server::{serve, ServeConfig};
use privloc::net::wire::Mode;
use privloc_he::Scheme;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::sync::Arc;

/// Privacy-preserving Wi-Fi fingerprint localization.
#[derive(Parser)]
#[command(name = "privloc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the localization server over a fingerprint database.
    Serve {
        /// Training CSV (map_id,x,y,mac,rss,device,timestamp).
        #[arg(long)]
        db: String,
        /// Listen address (PRIVLOC_LISTEN overrides).
        #[arg(long, default_value = "127.0.0.1:7100")]
        listen: String,
        /// Drop APs detected in fewer fingerprints than this.
        #[arg(long, default_value_t = 8)]
        min_count: usize,
        /// Missing-AP constant in dBm.
        #[arg(long, default_value_t = V_C)]
        v_c: i32,
    },
    /// Localize one scan against a running server.
    Client {
        #[arg(long)]
        server: String,
        /// Scan CSV (mac,rss).
        #[arg(long)]
        scan: String,
        #[arg(long, default_value = "paillier")]
        scheme: Scheme,
        /// client = baseline (decrypt-all), server = encrypted sorting.
        #[arg(long, default_value = "server")]
        mode: Mode,
        #[arg(long, default_value_t = 2048)]
        key_bits: u64,
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Largest table exponent the generated DGK key supports.
        #[arg(long, default_value_t = DEFAULT_MAX_TABLE_BITS)]
        max_table_bits: u32,
    },
    /// Run the localization benchmark over loopback.
    Bench {
        /// "paper" is 19 fingerprints x 26 APs, 20 trials, 2048-bit keys.
        #[arg(long, default_value = "paper")]
        preset: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        key_bits: Option<u64>,
        #[arg(long)]
        fingerprints: Option<usize>,
        #[arg(long)]
        aps: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<String>,
    },
    /// Generate a synthetic training database (and optionally a scan).
    Gen {
        #[arg(long, default_value_t = 19)]
        fingerprints: usize,
        #[arg(long, default_value_t = 26)]
        aps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: String,
        /// Also write a jittered scan near a random fingerprint.
        #[arg(long)]
        scan_out: Option<String>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<(), Box<dyn std::error::Error>> {
    match Cli::parse().command {
        Command::Serve {
            db,
            listen,
            min_count,
            v_c,
        } => {
            let records = ingest_csv(&db)?;
            let table = build_lookup_table(&records, min_count, v_c)?;
            eprintln!(
                "loaded {} fingerprints x {} APs from {db}",
                table.n_fingerprints(),
                table.n_aps()
            );
            let listen = std::env::var("PRIVLOC_LISTEN").unwrap_or(listen);
            let seed = test_seed();
            let handle = serve(ServeConfig {
                listen,
                table: Arc::new(table),
                metrics_sink: None,
                seed,
            })?;
            eprintln!("listening on {}", handle.addr);
            // serve until killed
            loop {
                std::thread::park();
            }
        }
        Command::Client {
            server,
            scan,
            scheme,
            mode,
            key_bits,
            k,
            max_table_bits,
        } => {
            let scan = read_scan_csv(&scan)?;
            let mut config = ClientConfig::new(server, scheme, mode);
            config.key_bits = key_bits;
            config.k = k;
            config.max_table_bits = max_table_bits;
            config.seed = test_seed();
            let outcome = run_client(config, &scan)?;
            for (x, y) in &outcome.coords {
                println!("{x} {y}");
            }
            eprintln!(
                "{} comparison(s), {} byte(s) sent, {} byte(s) received, {:.1} ms",
                outcome.comparisons,
                outcome.bytes.sent,
                outcome.bytes.received,
                outcome.wall.as_secs_f64() * 1000.0
            );
            Ok(())
        }
        Command::Bench {
            preset,
            trials,
            key_bits,
            fingerprints,
            aps,
            seed,
            out,
        } => {
            if preset != "paper" {
                return Err(format!("unknown preset {preset:?}").into());
            }
            let seed = test_seed().unwrap_or(seed);
            let mut config = BenchConfig::paper_preset(seed);
            if let Some(t) = trials {
                config.trials = t;
            }
            if let Some(b) = key_bits {
                config.key_bits = b;
            }
            if let Some(f) = fingerprints {
                config.fingerprints = f;
            }
            if let Some(a) = aps {
                config.aps = a;
            }
            let report = privloc::net::bench::run_bench(config)?;
            print_summary(&report);
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            if report.any_failed() {
                return Err("one or more bench trials failed".into());
            }
            Ok(())
        }
        Command::Gen {
            fingerprints,
            aps,
            seed,
            out,
            scan_out,
        } => {
            let records = generate_synthetic(fingerprints, aps, seed);
            write_csv(&out, &records)?;
            eprintln!("wrote {} records to {out}", records.len());
            if let Some(scan_path) = scan_out {
                let table = build_lookup_table(&records, 1, V_C)?;
                let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5ca9);
                let row = seed as usize % table.n_fingerprints();
                let scan = synthetic_scan(&table, row, 3, &mut rng);
                write_scan_csv(&scan_path, &scan)?;
                eprintln!(
                    "wrote a scan near fingerprint {:?} to {scan_path}",
                    table.rows[row].coord
                );
            }
            Ok(())
        }
    }
}

fn test_seed() -> Option<u64> {
    std::env::var("PRIVLOC_SEED").ok().and_then(|s| s.parse().ok())
}

fn print_summary(report: &BenchReport) {
    eprintln!(
        "{} trial(s) per cell, {}-bit keys, {} fingerprints x {} APs",
        report.config.trials, report.config.key_bits, report.config.fingerprints, report.config.aps
    );
    for cell in &report.cells {
        eprintln!(
            "  {:8} {:6}  median {:9.1} ms  total {:9.1} ms  setup {:8.1} ms  failed {}",
            cell.scheme.to_string(),
            cell.mode.to_string(),
            cell.median_wall_ms,
            cell.total_wall_ms,
            cell.setup_ms,
            cell.failed_trials
        );
    }
}
