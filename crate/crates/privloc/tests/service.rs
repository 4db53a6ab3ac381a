//! End-to-end tests of the TCP service: handshake, both localization modes
//! over real sockets, protocol-order enforcement, and concurrent clients.

use privloc::fingerprint::{build_lookup_table, generate_synthetic, V_C};
use privloc::localization::{plaintext_argmin, synthetic_scan};
use privloc::net::client::{run_client, ClientConfig, ClientSession};
use privloc::net::server::{serve, ServeConfig};
use privloc::net::wire::{self, Mode};
use privloc_he::Scheme;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;

fn spawn_server(fingerprints: usize, aps: usize, seed: u64) -> (privloc::net::server::ServerHandle, Arc<privloc::LookupTable>) {
    let records = generate_synthetic(fingerprints, aps, seed);
    let table = Arc::new(build_lookup_table(&records, 1, V_C).unwrap());
    let handle = serve(ServeConfig {
        listen: "127.0.0.1:0".into(),
        table: table.clone(),
        metrics_sink: None,
        seed: Some(seed),
    })
    .unwrap();
    (handle, table)
}

fn client_config(addr: std::net::SocketAddr, scheme: Scheme, mode: Mode, seed: u64) -> ClientConfig {
    let mut config = ClientConfig::new(addr.to_string(), scheme, mode);
    config.key_bits = 512;
    config.seed = Some(seed);
    config
}

#[test]
fn happy_path_all_cells() {
    let (server, table) = spawn_server(4, 3, 21);
    let mut rng = ChaCha20Rng::seed_from_u64(22);
    for scheme in [Scheme::Paillier, Scheme::Dgk] {
        for mode in [Mode::Client, Mode::Server] {
            let scan = synthetic_scan(&table, 1, 2, &mut rng);
            let oracle = plaintext_argmin(&table, &scan);
            let outcome = run_client(
                client_config(server.addr, scheme, mode, 23),
                &scan,
            )
            .unwrap();
            assert_eq!(outcome.coords[0], oracle, "{scheme}/{mode}");
            match mode {
                Mode::Server => {
                    assert_eq!(outcome.comparisons, (table.n_fingerprints() - 1) as u64);
                    assert_eq!(outcome.result_rows, 1);
                    assert_eq!(outcome.result_ciphertexts, 2);
                }
                Mode::Client => {
                    assert_eq!(outcome.comparisons, 0);
                    assert_eq!(outcome.result_rows, table.n_fingerprints());
                }
            }
        }
    }
    server.stop();
}

#[test]
fn repeated_scans_on_one_connection() {
    let (server, table) = spawn_server(3, 3, 31);
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    let mut session =
        ClientSession::connect(client_config(server.addr, Scheme::Paillier, Mode::Server, 33))
            .unwrap();
    for round in 0..3 {
        let scan = synthetic_scan(&table, round % table.n_fingerprints(), 2, &mut rng);
        let oracle = plaintext_argmin(&table, &scan);
        let outcome = session.localize(&scan).unwrap();
        assert_eq!(outcome.coords[0], oracle, "round {round}");
    }
    server.stop();
}

#[test]
fn scan_before_hello_is_rejected() {
    let (server, _table) = spawn_server(3, 3, 41);
    let stream = TcpStream::connect(server.addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    // a syntactically valid scan frame, sent before any hello
    let line = r#"{"v":1,"type":"scan","sid":"x","body":{"s2":[],"s3":{"scheme":"paillier","c":"1","kf":"0011223344556677"}}}"#;
    writer.write_all(line.as_bytes()).unwrap();
    writer.write_all(b"\n").unwrap();
    writer.flush().unwrap();
    let mut reply = String::new();
    reader.read_line(&mut reply).unwrap();
    let msg = wire::frame_decode(reply.trim_end()).unwrap();
    match msg.payload {
        wire::Payload::Error(e) => assert_eq!(e.code, "protocol-order"),
        other => panic!("expected error, got {}", other.kind()),
    }
    // server closes the connection afterwards
    let mut rest = String::new();
    assert_eq!(reader.read_line(&mut rest).unwrap(), 0);
    server.stop();
}

#[test]
fn unknown_message_type_draws_an_error_reply() {
    let (server, _table) = spawn_server(3, 3, 45);
    let stream = TcpStream::connect(server.addr).unwrap();
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    writer
        .write_all(b"{\"v\":1,\"type\":\"warp\",\"sid\":\"x\",\"body\":{}}\n")
        .unwrap();
    writer.flush().unwrap();
    let mut reply = String::new();
    reader.read_line(&mut reply).unwrap();
    let msg = wire::frame_decode(reply.trim_end()).unwrap();
    match msg.payload {
        wire::Payload::Error(e) => assert_eq!(e.code, "unknown-type"),
        other => panic!("expected error, got {}", other.kind()),
    }
    server.stop();
}

#[test]
fn k_too_large_is_rejected_at_hello() {
    let (server, _table) = spawn_server(3, 3, 51);
    let mut config = client_config(server.addr, Scheme::Paillier, Mode::Server, 52);
    config.k = 9;
    let scan = privloc::LocalizationScan::new(vec![]).unwrap();
    let err = run_client(config, &scan).unwrap_err();
    match err {
        privloc::net::client::ClientError::Server { code, .. } => {
            assert_eq!(code, "bad-hello")
        }
        other => panic!("expected server rejection, got {other}"),
    }
    server.stop();
}

#[test]
fn undersized_dgk_space_is_rejected() {
    // 26 APs need l = 20; a client provisioned for l_max = 8 cannot compare
    let (server, _table) = spawn_server(2, 26, 61);
    let mut config = client_config(server.addr, Scheme::Dgk, Mode::Server, 62);
    config.max_table_bits = 8;
    let scan = privloc::LocalizationScan::new(vec![]).unwrap();
    let err = run_client(config, &scan).unwrap_err();
    match err {
        privloc::net::client::ClientError::Server { code, .. } => {
            assert_eq!(code, "plaintext-space")
        }
        other => panic!("expected plaintext-space rejection, got {other}"),
    }
    server.stop();
}

#[test]
fn concurrent_clients_both_complete() {
    let (server, table) = spawn_server(4, 3, 71);
    let addr = server.addr;
    let mut rng = ChaCha20Rng::seed_from_u64(72);
    let scan_a = synthetic_scan(&table, 0, 2, &mut rng);
    let scan_b = synthetic_scan(&table, 3, 2, &mut rng);
    let oracle_a = plaintext_argmin(&table, &scan_a);
    let oracle_b = plaintext_argmin(&table, &scan_b);
    let ta = std::thread::spawn(move || {
        run_client(
            client_config(addr, Scheme::Paillier, Mode::Server, 73),
            &scan_a,
        )
        .unwrap()
    });
    let tb = std::thread::spawn(move || {
        run_client(client_config(addr, Scheme::Dgk, Mode::Server, 74), &scan_b).unwrap()
    });
    assert_eq!(ta.join().unwrap().coords[0], oracle_a);
    assert_eq!(tb.join().unwrap().coords[0], oracle_b);
    server.stop();
}

#[test]
fn hello_frame_roundtrips_with_2048_bit_keys() {
    let mut rng = ChaCha20Rng::seed_from_u64(91);
    let keys = privloc::net::client::generate_keys(Scheme::Dgk, Mode::Server, 2048, 20, &mut rng)
        .unwrap();
    let public = keys.public();
    let msg = wire::Message {
        sid: "h1".into(),
        payload: wire::Payload::Hello(wire::HelloBody {
            paillier: public.paillier.clone(),
            dgk: public.dgk.clone(),
            scheme: Scheme::Dgk,
            mode: Mode::Server,
            k: 1,
        }),
    };
    let line = wire::frame_encode(&msg).unwrap();
    assert_eq!(wire::frame_decode(&line).unwrap(), msg);
}

#[test]
fn bench_smoke_completes_quickly() {
    use privloc::net::bench::{run_bench, BenchConfig};
    let config = BenchConfig {
        fingerprints: 3,
        aps: 3,
        key_bits: 512,
        trials: 1,
        k: 1,
        seed: 92,
        cells: vec![
            (Scheme::Paillier, Mode::Client),
            (Scheme::Paillier, Mode::Server),
            (Scheme::Dgk, Mode::Client),
            (Scheme::Dgk, Mode::Server),
        ],
    };
    let started = std::time::Instant::now();
    let report = run_bench(config).unwrap();
    assert!(!report.any_failed());
    assert_eq!(report.cells.len(), 4);
    assert!(started.elapsed() < std::time::Duration::from_secs(60));
}

#[test]
fn client_mode_row_count_equals_table_size() {
    for n_f in [2usize, 5] {
        let (server, table) = spawn_server(n_f, 3, 80 + n_f as u64);
        let mut rng = ChaCha20Rng::seed_from_u64(81);
        let scan = synthetic_scan(&table, 0, 1, &mut rng);
        let outcome = run_client(
            client_config(server.addr, Scheme::Paillier, Mode::Client, 82),
            &scan,
        )
        .unwrap();
        assert_eq!(outcome.result_rows, n_f);
        server.stop();
    }
}
