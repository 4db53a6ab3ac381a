//! Fingerprint database: CSV ingestion, AP filtering, lookup-table
//! construction with the missing-value constant, and synthetic training
//! data for desk-scale runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Substituted wherever a fingerprint or scan lacks an AP, in dBm.
pub const V_C: i32 = -120;

pub const RSS_MIN: i32 = -120;
pub const RSS_MAX: i32 = 0;

const CSV_HEADER: [&str; 7] = ["map_id", "x", "y", "mac", "rss", "device", "timestamp"];

/// Lowercase colon-separated MAC address, `aa:bb:cc:dd:ee:ff`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MacAddr(String);

impl MacAddr {
    pub fn parse(s: &str) -> Result<Self, String> {
        let bytes = s.as_bytes();
        if bytes.len() != 17 {
            return Err(format!("mac {s:?} must be 17 characters"));
        }
        for (i, &b) in bytes.iter().enumerate() {
            if i % 3 == 2 {
                if b != b':' {
                    return Err(format!("mac {s:?} needs ':' separators"));
                }
            } else if !(b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
                return Err(format!("mac {s:?} must be lowercase hex"));
            }
        }
        Ok(MacAddr(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<String> for MacAddr {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        MacAddr::parse(&s)
    }
}

impl From<MacAddr> for String {
    fn from(mac: MacAddr) -> String {
        mac.0
    }
}

/// One training observation: an AP heard at a mapped location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerprintRecord {
    pub map_id: String,
    pub x: i64,
    pub y: i64,
    pub mac: MacAddr,
    pub rss: i32,
    pub device: String,
    pub timestamp: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("header must be exactly `{}`", CSV_HEADER.join(","))]
    BadHeader,
    #[error("{} malformed line(s): {}", .0.len(), summarize(.0))]
    BadLines(Vec<LineError>),
}

fn summarize(errors: &[LineError]) -> String {
    errors
        .iter()
        .take(3)
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parse a training CSV. Either every row parses or the full list of
/// per-line errors comes back.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Vec<FingerprintRecord>, IngestError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io {
                path: path.display().to_string(),
                source,
            },
            other => IngestError::Io {
                path: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{other:?}")),
            },
        })?;
    match reader.headers() {
        Ok(headers) => {
            let got: Vec<&str> = headers.iter().collect();
            if !got.is_empty() && got != CSV_HEADER {
                return Err(IngestError::BadHeader);
            }
        }
        Err(_) => return Err(IngestError::BadHeader),
    }
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(LineError {
                    line: e.position().map(|p| p.line()).unwrap_or(0),
                    message: "unreadable row".into(),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_record(&row) {
            Ok(record) => records.push(record),
            Err(message) => errors.push(LineError { line, message }),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(IngestError::BadLines(errors))
    }
}

fn parse_record(row: &csv::StringRecord) -> Result<FingerprintRecord, String> {
    if row.len() != CSV_HEADER.len() {
        return Err(format!("expected {} columns, got {}", CSV_HEADER.len(), row.len()));
    }
    let x: i64 = row[1].trim().parse().map_err(|_| format!("bad x {:?}", &row[1]))?;
    let y: i64 = row[2].trim().parse().map_err(|_| format!("bad y {:?}", &row[2]))?;
    let mac = MacAddr::parse(row[3].trim())?;
    let rss: i32 = row[4]
        .trim()
        .parse()
        .map_err(|_| format!("bad rss {:?}", &row[4]))?;
    if !(RSS_MIN..=RSS_MAX).contains(&rss) {
        return Err(format!("rss {rss} outside [{RSS_MIN}, {RSS_MAX}]"));
    }
    Ok(FingerprintRecord {
        map_id: row[0].to_string(),
        x,
        y,
        mac,
        rss,
        device: row[5].to_string(),
        timestamp: row[6].to_string(),
    })
}

/// One preprocessed fingerprint: its coordinates and a fully populated RSS
/// vector aligned to the table's AP columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupRow {
    pub coord: (i64, i64),
    pub rss: Vec<i32>,
}

/// Preprocessed fingerprint matrix. Column order is the canonical scan
/// order for clients; every cell is populated (missing APs carry `v_c`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupTable {
    pub ap_columns: Vec<MacAddr>,
    pub rows: Vec<LookupRow>,
    pub v_c: i32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("no fingerprint records to build from")]
    NoRecords,
    #[error("every AP fell below the detection threshold {0}")]
    AllFiltered(usize),
}

impl LookupTable {
    pub fn n_aps(&self) -> usize {
        self.ap_columns.len()
    }

    pub fn n_fingerprints(&self) -> usize {
        self.rows.len()
    }
}

/// Group records into fingerprints, drop APs detected in fewer than
/// `min_count` fingerprints, and emit the v_c-filled lookup table. Row
/// order follows first appearance in the record stream; columns are the
/// surviving MACs in lexicographic order.
pub fn build_lookup_table(
    records: &[FingerprintRecord],
    min_count: usize,
    v_c: i32,
) -> Result<LookupTable, TableError> {
    if records.is_empty() {
        return Err(TableError::NoRecords);
    }
    // (map_id, x, y) -> per-AP rss; later records win on duplicates
    let mut order: Vec<(String, i64, i64)> = Vec::new();
    let mut groups: HashMap<(String, i64, i64), BTreeMap<MacAddr, i32>> = HashMap::new();
    for record in records {
        let key = (record.map_id.clone(), record.x, record.y);
        let group = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            BTreeMap::new()
        });
        group.insert(record.mac.clone(), record.rss);
    }
    let mut detection: BTreeMap<&MacAddr, usize> = BTreeMap::new();
    for group in groups.values() {
        for mac in group.keys() {
            *detection.entry(mac).or_default() += 1;
        }
    }
    let ap_columns: Vec<MacAddr> = detection
        .iter()
        .filter(|(_, &count)| count >= min_count)
        .map(|(mac, _)| (*mac).clone())
        .collect();
    if ap_columns.is_empty() {
        return Err(TableError::AllFiltered(min_count));
    }
    let rows = order
        .iter()
        .map(|key| {
            let group = &groups[key];
            let rss = ap_columns
                .iter()
                .map(|mac| group.get(mac).copied().unwrap_or(v_c))
                .collect();
            LookupRow {
                coord: (key.1, key.2),
                rss,
            }
        })
        .collect();
    Ok(LookupTable {
        ap_columns,
        rows,
        v_c,
    })
}

/// Deterministic synthetic training set: fingerprints on a grid, APs
/// scattered over the same area, RSS from a log-distance path-loss model
/// `-30 - 10 * 2.5 * log10(dist + 1)` with +-4 dB noise, clamped to
/// [-120, -30].
pub fn generate_synthetic(n_fprints: usize, n_aps: usize, seed: u64) -> Vec<FingerprintRecord> {
    assert!(n_fprints >= 1 && n_aps >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let side = (n_fprints as f64).sqrt().ceil() as i64;
    let spacing = 5i64;
    let extent = (side * spacing) as f64;
    let ap_positions: Vec<(f64, f64)> = (0..n_aps)
        .map(|_| (rng.gen::<f64>() * extent, rng.gen::<f64>() * extent))
        .collect();
    let mut records = Vec::with_capacity(n_fprints * n_aps);
    for i in 0..n_fprints {
        let gx = (i as i64 % side) * spacing;
        let gy = (i as i64 / side) * spacing;
        for (j, &(ax, ay)) in ap_positions.iter().enumerate() {
            let dist = ((gx as f64 - ax).powi(2) + (gy as f64 - ay).powi(2)).sqrt();
            let model = -30.0 - 10.0 * 2.5 * (dist + 1.0).log10();
            let noise = rng.gen_range(-4i32..=4);
            let rss = (model.round() as i32 + noise).clamp(-120, -30);
            records.push(FingerprintRecord {
                map_id: "synthetic-0".into(),
                x: gx,
                y: gy,
                mac: synthetic_mac(j),
                rss,
                device: "synthgen/1.0".into(),
                timestamp: "2017-07-21T10:00:00Z".into(),
            });
        }
    }
    records
}

pub fn synthetic_mac(index: usize) -> MacAddr {
    // locally administered prefix
    MacAddr(format!(
        "02:00:5e:{:02x}:{:02x}:{:02x}",
        (index >> 16) & 0xff,
        (index >> 8) & 0xff,
        index & 0xff
    ))
}

/// Write records in the ingestion CSV format.
pub fn write_csv(path: impl AsRef<Path>, records: &[FingerprintRecord]) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(CSV_HEADER)?;
    for r in records {
        writer.write_record([
            r.map_id.as_str(),
            &r.x.to_string(),
            &r.y.to_string(),
            r.mac.as_str(),
            &r.rss.to_string(),
            r.device.as_str(),
            r.timestamp.as_str(),
        ])?;
    }
    writer.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn ingest_two_rows() {
        let f = write_temp(
            "map_id,x,y,mac,rss,device,timestamp\n\
             floor3,1,2,aa:bb:cc:dd:ee:ff,-40,pixel,2017-07-21T10:00:00Z\n\
             floor3,1,2,aa:bb:cc:dd:ee:01,-60,pixel,2017-07-21T10:00:00Z\n",
        );
        let records = ingest_csv(f.path()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].rss, -40);
        assert_eq!(records[1].mac.as_str(), "aa:bb:cc:dd:ee:01");
    }

    #[test]
    fn ingest_reports_line_numbers() {
        let f = write_temp(
            "map_id,x,y,mac,rss,device,timestamp\n\
             floor3,1,2,aa:bb:cc:dd:ee:ff,-130,pixel,t\n\
             floor3,1,2,not-a-mac,-40,pixel,t\n\
             floor3,1,2,aa:bb:cc:dd:ee:ff,-40,pixel,t\n",
        );
        match ingest_csv(f.path()) {
            Err(IngestError::BadLines(errors)) => {
                assert_eq!(errors.len(), 2);
                assert_eq!(errors[0].line, 2);
                assert!(errors[0].message.contains("-130"));
                assert_eq!(errors[1].line, 3);
                assert!(errors[1].message.contains("not-a-mac"));
            }
            other => panic!("expected line errors, got {other:?}"),
        }
    }

    #[test]
    fn ingest_empty_file_is_empty_list() {
        let f = write_temp("");
        assert!(ingest_csv(f.path()).unwrap().is_empty());
        let f = write_temp("map_id,x,y,mac,rss,device,timestamp\n");
        assert!(ingest_csv(f.path()).unwrap().is_empty());
    }

    #[test]
    fn ingest_rejects_wrong_header() {
        let f = write_temp("a,b,c\n1,2,3\n");
        assert!(matches!(ingest_csv(f.path()), Err(IngestError::BadHeader)));
    }

    #[test]
    fn mac_validation() {
        assert!(MacAddr::parse("aa:bb:cc:dd:ee:ff").is_ok());
        assert!(MacAddr::parse("AA:BB:cc:dd:ee:ff").is_err());
        assert!(MacAddr::parse("aa-bb-cc-dd-ee-ff").is_err());
        assert!(MacAddr::parse("aa:bb:cc:dd:ee").is_err());
        assert!(MacAddr::parse("zz:bb:cc:dd:ee:ff").is_err());
    }

    fn record(loc: (i64, i64), mac_idx: usize, rss: i32) -> FingerprintRecord {
        FingerprintRecord {
            map_id: "m".into(),
            x: loc.0,
            y: loc.1,
            mac: synthetic_mac(mac_idx),
            rss,
            device: "d".into(),
            timestamp: "t".into(),
        }
    }

    #[test]
    fn missing_cells_take_v_c() {
        let records = vec![
            record((0, 0), 0, -40),
            record((0, 0), 1, -50),
            record((5, 0), 0, -45),
            // (5, 0) never sees AP 1
        ];
        let table = build_lookup_table(&records, 1, V_C).unwrap();
        assert_eq!(table.n_aps(), 2);
        assert_eq!(table.rows[0].rss, vec![-40, -50]);
        assert_eq!(table.rows[1].rss, vec![-45, -120]);
    }

    #[test]
    fn single_fingerprint_single_count() {
        let records = vec![record((3, 4), 7, -70), record((3, 4), 2, -60)];
        let table = build_lookup_table(&records, 1, V_C).unwrap();
        assert_eq!(table.n_fingerprints(), 1);
        assert_eq!(table.n_aps(), 2);
        assert_eq!(table.rows[0].coord, (3, 4));
        // columns sort lexicographically: index 2 before index 7
        assert_eq!(table.ap_columns[0], synthetic_mac(2));
    }

    #[test]
    fn filtering_is_monotone_in_min_count() {
        let records = generate_synthetic(8, 12, 99);
        let mut last = usize::MAX;
        for min_count in 1..=8 {
            match build_lookup_table(&records, min_count, V_C) {
                Ok(table) => {
                    assert!(table.n_aps() <= last);
                    last = table.n_aps();
                }
                Err(TableError::AllFiltered(_)) => last = 0,
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn all_filtered_is_an_error() {
        let records = vec![record((0, 0), 0, -40)];
        assert_eq!(
            build_lookup_table(&records, 2, V_C),
            Err(TableError::AllFiltered(2))
        );
    }

    #[test]
    fn synthetic_is_deterministic_and_clamped() {
        let a = generate_synthetic(19, 26, 42);
        let b = generate_synthetic(19, 26, 42);
        assert_eq!(a, b);
        let c = generate_synthetic(19, 26, 43);
        assert_ne!(a, c);
        assert!(a.iter().all(|r| (-120..=-30).contains(&r.rss)));
        // paper-scale shape after an always-pass filter
        let table = build_lookup_table(&a, 1, V_C).unwrap();
        assert_eq!(table.n_fingerprints(), 19);
        assert_eq!(table.n_aps(), 26);
    }

    #[test]
    fn duplicate_observation_takes_latest() {
        let records = vec![record((0, 0), 0, -40), record((0, 0), 0, -55)];
        let table = build_lookup_table(&records, 1, V_C).unwrap();
        assert_eq!(table.rows[0].rss, vec![-55]);
    }

    #[test]
    fn csv_roundtrip() {
        let records = generate_synthetic(4, 3, 7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.csv");
        write_csv(&path, &records).unwrap();
        let back = ingest_csv(&path).unwrap();
        assert_eq!(records, back);
    }

    /// 19 locations and 265 distinct MACs, of which 26 are detected 8-13
    /// times and the rest at most 7: the reported training-set shape.
    fn paper_scale_records() -> Vec<FingerprintRecord> {
        let mut records = Vec::new();
        for ap in 0..265usize {
            let detections = if ap < 26 { 8 + ap % 6 } else { 1 + ap % 7 };
            for hit in 0..detections {
                let loc = ((ap * 7 + hit * 3) % 19) as i64;
                records.push(FingerprintRecord {
                    map_id: "floor3".into(),
                    x: loc,
                    y: 2 * loc,
                    mac: synthetic_mac(ap),
                    rss: -40 - ((ap + hit) % 70) as i32,
                    device: "galaxy-s6-edge".into(),
                    timestamp: "2017-07-21T10:00:00Z".into(),
                });
            }
        }
        records
    }

    #[test]
    fn paper_scale_ingest_counts() {
        let records = paper_scale_records();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("paper.csv");
        write_csv(&path, &records).unwrap();
        let back = ingest_csv(&path).unwrap();
        let locations: std::collections::HashSet<(i64, i64)> =
            back.iter().map(|r| (r.x, r.y)).collect();
        let macs: std::collections::HashSet<&str> =
            back.iter().map(|r| r.mac.as_str()).collect();
        assert_eq!(locations.len(), 19);
        assert_eq!(macs.len(), 265);
    }

    #[test]
    fn paper_scale_filter_keeps_26_columns() {
        let records = paper_scale_records();
        let table = build_lookup_table(&records, 8, V_C).unwrap();
        assert_eq!(table.n_aps(), 26);
        assert_eq!(table.n_fingerprints(), 19);
        assert!(table
            .rows
            .iter()
            .all(|row| row.rss.iter().all(|&r| (-120..=0).contains(&r))));
    }
}
