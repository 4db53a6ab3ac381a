//! Newline-delimited JSON framing. One message per line:
//! `{"v":1,"type":"<kind>","sid":"<session>","body":{...}}`. Big integers
//! travel as canonical lowercase hex; ciphertexts as
//! `{scheme, c, kf}` records.

use privloc_he::compare::{CmpMsg1, CmpMsg2, CmpMsg3, CmpMsg4, CmpMsg5, CmpMsg6};
use privloc_he::dgk::DgkPublicKey;
use privloc_he::paillier::PaillierPublicKey;
use privloc_he::{Ciphertext, Scheme};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Read, Write};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;
/// Hard cap on one framed line, including the newline.
pub const MAX_LINE_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("message of {0} bytes exceeds the {MAX_LINE_BYTES}-byte frame limit")]
    Oversize(usize),
    #[error("cannot decode frame at offset {offset}: {detail}")]
    Decode { offset: usize, detail: String },
    #[error("unsupported protocol version {0}")]
    Version(u32),
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which party decrypts and minimizes: `client` is the baseline where every
/// row travels back; `server` sorts encrypted distances in place.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Client,
    Server,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Client => write!(f, "client"),
            Mode::Server => write!(f, "server"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "client" => Ok(Mode::Client),
            "server" => Ok(Mode::Server),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HelloBody {
    pub paillier: PaillierPublicKey,
    pub dgk: DgkPublicKey,
    pub scheme: Scheme,
    pub mode: Mode,
    pub k: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnsBody {
    pub ap_columns: Vec<String>,
    pub l: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanBody {
    pub s2: Vec<Ciphertext>,
    pub s3: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncCoord {
    pub x: Ciphertext,
    pub y: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlainRow {
    pub x: i64,
    pub y: i64,
    pub d2: Ciphertext,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ResultBody {
    /// Server mode: the k winning coordinate pairs, nearest first.
    Server { coords: Vec<EncCoord> },
    /// Client mode: every distance row, coordinates in the plain.
    Client { rows: Vec<PlainRow> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub detail: String,
}

/// Typed payload of one frame.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Hello(HelloBody),
    Columns(ColumnsBody),
    Scan(ScanBody),
    Cmp1(CmpMsg1),
    Cmp2(CmpMsg2),
    Cmp3(CmpMsg3),
    Cmp4(CmpMsg4),
    Cmp5(CmpMsg5),
    Cmp6(CmpMsg6),
    Result(ResultBody),
    Error(ErrorBody),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Hello(_) => "hello",
            Payload::Columns(_) => "columns",
            Payload::Scan(_) => "scan",
            Payload::Cmp1(_) => "cmp1",
            Payload::Cmp2(_) => "cmp2",
            Payload::Cmp3(_) => "cmp3",
            Payload::Cmp4(_) => "cmp4",
            Payload::Cmp5(_) => "cmp5",
            Payload::Cmp6(_) => "cmp6",
            Payload::Result(_) => "result",
            Payload::Error(_) => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub sid: String,
    pub payload: Payload,
}

#[derive(Serialize, Deserialize)]
struct Frame {
    v: u32,
    #[serde(rename = "type")]
    kind: String,
    sid: String,
    body: serde_json::Value,
}

pub fn frame_encode(msg: &Message) -> Result<String, WireError> {
    let body = match &msg.payload {
        Payload::Hello(b) => serde_json::to_value(b),
        Payload::Columns(b) => serde_json::to_value(b),
        Payload::Scan(b) => serde_json::to_value(b),
        Payload::Cmp1(b) => serde_json::to_value(b),
        Payload::Cmp2(b) => serde_json::to_value(b),
        Payload::Cmp3(b) => serde_json::to_value(b),
        Payload::Cmp4(b) => serde_json::to_value(b),
        Payload::Cmp5(b) => serde_json::to_value(b),
        Payload::Cmp6(b) => serde_json::to_value(b),
        Payload::Result(b) => serde_json::to_value(b),
        Payload::Error(b) => serde_json::to_value(b),
    }
    .map_err(|e| WireError::Decode {
        offset: 0,
        detail: e.to_string(),
    })?;
    let frame = Frame {
        v: PROTOCOL_VERSION,
        kind: msg.payload.kind().to_string(),
        sid: msg.sid.clone(),
        body,
    };
    let line = serde_json::to_string(&frame).map_err(|e| WireError::Decode {
        offset: 0,
        detail: e.to_string(),
    })?;
    if line.len() + 1 > MAX_LINE_BYTES {
        return Err(WireError::Oversize(line.len() + 1));
    }
    Ok(line)
}

pub fn frame_decode(line: &str) -> Result<Message, WireError> {
    if line.len() > MAX_LINE_BYTES {
        return Err(WireError::Oversize(line.len()));
    }
    let frame: Frame = serde_json::from_str(line).map_err(|e| WireError::Decode {
        offset: e.column(),
        detail: e.to_string(),
    })?;
    if frame.v != PROTOCOL_VERSION {
        return Err(WireError::Version(frame.v));
    }
    let decode = |e: serde_json::Error| WireError::Decode {
        offset: 0,
        detail: e.to_string(),
    };
    let payload = match frame.kind.as_str() {
        "hello" => Payload::Hello(serde_json::from_value(frame.body).map_err(decode)?),
        "columns" => Payload::Columns(serde_json::from_value(frame.body).map_err(decode)?),
        "scan" => Payload::Scan(serde_json::from_value(frame.body).map_err(decode)?),
        "cmp1" => Payload::Cmp1(serde_json::from_value(frame.body).map_err(decode)?),
        "cmp2" => Payload::Cmp2(serde_json::from_value(frame.body).map_err(decode)?),
        "cmp3" => Payload::Cmp3(serde_json::from_value(frame.body).map_err(decode)?),
        "cmp4" => Payload::Cmp4(serde_json::from_value(frame.body).map_err(decode)?),
        "cmp5" => Payload::Cmp5(serde_json::from_value(frame.body).map_err(decode)?),
        "cmp6" => Payload::Cmp6(serde_json::from_value(frame.body).map_err(decode)?),
        "result" => Payload::Result(serde_json::from_value(frame.body).map_err(decode)?),
        "error" => Payload::Error(serde_json::from_value(frame.body).map_err(decode)?),
        other => return Err(WireError::UnknownType(other.to_string())),
    };
    Ok(Message {
        sid: frame.sid,
        payload,
    })
}

/// Write one framed message and flush.
pub fn write_message<W: Write>(writer: &mut W, msg: &Message) -> Result<(), WireError> {
    let line = frame_encode(msg)?;
    writer.write_all(line.as_bytes())?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

/// Read one framed message; enforces the line cap before parsing. Returns
/// the message and its exact framed length in bytes.
pub fn read_message_with_len<R: BufRead>(reader: &mut R) -> Result<(Message, usize), WireError> {
    let mut line = String::new();
    let n = reader
        .by_ref()
        .take(MAX_LINE_BYTES as u64 + 1)
        .read_line(&mut line)?;
    if n == 0 {
        return Err(WireError::Closed);
    }
    if n > MAX_LINE_BYTES {
        return Err(WireError::Oversize(n));
    }
    frame_decode(line.trim_end_matches('\n')).map(|msg| (msg, n))
}

pub fn read_message<R: BufRead>(reader: &mut R) -> Result<Message, WireError> {
    read_message_with_len(reader).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use privloc_he::KeyFingerprint;

    fn ct(value: u64) -> Ciphertext {
        Ciphertext {
            scheme: Scheme::Paillier,
            value: BigUint::from(value),
            key_fingerprint: KeyFingerprint::from_hex("00112233aabbccdd").unwrap(),
        }
    }

    #[test]
    fn cmp1_roundtrip() {
        let msg = Message {
            sid: "s1.0".into(),
            payload: Payload::Cmp1(CmpMsg1 {
                masked_sum: ct(12345),
            }),
        };
        let line = frame_encode(&msg).unwrap();
        assert!(line.contains("\"type\":\"cmp1\""));
        assert_eq!(frame_decode(&line).unwrap(), msg);
    }

    #[test]
    fn leading_zero_hex_is_rejected() {
        let line = r#"{"v":1,"type":"cmp1","sid":"x","body":{"masked_sum":{"scheme":"paillier","c":"00ff","kf":"00112233aabbccdd"}}}"#;
        match frame_decode(line) {
            Err(WireError::Decode { detail, .. }) => {
                assert!(detail.contains("leading zeros"), "{detail}")
            }
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_type_and_version() {
        let line = r#"{"v":1,"type":"warp","sid":"x","body":{}}"#;
        assert!(matches!(frame_decode(line), Err(WireError::UnknownType(t)) if t == "warp"));
        let line = r#"{"v":2,"type":"cmp1","sid":"x","body":{}}"#;
        assert!(matches!(frame_decode(line), Err(WireError::Version(2))));
    }

    #[test]
    fn malformed_json_reports_offset() {
        match frame_decode("{\"v\":1, nope") {
            Err(WireError::Decode { offset, .. }) => assert!(offset > 0),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn oversize_line_is_rejected() {
        let mut big = String::with_capacity(MAX_LINE_BYTES + 8);
        big.push_str("{\"v\":1,\"type\":\"cmp1\",\"sid\":\"");
        while big.len() <= MAX_LINE_BYTES {
            big.push('a');
        }
        big.push_str("\"}");
        assert!(matches!(frame_decode(&big), Err(WireError::Oversize(_))));
        let mut cursor = std::io::Cursor::new(big.into_bytes());
        assert!(matches!(
            read_message(&mut cursor),
            Err(WireError::Oversize(_))
        ));
    }

    #[test]
    fn result_bodies_tag_by_mode() {
        let server = Message {
            sid: "s".into(),
            payload: Payload::Result(ResultBody::Server {
                coords: vec![EncCoord { x: ct(1), y: ct(2) }],
            }),
        };
        let line = frame_encode(&server).unwrap();
        assert!(line.contains("\"mode\":\"server\""));
        assert_eq!(frame_decode(&line).unwrap(), server);
        let client = Message {
            sid: "s".into(),
            payload: Payload::Result(ResultBody::Client {
                rows: vec![PlainRow {
                    x: -3,
                    y: 4,
                    d2: ct(9),
                }],
            }),
        };
        let line = frame_encode(&client).unwrap();
        assert_eq!(frame_decode(&line).unwrap(), client);
    }

    proptest::proptest! {
        #[test]
        fn frame_roundtrip_holds_for_generated_messages(
            sid in "[a-z0-9.]{1,12}",
            kind in 0usize..5,
            value in proptest::collection::vec(1u64..u64::MAX, 1..6),
            l in 1u32..33,
        ) {
            let cts: Vec<Ciphertext> = value.iter().map(|&v| ct(v)).collect();
            let payload = match kind {
                0 => Payload::Cmp1(CmpMsg1 { masked_sum: cts[0].clone() }),
                1 => Payload::Cmp2(CmpMsg2 { bits: cts.clone(), high: cts[0].clone() }),
                2 => Payload::Cmp3(CmpMsg3 { slots: cts.clone() }),
                3 => Payload::Columns(ColumnsBody {
                    ap_columns: vec!["aa:bb:cc:dd:ee:ff".into()],
                    l,
                }),
                _ => Payload::Cmp6(CmpMsg6 { revealed: BigUint::from(value[0]) }),
            };
            let msg = Message { sid, payload };
            let line = frame_encode(&msg).unwrap();
            proptest::prop_assert_eq!(frame_decode(&line).unwrap(), msg);
        }
    }
}
