//! Nightly sync batches: content, wire framing and sealed location records.
//!
//! A batch travels as UTF-8 text:
//!
//! ```text
//! #carewatch-batch v1
//! batch <pseudonym>/<date>
//! events <n>
//! <n event lines in the core log format, pseudonymous home_ref>
//! location <base64(nonce || ciphertext)> | location -
//! digest <hex SHA-256 of every preceding byte>
//! ```
//!
//! Every line ends with `\n`, including the digest line. The digest covers
//! the payload exactly as sent, so the platform can verify it before parsing
//! the events.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chacha20poly1305::aead::{Aead, KeyInit, Payload as AeadPayload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use carewatch_core::{parse_event, serialize_event, DeviceKind, HomeRef, ParseError, Pseudonym, SensorEvent};

pub const BATCH_HEADER: &str = "#carewatch-batch v1";

const NONCE_DOMAIN: &[u8] = b"carewatch-location-nonce\n";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BatchError {
    #[error("malformed batch: {0}")]
    Malformed(String),
    #[error("batch event: {0}")]
    Event(#[from] ParseError),
    #[error("digest mismatch: batch says {claimed}, payload hashes to {actual}")]
    DigestMismatch { claimed: String, actual: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("location key must be 32 bytes of hex")]
    BadKey,
    #[error("location blob is not valid base64 or too short")]
    BadBlob,
    #[error("location blob failed authentication")]
    Authentication,
    #[error("decrypted location record: {0}")]
    Record(#[from] ParseError),
}

/// Symmetric key for the location records of one subject. Only the
/// location-analysis role holds it; the platform never does.
#[derive(Clone, PartialEq, Eq)]
pub struct LocationKey([u8; 32]);

impl LocationKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn generate() -> Self {
        Self(rand::random())
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let bytes = hex::decode(s.trim()).map_err(|_| CryptoError::BadKey)?;
        Ok(Self(bytes.try_into().map_err(|_| CryptoError::BadKey)?))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl std::fmt::Debug for LocationKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("LocationKey(..)")
    }
}

/// Platform response to an ingested batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IngestAck {
    Accepted,
    /// Byte-identical resend of a stored batch; nothing changed.
    Duplicate,
}

/// `<pseudonym>/<date>`.
pub fn batch_id(pseudonym: &Pseudonym, date: NaiveDate) -> String {
    format!("{pseudonym}/{date}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One subject-day of pseudonymized events.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncBatch {
    pub pseudonym: Pseudonym,
    pub date: NaiveDate,
    /// Sorted by device, then timestamp. Never contains location fixes.
    pub events: Vec<SensorEvent>,
    /// `nonce || ciphertext` of the day's location fixes.
    pub location: Option<Vec<u8>>,
}

impl SyncBatch {
    /// Assembles a batch from one day of home-labeled events: relabels them,
    /// orders them and seals any location fixes under `key`.
    pub fn assemble(
        pseudonym: &Pseudonym,
        date: NaiveDate,
        events: impl IntoIterator<Item = SensorEvent>,
        key: Option<&LocationKey>,
    ) -> Result<Self, MissingKey> {
        let label = HomeRef::Pseudonym(pseudonym.clone());
        let (mut fixes, mut events): (Vec<SensorEvent>, Vec<SensorEvent>) = events
            .into_iter()
            .map(|e| e.with_home_ref(label.clone()))
            .partition(|e| e.kind == DeviceKind::LocationSource);
        events.sort_by(|a, b| a.device_id.cmp(&b.device_id).then(a.timestamp.cmp(&b.timestamp)));
        let location = if fixes.is_empty() {
            None
        } else {
            let key = key.ok_or(MissingKey)?;
            fixes.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device_id.cmp(&b.device_id)));
            Some(seal(key, &batch_id(pseudonym, date), &fixes))
        };
        Ok(Self { pseudonym: pseudonym.clone(), date, events, location })
    }

    pub fn id(&self) -> String {
        batch_id(&self.pseudonym, self.date)
    }

    /// Everything the digest covers.
    pub fn payload(&self) -> String {
        let mut out = format!("{BATCH_HEADER}\nbatch {}\nevents {}\n", self.id(), self.events.len());
        for e in &self.events {
            out.push_str(&serialize_event(e));
            out.push('\n');
        }
        match &self.location {
            Some(blob) => out.push_str(&format!("location {}\n", B64.encode(blob))),
            None => out.push_str("location -\n"),
        }
        out
    }

    pub fn digest(&self) -> String {
        sha256_hex(self.payload().as_bytes())
    }

    /// The wire frame: payload plus digest line.
    pub fn encode(&self) -> String {
        let payload = self.payload();
        let digest = sha256_hex(payload.as_bytes());
        format!("{payload}digest {digest}\n")
    }

    /// Parses and verifies a frame. Returns the batch and its digest.
    pub fn decode(frame: &str) -> Result<(Self, String), BatchError> {
        let bad = |m: &str| BatchError::Malformed(m.to_owned());
        let body = frame.strip_suffix('\n').ok_or_else(|| bad("frame must end with a newline"))?;
        let (payload, digest_line) = match body.rfind('\n') {
            Some(i) => (&frame[..=i], &body[i + 1..]),
            None => return Err(bad("frame has no payload")),
        };
        let claimed = digest_line.strip_prefix("digest ").ok_or_else(|| bad("last line must be the digest"))?;
        let actual = sha256_hex(payload.as_bytes());
        if claimed != actual {
            return Err(BatchError::DigestMismatch { claimed: claimed.to_owned(), actual });
        }

        let mut lines = payload.lines();
        if lines.next() != Some(BATCH_HEADER) {
            return Err(bad("missing batch header"));
        }
        let id = lines.next().and_then(|l| l.strip_prefix("batch ")).ok_or_else(|| bad("missing batch line"))?;
        let (pseudonym, date) = id.rsplit_once('/').ok_or_else(|| bad("batch id is not <pseudonym>/<date>"))?;
        let date: NaiveDate = date.parse().map_err(|_| bad("batch date is not YYYY-MM-DD"))?;
        let pseudonym = Pseudonym::new(pseudonym);
        let n: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("events "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing event count"))?;
        let mut events = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("fewer events than announced"))?;
            let e = parse_event(line)?;
            if e.home_ref != HomeRef::Pseudonym(pseudonym.clone()) {
                return Err(bad("event not labeled with the batch pseudonym"));
            }
            if e.kind == DeviceKind::LocationSource {
                return Err(bad("cleartext location fix in batch"));
            }
            events.push(e);
        }
        if events.windows(2).any(|w| (&w[0].device_id, w[0].timestamp) > (&w[1].device_id, w[1].timestamp)) {
            return Err(bad("events not sorted by device and timestamp"));
        }
        let location = match lines.next().and_then(|l| l.strip_prefix("location ")) {
            Some("-") => None,
            Some(b) => Some(B64.decode(b).map_err(|_| bad("location blob is not base64"))?),
            None => return Err(bad("missing location line")),
        };
        if lines.next().is_some() {
            return Err(bad("trailing lines after location"));
        }
        Ok((Self { pseudonym, date, events, location }, actual))
    }
}

/// Location fixes exist but no key was provided.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("location fixes present but no location key configured")]
pub struct MissingKey;

/// Seals fixes with ChaCha20-Poly1305, authenticating the batch id. The nonce
/// is derived from the batch id and the plaintext, so rebuilding a batch
/// yields identical bytes and distinct plaintexts never share a nonce.
fn seal(key: &LocationKey, batch_id: &str, fixes: &[SensorEvent]) -> Vec<u8> {
    let plaintext: String = fixes.iter().map(|e| serialize_event(e) + "\n").collect();
    let mut h = Sha256::new();
    h.update(NONCE_DOMAIN);
    h.update(batch_id.as_bytes());
    h.update(b"\n");
    h.update(plaintext.as_bytes());
    let nonce_bytes: [u8; 12] = h.finalize()[..12].try_into().expect("12 bytes");
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key.0));
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce_bytes), AeadPayload { msg: plaintext.as_bytes(), aad: batch_id.as_bytes() })
        .expect("encryption of an in-memory buffer");
    let mut out = nonce_bytes.to_vec();
    out.extend(ct);
    out
}

/// Decrypts a location blob from batch `batch_id`.
pub fn open_location(key: &LocationKey, batch_id: &str, blob: &[u8]) -> Result<Vec<SensorEvent>, CryptoError> {
    if blob.len() < 12 + 16 {
        return Err(CryptoError::BadBlob);
    }
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key.0));
    let pt = cipher
        .decrypt(Nonce::from_slice(&blob[..12]), AeadPayload { msg: &blob[12..], aad: batch_id.as_bytes() })
        .map_err(|_| CryptoError::Authentication)?;
    let text = String::from_utf8(pt).map_err(|_| CryptoError::BadBlob)?;
    Ok(text.lines().map(parse_event).collect::<Result<_, _>>()?)
}

/// Decrypts a base64 blob as served by the platform query API.
pub fn open_location_b64(key: &LocationKey, batch_id: &str, blob: &str) -> Result<Vec<SensorEvent>, CryptoError> {
    let bytes = B64.decode(blob).map_err(|_| CryptoError::BadBlob)?;
    open_location(key, batch_id, &bytes)
}

pub(crate) fn encode_b64(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use carewatch_core::{BinaryState, DeviceId, HomeId, LocationFix, Payload};

    fn ev(dev: &str, t: i64, kind: DeviceKind, payload: Payload) -> SensorEvent {
        SensorEvent {
            device_id: DeviceId::new(dev),
            home_ref: HomeRef::Home(HomeId::new("home-7")),
            timestamp: t,
            kind,
            payload,
        }
    }

    fn day() -> Vec<SensorEvent> {
        vec![
            ev("pir-hall", 1_700_000_100, DeviceKind::MotionPir, Payload::Binary(BinaryState::On)),
            ev("door-entrance", 1_700_000_050, DeviceKind::EntranceDoorContact, Payload::Binary(BinaryState::Open)),
            ev(
                "phone-location",
                1_700_000_060,
                DeviceKind::LocationSource,
                Payload::Location(LocationFix { lat: 45.4642, lon: 9.19, accuracy_m: 12.5 }),
            ),
            ev("pir-hall", 1_700_000_000, DeviceKind::MotionPir, Payload::Binary(BinaryState::On)),
        ]
    }

    #[test]
    fn frame_round_trip_and_ordering() {
        let key = LocationKey::from_bytes([7; 32]);
        let p = Pseudonym::new("3f2a");
        let date = NaiveDate::from_ymd_opt(2023, 11, 14).unwrap();
        let b = SyncBatch::assemble(&p, date, day(), Some(&key)).unwrap();
        assert_eq!(b.events.len(), 3);
        assert_eq!(b.events[0].device_id.as_str(), "door-entrance");
        assert!(b.events[1].timestamp < b.events[2].timestamp);
        let frame = b.encode();
        assert!(!frame.contains("home-7") && !frame.contains("45.4642"));
        let (back, digest) = SyncBatch::decode(&frame).unwrap();
        assert_eq!(back, b);
        assert_eq!(digest, b.digest());
        let fixes = open_location(&key, &b.id(), b.location.as_ref().unwrap()).unwrap();
        assert_eq!(fixes.len(), 1);
        assert_eq!(fixes[0].payload, day()[2].payload);

        // Deterministic rebuild.
        assert_eq!(SyncBatch::assemble(&p, date, day(), Some(&key)).unwrap().encode(), frame);
    }

    #[test]
    fn tampering_is_detected() {
        let key = LocationKey::from_bytes([1; 32]);
        let b = SyncBatch::assemble(&Pseudonym::new("p"), NaiveDate::MIN, day(), Some(&key)).unwrap();
        let frame = b.encode().replace("binary:on", "binary:off");
        assert!(matches!(SyncBatch::decode(&frame), Err(BatchError::DigestMismatch { .. })));
        assert!(matches!(SyncBatch::decode("garbage"), Err(BatchError::Malformed(_))));

        let other = LocationKey::from_bytes([2; 32]);
        let blob = b.location.as_ref().unwrap();
        assert_eq!(open_location(&other, &b.id(), blob), Err(CryptoError::Authentication));
        assert_eq!(open_location(&key, "p/2020-01-01", blob), Err(CryptoError::Authentication));
    }

    #[test]
    fn fixes_need_a_key() {
        assert_eq!(SyncBatch::assemble(&Pseudonym::new("p"), NaiveDate::MIN, day(), None), Err(MissingKey));
        let no_fix: Vec<_> = day().into_iter().filter(|e| e.kind != DeviceKind::LocationSource).collect();
        let b = SyncBatch::assemble(&Pseudonym::new("p"), NaiveDate::MIN, no_fix, None).unwrap();
        assert!(b.location.is_none() && b.encode().contains("\nlocation -\n"));
    }

    #[test]
    fn key_hex_round_trip() {
        let k = LocationKey::generate();
        assert_eq!(LocationKey::from_hex(&k.to_hex()).unwrap(), k);
        assert_eq!(LocationKey::from_hex("abcd"), Err(CryptoError::BadKey));
    }
}
