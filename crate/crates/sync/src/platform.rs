//! Telemedicine platform: idempotent batch ingestion into a file-backed,
//! pseudonymized store, the pseudonym registry with audited
//! re-identification, and the query side used by analysis and the dashboard.
//!
//! On-disk layout under the platform root:
//!
//! ```text
//! registry.json                      pseudonym records
//! batches.jsonl                      one line per accepted batch
//! audit.jsonl                        one line per re-identification call
//! data/<pseudonym>/<date>.events     partition events, core log format
//! data/<pseudonym>/<date>.location   sealed location blob, base64
//! results/<pseudonym>/v<NNNN>.json   analysis result versions
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::info;

use carewatch_analysis::{analyze, read_table, ChangeReport, FeatureSeries, ThresholdError, Thresholds, WindowFlag};
use carewatch_core::{
    read_log, time::days_from_epoch, write_log, DeviceKind, HomeId, Pseudonym, SensorEvent, Timestamp, DAY_SECONDS,
};

use crate::batch::{encode_b64, BatchError, IngestAck, SyncBatch};
use crate::gateway::{write_atomic, Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Clinician,
    Analyst,
    LocationAnalysis,
    Gateway,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credential {
    /// Recorded in the audit log.
    pub name: String,
    pub role: Role,
}

/// Static bearer tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Credentials(pub BTreeMap<String, Credential>);

impl Credentials {
    pub fn with(mut self, token: &str, name: &str, role: Role) -> Self {
        self.0.insert(token.to_owned(), Credential { name: name.to_owned(), role });
        self
    }

    pub fn lookup(&self, token: &str) -> Option<&Credential> {
        self.0.get(token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Identity {
    /// Placeholder name.
    pub name: String,
    pub home_id: HomeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudonymRecord {
    pub pseudonym: Pseudonym,
    pub identity: Identity,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: String,
    pub pseudonym: Pseudonym,
    pub date: NaiveDate,
    pub digest: String,
    pub received_at: Timestamp,
    pub events: u64,
    pub has_location: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditOutcome {
    Resolved,
    Denied,
    UnknownPseudonym,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub caller: String,
    pub role: Role,
    pub pseudonym: Pseudonym,
    pub at: Timestamp,
    pub outcome: AuditOutcome,
}

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("missing or unknown credential")]
    Unauthorized,
    #[error("role {role:?} may not {action}")]
    Forbidden { role: Role, action: &'static str },
    #[error("re-identification denied for role {0:?}")]
    Denied(Role),
    #[error("unknown pseudonym `{0}`")]
    UnknownPseudonym(Pseudonym),
    #[error("identity for home `{0}` is already registered")]
    AlreadyRegistered(HomeId),
    #[error("digest mismatch for batch {batch}")]
    DigestMismatch { batch: String },
    #[error("malformed batch: {0}")]
    MalformedBatch(String),
    #[error("malformed results: {0}")]
    MalformedResults(String),
    #[error("invalid time range {from}..{to}")]
    InvalidRange { from: Timestamp, to: Timestamp },
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(#[from] ThresholdError),
    #[error("no analysis results for `{0}`")]
    NoResults(Pseudonym),
    #[error("storage: {0}")]
    Storage(String),
}

impl From<io::Error> for PlatformError {
    fn from(e: io::Error) -> Self {
        PlatformError::Storage(e.to_string())
    }
}

impl PlatformError {
    /// Machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            PlatformError::Unauthorized => "unauthorized",
            PlatformError::Forbidden { .. } => "forbidden",
            PlatformError::Denied(_) => "denied",
            PlatformError::UnknownPseudonym(_) => "unknown-pseudonym",
            PlatformError::AlreadyRegistered(_) => "already-registered",
            PlatformError::DigestMismatch { .. } => "digest-mismatch",
            PlatformError::MalformedBatch(_) => "malformed-batch",
            PlatformError::MalformedResults(_) => "malformed-results",
            PlatformError::InvalidRange { .. } => "invalid-range",
            PlatformError::InvalidThresholds(_) => "invalid-thresholds",
            PlatformError::NoResults(_) => "no-results",
            PlatformError::Storage(_) => "storage",
        }
    }
}

/// Selection for [`Platform::query_events`]. `to` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventQuery {
    pub from: Timestamp,
    pub to: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinds: Option<BTreeSet<DeviceKind>>,
    #[serde(default)]
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl EventQuery {
    pub fn range(from: Timestamp, to: Timestamp) -> Self {
        Self { from, to, kinds: None, offset: 0, limit: None }
    }

    fn wants(&self, kind: DeviceKind) -> bool {
        self.kinds.as_ref().is_none_or(|k| k.contains(&kind))
    }
}

/// A sealed location record as served to any reader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationBlob {
    pub batch_id: String,
    pub date: NaiveDate,
    /// Base64 of `nonce || ciphertext`.
    pub ciphertext: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventPage {
    pub pseudonym: Pseudonym,
    /// Matching events before paging.
    pub total: usize,
    pub events: Vec<SensorEvent>,
    pub location_blobs: Vec<LocationBlob>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_offset: Option<usize>,
}

/// What the analysis pipeline stores per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResults {
    /// Feature table text, subject column set to the pseudonym.
    pub features: String,
    pub thresholds: Thresholds,
    pub windows: Vec<WindowFlag>,
    pub reports: Vec<ChangeReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredResults {
    pub pseudonym: Pseudonym,
    pub version: u32,
    pub stored_at: Timestamp,
    pub results: AnalysisResults,
}

/// Threshold overrides for what-if re-scoring; unset fields keep the stored
/// values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_effect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persistence: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_days: Option<u32>,
}

impl ThresholdOverrides {
    pub fn apply(&self, base: &Thresholds) -> Thresholds {
        Thresholds {
            alpha: self.alpha.unwrap_or(base.alpha),
            min_effect: self.min_effect.unwrap_or(base.min_effect),
            persistence: self.persistence.unwrap_or(base.persistence),
            window_days: self.window_days.unwrap_or(base.window_days),
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescored {
    pub pseudonym: Pseudonym,
    /// Stored version the features came from.
    pub version: u32,
    pub thresholds: Thresholds,
    pub windows: Vec<WindowFlag>,
    pub reports: Vec<ChangeReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub pseudonym: Pseudonym,
    pub days: usize,
    pub events: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_received_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latest_results: Option<u32>,
}

#[derive(Default)]
struct State {
    registry: BTreeMap<Pseudonym, PseudonymRecord>,
    batches: BTreeMap<String, BatchRecord>,
    latest_results: BTreeMap<Pseudonym, u32>,
    audit_rows: u64,
}

pub struct Platform {
    root: PathBuf,
    credentials: Credentials,
    state: RwLock<State>,
}

fn now() -> Timestamp {
    chrono::Utc::now().timestamp()
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PlatformError> {
    match fs::read_to_string(path) {
        Ok(text) => text
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| PlatformError::Storage(format!("{}: {e}", path.display()))))
            .collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

fn append_jsonl<T: Serialize>(path: &Path, row: &T) -> Result<(), PlatformError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(row).expect("row serializes"))?;
    f.sync_data()?;
    Ok(())
}

fn require(cred: Option<&Credential>, allowed: &[Role], action: &'static str) -> Result<Role, PlatformError> {
    let cred = cred.ok_or(PlatformError::Unauthorized)?;
    if allowed.contains(&cred.role) {
        Ok(cred.role)
    } else {
        Err(PlatformError::Forbidden { role: cred.role, action })
    }
}

const READERS: [Role; 3] = [Role::Clinician, Role::Analyst, Role::LocationAnalysis];

impl Platform {
    /// Opens or creates the store at `root`.
    pub fn open(root: impl Into<PathBuf>, credentials: Credentials) -> Result<Self, PlatformError> {
        let root = root.into();
        fs::create_dir_all(root.join("data"))?;
        fs::create_dir_all(root.join("results"))?;
        let mut state = State::default();
        if let Ok(text) = fs::read_to_string(root.join("registry.json")) {
            let records: Vec<PseudonymRecord> =
                serde_json::from_str(&text).map_err(|e| PlatformError::Storage(e.to_string()))?;
            state.registry = records.into_iter().map(|r| (r.pseudonym.clone(), r)).collect();
        }
        for b in read_jsonl::<BatchRecord>(&root.join("batches.jsonl"))? {
            state.batches.insert(b.batch_id.clone(), b);
        }
        state.audit_rows = read_jsonl::<AuditRow>(&root.join("audit.jsonl"))?.len() as u64;
        for p in state.registry.keys() {
            let dir = root.join("results").join(p.as_str());
            if let Some(v) = result_versions(&dir)?.last() {
                state.latest_results.insert(p.clone(), *v);
            }
        }
        Ok(Self { root, credentials, state: RwLock::new(state) })
    }

    pub fn credential(&self, token: &str) -> Option<&Credential> {
        self.credentials.lookup(token)
    }

    fn partition_dir(&self, p: &Pseudonym) -> PathBuf {
        self.root.join("data").join(p.as_str())
    }

    fn known(state: &State, p: &Pseudonym) -> Result<(), PlatformError> {
        if state.registry.contains_key(p) {
            Ok(())
        } else {
            Err(PlatformError::UnknownPseudonym(p.clone()))
        }
    }

    /// Ingests one encoded batch. Identical resends are acknowledged as
    /// duplicates; a different payload under a known batch id is rejected.
    pub fn ingest(&self, cred: Option<&Credential>, frame: &str) -> Result<IngestAck, PlatformError> {
        require(cred, &[Role::Gateway], "ingest batches")?;
        let (batch, digest) = SyncBatch::decode(frame).map_err(|e| match e {
            BatchError::DigestMismatch { .. } => PlatformError::DigestMismatch { batch: batch_id_hint(frame) },
            other => PlatformError::MalformedBatch(other.to_string()),
        })?;
        let id = batch.id();
        let mut state = self.state.write().expect("platform lock");
        Self::known(&state, &batch.pseudonym)?;
        if let Some(prev) = state.batches.get(&id) {
            return if prev.digest == digest {
                Ok(IngestAck::Duplicate)
            } else {
                Err(PlatformError::DigestMismatch { batch: id })
            };
        }
        let dir = self.partition_dir(&batch.pseudonym);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(format!("{}.events", batch.date)), write_log(&batch.events).as_bytes())?;
        if let Some(blob) = &batch.location {
            write_atomic(&dir.join(format!("{}.location", batch.date)), encode_b64(blob).as_bytes())?;
        }
        let record = BatchRecord {
            batch_id: id.clone(),
            pseudonym: batch.pseudonym.clone(),
            date: batch.date,
            digest,
            received_at: now(),
            events: batch.events.len() as u64,
            has_location: batch.location.is_some(),
        };
        append_jsonl(&self.root.join("batches.jsonl"), &record)?;
        info!(batch = %id, events = record.events, "accepted");
        state.batches.insert(id, record);
        Ok(IngestAck::Accepted)
    }

    /// Registers a subject under a fresh random 128-bit pseudonym.
    pub fn register(&self, cred: Option<&Credential>, identity: Identity) -> Result<Pseudonym, PlatformError> {
        require(cred, &[Role::Clinician], "register subjects")?;
        let mut state = self.state.write().expect("platform lock");
        if state.registry.values().any(|r| r.identity.home_id == identity.home_id) {
            return Err(PlatformError::AlreadyRegistered(identity.home_id));
        }
        let pseudonym = loop {
            let p = Pseudonym::new(format!("{:032x}", rand::random::<u128>()));
            if !state.registry.contains_key(&p) {
                break p;
            }
        };
        state
            .registry
            .insert(pseudonym.clone(), PseudonymRecord { pseudonym: pseudonym.clone(), identity, created_at: now() });
        let records: Vec<&PseudonymRecord> = state.registry.values().collect();
        write_atomic(&self.root.join("registry.json"), &serde_json::to_vec_pretty(&records).expect("registry"))?;
        Ok(pseudonym)
    }

    /// Returns the identity behind a pseudonym to clinicians. Every call,
    /// granted or not, appends one audit row.
    pub fn resolve_identity(
        &self,
        cred: Option<&Credential>,
        pseudonym: &Pseudonym,
    ) -> Result<Identity, PlatformError> {
        let cred = cred.ok_or(PlatformError::Unauthorized)?;
        let mut state = self.state.write().expect("platform lock");
        let (outcome, result) = if cred.role != Role::Clinician {
            (AuditOutcome::Denied, Err(PlatformError::Denied(cred.role)))
        } else {
            match state.registry.get(pseudonym) {
                Some(r) => (AuditOutcome::Resolved, Ok(r.identity.clone())),
                None => (AuditOutcome::UnknownPseudonym, Err(PlatformError::UnknownPseudonym(pseudonym.clone()))),
            }
        };
        let row =
            AuditRow { caller: cred.name.clone(), role: cred.role, pseudonym: pseudonym.clone(), at: now(), outcome };
        append_jsonl(&self.root.join("audit.jsonl"), &row)?;
        state.audit_rows += 1;
        result
    }

    pub fn audit_log(&self) -> Result<Vec<AuditRow>, PlatformError> {
        let _guard = self.state.read().expect("platform lock");
        read_jsonl(&self.root.join("audit.jsonl"))
    }

    pub fn audit_rows(&self) -> u64 {
        self.state.read().expect("platform lock").audit_rows
    }

    pub fn subjects(&self, cred: Option<&Credential>) -> Result<Vec<SubjectSummary>, PlatformError> {
        require(cred, &READERS, "list subjects")?;
        let state = self.state.read().expect("platform lock");
        Ok(state
            .registry
            .keys()
            .map(|p| {
                let batches: Vec<&BatchRecord> = state.batches.values().filter(|b| &b.pseudonym == p).collect();
                SubjectSummary {
                    pseudonym: p.clone(),
                    days: batches.len(),
                    events: batches.iter().map(|b| b.events).sum(),
                    last_received_at: batches.iter().map(|b| b.received_at).max(),
                    latest_results: state.latest_results.get(p).copied(),
                }
            })
            .collect())
    }

    /// Accepted batches of one subject.
    pub fn batches(&self, pseudonym: &Pseudonym) -> Vec<BatchRecord> {
        let state = self.state.read().expect("platform lock");
        state.batches.values().filter(|b| &b.pseudonym == pseudonym).cloned().collect()
    }

    /// Subjects whose last accepted batch is older than `max_silence_s`, or
    /// who never synced: the platform-side view of unreachable gateways.
    pub fn silent_gateways(&self, now: Timestamp, max_silence_s: i64) -> Vec<Pseudonym> {
        let state = self.state.read().expect("platform lock");
        state
            .registry
            .keys()
            .filter(|p| {
                let last = state.batches.values().filter(|b| &b.pseudonym == *p).map(|b| b.received_at).max();
                last.is_none_or(|t| now - t > max_silence_s)
            })
            .cloned()
            .collect()
    }

    /// Time-ordered events of one subject. Location fixes are never
    /// returned in clear; the sealed blobs of every partition that may
    /// overlap the range are attached instead.
    pub fn query_events(
        &self,
        cred: Option<&Credential>,
        pseudonym: &Pseudonym,
        q: &EventQuery,
    ) -> Result<EventPage, PlatformError> {
        require(cred, &READERS, "query events")?;
        if q.from > q.to {
            return Err(PlatformError::InvalidRange { from: q.from, to: q.to });
        }
        let state = self.state.read().expect("platform lock");
        Self::known(&state, pseudonym)?;
        let empty = EventPage {
            pseudonym: pseudonym.clone(),
            total: 0,
            events: Vec::new(),
            location_blobs: Vec::new(),
            next_offset: None,
        };
        if q.from == q.to {
            return Ok(empty);
        }
        let dir = self.partition_dir(pseudonym);
        let mut events = Vec::new();
        let mut blobs = Vec::new();
        for b in state.batches.values().filter(|b| &b.pseudonym == pseudonym) {
            // Partition dates are local; allow a day of clock offset each side.
            let day0 = days_from_epoch(b.date) * DAY_SECONDS;
            if day0 + 2 * DAY_SECONDS <= q.from || day0 - DAY_SECONDS >= q.to {
                continue;
            }
            let text = fs::read_to_string(dir.join(format!("{}.events", b.date)))?;
            let part = read_log(&text).map_err(|e| PlatformError::Storage(e.to_string()))?;
            events.extend(part.into_iter().filter(|e| (q.from..q.to).contains(&e.timestamp) && q.wants(e.kind)));
            if b.has_location && q.wants(DeviceKind::LocationSource) {
                let ciphertext = fs::read_to_string(dir.join(format!("{}.location", b.date)))?;
                blobs.push(LocationBlob { batch_id: b.batch_id.clone(), date: b.date, ciphertext });
            }
        }
        events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device_id.cmp(&b.device_id)));
        let total = events.len();
        let start = q.offset.min(total);
        let end = q.limit.map_or(total, |l| start.saturating_add(l).min(total));
        let next_offset = (end < total).then_some(end);
        Ok(EventPage { events: events.drain(start..end).collect(), total, location_blobs: blobs, next_offset, ..empty })
    }

    /// Appends a new result version.
    pub fn store_results(
        &self,
        cred: Option<&Credential>,
        pseudonym: &Pseudonym,
        results: AnalysisResults,
    ) -> Result<u32, PlatformError> {
        require(cred, &[Role::Analyst, Role::Clinician], "store results")?;
        let rows = read_table(&results.features).map_err(|e| PlatformError::MalformedResults(e.to_string()))?;
        if rows.iter().any(|r| r.subject != pseudonym.as_str()) {
            return Err(PlatformError::MalformedResults("feature table subject is not the pseudonym".into()));
        }
        if results.reports.iter().any(|r| r.subject != pseudonym.as_str()) {
            return Err(PlatformError::MalformedResults("report subject is not the pseudonym".into()));
        }
        let mut state = self.state.write().expect("platform lock");
        Self::known(&state, pseudonym)?;
        let version = state.latest_results.get(pseudonym).map_or(1, |v| v + 1);
        let stored = StoredResults { pseudonym: pseudonym.clone(), version, stored_at: now(), results };
        let dir = self.root.join("results").join(pseudonym.as_str());
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(format!("v{version:04}.json")), &serde_json::to_vec(&stored).expect("results"))?;
        state.latest_results.insert(pseudonym.clone(), version);
        Ok(version)
    }

    /// Latest (or the given) result version, restricted to `range` when set.
    /// `None` when the subject has no results.
    pub fn query_results(
        &self,
        cred: Option<&Credential>,
        pseudonym: &Pseudonym,
        range: Option<(NaiveDate, NaiveDate)>,
        version: Option<u32>,
    ) -> Result<Option<StoredResults>, PlatformError> {
        require(cred, &READERS, "query results")?;
        let state = self.state.read().expect("platform lock");
        Self::known(&state, pseudonym)?;
        let Some(v) = version.or_else(|| state.latest_results.get(pseudonym).copied()) else { return Ok(None) };
        let path = self.root.join("results").join(pseudonym.as_str()).join(format!("v{v:04}.json"));
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let mut stored: StoredResults =
            serde_json::from_str(&text).map_err(|e| PlatformError::Storage(e.to_string()))?;
        if let Some((from, to)) = range {
            let r = &mut stored.results;
            // Filter rows textually so the column header survives an empty range.
            let mut kept = String::new();
            for (i, line) in r.features.lines().enumerate() {
                let date = line.split('\t').next().and_then(|d| d.parse::<NaiveDate>().ok());
                if i < 2 || date.is_some_and(|d| (from..=to).contains(&d)) {
                    kept.push_str(line);
                    kept.push('\n');
                }
            }
            r.features = kept;
            r.windows.retain(|w| w.start <= to && w.end >= from);
            r.reports.retain(|x| x.start <= to && x.end >= from);
        }
        Ok(Some(stored))
    }

    /// Re-runs change detection on the stored features of the latest version
    /// with overridden thresholds. Nothing is persisted.
    pub fn rescore(
        &self,
        cred: Option<&Credential>,
        pseudonym: &Pseudonym,
        overrides: &ThresholdOverrides,
    ) -> Result<Rescored, PlatformError> {
        require(cred, &READERS, "re-score")?;
        let stored = self
            .query_results(cred, pseudonym, None, None)?
            .ok_or_else(|| PlatformError::NoResults(pseudonym.clone()))?;
        let thresholds = overrides.apply(&stored.results.thresholds);
        thresholds.validate()?;
        let rows = read_table(&stored.results.features).map_err(|e| PlatformError::Storage(e.to_string()))?;
        let series = FeatureSeries::from_vectors(pseudonym.as_str(), &rows);
        let res = analyze(&series, &thresholds)?;
        Ok(Rescored {
            pseudonym: pseudonym.clone(),
            version: stored.version,
            thresholds,
            windows: res.windows,
            reports: res.reports,
        })
    }

    /// Events stored for a subject, summed over accepted batches.
    pub fn event_count(&self, pseudonym: &Pseudonym) -> u64 {
        self.batches(pseudonym).iter().map(|b| b.events).sum()
    }
}

fn result_versions(dir: &Path) -> Result<Vec<u32>, PlatformError> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        if let Some(v) =
            name.to_string_lossy().strip_prefix('v').and_then(|s| s.strip_suffix(".json")).and_then(|s| s.parse().ok())
        {
            out.push(v);
        }
    }
    out.sort();
    Ok(out)
}

/// Best-effort batch id of a frame that failed verification.
fn batch_id_hint(frame: &str) -> String {
    frame.lines().nth(1).and_then(|l| l.strip_prefix("batch ")).unwrap_or("?").to_owned()
}

/// UTC seconds spanning the dates `from..=to`, for building event queries.
pub fn utc_span(from: NaiveDate, to: NaiveDate) -> (Timestamp, Timestamp) {
    (days_from_epoch(from) * DAY_SECONDS, (days_from_epoch(to) + 1) * DAY_SECONDS)
}

/// In-process delivery straight into a platform.
pub struct Direct<'a> {
    pub platform: &'a Platform,
    pub credential: Credential,
}

impl Transport for Direct<'_> {
    fn send(&self, frame: &str) -> Result<IngestAck, TransportError> {
        self.platform
            .ingest(Some(&self.credential), frame)
            .map_err(|e| TransportError::Rejected { code: e.code().to_owned(), message: e.to_string() })
    }
}
