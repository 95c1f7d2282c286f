//! Home gateway: durable local event store, device liveness, daily
//! missing-data reports and the nightly sync queue.
//!
//! On-disk layout under the gateway root:
//!
//! ```text
//! events/<date>.log     core log format, one file per local date, append-only
//! index.json            per-date event counts and per-device last-seen times
//! outbox/<date>.batch   built batches awaiting acknowledgement
//! synced/<date>.batch   acknowledged batches
//! alerts.jsonl          every alert raised or closed, one JSON object per line
//! reports/<date>.json   daily missing-data reports
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use carewatch_analysis::coverage;
use carewatch_core::{
    read_log, serialize_event, DeviceId, DeviceKind, HomeConfig, ParseError, Pseudonym, ReportingMode, SensorEvent,
    Timestamp, LOG_HEADER,
};

use crate::batch::{IngestAck, LocationKey, MissingKey, SyncBatch};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("event from unknown device `{0}`")]
    UnknownDevice(DeviceId),
    #[error("stale timestamp {timestamp} from `{device}`, last seen {last_seen}")]
    StaleTimestamp { device: DeviceId, timestamp: Timestamp, last_seen: Timestamp },
    #[error("report for {0} requested before the day is over")]
    FutureDate(NaiveDate),
    #[error("no events stored for {0}")]
    NoData(NaiveDate),
    #[error(transparent)]
    MissingKey(#[from] MissingKey),
    #[error("batch {batch} rejected by the platform: {code}: {message}")]
    Rejected { batch: String, code: String, message: String },
    #[error("corrupt local store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<ParseError> for GatewayError {
    fn from(e: ParseError) -> Self {
        GatewayError::Corrupt(e.to_string())
    }
}

/// Failure to deliver a frame.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("{code}: {message}")]
    Rejected { code: String, message: String },
}

/// Delivery of encoded batches to the platform ingestion endpoint.
pub trait Transport {
    fn send(&self, frame: &str) -> Result<IngestAck, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlertKind {
    DeviceSilent,
    GatewayUnreachable,
    LowBattery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub kind: AlertKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_id: Option<DeviceId>,
    pub raised_at: Timestamp,
    pub details: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
enum AlertLogLine {
    Raised(Alert),
    Closed { kind: AlertKind, device_id: Option<DeviceId>, closed_at: Timestamp },
}

/// Liveness of one configured device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Liveness {
    pub last_seen: Option<Timestamp>,
    /// Longest tolerated silence, seconds.
    pub budget_s: i64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Index {
    installed_at: Timestamp,
    days: BTreeMap<NaiveDate, u64>,
    last_seen: BTreeMap<DeviceId, Timestamp>,
}

/// A maximal run of missing samples of a periodic device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingInterval {
    pub start: Timestamp,
    pub end: Timestamp,
    pub samples: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceReport {
    pub device_id: DeviceId,
    pub kind: DeviceKind,
    /// Expected sample count; periodic devices only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<u32>,
    pub observed: u32,
    pub missing_intervals: Vec<MissingInterval>,
    /// Isolated missing samples that do not form an interval.
    pub short_missed: u32,
}

impl DeviceReport {
    pub fn missing(&self) -> u32 {
        self.missing_intervals.iter().map(|m| m.samples).sum::<u32>() + self.short_missed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportTotals {
    pub expected: u32,
    pub observed: u32,
    pub missing: u32,
}

/// Per-device sample accounting for one local date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingDataReport {
    pub date: NaiveDate,
    pub devices: Vec<DeviceReport>,
    /// Sums over periodic devices.
    pub totals: ReportTotals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncOutcome {
    Acked(IngestAck),
    /// Kept in the outbox for the next attempt.
    RetryLater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SyncSummary {
    pub accepted: u32,
    pub duplicates: u32,
    pub retained: u32,
}

/// Snapshot for the local status endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatewayStatus {
    pub days_stored: usize,
    pub events_stored: u64,
    pub pending_batches: Vec<NaiveDate>,
    pub open_alerts: Vec<Alert>,
    pub liveness: BTreeMap<DeviceId, Liveness>,
}

pub struct Gateway {
    home: HomeConfig,
    root: PathBuf,
    index: Index,
    open_alerts: BTreeMap<(AlertKind, Option<DeviceId>), Alert>,
    writer: Option<(NaiveDate, BufWriter<File>)>,
}

fn date_file(dir: &Path, date: NaiveDate, ext: &str) -> PathBuf {
    dir.join(format!("{date}.{ext}"))
}

fn dates_in(dir: &Path, ext: &str) -> io::Result<Vec<NaiveDate>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(d) = name.strip_suffix(ext).and_then(|s| s.strip_suffix('.')).and_then(|s| s.parse().ok()) {
            out.push(d);
        }
    }
    out.sort();
    Ok(out)
}

/// Writes via a temporary file and rename, so readers never see a torn file.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

impl Gateway {
    /// Opens the gateway store at `root`, creating it if needed. A fresh
    /// store measures device silence from `installed_at`.
    pub fn open(home: HomeConfig, root: impl Into<PathBuf>, installed_at: Timestamp) -> Result<Self, GatewayError> {
        let root = root.into();
        for d in ["events", "outbox", "synced", "reports"] {
            fs::create_dir_all(root.join(d))?;
        }
        let index = match fs::read_to_string(root.join("index.json")) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| GatewayError::Corrupt(e.to_string()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Index { installed_at, ..Index::default() },
            Err(e) => return Err(e.into()),
        };
        let mut gw = Self { home, root, index, open_alerts: BTreeMap::new(), writer: None };
        gw.reload_alerts()?;
        Ok(gw)
    }

    fn reload_alerts(&mut self) -> Result<(), GatewayError> {
        let Ok(text) = fs::read_to_string(self.root.join("alerts.jsonl")) else { return Ok(()) };
        for line in text.lines().filter(|l| !l.is_empty()) {
            match serde_json::from_str(line).map_err(|e| GatewayError::Corrupt(e.to_string()))? {
                AlertLogLine::Raised(a) => {
                    self.open_alerts.insert((a.kind, a.device_id.clone()), a);
                }
                AlertLogLine::Closed { kind, device_id, .. } => {
                    self.open_alerts.remove(&(kind, device_id));
                }
            }
        }
        Ok(())
    }

    pub fn home(&self) -> &HomeConfig {
        &self.home
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Appends one event to the local store and updates liveness.
    pub fn ingest_local(&mut self, e: &SensorEvent) -> Result<(), GatewayError> {
        if self.home.device(&e.device_id).is_none() {
            return Err(GatewayError::UnknownDevice(e.device_id.clone()));
        }
        if let Some(&last) = self.index.last_seen.get(&e.device_id) {
            if e.timestamp <= last {
                return Err(GatewayError::StaleTimestamp {
                    device: e.device_id.clone(),
                    timestamp: e.timestamp,
                    last_seen: last,
                });
            }
        }
        let date = self.home.clock.local_date(e.timestamp);
        if self.writer.as_ref().map(|w| w.0) != Some(date) {
            self.flush()?;
            let path = date_file(&self.root.join("events"), date, "log");
            let fresh = !path.exists();
            let mut w = BufWriter::new(OpenOptions::new().create(true).append(true).open(path)?);
            if fresh {
                writeln!(w, "{LOG_HEADER}")?;
            }
            self.writer = Some((date, w));
        }
        let (_, w) = self.writer.as_mut().expect("writer opened above");
        writeln!(w, "{}", serialize_event(e))?;
        *self.index.days.entry(date).or_insert(0) += 1;
        self.index.last_seen.insert(e.device_id.clone(), e.timestamp);
        if self.open_alerts.contains_key(&(AlertKind::DeviceSilent, Some(e.device_id.clone()))) {
            self.close_alert(AlertKind::DeviceSilent, Some(e.device_id.clone()), e.timestamp)?;
        }
        Ok(())
    }

    /// Makes every ingested event durable and persists the index.
    pub fn flush(&mut self) -> Result<(), GatewayError> {
        if let Some((_, mut w)) = self.writer.take() {
            w.flush()?;
        }
        let index = serde_json::to_vec(&self.index).expect("index serializes");
        write_atomic(&self.root.join("index.json"), &index)?;
        Ok(())
    }

    pub fn liveness(&self) -> BTreeMap<DeviceId, Liveness> {
        self.home
            .devices
            .iter()
            .map(|d| {
                let l =
                    Liveness { last_seen: self.index.last_seen.get(&d.id).copied(), budget_s: d.silence_budget_s() };
                (d.id.clone(), l)
            })
            .collect()
    }

    /// Raises a device-silent alert for every device whose silence at `now`
    /// exceeds its budget and that has no open alert. Returns the new alerts.
    pub fn liveness_check(&mut self, now: Timestamp) -> Result<Vec<Alert>, GatewayError> {
        let mut raised = Vec::new();
        for (id, l) in self.liveness() {
            let since = l.last_seen.unwrap_or(self.index.installed_at);
            let key = (AlertKind::DeviceSilent, Some(id.clone()));
            if now - since > l.budget_s && !self.open_alerts.contains_key(&key) {
                let alert = Alert {
                    kind: AlertKind::DeviceSilent,
                    device_id: Some(id.clone()),
                    raised_at: now,
                    details: format!("silent for {} s, budget {} s", now - since, l.budget_s),
                };
                self.raise(alert.clone())?;
                raised.push(alert);
            }
        }
        Ok(raised)
    }

    pub fn open_alerts(&self) -> Vec<Alert> {
        self.open_alerts.values().cloned().collect()
    }

    fn log_alert(&self, line: &AlertLogLine) -> Result<(), GatewayError> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.root.join("alerts.jsonl"))?;
        writeln!(f, "{}", serde_json::to_string(line).expect("alert serializes"))?;
        Ok(())
    }

    fn raise(&mut self, alert: Alert) -> Result<(), GatewayError> {
        warn!(kind = ?alert.kind, device = ?alert.device_id, "{}", alert.details);
        self.log_alert(&AlertLogLine::Raised(alert.clone()))?;
        self.open_alerts.insert((alert.kind, alert.device_id.clone()), alert);
        Ok(())
    }

    fn close_alert(&mut self, kind: AlertKind, device_id: Option<DeviceId>, at: Timestamp) -> Result<(), GatewayError> {
        self.open_alerts.remove(&(kind, device_id.clone()));
        self.log_alert(&AlertLogLine::Closed { kind, device_id, closed_at: at })
    }

    /// Events stored for a local date, in arrival order.
    pub fn day_events(&mut self, date: NaiveDate) -> Result<Vec<SensorEvent>, GatewayError> {
        if self.writer.as_ref().is_some_and(|w| w.0 == date) {
            self.flush()?;
        }
        match fs::read_to_string(date_file(&self.root.join("events"), date, "log")) {
            Ok(text) => Ok(read_log(&text)?),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    pub fn stored_dates(&self) -> Vec<NaiveDate> {
        self.index.days.keys().copied().collect()
    }

    /// Sample accounting for a finished local date. Periodic devices get
    /// expected counts and missing intervals; event-driven and gated devices
    /// report observed counts only, since their silence is legal and is
    /// watched by the liveness check instead.
    pub fn daily_missing_report(&mut self, date: NaiveDate, now: Timestamp) -> Result<MissingDataReport, GatewayError> {
        let range = self.home.clock.day_range(date);
        if now < range.1 {
            return Err(GatewayError::FutureDate(date));
        }
        let events = self.day_events(date)?;
        let mut by_device: BTreeMap<&DeviceId, Vec<Timestamp>> = BTreeMap::new();
        for e in &events {
            by_device.entry(&e.device_id).or_default().push(e.timestamp);
        }
        let mut devices = Vec::new();
        let mut totals = ReportTotals::default();
        for d in &self.home.devices {
            let ts = by_device.get(&d.id).map(Vec::as_slice).unwrap_or(&[]);
            let report = if d.mode() == ReportingMode::Periodic {
                let c = coverage(ts, d, range);
                totals.expected += c.expected;
                totals.observed += c.observed;
                totals.missing += c.missed();
                DeviceReport {
                    device_id: d.id.clone(),
                    kind: d.kind,
                    expected: Some(c.expected),
                    observed: c.observed,
                    missing_intervals: c
                        .gaps
                        .iter()
                        .map(|g| MissingInterval { start: g.start, end: g.end, samples: g.expected_samples_missed })
                        .collect(),
                    short_missed: c.short_missed,
                }
            } else {
                DeviceReport {
                    device_id: d.id.clone(),
                    kind: d.kind,
                    expected: None,
                    observed: ts.len() as u32,
                    missing_intervals: Vec::new(),
                    short_missed: 0,
                }
            };
            devices.push(report);
        }
        let report = MissingDataReport { date, devices, totals };
        let json = serde_json::to_vec_pretty(&report).expect("report serializes");
        write_atomic(&date_file(&self.root.join("reports"), date, "json"), &json)?;
        Ok(report)
    }

    /// Builds the batch for a stored date. Rebuilding gives the same bytes.
    pub fn build_sync_batch(
        &mut self,
        date: NaiveDate,
        pseudonym: &Pseudonym,
        key: Option<&LocationKey>,
    ) -> Result<SyncBatch, GatewayError> {
        if !self.index.days.contains_key(&date) {
            return Err(GatewayError::NoData(date));
        }
        let events = self.day_events(date)?;
        Ok(SyncBatch::assemble(pseudonym, date, events, key)?)
    }

    /// Builds the batch for `date` and queues it for delivery.
    pub fn enqueue(
        &mut self,
        date: NaiveDate,
        pseudonym: &Pseudonym,
        key: Option<&LocationKey>,
    ) -> Result<SyncBatch, GatewayError> {
        let batch = self.build_sync_batch(date, pseudonym, key)?;
        write_atomic(&date_file(&self.root.join("outbox"), date, "batch"), batch.encode().as_bytes())?;
        Ok(batch)
    }

    pub fn pending(&self) -> Result<Vec<NaiveDate>, GatewayError> {
        Ok(dates_in(&self.root.join("outbox"), "batch")?)
    }

    /// Sends one batch. Transport failures keep it queued and raise a
    /// gateway-unreachable alert; a platform rejection is an error.
    pub fn sync(
        &mut self,
        batch: &SyncBatch,
        transport: &dyn Transport,
        now: Timestamp,
    ) -> Result<SyncOutcome, GatewayError> {
        let frame = batch.encode();
        let outbox = date_file(&self.root.join("outbox"), batch.date, "batch");
        match transport.send(&frame) {
            Ok(ack) => {
                write_atomic(&date_file(&self.root.join("synced"), batch.date, "batch"), frame.as_bytes())?;
                if outbox.exists() {
                    fs::remove_file(outbox)?;
                }
                if self.open_alerts.contains_key(&(AlertKind::GatewayUnreachable, None)) {
                    self.close_alert(AlertKind::GatewayUnreachable, None, now)?;
                }
                debug!(batch = %batch.id(), ?ack, "synced");
                Ok(SyncOutcome::Acked(ack))
            }
            Err(TransportError::Unreachable(why)) => {
                if !outbox.exists() {
                    write_atomic(&outbox, frame.as_bytes())?;
                }
                if !self.open_alerts.contains_key(&(AlertKind::GatewayUnreachable, None)) {
                    self.raise(Alert {
                        kind: AlertKind::GatewayUnreachable,
                        device_id: None,
                        raised_at: now,
                        details: why,
                    })?;
                }
                Ok(SyncOutcome::RetryLater)
            }
            Err(TransportError::Rejected { code, message }) => {
                Err(GatewayError::Rejected { batch: batch.id(), code, message })
            }
        }
    }

    /// Attempts every queued batch in date order, stopping at the first
    /// unreachable endpoint.
    pub fn sync_pending(&mut self, transport: &dyn Transport, now: Timestamp) -> Result<SyncSummary, GatewayError> {
        let mut summary = SyncSummary::default();
        let pending = self.pending()?;
        for (i, date) in pending.iter().enumerate() {
            let frame = fs::read_to_string(date_file(&self.root.join("outbox"), *date, "batch"))?;
            let (batch, _) = SyncBatch::decode(&frame).map_err(|e| GatewayError::Corrupt(e.to_string()))?;
            match self.sync(&batch, transport, now)? {
                SyncOutcome::Acked(IngestAck::Accepted) => summary.accepted += 1,
                SyncOutcome::Acked(IngestAck::Duplicate) => summary.duplicates += 1,
                SyncOutcome::RetryLater => {
                    summary.retained = (pending.len() - i) as u32;
                    break;
                }
            }
        }
        Ok(summary)
    }

    /// Frames of acknowledged batches, for forced resends.
    pub fn synced_frames(&self) -> Result<Vec<String>, GatewayError> {
        let dir = self.root.join("synced");
        Ok(dates_in(&dir, "batch")?
            .into_iter()
            .map(|d| fs::read_to_string(date_file(&dir, d, "batch")))
            .collect::<Result<_, _>>()?)
    }

    pub fn status(&self) -> Result<GatewayStatus, GatewayError> {
        Ok(GatewayStatus {
            days_stored: self.index.days.len(),
            events_stored: self.index.days.values().sum(),
            pending_batches: self.pending()?,
            open_alerts: self.open_alerts(),
            liveness: self.liveness(),
        })
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        if let Err(e) = self.flush() {
            warn!("flushing gateway store on drop: {e}");
        }
    }
}
