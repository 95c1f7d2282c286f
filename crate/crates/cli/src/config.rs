//! Scenario files.
//!
//! A scenario is a TOML document with `version = 1`:
//!
//! ```toml
//! version = 1
//! seed = 7
//! from = "2025-01-01"
//! to = "2025-12-31"
//!
//! [thresholds]            # optional, any detector threshold
//! persistence = 3
//!
//! [[homes]]
//! id = "casa-alice"
//! name = "Alice"          # identity string, kept by the platform registry only
//! cohort = "neurodegenerative"
//! location_consent = false
//! utc_offset_minutes = 60
//! omit_devices = []
//! caregiver = [{ weekday = "Mon", start_minute = 540, end_minute = 720 }]
//!
//! [[homes.drift]]
//! scenario = "lunch-shift"
//! onset_day = 180         # days after `from`; or `onset = "2025-06-30"`
//! ramp_days = 14
//!
//! [[homes.faults]]
//! type = "gateway-outage"  # device-dropout, device-removed, battery-decay
//! from = "2025-03-01T20:00:00Z"
//! until = "2025-03-04T08:00:00Z"
//! buffering = true
//! ```
//!
//! Fault times are RFC 3339. Every home draws its randomness from the
//! top-level seed mixed with its id, so adding a home leaves the others
//! unchanged.

use std::path::{Path, PathBuf};

use carewatch_analysis::Thresholds;
use carewatch_core::{CaregiverWindow, Cohort, Consent, DeviceId, Routine, SubjectId, SubjectProfile, Timestamp};
use carewatch_homesim::{standard_home, BehaviorScript, DriftScenario, Fault, FaultSpec, HomeRun, HomeTemplate};
use chrono::{DateTime, Days, FixedOffset, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_VERSION: u32 = 1;

/// Scenarios shipped with the binary, addressable as `builtin:<name>`.
pub const BUILTIN: [(&str, &str); 3] = [
    ("alice", include_str!("../scenarios/alice.toml")),
    ("no-drift", include_str!("../scenarios/no-drift.toml")),
    ("outage", include_str!("../scenarios/outage.toml")),
];

/// An invalid scenario, located by the dotted path of the offending field.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("config-invalid at {path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl ToString) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub from: NaiveDate,
    pub to: NaiveDate,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub homes: Vec<HomeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeEntry {
    pub id: String,
    /// Display name of the subject; only ever sent to the registry.
    pub name: String,
    #[serde(default = "default_cohort")]
    pub cohort: Cohort,
    #[serde(default)]
    pub location_consent: bool,
    #[serde(default)]
    pub utc_offset_minutes: i32,
    #[serde(default)]
    pub omit_devices: Vec<String>,
    #[serde(default)]
    pub caregiver: Vec<CaregiverWindow>,
    #[serde(default)]
    pub routine: Option<Routine>,
    #[serde(default)]
    pub drift: Vec<DriftEntry>,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
}

fn default_cohort() -> Cohort {
    Cohort::Neurodegenerative
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftEntry {
    pub scenario: String,
    #[serde(default)]
    pub onset: Option<NaiveDate>,
    #[serde(default)]
    pub onset_day: Option<u64>,
    #[serde(default = "default_ramp")]
    pub ramp_days: u32,
}

fn default_ramp() -> u32 {
    14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEntry {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub device: Option<String>,
    pub from: DateTime<FixedOffset>,
    #[serde(default)]
    pub until: Option<DateTime<FixedOffset>>,
    #[serde(default)]
    pub buffering: Option<bool>,
}

/// A validated scenario, ready to simulate.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: String,
    pub seed: u64,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub thresholds: Thresholds,
    pub homes: Vec<PreparedHome>,
}

#[derive(Debug, Clone)]
pub struct PreparedHome {
    pub name: String,
    pub run: HomeRun,
}

impl PreparedHome {
    pub fn id(&self) -> &str {
        self.run.home.id.as_str()
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Keep only this home.
    pub subject: Option<String>,
    /// TOML file of thresholds replacing the scenario's.
    pub thresholds: Option<PathBuf>,
}

/// Reads `builtin:<name>` or a file path.
pub fn read_source(spec: &str) -> Result<String, ConfigError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, text)| (*text).to_owned()).ok_or_else(|| {
            let names: Vec<&str> = BUILTIN.iter().map(|(n, _)| *n).collect();
            ConfigError::at("config", format!("no bundled scenario `{name}` (have {})", names.join(", ")))
        });
    }
    std::fs::read_to_string(spec).map_err(|e| ConfigError::at("config", format!("{spec}: {e}")))
}

pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    #[derive(Deserialize)]
    struct Probe {
        version: Option<toml::Value>,
    }
    let probe: Probe = toml::from_str(text).map_err(|e| ConfigError::at("config", e.message()))?;
    match probe.version {
        Some(toml::Value::Integer(v)) if v == i64::from(CONFIG_VERSION) => {}
        Some(v) => {
            return Err(ConfigError::at("version", format!("unsupported version {v}, expected {CONFIG_VERSION}")))
        }
        None => return Err(ConfigError::at("version", "missing")),
    }
    toml::from_str(text).map_err(|e| ConfigError::at(error_path(text, &e), e.message()))
}

/// Best-effort dotted path of a TOML error: the table header and key on the
/// offending line.
fn error_path(text: &str, e: &toml::de::Error) -> String {
    let Some(span) = e.span() else { return "config".into() };
    let before = &text[..span.start.min(text.len())];
    let table = before
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| l.starts_with('['))
        .map(|l| l.trim_matches(|c| c == '[' || c == ']').to_owned());
    let line = before.rsplit('\n').next().unwrap_or("");
    let key = line.split('=').next().map(str::trim).filter(|k| !k.is_empty() && !k.starts_with('['));
    match (table, key) {
        (Some(t), Some(k)) => format!("{t}.{k}"),
        (Some(t), None) => t,
        (None, Some(k)) => k.to_owned(),
        (None, None) => "config".into(),
    }
}

pub fn load(spec: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let scenario = parse(&read_source(spec)?)?;
    let thresholds = match &overrides.thresholds {
        Some(path) => read_thresholds(path)?,
        None => scenario.thresholds.clone(),
    };
    prepare(spec, scenario, thresholds, overrides)
}

fn read_thresholds(path: &Path) -> Result<Thresholds, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::at("thresholds", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ConfigError::at(format!("thresholds.{}", error_path(&text, &e)), e.message()))
}

fn prepare(source: &str, s: Scenario, thresholds: Thresholds, o: &Overrides) -> Result<RunConfig, ConfigError> {
    let from = o.from.unwrap_or(s.from);
    let to = o.to.unwrap_or(s.to);
    if to < from {
        return Err(ConfigError::at("to", format!("date range {from}..={to} is empty")));
    }
    thresholds.validate().map_err(|e| ConfigError::at("thresholds", e))?;
    if s.homes.is_empty() {
        return Err(ConfigError::at("homes", "no homes"));
    }
    let mut homes = Vec::new();
    for (i, h) in s.homes.iter().enumerate() {
        let at = |field: &str| format!("homes[{i}].{field}");
        if h.id.is_empty() || !h.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(ConfigError::at(at("id"), format!("`{}` must be non-empty [A-Za-z0-9_-]", h.id)));
        }
        if homes.iter().any(|p: &PreparedHome| p.id() == h.id) {
            return Err(ConfigError::at(at("id"), format!("duplicate home `{}`", h.id)));
        }
        if o.subject.as_ref().is_some_and(|s| *s != h.id) {
            continue;
        }
        homes.push(PreparedHome { name: h.name.clone(), run: home_run(h, from, to, &at)? });
    }
    if homes.is_empty() {
        return Err(ConfigError::at("subject", format!("no home `{}`", o.subject.as_deref().unwrap_or(""))));
    }
    Ok(RunConfig { source: source.to_owned(), seed: o.seed.unwrap_or(s.seed), from, to, thresholds, homes })
}

fn home_run(
    h: &HomeEntry,
    from: NaiveDate,
    to: NaiveDate,
    at: &dyn Fn(&str) -> String,
) -> Result<HomeRun, ConfigError> {
    let template = HomeTemplate {
        omit_devices: h.omit_devices.iter().cloned().collect(),
        caregiver: h.caregiver.clone(),
        utc_offset_minutes: h.utc_offset_minutes,
        location_consent: h.location_consent,
    };
    let home = standard_home(&h.id, &template);
    for (k, d) in h.omit_devices.iter().enumerate() {
        if !standard_home(&h.id, &HomeTemplate::default()).devices.iter().any(|s| s.id.as_str() == d) {
            return Err(ConfigError::at(at(&format!("omit_devices[{k}]")), format!("unknown device `{d}`")));
        }
    }
    home.validate().map_err(|e| ConfigError::at(at("id"), e))?;
    let subject = SubjectProfile {
        id: SubjectId::new(format!("subject-{}", h.id)),
        cohort: h.cohort,
        routine: h.routine.clone().unwrap_or_default(),
        consent: Consent { location: h.location_consent },
    };
    let script = BehaviorScript::for_home(&subject, &home);

    let mut scenarios = Vec::new();
    for (k, d) in h.drift.iter().enumerate() {
        let path = at(&format!("drift[{k}]"));
        let onset = match (d.onset, d.onset_day) {
            (Some(date), None) => date,
            (None, Some(n)) => from + Days::new(n),
            _ => return Err(ConfigError::at(path, "exactly one of `onset` and `onset_day` is required")),
        };
        let sc = DriftScenario::builtin(&d.scenario, onset, d.ramp_days)
            .map_err(|e| ConfigError::at(format!("{path}.scenario"), e))?;
        scenarios.push(sc);
    }

    let mut faults = Vec::new();
    for (k, f) in h.faults.iter().enumerate() {
        faults.push(fault(f, &home, &|field: &str| at(&format!("faults[{k}].{field}")))?);
    }
    let run = HomeRun { home, subject, script, scenarios, faults: FaultSpec { faults } };
    run.validate(from, to).map_err(|e| ConfigError::at(at("drift"), e))?;
    Ok(run)
}

fn fault(f: &FaultEntry, home: &carewatch_core::HomeConfig, at: &dyn Fn(&str) -> String) -> Result<Fault, ConfigError> {
    let from: Timestamp = f.from.timestamp();
    let until = f.until.map(|t| t.timestamp());
    if let Some(u) = until {
        if u <= from {
            return Err(ConfigError::at(at("until"), "must be after `from`"));
        }
    }
    let device = || -> Result<DeviceId, ConfigError> {
        let id = f.device.as_deref().ok_or_else(|| ConfigError::at(at("device"), "required"))?;
        let id = DeviceId::new(id);
        home.device(&id).ok_or_else(|| ConfigError::at(at("device"), format!("no device `{id}` in this home")))?;
        Ok(id)
    };
    let until = || until.ok_or_else(|| ConfigError::at(at("until"), "required"));
    Ok(match f.kind.as_str() {
        "device-dropout" => Fault::DeviceDropout { device: device()?, from, until: until()? },
        "device-removed" => Fault::DeviceRemoved { device: device()?, from, until: until()? },
        "battery-decay" => Fault::BatteryDecay { device: device()?, from },
        "gateway-outage" => Fault::GatewayOutage { from, until: until()?, buffering: f.buffering.unwrap_or(true) },
        other => return Err(ConfigError::at(at("type"), format!("unknown fault type `{other}`"))),
    })
}
