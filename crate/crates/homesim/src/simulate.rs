//! Multi-day, multi-home simulation runs.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use carewatch_core::{write_log, ConfigError, DeviceKind, HomeConfig, SensorEvent, SubjectProfile, TargetObject};

use crate::drift::{apply_drift, DriftError, DriftScenario};
use crate::faults::{inject_faults, FaultSpec};
use crate::generator::{events_from_plan, plan_day, DayPlan};
use crate::script::{BehaviorScript, ScriptError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("home {home}: script is invalid: {source}")]
    InvalidScript {
        home: String,
        #[source]
        source: ScriptError,
    },
    #[error("home {home}: script uses {target:?} which has no sensor in the floorplan")]
    InconsistentConfig { home: String, target: TargetObject },
    #[error("home {home}: {source}")]
    Config {
        home: String,
        #[source]
        source: ConfigError,
    },
    #[error("home {home}: {source}")]
    Drift {
        home: String,
        #[source]
        source: DriftError,
    },
    #[error("no homes to simulate")]
    NoHomes,
    #[error("empty date range {from}..={to}")]
    EmptyRange { from: NaiveDate, to: NaiveDate },
    #[error("home {home} on {date}: {source}")]
    Day {
        home: String,
        date: NaiveDate,
        #[source]
        source: Box<SimError>,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Everything needed to simulate one home.
#[derive(Debug, Clone)]
pub struct HomeRun {
    pub home: HomeConfig,
    pub subject: SubjectProfile,
    pub script: BehaviorScript,
    pub scenarios: Vec<DriftScenario>,
    pub faults: FaultSpec,
}

impl HomeRun {
    /// The script in effect on `date`, with every scenario applied in order.
    pub fn script_on(&self, date: NaiveDate) -> BehaviorScript {
        self.scenarios.iter().fold(self.script.clone(), |s, sc| apply_drift(&s, sc, date))
    }

    pub fn validate(&self, from: NaiveDate, to: NaiveDate) -> Result<(), SimError> {
        let home = || self.home.id.to_string();
        self.home.validate().map_err(|source| SimError::Config { home: home(), source })?;
        self.script.validate().map_err(|source| SimError::InvalidScript { home: home(), source })?;
        if let Some(t) = self.script.targets.iter().find(|t| !self.home.has_target(**t)) {
            return Err(SimError::InconsistentConfig { home: home(), target: *t });
        }
        let mut shifted = self.script.clone();
        for sc in &self.scenarios {
            sc.validate(&shifted, (from, to)).map_err(|source| SimError::Drift { home: home(), source })?;
            shifted = apply_drift(&shifted, sc, sc.onset + chrono::Days::new(u64::from(sc.ramp_days)));
        }
        Ok(())
    }

    /// Plans and generates one day, faults included.
    pub fn day(&self, date: NaiveDate, seed: u64) -> (DayPlan, DayLog) {
        let script = self.script_on(date);
        let plan = plan_day(&self.home, &script, date, seed);
        let mut raw = events_from_plan(&self.home, &self.subject, &script, &plan, seed);
        if !self.subject.consent.location {
            raw.retain(|e| e.kind != DeviceKind::LocationSource);
        }
        let emitted = raw.len();
        let location = raw.iter().filter(|e| e.kind == DeviceKind::LocationSource).count();
        let events: Vec<SensorEvent> = inject_faults(raw, &self.faults).collect();
        let dropped = emitted - events.len();
        (plan, DayLog { date, events, emitted, location, dropped })
    }
}

/// Events of one home-day after fault injection.
#[derive(Debug, Clone, PartialEq)]
pub struct DayLog {
    pub date: NaiveDate,
    pub events: Vec<SensorEvent>,
    /// Events generated before faults were applied.
    pub emitted: usize,
    /// Location fixes among the emitted events.
    pub location: usize,
    /// Events suppressed by faults.
    pub dropped: usize,
}

/// Streams the days of one home in date order.
pub struct HomeSimulator<'a> {
    run: &'a HomeRun,
    seed: u64,
    next: NaiveDate,
    last: NaiveDate,
}

impl<'a> HomeSimulator<'a> {
    pub fn new(run: &'a HomeRun, from: NaiveDate, to: NaiveDate, seed: u64) -> Result<Self, SimError> {
        if to < from {
            return Err(SimError::EmptyRange { from, to });
        }
        run.validate(from, to)?;
        Ok(Self { run, seed, next: from, last: to })
    }
}

impl Iterator for HomeSimulator<'_> {
    type Item = DayLog;

    fn next(&mut self) -> Option<DayLog> {
        if self.next > self.last {
            return None;
        }
        let date = self.next;
        self.next = date.succ_opt()?;
        Some(self.run.day(date, self.seed).1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayCount {
    pub date: NaiveDate,
    pub emitted: usize,
    pub location: usize,
    pub dropped: usize,
}

/// Ground truth of one simulated home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeManifest {
    pub home: String,
    pub subject: String,
    pub scenarios: Vec<DriftScenario>,
    pub faults: FaultSpec,
    pub days: Vec<DayCount>,
}

impl HomeManifest {
    pub fn emitted(&self) -> usize {
        self.days.iter().map(|d| d.emitted).sum()
    }

    pub fn dropped(&self) -> usize {
        self.days.iter().map(|d| d.dropped).sum()
    }

    pub fn location(&self) -> usize {
        self.days.iter().map(|d| d.location).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationManifest {
    pub seed: u64,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub homes: Vec<HomeManifest>,
}

/// Path of the log of `home` on `date` under `out`.
pub fn log_path(out: &Path, home: &str, date: NaiveDate) -> PathBuf {
    out.join(home).join(format!("{date}.log"))
}

/// Simulates every home over `from..=to` and writes one log per home-day to
/// `out/<home>/<date>.log`. Homes run in parallel.
pub fn simulate(
    runs: &[HomeRun],
    from: NaiveDate,
    to: NaiveDate,
    seed: u64,
    out: &Path,
) -> Result<SimulationManifest, SimError> {
    if runs.is_empty() {
        return Err(SimError::NoHomes);
    }
    let homes = runs
        .par_iter()
        .map(|run| {
            let home = run.home.id.to_string();
            let dir = out.join(&home);
            fs::create_dir_all(&dir).map_err(|source| SimError::Io { path: dir.clone(), source })?;
            let mut days = Vec::new();
            for log in HomeSimulator::new(run, from, to, seed)? {
                let path = log_path(out, &home, log.date);
                fs::write(&path, write_log(&log.events)).map_err(|source| SimError::Io { path, source })?;
                days.push(DayCount {
                    date: log.date,
                    emitted: log.emitted,
                    location: log.location,
                    dropped: log.dropped,
                });
            }
            Ok(HomeManifest {
                home,
                subject: run.subject.id.to_string(),
                scenarios: run.scenarios.clone(),
                faults: run.faults.clone(),
                days,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SimulationManifest { seed, from, to, homes })
}
