//! `simulate` and `run`.
//!
//! `run` drives every home through the whole chain: the simulator feeds a
//! gateway day by day, the gateway reports missing data, checks liveness and
//! syncs a pseudonymized batch each night, and once the range is done the
//! analyst side pulls the events back from the platform, extracts daily
//! features, scores them and stores the results.
//!
//! Output layout under `--out`:
//!
//! ```text
//! credentials.json             role tokens of the local platform
//! platform/                    platform store (local endpoint)
//! gateways/<home>/             gateway store, pseudonym, location.key, progress
//! summaries/<pseudonym>.txt    clinician summary
//! summaries/<pseudonym>.json   change reports
//! traffic/<home>.frames        every frame sent (with --capture-traffic)
//! run.json                     per-home counts and outcomes
//! ```
//!
//! Progress is recorded per home after each synced day, so a crashed run
//! resumes where it stopped; resent batches are acknowledged as duplicates.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use carewatch_analysis::{
    analyze, extract_range, render_summary, write_table, AnalysisResult, ChangeReport, DailyFeatureVector, Direction,
    ExtractConfig, FeatureSeries, Thresholds,
};
use carewatch_core::{DeviceKind, HomeConfig, HomeId, Pseudonym, Routine, SensorEvent, Timestamp};
use carewatch_homesim::{simulate, Fault, HomeSimulator, SimulationManifest};
use carewatch_sync::{utc_span, AnalysisResults, Gateway, Identity, LocationKey};
use chrono::{Days, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::info;

use crate::api::{Api, Uplink};
use crate::config::{PreparedHome, RunConfig};
use crate::CliError;

/// Minutes after local midnight at which a gateway attempts its nightly sync.
pub const SYNC_DELAY_S: i64 = 15 * 60;

/// Writes `out/logs/<home>/<date>.log` for every home-day and
/// `out/manifest.json` with the injected drift onsets and fault intervals.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulationManifest, CliError> {
    let runs: Vec<_> = cfg.homes.iter().map(|h| h.run.clone()).collect();
    let manifest = simulate(&runs, cfg.from, cfg.to, cfg.seed, &out.join("logs"))
        .map_err(|e| CliError::component("homesim", e))?;
    write_json(&out.join("manifest.json"), &manifest, "homesim")?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    pub feature: String,
    pub direction: Direction,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub effect_size: f64,
}

impl From<&ChangeReport> for ReportLine {
    fn from(r: &ChangeReport) -> Self {
        Self {
            feature: r.feature.name(),
            direction: r.direction,
            start: r.start,
            end: r.end,
            effect_size: r.effect_size,
        }
    }
}

/// What happened to one home during `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeOutcome {
    pub home: String,
    pub pseudonym: Pseudonym,
    pub days: usize,
    /// Events generated by the simulator, location fixes included.
    pub emitted: usize,
    pub location: usize,
    /// Events suppressed at the source by faults.
    pub dropped: usize,
    /// Events the platform holds for this subject.
    pub stored: u64,
    pub pending_batches: usize,
    pub open_alerts: usize,
    /// Missing samples over all daily reports.
    pub missing_samples: u64,
    pub results_version: u32,
    pub reports: Vec<ReportLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub homes: Vec<HomeOutcome>,
    /// `component: cause` of every home that failed.
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Keep a copy of every sync frame under `traffic/`.
    pub capture_traffic: bool,
}

#[derive(Default, Serialize, Deserialize)]
struct Progress {
    last_day: Option<NaiveDate>,
    emitted: usize,
    location: usize,
    dropped: usize,
    missing_samples: u64,
}

/// Runs every home end to end against `api`. Homes run in parallel; a failed
/// home does not stop the others, but makes the whole run fail.
pub fn cmd_run(cfg: &RunConfig, api: &Api, out: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::component("cli", format!("{}: {e}", out.display())))?;
    let results: Vec<Result<HomeOutcome, CliError>> =
        cfg.homes.par_iter().map(|h| run_home(cfg, h, api, out, opts)).collect();
    let mut summary = RunSummary { seed: cfg.seed, from: cfg.from, to: cfg.to, homes: Vec::new(), errors: Vec::new() };
    let mut first_error = None;
    for (h, r) in cfg.homes.iter().zip(results) {
        match r {
            Ok(o) => summary.homes.push(o),
            Err(e) => {
                summary.errors.push(format!("{}: {e}", h.id()));
                first_error.get_or_insert(e);
            }
        }
    }
    write_json(&out.join("run.json"), &summary, "cli")?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

fn gateway_err(e: impl std::fmt::Display) -> CliError {
    CliError::component("gateway", e)
}

fn run_home(
    cfg: &RunConfig,
    h: &PreparedHome,
    api: &Api,
    out: &Path,
    opts: &RunOptions,
) -> Result<HomeOutcome, CliError> {
    let run = &h.run;
    let clock = run.home.clock;
    let root = out.join("gateways").join(h.id());
    fs::create_dir_all(&root).map_err(gateway_err)?;
    let pseudonym = pseudonym_for(api, h, &root)?;
    let key = if run.subject.consent.location { Some(location_key(&root)?) } else { None };
    let mut gw = Gateway::open(run.home.clone(), &root, clock.day_range(cfg.from).0).map_err(gateway_err)?;

    let progress_path = root.join("progress.json");
    let mut progress: Progress = match fs::read_to_string(&progress_path) {
        Ok(t) => serde_json::from_str(&t).map_err(gateway_err)?,
        Err(_) => Progress::default(),
    };
    let outages: Vec<(Timestamp, Timestamp)> = run
        .faults
        .faults
        .iter()
        .filter_map(|f| match f {
            Fault::GatewayOutage { from, until, .. } => Some((*from, *until)),
            _ => None,
        })
        .collect();
    let tap = Mutex::new(Vec::new());
    let transport = api.transport();
    let uplink = Uplink {
        inner: transport.as_ref(),
        outages: outages.clone(),
        now: Default::default(),
        tap: opts.capture_traffic.then_some(&tap),
    };

    // Validated over the full range; a resumed run then starts mid-range.
    HomeSimulator::new(run, cfg.from, cfg.to, cfg.seed).map_err(|e| CliError::component("homesim", e))?;
    let first = progress.last_day.map_or(cfg.from, |d| d + Days::new(1));
    for date in first.iter_days().take_while(|d| *d <= cfg.to) {
        let (_, log) = run.day(date, cfg.seed);
        let seen = gw.liveness();
        let mut events: Vec<&SensorEvent> = log.events.iter().collect();
        events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device_id.cmp(&b.device_id)));
        for e in events {
            // Already stored before an interruption.
            if seen.get(&e.device_id).and_then(|l| l.last_seen).is_some_and(|t| t >= e.timestamp) {
                continue;
            }
            gw.ingest_local(e).map_err(gateway_err)?;
        }
        gw.flush().map_err(gateway_err)?;
        let midnight = clock.day_range(log.date).1;
        gw.liveness_check(midnight).map_err(gateway_err)?;
        let report = gw.daily_missing_report(log.date, midnight).map_err(gateway_err)?;
        match gw.enqueue(log.date, &pseudonym, key.as_ref()) {
            Ok(_) | Err(carewatch_sync::GatewayError::NoData(_)) => {}
            Err(e) => return Err(gateway_err(e)),
        }
        uplink.now.set(midnight + SYNC_DELAY_S);
        gw.sync_pending(&uplink, midnight + SYNC_DELAY_S).map_err(gateway_err)?;
        progress.last_day = Some(log.date);
        progress.emitted += log.emitted;
        progress.location += log.location;
        progress.dropped += log.dropped;
        progress.missing_samples += u64::from(report.totals.missing);
        fs::write(&progress_path, serde_json::to_vec(&progress).expect("progress")).map_err(gateway_err)?;
    }
    // Batches held back by an outage go out once the uplink is back.
    let end = clock.day_range(cfg.to).1;
    let back = outages.iter().map(|o| o.1).max().unwrap_or(end).max(end) + 3600;
    uplink.now.set(back);
    gw.sync_pending(&uplink, back).map_err(gateway_err)?;
    let status = gw.status().map_err(gateway_err)?;
    if opts.capture_traffic {
        let dir = out.join("traffic");
        fs::create_dir_all(&dir).map_err(gateway_err)?;
        let mut frames = tap.into_inner().expect("tap");
        frames.retain(|f| !f.is_empty());
        let path = dir.join(format!("{}.frames", h.id()));
        let mut text = fs::read_to_string(&path).unwrap_or_default();
        text.push_str(&frames.concat());
        fs::write(&path, text).map_err(gateway_err)?;
    }

    let (results, analysis) = analyze_subject(api, &run.home, &run.subject.routine, &pseudonym, cfg)?;
    let version = api.store_results(&pseudonym, results)?;
    write_summary(out, &pseudonym, &analysis)?;
    let stored = api.subjects()?.into_iter().find(|s| s.pseudonym == pseudonym).map_or(0, |s| s.events);
    info!(home = h.id(), %pseudonym, reports = analysis.reports.len(), "done");
    Ok(HomeOutcome {
        home: h.id().to_owned(),
        pseudonym,
        days: (cfg.to - cfg.from).num_days() as usize + 1,
        emitted: progress.emitted,
        location: progress.location,
        dropped: progress.dropped,
        stored,
        pending_batches: status.pending_batches.len(),
        open_alerts: status.open_alerts.len(),
        missing_samples: progress.missing_samples,
        results_version: version,
        reports: analysis.reports.iter().map(ReportLine::from).collect(),
    })
}

/// The home's pseudonym, registering the subject on first use.
fn pseudonym_for(api: &Api, h: &PreparedHome, root: &Path) -> Result<Pseudonym, CliError> {
    let path = root.join("pseudonym");
    if let Ok(p) = fs::read_to_string(&path) {
        return Ok(Pseudonym::new(p.trim()));
    }
    let p = api.register(Identity { name: h.name.clone(), home_id: HomeId::new(h.id()) })?;
    fs::write(&path, p.as_str()).map_err(gateway_err)?;
    Ok(p)
}

fn location_key(root: &Path) -> Result<LocationKey, CliError> {
    let path = root.join("location.key");
    match fs::read_to_string(&path) {
        Ok(hex) => LocationKey::from_hex(&hex).map_err(gateway_err),
        Err(_) => {
            let key = LocationKey::generate();
            fs::write(&path, key.to_hex()).map_err(gateway_err)?;
            Ok(key)
        }
    }
}

/// Pulls a subject's events from the platform and analyzes them.
pub fn analyze_subject(
    api: &Api,
    home: &HomeConfig,
    routine: &Routine,
    pseudonym: &Pseudonym,
    cfg: &RunConfig,
) -> Result<(AnalysisResults, AnalysisResult), CliError> {
    let (lo, hi) = utc_span(cfg.from - Days::new(1), cfg.to + Days::new(1));
    let page = api.all_events(pseudonym, lo, hi)?;
    let (rows, result) =
        analyze_events(home, routine, pseudonym.as_str(), &page.events, (cfg.from, cfg.to), &cfg.thresholds)?;
    let results = AnalysisResults {
        features: write_table(pseudonym.as_str(), &rows),
        thresholds: cfg.thresholds.clone(),
        windows: result.windows.clone(),
        reports: result.reports.clone(),
    };
    Ok((results, result))
}

/// Features and change detection over a time-ordered event stream.
pub fn analyze_events(
    home: &HomeConfig,
    routine: &Routine,
    subject: &str,
    events: &[SensorEvent],
    range: (NaiveDate, NaiveDate),
    thresholds: &Thresholds,
) -> Result<(Vec<DailyFeatureVector>, AnalysisResult), CliError> {
    let cfg = ExtractConfig::for_routine(routine);
    let clean: Vec<SensorEvent>;
    let events = if events.iter().any(|e| e.kind == DeviceKind::LocationSource) {
        clean = events.iter().filter(|e| e.kind != DeviceKind::LocationSource).cloned().collect();
        &clean[..]
    } else {
        events
    };
    let rows =
        extract_range(home, subject, &cfg, range.0, range.1, events).map_err(|e| CliError::component("features", e))?;
    let result = analyze(&FeatureSeries::from_vectors(subject, &rows), thresholds)
        .map_err(|e| CliError::component("driftdetect", e))?;
    Ok((rows, result))
}

fn write_summary(out: &Path, pseudonym: &Pseudonym, analysis: &AnalysisResult) -> Result<(), CliError> {
    let dir = out.join("summaries");
    fs::create_dir_all(&dir).map_err(|e| CliError::component("cli", e))?;
    fs::write(dir.join(format!("{pseudonym}.txt")), render_summary(analysis))
        .map_err(|e| CliError::component("cli", e))?;
    write_json(&dir.join(format!("{pseudonym}.json")), &analysis.reports, "cli")
}

pub(crate) fn write_json<T: Serialize>(path: &PathBuf, value: &T, component: &'static str) -> Result<(), CliError> {
    let fail = |e: &dyn std::fmt::Display| CliError::component(component, format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| fail(&e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| fail(&e))?;
    fs::write(path, text).map_err(|e| fail(&e))
}
