//! Daily behavioral features per home.
//!
//! Each local date gets one [`DailyFeatureVector`]. Everything is derived from
//! event timestamps and payloads, never from receipt time, so a day synced late
//! extracts identically. Sleep is the one cross-midnight feature: the night
//! window (default 20:00 to 11:00) is attributed to the date it ends on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use carewatch_core::{
    Behavior, BinaryState, DeviceId, DeviceKind, DeviceSpec, HomeConfig, Payload, RoomId, Routine, SensorEvent,
    SleepPhase, TargetObject, Timestamp, DAY_SECONDS,
};

use crate::curation::{coverage, impute, Grid, ImputePolicy, ImputedSeries, SlotState};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    LunchCookingPeaks,
    DinnerCookingPeaks,
    MicrowaveUses,
    FridgeOpenings,
    PantryOpenings,
    ShowerEvents,
    ToothbrushSessions,
    SleepMinutes,
    DeepSleepMinutes,
    RemSleepMinutes,
    LightSleepMinutes,
    WakeUps,
    MedicineAccesses,
    Occupancy(RoomId),
    Steps,
    Outings,
    LunchtimeOutings,
    OutingMinutes,
    TestCompliance,
    TestScore,
}

const OCCUPANCY_PREFIX: &str = "occupancy-minutes:";

impl Feature {
    /// Every feature of a home with the given rooms, in table order.
    pub fn catalog<'a>(rooms: impl IntoIterator<Item = &'a RoomId>) -> Vec<Feature> {
        use Feature::*;
        let mut v = vec![
            LunchCookingPeaks,
            DinnerCookingPeaks,
            MicrowaveUses,
            FridgeOpenings,
            PantryOpenings,
            ShowerEvents,
            ToothbrushSessions,
            SleepMinutes,
            DeepSleepMinutes,
            RemSleepMinutes,
            LightSleepMinutes,
            WakeUps,
            MedicineAccesses,
        ];
        v.extend(rooms.into_iter().map(|r| Occupancy(r.clone())));
        v.extend([Steps, Outings, LunchtimeOutings, OutingMinutes, TestCompliance, TestScore]);
        v
    }

    pub fn name(&self) -> String {
        use Feature::*;
        let s = match self {
            LunchCookingPeaks => "lunch-cooking-peaks",
            DinnerCookingPeaks => "dinner-cooking-peaks",
            MicrowaveUses => "microwave-uses",
            FridgeOpenings => "fridge-openings",
            PantryOpenings => "pantry-openings",
            ShowerEvents => "shower-events",
            ToothbrushSessions => "toothbrush-sessions",
            SleepMinutes => "sleep-minutes",
            DeepSleepMinutes => "deep-sleep-minutes",
            RemSleepMinutes => "rem-sleep-minutes",
            LightSleepMinutes => "light-sleep-minutes",
            WakeUps => "wake-ups",
            MedicineAccesses => "medicine-accesses",
            Occupancy(r) => return format!("{OCCUPANCY_PREFIX}{r}"),
            Steps => "steps",
            Outings => "outings",
            LunchtimeOutings => "lunchtime-outings",
            OutingMinutes => "outing-minutes",
            TestCompliance => "test-compliance",
            TestScore => "test-score",
        };
        s.to_owned()
    }

    /// Behavior group used for explanations. Lunchtime outings belong with
    /// nutrition because they explain lunch habits.
    pub fn category(&self) -> Behavior {
        use Feature::*;
        match self {
            LunchCookingPeaks | DinnerCookingPeaks | MicrowaveUses | FridgeOpenings | PantryOpenings
            | LunchtimeOutings => Behavior::Nutrition,
            ShowerEvents | ToothbrushSessions => Behavior::PersonalHygiene,
            SleepMinutes | DeepSleepMinutes | RemSleepMinutes | LightSleepMinutes | WakeUps => Behavior::Sleep,
            MedicineAccesses => Behavior::Therapy,
            Occupancy(_) => Behavior::MobilityHome,
            Steps | Outings | OutingMinutes => Behavior::MobilityOutdoor,
            TestCompliance | TestScore => Behavior::Cognition,
        }
    }

    /// Integer event counts, checked against a brute-force recount.
    pub fn is_count(&self) -> bool {
        use Feature::*;
        matches!(
            self,
            LunchCookingPeaks
                | DinnerCookingPeaks
                | MicrowaveUses
                | FridgeOpenings
                | PantryOpenings
                | ShowerEvents
                | ToothbrushSessions
                | WakeUps
                | MedicineAccesses
                | Steps
                | Outings
                | LunchtimeOutings
        )
    }

    /// Features whose level follows the weather and daylight.
    pub fn season_sensitive(&self) -> bool {
        use Feature::*;
        matches!(self, Steps | Outings | LunchtimeOutings | OutingMinutes)
    }

    /// Unit used in explanation text.
    pub fn unit(&self) -> &'static str {
        use Feature::*;
        match self {
            LunchCookingPeaks | DinnerCookingPeaks => "peaks/day",
            SleepMinutes | DeepSleepMinutes | RemSleepMinutes | LightSleepMinutes | Occupancy(_) | OutingMinutes => {
                "min/day"
            }
            TestScore => "points",
            TestCompliance => "",
            _ => "/day",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown feature {0:?}")]
pub struct UnknownFeature(pub String);

impl FromStr for Feature {
    type Err = UnknownFeature;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(room) = s.strip_prefix(OCCUPANCY_PREFIX) {
            if !room.is_empty() {
                return Ok(Feature::Occupancy(RoomId::new(room)));
            }
        }
        Feature::catalog([]).into_iter().find(|f| f.name() == s).ok_or_else(|| UnknownFeature(s.to_owned()))
    }
}

impl Serialize for Feature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Feature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Missing {
    /// The home has no device for this feature.
    NoDevice,
    /// Too few samples that day.
    Coverage,
    /// Nothing was scheduled that day (the weekly test).
    NotScheduled,
}

impl Missing {
    pub fn tag(self) -> &'static str {
        match self {
            Missing::NoDevice => "no-device",
            Missing::Coverage => "coverage",
            Missing::NotScheduled => "not-scheduled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Value {
    Valued(f64),
    Missing(Missing),
}

impl Value {
    pub fn get(self) -> Option<f64> {
        match self {
            Value::Valued(v) => Some(v),
            Value::Missing(_) => None,
        }
    }
}

/// Features of one subject on one local date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyFeatureVector {
    pub subject: String,
    pub date: NaiveDate,
    pub values: BTreeMap<Feature, Value>,
    /// A caregiver window fell on this date; outing inference is less
    /// reliable.
    pub caregiver_present: bool,
}

impl DailyFeatureVector {
    pub fn get(&self, f: &Feature) -> Option<f64> {
        self.values.get(f).and_then(|v| v.get())
    }
}

/// Extraction thresholds. Times of day are local minutes after midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub lunch_window: (u32, u32),
    pub dinner_window: (u32, u32),
    /// Rise above the rolling baseline that makes a stove peak.
    pub stove_threshold_c: f64,
    pub humidity_threshold_pct: f64,
    pub baseline_s: i64,
    /// Peaks closer than this merge.
    pub merge_gap_s: i64,
    pub microwave_threshold_w: f64,
    /// Minimum indoor silence after a door event for an outing.
    pub outing_quiet_s: i64,
    /// Night window `[start of previous day, end of this day)`.
    pub night_window: (u32, u32),
    /// Largest fraction of absent samples before a feature is missing.
    pub max_missing_fraction: f64,
    pub impute: ImputePolicy,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            lunch_window: (11 * 60 + 30, 14 * 60),
            dinner_window: (18 * 60 + 30, 21 * 60 + 30),
            stove_threshold_c: 3.0,
            humidity_threshold_pct: 10.0,
            baseline_s: 2 * 3600,
            merge_gap_s: 15 * 60,
            microwave_threshold_w: 50.0,
            outing_quiet_s: 15 * 60,
            night_window: (20 * 60, 11 * 60),
            max_missing_fraction: 0.5,
            impute: ImputePolicy::default(),
        }
    }
}

impl ExtractConfig {
    /// Defaults with the subject's own meal windows.
    pub fn for_routine(routine: &Routine) -> Self {
        Self { lunch_window: routine.lunch_window, dinner_window: routine.dinner_window, ..Self::default() }
    }
}

/// Peaks of a sampled series: maximal runs of samples at least `threshold`
/// above the median of the samples in the preceding `baseline_s`, merged
/// when the next run starts less than `merge_gap_s` after the previous one
/// ends. Samples without history are never above. Returns `(start, end)`
/// as the first and last sample of each peak.
pub fn detect_peaks(
    samples: &[(Timestamp, f64)],
    threshold: f64,
    baseline_s: i64,
    merge_gap_s: i64,
) -> Vec<(Timestamp, Timestamp)> {
    let mut runs: Vec<(Timestamp, Timestamp)> = Vec::new();
    let mut open: Option<(Timestamp, Timestamp)> = None;
    let mut lo = 0;
    let mut window: Vec<f64> = Vec::new();
    for (i, &(t, v)) in samples.iter().enumerate() {
        while samples[lo].0 < t - baseline_s {
            lo += 1;
        }
        window.clear();
        window.extend(samples[lo..i].iter().map(|s| s.1));
        let above = crate::stats::median(&window).is_some_and(|b| v >= b + threshold);
        match (above, open.as_mut()) {
            (true, Some(run)) => run.1 = t,
            (true, None) => open = Some((t, t)),
            (false, Some(_)) => runs.extend(open.take()),
            (false, None) => {}
        }
    }
    runs.extend(open);
    let mut peaks: Vec<(Timestamp, Timestamp)> = Vec::new();
    for r in runs {
        match peaks.last_mut() {
            Some(p) if r.0 - p.1 < merge_gap_s => p.1 = r.1,
            _ => peaks.push(r),
        }
    }
    peaks
}

/// Stove peaks starting inside `window` (UTC half-open), or missing when more
/// than `max_missing` of the window's slots have no value.
pub fn detect_temperature_peaks(
    series: &ImputedSeries,
    window: (Timestamp, Timestamp),
    cfg: &ExtractConfig,
) -> Result<Vec<(Timestamp, Timestamp)>, Missing> {
    let in_window: Vec<_> = series.slots.iter().filter(|s| (window.0..window.1).contains(&s.ts)).collect();
    let absent = in_window.iter().filter(|s| s.state == SlotState::Missing).count();
    if in_window.is_empty() || absent as f64 > cfg.max_missing_fraction * in_window.len() as f64 {
        return Err(Missing::Coverage);
    }
    let valued: Vec<_> = series.valued().collect();
    Ok(detect_peaks(&valued, cfg.stove_threshold_c, cfg.baseline_s, cfg.merge_gap_s)
        .into_iter()
        .filter(|p| (window.0..window.1).contains(&p.0))
        .collect())
}

/// Outings from entrance-door opening times and subject activity times, both
/// sorted. An outing starts at a door opening (outside `excluded` ranges)
/// followed by at least `quiet_s` without activity, and ends at the last door
/// opening before activity resumes. Openings with no later opening before
/// the activity resumes are not outings.
pub fn detect_outings(
    door: &[Timestamp],
    activity: &[Timestamp],
    quiet_s: i64,
    excluded: &[(Timestamp, Timestamp)],
    day_end: Timestamp,
) -> Vec<(Timestamp, Timestamp)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < door.len() {
        let t = door[i];
        if excluded.iter().any(|(a, b)| (*a..*b).contains(&t)) {
            i += 1;
            continue;
        }
        let next_act = activity.get(activity.partition_point(|a| *a <= t)).copied().unwrap_or(day_end);
        let back = door[i + 1..].iter().take_while(|d| **d < next_act).last().copied();
        match back {
            Some(end) if next_act - t >= quiet_s => {
                out.push((t, end));
                i += door[i..].partition_point(|d| *d < next_act);
            }
            _ => i += 1,
        }
    }
    out
}

/// Sleep features of one night from mat phases in time order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NightSummary {
    pub light: u32,
    pub deep: u32,
    pub rem: u32,
    pub awake: u32,
    pub wake_ups: u32,
}

/// Per-phase sample counts and the number of awake runs of at least two
/// samples strictly inside the sleep episode (first to last non-awake
/// sample).
pub fn extract_sleep(phases: &[SleepPhase]) -> NightSummary {
    let count = |p| phases.iter().filter(|x| **x == p).count() as u32;
    let asleep = |p: &SleepPhase| *p != SleepPhase::Awake;
    let mut wake_ups = 0;
    if let (Some(a), Some(b)) = (phases.iter().position(asleep), phases.iter().rposition(asleep)) {
        let mut run = 0;
        for p in &phases[a..=b] {
            if *p == SleepPhase::Awake {
                run += 1;
            } else {
                wake_ups += u32::from(run >= 2);
                run = 0;
            }
        }
    }
    NightSummary {
        light: count(SleepPhase::Light),
        deep: count(SleepPhase::Deep),
        rem: count(SleepPhase::Rem),
        awake: count(SleepPhase::Awake),
        wake_ups,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("event from {device} which is not configured in home {home}")]
    UnknownDevice { home: String, device: DeviceId },
}

/// Subject-attributed activity: motion and presence onsets, object contacts,
/// toothbrush and bed-mat samples.
pub fn is_activity(e: &SensorEvent) -> bool {
    match e.kind {
        DeviceKind::MotionPir | DeviceKind::PresenceMmwave | DeviceKind::TabletPresence => {
            e.payload == Payload::Binary(BinaryState::On)
        }
        DeviceKind::MagneticContact | DeviceKind::Toothbrush | DeviceKind::SleepMat => true,
        _ => false,
    }
}

fn in_ranges(ranges: &[(Timestamp, Timestamp)], t: Timestamp) -> bool {
    ranges.iter().any(|(a, b)| (*a..*b).contains(&t))
}

fn periodic_series(
    events: &[&SensorEvent],
    dev: &DeviceSpec,
    range: (Timestamp, Timestamp),
    policy: ImputePolicy,
) -> ImputedSeries {
    let samples: Vec<(Timestamp, f64)> = events
        .iter()
        .filter(|e| e.device_id == dev.id)
        .filter_map(|e| e.payload.scalar().map(|v| (e.timestamp, v)))
        .collect();
    let grid = Grid::over(range, i64::from(dev.interval_s().unwrap_or(300)), samples.first().map(|s| s.0));
    impute(&samples, grid, policy)
}

fn day_coverage_ok(series: &ImputedSeries, cfg: &ExtractConfig) -> bool {
    let n = series.slots.len();
    n > 0 && series.count(SlotState::Missing) as f64 <= cfg.max_missing_fraction * n as f64
}

/// Extracts the features of `date` from `events`, which may hold any superset
/// of the needed span (the previous evening through the end of `date`).
/// Events in caregiver windows are ignored for subject-attributed features.
pub fn extract_daily(
    home: &HomeConfig,
    subject: &str,
    cfg: &ExtractConfig,
    date: NaiveDate,
    events: &[SensorEvent],
) -> Result<DailyFeatureVector, ExtractError> {
    use Feature::*;
    let clock = home.clock;
    let day = clock.day_range(date);
    let night = (
        clock.at_minute(date, i64::from(cfg.night_window.0) - 24 * 60),
        clock.at_minute(date, i64::from(cfg.night_window.1)),
    );
    let at = |m: u32| clock.at_minute(date, i64::from(m));
    let mut sorted: Vec<&SensorEvent> =
        events.iter().filter(|e| (night.0.min(day.0)..day.1).contains(&e.timestamp)).collect();
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device_id.cmp(&b.device_id)));
    if let Some(e) = sorted.iter().find(|e| home.device(&e.device_id).is_none()) {
        return Err(ExtractError::UnknownDevice { home: home.id.to_string(), device: e.device_id.clone() });
    }
    let today: Vec<&SensorEvent> = sorted.iter().copied().filter(|e| (day.0..day.1).contains(&e.timestamp)).collect();
    let caregiver = home.caregiver_ranges(date);
    let subject_events: Vec<&SensorEvent> =
        today.iter().copied().filter(|e| !in_ranges(&caregiver, e.timestamp)).collect();

    let mut values: BTreeMap<Feature, Value> = BTreeMap::new();
    let mut set = |f: Feature, v: Result<f64, Missing>| {
        values.insert(f, v.map_or_else(Value::Missing, Value::Valued));
    };
    let no_device = Err(Missing::NoDevice);

    // Stove peaks per meal window.
    match home.device_for(DeviceKind::Temperature, TargetObject::Stove) {
        Some(dev) => {
            let series = periodic_series(&today, dev, day, cfg.impute);
            for (f, w) in [(LunchCookingPeaks, cfg.lunch_window), (DinnerCookingPeaks, cfg.dinner_window)] {
                let peaks = detect_temperature_peaks(&series, (at(w.0), at(w.1)), cfg)
                    .map(|p| p.iter().filter(|p| !in_ranges(&caregiver, p.0)).count() as f64);
                set(f, peaks);
            }
        }
        None => {
            set(LunchCookingPeaks, no_device);
            set(DinnerCookingPeaks, no_device);
        }
    }

    set(
        MicrowaveUses,
        match home.device_for(DeviceKind::SmartPlugPower, TargetObject::Microwave) {
            Some(dev) => {
                let series = periodic_series(&today, dev, day, cfg.impute);
                if day_coverage_ok(&series, cfg) {
                    let mut uses = 0;
                    let mut on = false;
                    for s in &series.slots {
                        let now = s.state == SlotState::Original
                            && s.value.is_some_and(|v| v >= cfg.microwave_threshold_w)
                            && !in_ranges(&caregiver, s.ts);
                        uses += u32::from(now && !on);
                        on = now;
                    }
                    Ok(f64::from(uses))
                } else {
                    Err(Missing::Coverage)
                }
            }
            None => no_device,
        },
    );

    let openings = |target| match home.device_for(DeviceKind::MagneticContact, target) {
        Some(dev) => Ok(subject_events
            .iter()
            .filter(|e| e.device_id == dev.id && e.payload == Payload::Binary(BinaryState::Open))
            .count() as f64),
        None => Err(Missing::NoDevice),
    };
    set(FridgeOpenings, openings(TargetObject::Fridge));
    set(PantryOpenings, openings(TargetObject::Pantry));
    set(MedicineAccesses, openings(TargetObject::MedicineCabinet));

    set(
        ShowerEvents,
        match home.device_for(DeviceKind::Humidity, TargetObject::Shower) {
            Some(dev) => {
                let series = periodic_series(&today, dev, day, cfg.impute);
                if day_coverage_ok(&series, cfg) {
                    let valued: Vec<_> = series.valued().collect();
                    let peaks = detect_peaks(&valued, cfg.humidity_threshold_pct, cfg.baseline_s, cfg.merge_gap_s);
                    Ok(peaks.iter().filter(|p| !in_ranges(&caregiver, p.0)).count() as f64)
                } else {
                    Err(Missing::Coverage)
                }
            }
            None => no_device,
        },
    );

    set(
        ToothbrushSessions,
        match home.devices_of(DeviceKind::Toothbrush).next() {
            Some(dev) => Ok(subject_events.iter().filter(|e| e.device_id == dev.id).count() as f64),
            None => no_device,
        },
    );

    // Sleep over the night window ending this morning.
    let sleep_features = [SleepMinutes, DeepSleepMinutes, RemSleepMinutes, LightSleepMinutes, WakeUps];
    match home.device_for(DeviceKind::SleepMat, TargetObject::Bed) {
        Some(mat) => {
            let phases: Vec<SleepPhase> = sorted
                .iter()
                .filter(|e| e.device_id == mat.id && (night.0..night.1).contains(&e.timestamp))
                .filter_map(|e| match e.payload {
                    Payload::Sleep(p) => Some(p),
                    _ => None,
                })
                .collect();
            if phases.is_empty() {
                for f in sleep_features {
                    set(f, Err(Missing::Coverage));
                }
            } else {
                let n = extract_sleep(&phases);
                let minutes = |c: u32| f64::from(c) * f64::from(mat.interval_s().unwrap_or(60)) / 60.0;
                set(SleepMinutes, Ok(minutes(n.light + n.deep + n.rem)));
                set(DeepSleepMinutes, Ok(minutes(n.deep)));
                set(RemSleepMinutes, Ok(minutes(n.rem)));
                set(LightSleepMinutes, Ok(minutes(n.light)));
                set(WakeUps, Ok(f64::from(n.wake_ups)));
            }
        }
        None => {
            for f in sleep_features {
                set(f, no_device);
            }
        }
    }

    // Outings, then room occupancy outside them.
    let door = home.device_for(DeviceKind::EntranceDoorContact, TargetObject::EntranceDoor);
    let activity: Vec<&SensorEvent> = subject_events.iter().copied().filter(|e| is_activity(e)).collect();
    let outings = door.map(|d| {
        let opens: Vec<Timestamp> = today
            .iter()
            .filter(|e| e.device_id == d.id && e.payload == Payload::Binary(BinaryState::Open))
            .map(|e| e.timestamp)
            .collect();
        let act: Vec<Timestamp> = activity.iter().map(|e| e.timestamp).collect();
        detect_outings(&opens, &act, cfg.outing_quiet_s, &caregiver, day.1)
    });
    match &outings {
        Some(o) => {
            let lunch = (at(cfg.lunch_window.0), at(cfg.lunch_window.1));
            set(Outings, Ok(o.len() as f64));
            set(LunchtimeOutings, Ok(o.iter().filter(|(s, e)| *s < lunch.1 && *e > lunch.0).count() as f64));
            set(OutingMinutes, Ok(o.iter().map(|(s, e)| (e - s) as f64 / 60.0).sum()));
        }
        None => {
            set(Outings, no_device);
            set(LunchtimeOutings, no_device);
            set(OutingMinutes, no_device);
        }
    }

    let mut minutes: BTreeMap<&RoomId, u32> = home.floorplan.rooms.iter().map(|r| (&r.id, 0)).collect();
    let mut last_room: Option<&RoomId> = None;
    let mut j = 0;
    let outs = outings.as_deref().unwrap_or(&[]);
    for m in 0..(day.1 - day.0) / 60 {
        let t = day.0 + m * 60;
        while j < activity.len() && activity[j].timestamp < t + 60 {
            if let Some(r) = home.room_of(&activity[j].device_id) {
                last_room = Some(r);
            }
            j += 1;
        }
        if outs.iter().any(|(s, e)| (*s..*e).contains(&t)) {
            continue;
        }
        if let Some(r) = last_room {
            *minutes.entry(r).or_insert(0) += 1;
        }
    }
    for (r, m) in minutes {
        set(Occupancy(r.clone()), Ok(f64::from(m)));
    }

    set(
        Steps,
        match home.devices_of(DeviceKind::Smartwatch).next() {
            Some(dev) => {
                let ts: Vec<Timestamp> = today.iter().filter(|e| e.device_id == dev.id).map(|e| e.timestamp).collect();
                let c = coverage(&ts, dev, day);
                if f64::from(c.expected - c.observed) > cfg.max_missing_fraction * f64::from(c.expected) {
                    Err(Missing::Coverage)
                } else {
                    Ok(today.iter().filter(|e| e.device_id == dev.id).filter_map(|e| e.payload.scalar()).sum())
                }
            }
            None => no_device,
        },
    );

    match home.devices_of(DeviceKind::TabletPresence).next() {
        Some(tab) => {
            let outcome = today.iter().rev().find_map(|e| match e.payload {
                Payload::TestOutcome { compliant, score } if e.device_id == tab.id => Some((compliant, score)),
                _ => None,
            });
            match outcome {
                Some((compliant, score)) => {
                    set(TestCompliance, Ok(if compliant { 1.0 } else { 0.0 }));
                    let s = score.filter(|_| compliant).map(f64::from).ok_or(Missing::NotScheduled);
                    set(TestScore, s);
                }
                None => {
                    set(TestCompliance, Err(Missing::NotScheduled));
                    set(TestScore, Err(Missing::NotScheduled));
                }
            }
        }
        None => {
            set(TestCompliance, no_device);
            set(TestScore, no_device);
        }
    }

    Ok(DailyFeatureVector { subject: subject.to_owned(), date, values, caregiver_present: !caregiver.is_empty() })
}

/// Extracts every date in `from..=to` from a date-ordered event stream.
pub fn extract_range(
    home: &HomeConfig,
    subject: &str,
    cfg: &ExtractConfig,
    from: NaiveDate,
    to: NaiveDate,
    events: &[SensorEvent],
) -> Result<Vec<DailyFeatureVector>, ExtractError> {
    let mut out = Vec::new();
    let mut date = from;
    while date <= to {
        let (lo, hi) = home.clock.day_range(date);
        let a = events.partition_point(|e| e.timestamp < lo - DAY_SECONDS);
        let b = events.partition_point(|e| e.timestamp < hi);
        out.push(extract_daily(home, subject, cfg, date, &events[a..b])?);
        date = match date.succ_opt() {
            Some(d) => d,
            None => break,
        };
    }
    Ok(out)
}

pub const TABLE_HEADER: &str = "#carewatch-features v1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TableError {
    #[error("missing or unsupported table header")]
    BadHeader,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Feature(#[from] UnknownFeature),
}

/// Writes vectors of one subject as a tab-separated table, one row per day.
/// Columns are the union of features present, in feature order; a missing
/// value is written `NA:<reason>`.
pub fn write_table(subject: &str, rows: &[DailyFeatureVector]) -> String {
    let cols: std::collections::BTreeSet<&Feature> = rows.iter().flat_map(|r| r.values.keys()).collect();
    let mut out = format!("{TABLE_HEADER} subject={subject}\ndate\tcaregiver");
    for c in &cols {
        out.push('\t');
        out.push_str(&c.name());
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{}\t{}", r.date, u8::from(r.caregiver_present)));
        for c in &cols {
            out.push('\t');
            match r.values.get(*c) {
                Some(Value::Valued(v)) => out.push_str(&v.to_string()),
                Some(Value::Missing(m)) => {
                    out.push_str("NA:");
                    out.push_str(m.tag());
                }
                None => out.push_str("NA:no-device"),
            }
        }
        out.push('\n');
    }
    out
}

/// Parses [`write_table`] output.
pub fn read_table(text: &str) -> Result<Vec<DailyFeatureVector>, TableError> {
    let mut lines = text.lines();
    let subject = lines
        .next()
        .and_then(|h| h.strip_prefix(TABLE_HEADER))
        .and_then(|r| r.trim().strip_prefix("subject="))
        .ok_or(TableError::BadHeader)?
        .to_owned();
    let header = lines.next().ok_or(TableError::BadHeader)?;
    let mut names = header.split('\t');
    if names.next() != Some("date") || names.next() != Some("caregiver") {
        return Err(TableError::BadHeader);
    }
    let cols: Vec<Feature> = names.map(str::parse).collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |reason: &str| TableError::Malformed { line: i + 3, reason: reason.to_owned() };
        let mut cells = line.split('\t');
        let date = cells.next().and_then(|d| d.parse().ok()).ok_or_else(|| bad("date"))?;
        let caregiver = match cells.next() {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad("caregiver flag")),
        };
        let mut values = BTreeMap::new();
        for c in &cols {
            let cell = cells.next().ok_or_else(|| bad("too few cells"))?;
            let v = match cell.strip_prefix("NA:") {
                Some("no-device") => Value::Missing(Missing::NoDevice),
                Some("coverage") => Value::Missing(Missing::Coverage),
                Some("not-scheduled") => Value::Missing(Missing::NotScheduled),
                Some(_) => return Err(bad("missing reason")),
                None => Value::Valued(cell.parse().map_err(|_| bad("number"))?),
            };
            values.insert(c.clone(), v);
        }
        if cells.next().is_some() {
            return Err(bad("too many cells"));
        }
        rows.push(DailyFeatureVector { subject: subject.clone(), date, values, caregiver_present: caregiver });
    }
    Ok(rows)
}
