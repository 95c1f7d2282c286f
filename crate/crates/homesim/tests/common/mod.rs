#![allow(dead_code)]

use carewatch_core::{
    CaregiverWindow, Cohort, Consent, DeviceKind, HomeConfig, Routine, SensorEvent, SubjectId, SubjectProfile,
    Timestamp,
};
use carewatch_homesim::{standard_home, BehaviorScript, HomeTemplate};
use chrono::NaiveDate;

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn subject(location: bool) -> SubjectProfile {
    SubjectProfile {
        id: SubjectId::new("subject-1"),
        cohort: Cohort::Neurodegenerative,
        routine: Routine::default(),
        consent: Consent { location },
    }
}

pub fn home_with(id: &str, caregiver: Vec<CaregiverWindow>, location: bool) -> HomeConfig {
    standard_home(id, &HomeTemplate { caregiver, location_consent: location, ..Default::default() })
}

pub fn setup() -> (HomeConfig, SubjectProfile, BehaviorScript) {
    let home = home_with("home-1", vec![], true);
    let subject = subject(true);
    let script = BehaviorScript::for_home(&subject, &home);
    (home, subject, script)
}

/// Start times of runs of stove samples at least `threshold` above ambient.
pub fn stove_runs(events: &[SensorEvent], ambient: f64, threshold: f64) -> Vec<Timestamp> {
    let mut starts = Vec::new();
    let mut inside = false;
    for e in events.iter().filter(|e| e.kind == DeviceKind::Temperature) {
        let hot = e.payload.scalar().unwrap() >= ambient + threshold;
        if hot && !inside {
            starts.push(e.timestamp);
        }
        inside = hot;
    }
    starts
}
