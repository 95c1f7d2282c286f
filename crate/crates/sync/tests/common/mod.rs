#![allow(dead_code)]

use carewatch_core::{Cohort, Consent, Routine, SensorEvent, SubjectId, SubjectProfile, Timestamp};
use carewatch_homesim::{standard_home, BehaviorScript, DayLog, FaultSpec, HomeRun, HomeSimulator, HomeTemplate};
use carewatch_sync::{Credential, Credentials, Gateway, Role};
use chrono::NaiveDate;

pub const GATEWAY_TOKEN: &str = "tok-gateway";
pub const CLINICIAN_TOKEN: &str = "tok-clinician";
pub const ANALYST_TOKEN: &str = "tok-analyst";
pub const LOCATION_TOKEN: &str = "tok-location";

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn credentials() -> Credentials {
    Credentials::default()
        .with(GATEWAY_TOKEN, "gw", Role::Gateway)
        .with(CLINICIAN_TOKEN, "dr-rossi", Role::Clinician)
        .with(ANALYST_TOKEN, "analyst-1", Role::Analyst)
        .with(LOCATION_TOKEN, "loc-1", Role::LocationAnalysis)
}

pub fn cred(role: Role) -> Credential {
    let token = match role {
        Role::Gateway => GATEWAY_TOKEN,
        Role::Clinician => CLINICIAN_TOKEN,
        Role::Analyst => ANALYST_TOKEN,
        Role::LocationAnalysis => LOCATION_TOKEN,
    };
    credentials().lookup(token).unwrap().clone()
}

pub fn sim_run(id: &str, template: &HomeTemplate, faults: FaultSpec) -> HomeRun {
    let home = standard_home(id, template);
    let subject = SubjectProfile {
        id: SubjectId::new(format!("subject-{id}")),
        cohort: Cohort::Neurodegenerative,
        routine: Routine::default(),
        consent: Consent { location: template.location_consent },
    };
    let script = BehaviorScript::for_home(&subject, &home);
    HomeRun { home, subject, script, scenarios: Vec::new(), faults }
}

pub fn days(run: &HomeRun, from: NaiveDate, to: NaiveDate, seed: u64) -> Vec<DayLog> {
    HomeSimulator::new(run, from, to, seed).unwrap().collect()
}

/// Feeds events to the gateway in time order.
pub fn feed(gw: &mut Gateway, events: &[SensorEvent]) {
    let mut sorted: Vec<&SensorEvent> = events.iter().collect();
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.device_id.cmp(&b.device_id)));
    for e in sorted {
        gw.ingest_local(e).unwrap();
    }
}

pub fn midnight_after(run: &HomeRun, d: NaiveDate) -> Timestamp {
    run.home.clock.day_range(d).1
}

/// Analysis results over 200 synthetic days where fridge openings double on
/// day 140, labelled with `p`.
pub fn synthetic_results(p: &carewatch_core::Pseudonym, seed: u64) -> carewatch_sync::AnalysisResults {
    use carewatch_analysis::{analyze, write_table, DailyFeatureVector, Feature, FeatureSeries, Thresholds, Value};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Poisson};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let start = date("2025-01-01");
    let rows: Vec<DailyFeatureVector> = (0..200u64)
        .map(|i| {
            let fridge = if i < 140 { 8.0 } else { 16.0 };
            let values =
                [(Feature::FridgeOpenings, fridge as f64), (Feature::PantryOpenings, 5.0), (Feature::Steps, 3000.0)]
                    .into_iter()
                    .map(|(f, rate)| (f, Value::Valued(Poisson::<f64>::new(rate).unwrap().sample(&mut rng).round())))
                    .collect();
            DailyFeatureVector {
                subject: p.to_string(),
                date: start + chrono::Days::new(i),
                values,
                caregiver_present: false,
            }
        })
        .collect();
    let thresholds = Thresholds::default();
    let res = analyze(&FeatureSeries::from_vectors(p.as_str(), &rows), &thresholds).unwrap();
    carewatch_sync::AnalysisResults {
        features: write_table(p.as_str(), &rows),
        thresholds,
        windows: res.windows,
        reports: res.reports,
    }
}
