#![allow(dead_code)]

use carewatch_analysis::{extract_range, DailyFeatureVector, ExtractConfig};
use carewatch_core::{Cohort, Consent, HomeConfig, Routine, SensorEvent, SubjectId, SubjectProfile};
use carewatch_homesim::{
    standard_home, BehaviorScript, DriftScenario, FaultSpec, HomeRun, HomeSimulator, HomeTemplate,
};
use chrono::{Days, NaiveDate};

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn run(id: &str, template: &HomeTemplate, scenarios: &[(&str, u64)], start: NaiveDate) -> HomeRun {
    let home = standard_home(id, template);
    let subject = SubjectProfile {
        id: SubjectId::new(format!("subject-{id}")),
        cohort: Cohort::Neurodegenerative,
        routine: Routine::default(),
        consent: Consent { location: template.location_consent },
    };
    let script = BehaviorScript::for_home(&subject, &home);
    let scenarios = scenarios
        .iter()
        .map(|(name, onset)| DriftScenario::builtin(name, start + Days::new(*onset), 14).unwrap())
        .collect();
    HomeRun { home, subject, script, scenarios, faults: FaultSpec::default() }
}

pub fn events(run: &HomeRun, from: NaiveDate, to: NaiveDate, seed: u64) -> Vec<SensorEvent> {
    HomeSimulator::new(run, from, to, seed).unwrap().flat_map(|d| d.events).collect()
}

pub fn features(
    home: &HomeConfig,
    run: &HomeRun,
    from: NaiveDate,
    to: NaiveDate,
    seed: u64,
) -> Vec<DailyFeatureVector> {
    let ev = events(run, from, to, seed);
    let cfg = ExtractConfig::for_routine(&run.subject.routine);
    extract_range(home, home.id.as_str(), &cfg, from, to, &ev).unwrap()
}
