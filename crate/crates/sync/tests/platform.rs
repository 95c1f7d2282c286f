mod common;

use std::collections::{BTreeMap, BTreeSet};

use carewatch_core::{DeviceKind, HomeId, Pseudonym, SensorEvent};
use carewatch_homesim::{FaultSpec, HomeTemplate};
use carewatch_sync::{
    open_location_b64, utc_span, AuditOutcome, Direct, EventQuery, Gateway, Identity, IngestAck, LocationKey, Platform,
    PlatformError, Role, SyncBatch, ThresholdOverrides,
};
use chrono::Days;
use common::*;
use proptest::prelude::*;

fn platform() -> (tempfile::TempDir, Platform) {
    let dir = tempfile::tempdir().unwrap();
    let p = Platform::open(dir.path(), credentials()).unwrap();
    (dir, p)
}

fn identity(home: &str) -> Identity {
    Identity { name: format!("Subject {home}"), home_id: HomeId::new(home) }
}

fn register(p: &Platform, home: &str) -> Pseudonym {
    p.register(Some(&cred(Role::Clinician)), identity(home)).unwrap()
}

/// One simulated day as a frame for `pseudonym`.
fn frame(pseudonym: &Pseudonym, seed: u64) -> (SyncBatch, String) {
    let run = sim_run("h1", &HomeTemplate::default(), FaultSpec::default());
    let day = date("2025-03-03");
    let log = days(&run, day, day, seed).remove(0);
    let b = SyncBatch::assemble(pseudonym, day, log.events.clone(), None).unwrap();
    let f = b.encode();
    (b, f)
}

#[test]
fn ingest_acknowledges_and_rejects() {
    let (_d, p) = platform();
    let gw = cred(Role::Gateway);
    let ps = register(&p, "h1");
    let (b, f) = frame(&ps, 1);
    assert_eq!(p.ingest(Some(&gw), &f).unwrap(), IngestAck::Accepted);
    assert_eq!(p.ingest(Some(&gw), &f).unwrap(), IngestAck::Duplicate);
    assert_eq!(p.event_count(&ps), b.events.len() as u64);

    // Same batch id, different content.
    let (_, other) = frame(&ps, 2);
    assert!(matches!(p.ingest(Some(&gw), &other), Err(PlatformError::DigestMismatch { .. })));
    // A flipped byte inside the payload.
    let tampered = f.replacen("binary:open", "binary:shut", 1);
    assert_ne!(tampered, f);
    assert_eq!(p.ingest(Some(&gw), &tampered).unwrap_err().code(), "digest-mismatch");
    assert_eq!(p.ingest(Some(&gw), "hello").unwrap_err().code(), "malformed-batch");

    let (_, stranger) = frame(&Pseudonym::new("ffff"), 1);
    assert!(matches!(p.ingest(Some(&gw), &stranger), Err(PlatformError::UnknownPseudonym(_))));
    assert!(matches!(p.ingest(Some(&cred(Role::Analyst)), &f), Err(PlatformError::Forbidden { .. })));
    assert!(matches!(p.ingest(None, &f), Err(PlatformError::Unauthorized)));
    assert_eq!(p.batches(&ps).len(), 1);
    assert_eq!(p.event_count(&ps), b.events.len() as u64);
}

#[test]
fn registration_issues_unique_opaque_pseudonyms() {
    let (_d, p) = platform();
    let clin = cred(Role::Clinician);
    let mut seen = BTreeSet::new();
    for i in 0..1000 {
        let ps = p.register(Some(&clin), identity(&format!("home-{i}"))).unwrap();
        assert_eq!(ps.as_str().len(), 32);
        assert!(ps.as_str().chars().all(|c| c.is_ascii_hexdigit()) && !ps.as_str().contains("home"));
        assert!(seen.insert(ps));
    }
    assert!(matches!(p.register(Some(&clin), identity("home-7")), Err(PlatformError::AlreadyRegistered(_))));
    assert!(matches!(p.register(Some(&cred(Role::Analyst)), identity("x")), Err(PlatformError::Forbidden { .. })));
}

#[test]
fn resolving_identity_is_clinician_only_and_audited() {
    let (_d, p) = platform();
    let ps = register(&p, "casa-7");
    assert_eq!(p.resolve_identity(Some(&cred(Role::Clinician)), &ps).unwrap(), identity("casa-7"));
    for role in [Role::Analyst, Role::LocationAnalysis, Role::Gateway] {
        assert!(matches!(p.resolve_identity(Some(&cred(role)), &ps), Err(PlatformError::Denied(_))));
    }
    let ghost = Pseudonym::new("0".repeat(32));
    assert!(matches!(
        p.resolve_identity(Some(&cred(Role::Clinician)), &ghost),
        Err(PlatformError::UnknownPseudonym(_))
    ));
    assert!(matches!(p.resolve_identity(None, &ps), Err(PlatformError::Unauthorized)));

    let log = p.audit_log().unwrap();
    assert_eq!(log.len(), 5);
    assert_eq!(p.audit_rows(), 5);
    let outcomes: Vec<AuditOutcome> = log.iter().map(|r| r.outcome).collect();
    assert_eq!(
        outcomes,
        [
            AuditOutcome::Resolved,
            AuditOutcome::Denied,
            AuditOutcome::Denied,
            AuditOutcome::Denied,
            AuditOutcome::UnknownPseudonym
        ]
    );
    assert_eq!(log[1].caller, "analyst-1");
}

#[test]
fn synced_days_are_conserved_and_queryable() {
    let template = HomeTemplate { location_consent: true, ..HomeTemplate::default() };
    let run = sim_run("h9", &template, FaultSpec::default());
    let (from, to) = (date("2025-05-05"), date("2025-05-11"));
    let (_pd, p) = platform();
    let ps = register(&p, "h9");
    let gdir = tempfile::tempdir().unwrap();
    let mut gw = Gateway::open(run.home.clone(), gdir.path(), run.home.clock.day_range(from).0).unwrap();
    let key = LocationKey::from_bytes([3; 32]);
    let transport = Direct { platform: &p, credential: cred(Role::Gateway) };
    let mut expected: Vec<SensorEvent> = Vec::new();
    let mut fixes = 0;
    for l in days(&run, from, to, 12) {
        feed(&mut gw, &l.events);
        gw.enqueue(l.date, &ps, Some(&key)).unwrap();
        gw.sync_pending(&transport, midnight_after(&run, l.date) + 60).unwrap();
        fixes += l.events.iter().filter(|e| e.kind == DeviceKind::LocationSource).count();
        expected.extend(l.events.into_iter().filter(|e| e.kind != DeviceKind::LocationSource));
    }
    assert!(fixes > 0);
    assert_eq!(p.event_count(&ps), expected.len() as u64);

    let (lo, hi) = utc_span(from - Days::new(1), to + Days::new(1));
    let analyst = cred(Role::Analyst);
    let page = p.query_events(Some(&analyst), &ps, &EventQuery::range(lo, hi)).unwrap();
    assert_eq!(page.total, expected.len());
    assert!(page.events.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    let count = |evs: &[SensorEvent]| {
        let mut m: BTreeMap<(String, i64), usize> = BTreeMap::new();
        for e in evs {
            *m.entry((e.device_id.to_string(), e.timestamp)).or_default() += 1;
        }
        m
    };
    assert_eq!(count(&page.events), count(&expected));
    assert!(page.events.iter().all(|e| matches!(e.home_ref, carewatch_core::HomeRef::Pseudonym(_))));

    // Location is sealed for readers and opens with the home's key.
    let mut opened = 0;
    for blob in &page.location_blobs {
        opened += open_location_b64(&key, &blob.batch_id, &blob.ciphertext).unwrap().len();
    }
    assert_eq!(opened, fixes);
    assert!(open_location_b64(
        &LocationKey::from_bytes([4; 32]),
        &page.location_blobs[0].batch_id,
        &page.location_blobs[0].ciphertext
    )
    .is_err());

    // Kind filters, paging and empty ranges.
    let q = EventQuery { kinds: Some([DeviceKind::MagneticContact].into()), ..EventQuery::range(lo, hi) };
    let contacts = p.query_events(Some(&analyst), &ps, &q).unwrap();
    assert_eq!(contacts.total, expected.iter().filter(|e| e.kind == DeviceKind::MagneticContact).count());
    assert!(contacts.location_blobs.is_empty());
    let mut paged = Vec::new();
    let mut offset = 0;
    loop {
        let q = EventQuery { offset, limit: Some(500), ..EventQuery::range(lo, hi) };
        let page = p.query_events(Some(&cred(Role::Clinician)), &ps, &q).unwrap();
        paged.extend(page.events);
        match page.next_offset {
            Some(o) => offset = o,
            None => break,
        }
    }
    assert_eq!(count(&paged), count(&expected));
    let empty = p.query_events(Some(&analyst), &ps, &EventQuery::range(lo, lo)).unwrap();
    assert_eq!((empty.total, empty.location_blobs.len()), (0, 0));
    let before = utc_span(from - Days::new(30), from - Days::new(10));
    assert_eq!(p.query_events(Some(&analyst), &ps, &EventQuery::range(before.0, before.1)).unwrap().total, 0);
    assert!(matches!(
        p.query_events(Some(&analyst), &ps, &EventQuery::range(hi, lo)),
        Err(PlatformError::InvalidRange { .. })
    ));
    assert!(matches!(
        p.query_events(Some(&cred(Role::Gateway)), &ps, &EventQuery::range(lo, hi)),
        Err(PlatformError::Forbidden { .. })
    ));

    let subjects = p.subjects(Some(&analyst)).unwrap();
    assert_eq!((subjects[0].days, subjects[0].events), (7, expected.len() as u64));
    assert!(p.silent_gateways(subjects[0].last_received_at.unwrap() + 10, 3600).is_empty());
    assert_eq!(p.silent_gateways(subjects[0].last_received_at.unwrap() + 7200, 3600), vec![ps.clone()]);

    // Everything survives a restart.
    drop(p);
    let p = Platform::open(_pd.path(), credentials()).unwrap();
    assert_eq!(p.event_count(&ps), expected.len() as u64);
    assert_eq!(p.query_events(Some(&analyst), &ps, &EventQuery::range(lo, hi)).unwrap().total, expected.len());
}

#[test]
fn results_are_versioned_and_rescoring_is_pure() {
    let (dir, p) = platform();
    let ps = register(&p, "h1");
    let analyst = cred(Role::Analyst);
    assert!(p.query_results(Some(&analyst), &ps, None, None).unwrap().is_none());
    assert!(matches!(p.rescore(Some(&analyst), &ps, &ThresholdOverrides::default()), Err(PlatformError::NoResults(_))));

    let results = synthetic_results(&ps, 4);
    assert!(!results.reports.is_empty(), "the synthetic shift should be reported");
    assert_eq!(p.store_results(Some(&analyst), &ps, results.clone()).unwrap(), 1);
    assert_eq!(p.store_results(Some(&analyst), &ps, synthetic_results(&ps, 5)).unwrap(), 2);
    assert!(matches!(
        p.store_results(Some(&cred(Role::Gateway)), &ps, results.clone()),
        Err(PlatformError::Forbidden { .. })
    ));
    let foreign = synthetic_results(&Pseudonym::new("someone-else"), 4);
    assert!(matches!(p.store_results(Some(&analyst), &ps, foreign), Err(PlatformError::MalformedResults(_))));

    let latest = p.query_results(Some(&analyst), &ps, None, None).unwrap().unwrap();
    assert_eq!(latest.version, 2);
    let v1 = p.query_results(Some(&analyst), &ps, None, Some(1)).unwrap().unwrap();
    assert_eq!(v1.results, results);
    assert!(p.query_results(Some(&analyst), &ps, None, Some(9)).unwrap().is_none());

    let (a, b) = (date("2025-03-01"), date("2025-03-31"));
    let ranged = p.query_results(Some(&analyst), &ps, Some((a, b)), Some(1)).unwrap().unwrap();
    assert_eq!(ranged.results.features.lines().count(), 2 + 31);
    assert!(ranged.results.windows.iter().all(|w| w.start <= b && w.end >= a));
    assert!(ranged.results.reports.is_empty());

    // Re-scoring with no overrides reproduces the stored run.
    let r = p.rescore(Some(&analyst), &ps, &ThresholdOverrides::default()).unwrap();
    let stored = latest.results;
    assert_eq!(
        (r.version, &r.windows, &r.reports, &r.thresholds),
        (2, &stored.windows, &stored.reports, &stored.thresholds)
    );
    let strict = ThresholdOverrides { min_effect: Some(50.0), ..Default::default() };
    let r2 = p.rescore(Some(&cred(Role::Clinician)), &ps, &strict).unwrap();
    assert!(r2.reports.is_empty());
    assert_eq!(r2.thresholds.min_effect, 50.0);
    let loose = ThresholdOverrides { persistence: Some(1), alpha: Some(0.2), ..Default::default() };
    assert!(p.rescore(Some(&analyst), &ps, &loose).unwrap().reports.len() >= stored.reports.len());
    let bad = ThresholdOverrides { alpha: Some(0.0), ..Default::default() };
    assert_eq!(p.rescore(Some(&analyst), &ps, &bad).unwrap_err().code(), "invalid-thresholds");
    // Nothing was persisted by re-scoring.
    assert_eq!(p.query_results(Some(&analyst), &ps, None, None).unwrap().unwrap().results, stored);
    assert_eq!(std::fs::read_dir(dir.path().join("results").join(ps.as_str())).unwrap().count(), 2);

    drop(p);
    let p = Platform::open(dir.path(), credentials()).unwrap();
    assert_eq!(p.subjects(Some(&analyst)).unwrap()[0].latest_results, Some(2));
    assert_eq!(p.store_results(Some(&analyst), &ps, results).unwrap(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Any interleaving of resends leaves exactly one copy of each batch.
    #[test]
    fn resends_are_idempotent(order in proptest::collection::vec(0usize..3, 1..12)) {
        let (_d, p) = platform();
        let ps = register(&p, "h1");
        let run = sim_run("h1", &HomeTemplate::default(), FaultSpec::default());
        let day = date("2025-03-03");
        let logs = days(&run, day, day + Days::new(2), 6);
        let frames: Vec<(usize, String)> = logs
            .iter()
            .map(|l| {
                let b = SyncBatch::assemble(&ps, l.date, l.events.clone(), None).unwrap();
                (b.events.len(), b.encode())
            })
            .collect();
        let gw = cred(Role::Gateway);
        let mut sent = BTreeSet::new();
        for i in order {
            let ack = p.ingest(Some(&gw), &frames[i].1).unwrap();
            prop_assert_eq!(ack == IngestAck::Accepted, sent.insert(i));
        }
        let want: usize = sent.iter().map(|&i| frames[i].0).sum();
        prop_assert_eq!(p.event_count(&ps), want as u64);
        prop_assert_eq!(p.batches(&ps).len(), sent.len());
    }
}
