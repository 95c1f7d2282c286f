mod common;

use std::sync::Arc;

use carewatch_core::{DeviceKind, HomeId, Pseudonym};
use carewatch_homesim::{FaultSpec, HomeTemplate};
use carewatch_sync::{
    open_location_b64, utc_span, AlertKind, ClientError, EventQuery, Gateway, Identity, IngestAck, LocationKey,
    Platform, PlatformClient, Server, ThresholdOverrides,
};
use chrono::Days;
use common::*;

fn start() -> (tempfile::TempDir, Arc<Platform>, Server) {
    let dir = tempfile::tempdir().unwrap();
    let platform = Arc::new(Platform::open(dir.path(), credentials()).unwrap());
    let server = Server::start(platform.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    (dir, platform, server)
}

#[test]
fn end_to_end_over_http() {
    let (_d, platform, server) = start();
    let url = server.url();
    let clinician = PlatformClient::new(&url, CLINICIAN_TOKEN);
    let analyst = PlatformClient::new(&url, ANALYST_TOKEN);
    let gateway = PlatformClient::new(&url, GATEWAY_TOKEN);

    let who = Identity { name: "Subject A".into(), home_id: HomeId::new("casa-a") };
    let ps = clinician.register(&who).unwrap();
    assert_eq!(clinician.register(&who).unwrap_err().code(), Some("already-registered"));
    assert_eq!(analyst.register(&who).unwrap_err().code(), Some("forbidden"));

    let template = HomeTemplate { location_consent: true, ..HomeTemplate::default() };
    let run = sim_run("casa-a", &template, FaultSpec::default());
    let (from, to) = (date("2025-02-03"), date("2025-02-05"));
    let gdir = tempfile::tempdir().unwrap();
    let mut gw = Gateway::open(run.home.clone(), gdir.path(), run.home.clock.day_range(from).0).unwrap();
    let key = LocationKey::from_bytes([1; 32]);
    let mut stored = 0;
    for l in days(&run, from, to, 2) {
        feed(&mut gw, &l.events);
        gw.enqueue(l.date, &ps, Some(&key)).unwrap();
        let s = gw.sync_pending(&gateway, midnight_after(&run, l.date) + 30).unwrap();
        assert_eq!((s.accepted, s.retained), (1, 0));
        stored += l.events.iter().filter(|e| e.kind != DeviceKind::LocationSource).count();
    }
    let frame = gw.synced_frames().unwrap().remove(0);
    assert_eq!(gateway.ingest(&frame).unwrap(), IngestAck::Duplicate);
    assert_eq!(analyst.ingest(&frame).unwrap_err().code(), Some("forbidden"));
    assert_eq!(gateway.ingest(&frame.replacen("binary:", "binary:x", 1)).unwrap_err().code(), Some("digest-mismatch"));

    let subjects = analyst.subjects().unwrap();
    assert_eq!((subjects.len(), subjects[0].events as usize), (1, stored));

    let (lo, hi) = utc_span(from - Days::new(1), to + Days::new(1));
    let page = analyst.events(&ps, &EventQuery::range(lo, hi)).unwrap();
    assert_eq!(
        page,
        platform.query_events(Some(&cred(carewatch_sync::Role::Analyst)), &ps, &EventQuery::range(lo, hi)).unwrap()
    );
    assert_eq!(page.total, stored);
    let fixes: usize =
        page.location_blobs.iter().map(|b| open_location_b64(&key, &b.batch_id, &b.ciphertext).unwrap().len()).sum();
    assert!(fixes > 0);
    let q = EventQuery {
        kinds: Some([DeviceKind::Toothbrush].into()),
        offset: 1,
        limit: Some(2),
        ..EventQuery::range(lo, hi)
    };
    let tb = analyst.events(&ps, &q).unwrap();
    assert!(tb.events.len() <= 2 && tb.events.iter().all(|e| e.kind == DeviceKind::Toothbrush));
    assert_eq!(analyst.events(&ps, &EventQuery::range(hi, lo)).unwrap_err().code(), Some("invalid-range"));
    assert_eq!(
        analyst.events(&Pseudonym::new("nobody"), &EventQuery::range(lo, hi)).unwrap_err().code(),
        Some("unknown-pseudonym")
    );

    // Identity resolution, audited on every call.
    assert_eq!(clinician.resolve_identity(&ps).unwrap(), who);
    assert_eq!(analyst.resolve_identity(&ps).unwrap_err().code(), Some("denied"));
    assert_eq!(PlatformClient::new(&url, "bogus").resolve_identity(&ps).unwrap_err().code(), Some("unauthorized"));
    assert_eq!(platform.audit_rows(), 2);

    // Results and what-if re-scoring.
    assert!(analyst.results(&ps, None, None).unwrap().is_none());
    assert_eq!(analyst.rescore(&ps, &ThresholdOverrides::default()).unwrap_err().code(), Some("no-results"));
    let results = synthetic_results(&ps, 11);
    assert_eq!(analyst.store_results(&ps, &results).unwrap(), 1);
    let back = clinician.results(&ps, None, None).unwrap().unwrap();
    assert_eq!((back.version, &back.results), (1, &results));
    let ranged = clinician.results(&ps, Some((date("2025-01-01"), date("2025-01-10"))), Some(1)).unwrap().unwrap();
    assert_eq!(ranged.results.features.lines().count(), 12);
    let same = analyst.rescore(&ps, &ThresholdOverrides::default()).unwrap();
    assert_eq!((&same.windows, &same.reports), (&results.windows, &results.reports));
    let strict = clinician.rescore(&ps, &ThresholdOverrides { min_effect: Some(40.0), ..Default::default() }).unwrap();
    assert!(strict.reports.is_empty());
    let bad = ThresholdOverrides { persistence: Some(0), ..Default::default() };
    assert_eq!(analyst.rescore(&ps, &bad).unwrap_err().code(), Some("invalid-thresholds"));
    assert_eq!(clinician.results(&ps, None, None).unwrap().unwrap().version, 1);

    // Stopping the server turns the next sync into a retained batch.
    server.stop().unwrap();
    let next = to + Days::new(1);
    let l = days(&run, next, next, 2).remove(0);
    feed(&mut gw, &l.events);
    gw.enqueue(next, &ps, Some(&key)).unwrap();
    let s = gw.sync_pending(&gateway, midnight_after(&run, next) + 30).unwrap();
    assert_eq!((s.accepted, s.retained), (0, 1));
    assert!(gw.open_alerts().iter().any(|a| a.kind == AlertKind::GatewayUnreachable));
    assert!(matches!(analyst.subjects(), Err(ClientError::Unreachable(_))));

    // A new server on the same store picks up where the old one stopped.
    let server = Server::start(platform.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let gateway = PlatformClient::new(&server.url(), GATEWAY_TOKEN);
    let s = gw.sync_pending(&gateway, midnight_after(&run, next) + 3600).unwrap();
    assert_eq!((s.accepted, s.retained), (1, 0));
    assert!(gw.open_alerts().is_empty());
    assert_eq!(platform.batches(&ps).len(), 4);
}
