use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use carewatch_analysis::Feature;
use carewatch_cli::config::BUILTIN;
use carewatch_cli::{
    cmd_run, cmd_simulate, load, write_report, Api, CliError, Endpoint, Overrides, RunOptions, Tokens, EXIT_CONFIG,
    EXIT_NOT_FOUND,
};
use carewatch_core::{DeviceKind, Pseudonym};
use carewatch_sync::Platform;
use chrono::NaiveDate;

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn scenario_file(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn config_error(text: &str) -> (String, String) {
    let dir = tempfile::tempdir().unwrap();
    match load(&scenario_file(dir.path(), text), &Overrides::default()) {
        Err(e) => (e.path, e.message),
        Ok(_) => panic!("accepted:\n{text}"),
    }
}

fn local(out: &Path) -> Api {
    let tokens = Tokens::load_or_create(&out.join("credentials.json")).unwrap();
    let platform = Platform::open(out.join("platform"), tokens.credentials()).unwrap();
    Api { endpoint: Endpoint::Local(Arc::new(platform)), tokens }
}

/// Every file under `root` with its bytes.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

const HEAD: &str = "version = 1\nseed = 1\nfrom = \"2025-01-01\"\nto = \"2025-01-10\"\n";

#[test]
fn bundled_scenarios_load() {
    for (name, _) in BUILTIN {
        let cfg = load(&format!("builtin:{name}"), &Overrides::default()).unwrap();
        assert!(!cfg.homes.is_empty(), "{name}");
    }
    let cfg =
        load("builtin:outage", &Overrides { subject: Some("casa-dario".into()), ..Overrides::default() }).unwrap();
    assert_eq!(cfg.homes.len(), 1);
}

#[test]
fn config_errors_name_the_field() {
    let (path, _) = config_error("version = 2\n");
    assert_eq!(path, "version");

    let (path, msg) = config_error(&format!("{HEAD}\n[[homes]]\nid = \"h\"\nname = \"N\"\ncolour = 1\n"));
    assert_eq!(path, "homes");
    assert!(msg.contains("colour"), "{msg}");

    let fault = "[[homes.faults]]\ntype = \"device-dropout\"\ndevice = \"kettle\"\nfrom = \"2025-01-02T00:00:00Z\"\nuntil = \"2025-01-02T03:00:00Z\"\n";
    let (path, msg) = config_error(&format!("{HEAD}\n[[homes]]\nid = \"h\"\nname = \"N\"\n\n{fault}"));
    assert_eq!(path, "homes[0].faults[0].device");
    assert!(msg.contains("kettle"), "{msg}");

    let drift = "[[homes.drift]]\nscenario = \"lunch-shift\"\nonset_day = 400\n";
    let (path, _) = config_error(&format!("{HEAD}\n[[homes]]\nid = \"h\"\nname = \"N\"\n\n{drift}"));
    assert_eq!(path, "homes[0].drift");

    let (path, _) =
        config_error(&format!("{HEAD}\n[thresholds]\nalpha = 2.0\n\n[[homes]]\nid = \"h\"\nname = \"N\"\n"));
    assert_eq!(path, "thresholds");

    let err = load("missing/scenario.toml", &Overrides::default()).unwrap_err();
    assert_eq!(CliError::from(err).exit_code(), EXIT_CONFIG);
}

#[test]
fn simulation_is_deterministic() {
    let cfg = load("builtin:outage", &Overrides { to: Some(date("2025-03-06")), ..Overrides::default() }).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m = cmd_simulate(&cfg, a.path()).unwrap();
    cmd_simulate(&cfg, b.path()).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(ta.contains_key(Path::new("manifest.json")));
    assert!(ta.contains_key(Path::new("logs/casa-carla/2025-03-04.log")));
    assert_eq!(ta, tb);
    assert_eq!(m.homes.len(), 2);

    let other =
        load("builtin:outage", &Overrides { seed: Some(9), to: Some(date("2025-03-06")), ..Overrides::default() })
            .unwrap();
    let c = tempfile::tempdir().unwrap();
    cmd_simulate(&other, c.path()).unwrap();
    assert_ne!(tree(c.path()), ta);
}

#[test]
fn a_steady_subject_gets_no_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("builtin:no-drift", &Overrides::default()).unwrap();
    let api = local(dir.path());
    let summary = cmd_run(&cfg, &api, dir.path(), &RunOptions { capture_traffic: false }).unwrap();
    let h = &summary.homes[0];
    assert!(h.reports.is_empty(), "{:?}", h.reports);
    assert_eq!(h.stored as usize, h.emitted - h.location - h.dropped);
    assert_eq!((h.pending_batches, h.results_version), (0, 1));
    let text = fs::read_to_string(dir.path().join("summaries").join(format!("{}.txt", h.pseudonym))).unwrap();
    assert!(!text.contains("Bruno") && !text.contains("casa-bruno"));
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn an_interrupted_run_resumes_without_duplicates() {
    let cfg = load("builtin:outage", &Overrides::default()).unwrap();
    let fresh = tempfile::tempdir().unwrap();
    let want = cmd_run(&cfg, &local(fresh.path()), fresh.path(), &RunOptions { capture_traffic: false }).unwrap();

    // Stop mid-outage, then run the whole range again in the same directory.
    let dir = tempfile::tempdir().unwrap();
    let partial = load("builtin:outage", &Overrides { to: Some(date("2025-03-05")), ..Overrides::default() }).unwrap();
    let first = cmd_run(&partial, &local(dir.path()), dir.path(), &RunOptions { capture_traffic: false }).unwrap();
    assert!(first.homes.iter().zip(&want.homes).all(|(f, w)| f.stored < w.stored));
    let api = local(dir.path());
    let got = cmd_run(&cfg, &api, dir.path(), &RunOptions { capture_traffic: false }).unwrap();
    for (g, w) in got.homes.iter().zip(&want.homes) {
        assert_eq!(g.pseudonym, first.homes.iter().find(|h| h.home == g.home).unwrap().pseudonym);
        assert_eq!(
            (g.emitted, g.location, g.dropped, g.stored),
            (w.emitted, w.location, w.dropped, w.stored),
            "{}",
            g.home
        );
        assert_eq!(g.stored as usize, g.emitted - g.location - g.dropped);
        assert_eq!((g.pending_batches, g.results_version), (0, 2));
        assert_eq!(g.reports.len(), w.reports.len());
    }
    let subjects = api.subjects().unwrap();
    assert_eq!(subjects.len(), 2);
}

#[test]
fn report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        load("builtin:outage", &Overrides { subject: Some("casa-carla".into()), ..Overrides::default() }).unwrap();
    let api = local(dir.path());
    let summary = cmd_run(&cfg, &api, dir.path(), &RunOptions { capture_traffic: true }).unwrap();
    let p = &summary.homes[0].pseudonym;
    assert!(dir.path().join("traffic/casa-carla.frames").exists());

    let stored = api.results(p, None, None).unwrap();
    let dest = dir.path().join("report");
    let files = write_report(&stored, Some(&[Feature::FridgeOpenings]), &dest).unwrap();
    assert_eq!(files.len(), 3);
    let series = fs::read_to_string(dest.join("series/fridge-openings.tsv")).unwrap();
    let lines: Vec<&str> = series.lines().collect();
    assert!(lines[0].starts_with("#carewatch-series v1"));
    assert_eq!(lines[1], "date\tvalue\trolling_median\tchange");
    assert_eq!(lines.len(), 2 + 21);
    assert!(lines[2].starts_with("2025-03-01\t"));

    // An empty range keeps the headers.
    let empty = api.results(p, Some((date("2024-01-01"), date("2024-01-31"))), None).unwrap();
    let dest = dir.path().join("empty");
    write_report(&empty, None, &dest).unwrap();
    let reports = fs::read_to_string(dest.join("reports.tsv")).unwrap();
    assert_eq!(reports.lines().count(), 2);
    let series = fs::read_to_string(dest.join("series/steps.tsv")).unwrap();
    assert_eq!(series.lines().count(), 2);

    let unknown = api.results(&Pseudonym::new("0".repeat(32)), None, None).unwrap_err();
    assert_eq!(unknown.exit_code(), EXIT_NOT_FOUND);

    // Location stays sealed on the analyst side.
    let (lo, hi) = carewatch_sync::utc_span(cfg.from, cfg.to);
    let page = api.all_events(p, lo, hi).unwrap();
    assert!(page.events.iter().all(|e| e.kind != DeviceKind::LocationSource));
    assert!(!page.location_blobs.is_empty());
}

fn carewatch(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_carewatch")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into(),
        String::from_utf8_lossy(&out.stderr).into(),
    )
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, stdout, _) = carewatch(&["scenarios"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("builtin:alice"));

    let (code, _, stderr) = carewatch(&["simulate", "--config", "builtin:nope", "--out", out]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("config-invalid"));

    let (code, stdout, stderr) =
        carewatch(&["run", "--config", "builtin:no-drift", "--out", out, "--to", "2025-02-10", "--mode", "http"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("casa-bruno ->"));

    let (code, _, stderr) = carewatch(&["report", "--out", out, "--subject", &"f".repeat(32)]);
    assert_eq!(code, 4, "{stderr}");
    let pseudonym = fs::read_to_string(dir.path().join("gateways/casa-bruno/pseudonym")).unwrap();
    let (code, stdout, stderr) =
        carewatch(&["report", "--out", out, "--subject", pseudonym.trim(), "--features", "steps"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(stdout.lines().count(), 3);
    let (code, _, _) = carewatch(&["report", "--out", out, "--subject", pseudonym.trim(), "--features", "bogus"]);
    assert_eq!(code, 2);
}
