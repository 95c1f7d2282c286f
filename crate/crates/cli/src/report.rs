//! Plot-ready tables of stored results.
//!
//! `report` writes tab-separated files under `<dir>/`:
//!
//! * `series/<feature>.tsv`, one row per day:
//!   `date  value  rolling_median  change`. `value` is `NA:<reason>` on a
//!   missing day; `rolling_median` is the median of the valued days in the
//!   trailing detector window, `NA` while fewer than half of them are valued;
//!   `change` is `increased` or `decreased` inside a change report, else `-`.
//! * `windows.tsv`: `feature  start  end  effect  p_value  flagged`, one row
//!   per scored window; unscored windows have `NA` scores.
//! * `reports.tsv`: `feature  start  end  direction  effect  persistence
//!   p_value  reference_median  window_median  seasonal  explanation`.
//!
//! Every file starts with a `#carewatch-<table> v1` line naming the subject.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use carewatch_analysis::{read_table, Feature, FeatureSeries, Value};
use carewatch_sync::StoredResults;

use crate::CliError;

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::component("report", e)
}

/// Median of the valued entries, `None` when there are none.
fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Trailing `window`-day medians, `None` until at least half the window is
/// valued.
pub fn rolling_median(col: &[Option<f64>], window: usize) -> Vec<Option<f64>> {
    let window = window.max(1);
    (0..col.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let mut vals: Vec<f64> = col[lo..=i].iter().flatten().copied().collect();
            if vals.len() * 2 < window {
                None
            } else {
                median(&mut vals)
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| x.to_string())
}

/// Writes the tables for `stored`, restricted to `features` when given.
/// Returns the files written.
pub fn write_report(
    stored: &StoredResults,
    features: Option<&[Feature]>,
    dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let r = &stored.results;
    let subject = stored.pseudonym.as_str();
    let rows = read_table(&r.features).map_err(fail)?;
    let header = r.features.lines().nth(1).unwrap_or("date\tcaregiver");
    let mut columns: BTreeSet<Feature> = header.split('\t').skip(2).filter_map(|n| n.parse().ok()).collect();
    if let Some(only) = features {
        for f in only {
            if !columns.contains(f) {
                return Err(CliError::NotFound {
                    code: "unknown-feature".into(),
                    message: format!("no feature {f} in results"),
                });
            }
        }
        columns = only.iter().cloned().collect();
    }
    let wanted = |f: &Feature| columns.contains(f);
    let series = FeatureSeries::from_vectors(subject, &rows);
    let w = r.thresholds.window_days as usize;

    fs::create_dir_all(dir.join("series")).map_err(fail)?;
    let mut written = Vec::new();
    for f in &columns {
        let mut text = format!(
            "#carewatch-series v1 subject={subject} feature={f} window={w}\ndate\tvalue\trolling_median\tchange\n"
        );
        let empty = vec![None; series.len];
        let col = series.columns.get(f).unwrap_or(&empty);
        let trend = rolling_median(col, w);
        for (i, t) in trend.iter().enumerate() {
            let date = series.date(i);
            let value = match rows.iter().find(|row| row.date == date).and_then(|row| row.values.get(f)) {
                Some(Value::Valued(v)) => v.to_string(),
                Some(Value::Missing(m)) => format!("NA:{}", m.tag()),
                None => "NA".into(),
            };
            let change = r
                .reports
                .iter()
                .find(|rep| &rep.feature == f && (rep.start..=rep.end).contains(&date))
                .map_or("-", |rep| rep.direction.verb());
            writeln!(text, "{date}\t{value}\t{}\t{change}", cell(*t)).expect("string");
        }
        let path = dir.join("series").join(format!("{}.tsv", f.name().replace(':', "-")));
        fs::write(&path, text).map_err(fail)?;
        written.push(path);
    }

    let mut text = format!("#carewatch-windows v1 subject={subject}\nfeature\tstart\tend\teffect\tp_value\tflagged\n");
    for win in r.windows.iter().filter(|x| wanted(&x.feature)) {
        let (effect, p) = win.score.map_or((None, None), |s| (Some(s.effect), Some(s.p_value)));
        writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}",
            win.feature,
            win.start,
            win.end,
            cell(effect),
            cell(p),
            u8::from(win.flagged)
        )
        .expect("string");
    }
    let path = dir.join("windows.tsv");
    fs::write(&path, text).map_err(fail)?;
    written.push(path);

    let mut text = format!(
        "#carewatch-reports v1 subject={subject}\nfeature\tstart\tend\tdirection\teffect\tpersistence\tp_value\treference_median\twindow_median\tseasonal\texplanation\n"
    );
    for rep in r.reports.iter().filter(|x| wanted(&x.feature)) {
        writeln!(
            text,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            rep.feature,
            rep.start,
            rep.end,
            rep.direction.verb(),
            rep.effect_size,
            rep.persistence,
            rep.p_value,
            rep.reference_median,
            rep.window_median,
            u8::from(rep.seasonal_confound),
            rep.explanation.replace(['\t', '\n'], " ")
        )
        .expect("string");
    }
    let path = dir.join("reports.tsv");
    fs::write(&path, text).map_err(fail)?;
    written.push(path);
    Ok(written)
}
