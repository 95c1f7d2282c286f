//! Sustained behavioral change detection.
//!
//! A baseline is fitted on a reference period. Observation windows of `W`
//! days slide weekly after it; a window is flagged when the rank-sum test
//! against the reference is significant and the median has moved by at least
//! `E` robust scale units. `K` consecutive flags in the same direction make a
//! [`ChangeReport`]. Isolated outliers never do.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use carewatch_core::Behavior;

use crate::features::{DailyFeatureVector, Feature};
use crate::stats::{mad, median, rank_sum, smallest_positive_deviation, MAD_SCALE};

/// Relative slack on threshold comparisons, so that rescaling a series does
/// not flip a flag through rounding.
const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Observation window length `W`, days.
    pub window_days: u32,
    pub stride_days: u32,
    /// Consecutive flagged windows needed for a report (`K`).
    pub persistence: u32,
    pub alpha: f64,
    /// Minimum absolute effect size `E`, in robust scale units.
    pub min_effect: f64,
    pub reference_days: u32,
    /// Valued reference days needed to score a feature.
    pub min_support: u32,
    /// A feature missing on more than this fraction of reference days is not
    /// scored.
    pub max_reference_missing: f64,
    /// A window needs at least this fraction of valued days.
    pub min_window_valued: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            window_days: 28,
            stride_days: 7,
            persistence: 3,
            alpha: 0.01,
            min_effect: 1.0,
            reference_days: 90,
            min_support: 28,
            max_reference_missing: 0.5,
            min_window_valued: 0.5,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("alpha must be in (0, 1], got {0}")]
    Alpha(f64),
    #[error("minimum effect must be finite and non-negative, got {0}")]
    Effect(f64),
    #[error("{field} must be at least {min}")]
    TooSmall { field: &'static str, min: u32 },
    #[error("{field} must be a fraction in [0, 1], got {value}")]
    Fraction { field: &'static str, value: f64 },
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), ThresholdError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ThresholdError::Alpha(self.alpha));
        }
        if !(self.min_effect.is_finite() && self.min_effect >= 0.0) {
            return Err(ThresholdError::Effect(self.min_effect));
        }
        for (field, v, min) in [
            ("window_days", self.window_days, 2),
            ("stride_days", self.stride_days, 1),
            ("persistence", self.persistence, 1),
            ("reference_days", self.reference_days, 2),
            ("min_support", self.min_support, 1),
        ] {
            if v < min {
                return Err(ThresholdError::TooSmall { field, min });
            }
        }
        for (field, value) in
            [("max_reference_missing", self.max_reference_missing), ("min_window_valued", self.min_window_valued)]
        {
            if !(0.0..=1.0).contains(&value) {
                return Err(ThresholdError::Fraction { field, value });
            }
        }
        Ok(())
    }
}

/// Daily values of one subject on consecutive dates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeries {
    pub subject: String,
    pub start: NaiveDate,
    pub len: usize,
    pub columns: BTreeMap<Feature, Vec<Option<f64>>>,
}

impl FeatureSeries {
    /// Lays vectors on a contiguous calendar from the earliest to the latest
    /// date; absent dates are missing everywhere.
    pub fn from_vectors(subject: &str, rows: &[DailyFeatureVector]) -> Self {
        let Some(start) = rows.iter().map(|r| r.date).min() else {
            return Self { subject: subject.to_owned(), start: NaiveDate::MIN, len: 0, columns: BTreeMap::new() };
        };
        let end = rows.iter().map(|r| r.date).max().unwrap_or(start);
        let len = (end - start).num_days() as usize + 1;
        let mut columns: BTreeMap<Feature, Vec<Option<f64>>> = BTreeMap::new();
        for r in rows {
            let i = (r.date - start).num_days() as usize;
            for (f, v) in &r.values {
                columns.entry(f.clone()).or_insert_with(|| vec![None; len])[i] = v.get();
            }
        }
        Self { subject: subject.to_owned(), start, len, columns }
    }

    pub fn date(&self, i: usize) -> NaiveDate {
        self.start + Days::new(i as u64)
    }

    pub fn index(&self, date: NaiveDate) -> Option<usize> {
        let i = (date - self.start).num_days();
        (i >= 0 && (i as usize) < self.len).then_some(i as usize)
    }
}

/// How the effect size is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleRule {
    /// Scaled MAD of the reference.
    Mad,
    /// MAD is zero: smallest positive deviation from the reference median.
    SmallestDeviation,
    /// The reference is constant: smallest positive deviation of the window
    /// values from the reference median, or no effect at all.
    QuasiConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBaseline {
    pub median: f64,
    /// Scaled by [`MAD_SCALE`].
    pub mad: f64,
    pub rule: ScaleRule,
    /// Normalizer for [`ScaleRule::Mad`] and [`ScaleRule::SmallestDeviation`].
    pub scale: f64,
    /// Medians by weekday, Monday first.
    pub weekday_medians: [Option<f64>; 7],
    pub fraction_missing: f64,
    pub support: u32,
    pub reference: Vec<f64>,
}

impl FeatureBaseline {
    fn fit(values: &[Option<f64>], dates: impl Iterator<Item = NaiveDate>) -> Option<Self> {
        let valued: Vec<f64> = values.iter().flatten().copied().collect();
        let med = median(&valued)?;
        let raw_mad = mad(&valued, med).unwrap_or(0.0);
        let (rule, scale) = if raw_mad > 0.0 {
            (ScaleRule::Mad, raw_mad * MAD_SCALE)
        } else if let Some(d) = smallest_positive_deviation(&valued, med) {
            (ScaleRule::SmallestDeviation, d)
        } else {
            (ScaleRule::QuasiConstant, 0.0)
        };
        let mut by_day: [Vec<f64>; 7] = Default::default();
        for (v, d) in values.iter().zip(dates) {
            if let Some(v) = v {
                by_day[d.weekday().num_days_from_monday() as usize].push(*v);
            }
        }
        Some(Self {
            median: med,
            mad: raw_mad * MAD_SCALE,
            rule,
            scale,
            weekday_medians: by_day.map(|v| median(&v)),
            fraction_missing: 1.0 - valued.len() as f64 / values.len().max(1) as f64,
            support: valued.len() as u32,
            reference: valued,
        })
    }

    /// `(window median - reference median) / scale`.
    pub fn effect(&self, window: &[f64]) -> f64 {
        let Some(m) = median(window) else { return 0.0 };
        let scale = match self.rule {
            ScaleRule::QuasiConstant => match smallest_positive_deviation(window, self.median) {
                Some(d) => d,
                None => return 0.0,
            },
            _ => self.scale,
        };
        (m - self.median) / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unscorable {
    TooManyMissing,
    InsufficientSupport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub subject: String,
    /// Inclusive reference dates.
    pub reference: (NaiveDate, NaiveDate),
    pub features: BTreeMap<Feature, FeatureBaseline>,
    pub unscorable: BTreeMap<Feature, Unscorable>,
}

/// Fits per-feature robust statistics over the inclusive `reference` dates.
/// Features below the support or above the missingness limit are listed as
/// unscorable instead of failing the fit.
pub fn fit_baseline(series: &FeatureSeries, reference: (NaiveDate, NaiveDate), th: &Thresholds) -> BaselineModel {
    let lo = series.index(reference.0).unwrap_or(0);
    let hi = series.index(reference.1).map_or(series.len, |i| i + 1);
    let mut features = BTreeMap::new();
    let mut unscorable = BTreeMap::new();
    for (f, col) in &series.columns {
        let values = &col[lo.min(hi)..hi];
        let valued = values.iter().flatten().count();
        let missing = 1.0 - valued as f64 / values.len().max(1) as f64;
        if missing > th.max_reference_missing {
            unscorable.insert(f.clone(), Unscorable::TooManyMissing);
        } else if (valued as u32) < th.min_support {
            unscorable.insert(f.clone(), Unscorable::InsufficientSupport);
        } else if let Some(b) = FeatureBaseline::fit(values, (lo..hi).map(|i| series.date(i))) {
            features.insert(f.clone(), b);
        }
    }
    BaselineModel { subject: series.subject.clone(), reference, features, unscorable }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("window has {valued} valued days of {len}")]
pub struct WindowTooSparse {
    pub valued: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowScore {
    pub effect: f64,
    pub p_value: f64,
}

/// Scores one window of daily values against a feature baseline.
pub fn score_window(
    baseline: &FeatureBaseline,
    window: &[Option<f64>],
    th: &Thresholds,
) -> Result<WindowScore, WindowTooSparse> {
    let valued: Vec<f64> = window.iter().flatten().copied().collect();
    if valued.is_empty() || (valued.len() as f64) < th.min_window_valued * window.len() as f64 {
        return Err(WindowTooSparse { valued: valued.len(), len: window.len() });
    }
    Ok(WindowScore { effect: baseline.effect(&valued), p_value: rank_sum(&valued, &baseline.reference).p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Increase,
    Decrease,
}

impl Direction {
    pub fn of(effect: f64) -> Option<Self> {
        if effect > 0.0 {
            Some(Direction::Increase)
        } else if effect < 0.0 {
            Some(Direction::Decrease)
        } else {
            None
        }
    }

    pub fn verb(self) -> &'static str {
        match self {
            Direction::Increase => "increased",
            Direction::Decrease => "decreased",
        }
    }
}

/// One scored observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowFlag {
    pub feature: Feature,
    pub start: NaiveDate,
    /// Inclusive.
    pub end: NaiveDate,
    /// `None` for a window too sparse to score.
    pub score: Option<WindowScore>,
    pub flagged: bool,
}

impl WindowFlag {
    pub fn direction(&self) -> Option<Direction> {
        self.score.filter(|_| self.flagged).and_then(|s| Direction::of(s.effect))
    }
}

fn passes(score: &WindowScore, th: &Thresholds) -> bool {
    score.p_value <= th.alpha * (1.0 + TOLERANCE)
        && score.effect != 0.0
        && score.effect.abs() >= th.min_effect * (1.0 - TOLERANCE)
}

/// Scores every full window after the reference for every scorable feature.
pub fn score_windows(baseline: &BaselineModel, series: &FeatureSeries, th: &Thresholds) -> Vec<WindowFlag> {
    let first = series.index(baseline.reference.1).map_or(0, |i| i + 1);
    let w = th.window_days as usize;
    let mut out = Vec::new();
    for (f, b) in &baseline.features {
        let Some(col) = series.columns.get(f) else { continue };
        let mut s = first;
        while s + w <= series.len {
            let score = score_window(b, &col[s..s + w], th).ok();
            out.push(WindowFlag {
                feature: f.clone(),
                start: series.date(s),
                end: series.date(s + w - 1),
                score,
                flagged: score.is_some_and(|sc| passes(&sc, th)),
            });
            s += th.stride_days as usize;
        }
    }
    out
}

/// Feature attribution inside an explanation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: Feature,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub subject: String,
    pub feature: Feature,
    /// First day of the first flagged window.
    pub start: NaiveDate,
    /// Last day of the last flagged window.
    pub end: NaiveDate,
    pub direction: Direction,
    /// Weakest effect among the flagged windows.
    pub effect_size: f64,
    /// Number of consecutive flagged windows.
    pub persistence: u32,
    /// Largest p-value among the flagged windows.
    pub p_value: f64,
    /// Rounded to two decimals, as quoted in the explanation.
    pub reference_median: f64,
    pub window_median: f64,
    pub seasonal_confound: bool,
    pub explanation: String,
    /// Co-reported features of the same group, highest attribution first.
    pub contributors: Vec<Attribution>,
}

fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Runs of at least `K` consecutive same-direction flags, per feature.
pub fn detect_sustained(
    baseline: &BaselineModel,
    series: &FeatureSeries,
    windows: &[WindowFlag],
    th: &Thresholds,
) -> Vec<ChangeReport> {
    let mut reports = Vec::new();
    let mut i = 0;
    while i < windows.len() {
        let Some(dir) = windows[i].direction() else {
            i += 1;
            continue;
        };
        let mut j = i;
        while j + 1 < windows.len()
            && windows[j + 1].feature == windows[i].feature
            && windows[j + 1].direction() == Some(dir)
        {
            j += 1;
        }
        let run = &windows[i..=j];
        if run.len() as u32 >= th.persistence {
            let f = &windows[i].feature;
            let b = &baseline.features[f];
            let (start, end) = (run[0].start, run[run.len() - 1].end);
            let scores: Vec<WindowScore> = run.iter().filter_map(|w| w.score).collect();
            let weakest = scores.iter().map(|s| s.effect).min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
            let p = scores.iter().map(|s| s.p_value).fold(0.0, f64::max);
            reports.push(ChangeReport {
                subject: baseline.subject.clone(),
                feature: f.clone(),
                start,
                end,
                direction: dir,
                effect_size: weakest,
                persistence: run.len() as u32,
                p_value: p,
                reference_median: round2(b.median),
                window_median: round2(median(&span_values(series, f, start, end)).unwrap_or(f64::NAN)),
                seasonal_confound: seasonal_flag(f, baseline.reference, (start, end)),
                explanation: String::new(),
                contributors: Vec::new(),
            });
        }
        i = j + 1;
    }
    reports
}

fn span_values(series: &FeatureSeries, f: &Feature, start: NaiveDate, end: NaiveDate) -> Vec<f64> {
    let (Some(col), Some(a)) = (series.columns.get(f), series.index(start)) else { return Vec::new() };
    let b = series.index(end).map_or(series.len, |i| i + 1);
    col[a..b].iter().flatten().copied().collect()
}

fn months(span: (NaiveDate, NaiveDate)) -> BTreeSet<u32> {
    span.0.iter_days().take_while(|d| *d <= span.1).map(|d| d.month()).collect()
}

/// Whether a change in `feature` over `window` may be seasonal: the feature
/// follows the season and the window shares no calendar month with the
/// reference.
pub fn seasonal_flag(feature: &Feature, reference: (NaiveDate, NaiveDate), window: (NaiveDate, NaiveDate)) -> bool {
    feature.season_sensitive() && months(reference).is_disjoint(&months(window))
}

/// Leave-one-feature-out attribution. The group score is the sum of absolute
/// effects over `span`; each feature is credited with the drop in that score
/// when its window values are replaced by its reference values. Scores are
/// normalized to sum to one.
pub fn attribute(
    baseline: &BaselineModel,
    series: &FeatureSeries,
    group: &[Feature],
    span: (NaiveDate, NaiveDate),
) -> Vec<Attribution> {
    let windows: BTreeMap<&Feature, Vec<f64>> =
        group.iter().map(|f| (f, span_values(series, f, span.0, span.1))).collect();
    let score = |replaced: Option<&Feature>| -> f64 {
        group
            .iter()
            .map(|f| {
                let b = &baseline.features[f];
                let values = if replaced == Some(f) { &b.reference } else { &windows[f] };
                b.effect(values).abs()
            })
            .sum()
    };
    let full = score(None);
    let drops: Vec<f64> = group.iter().map(|f| (full - score(Some(f))).max(0.0)).collect();
    let total: f64 = drops.iter().sum();
    let mut out: Vec<Attribution> = group
        .iter()
        .zip(&drops)
        .map(|(f, d)| Attribution {
            feature: f.clone(),
            score: if total > 0.0 { d / total } else { 1.0 / group.len() as f64 },
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.feature.cmp(&b.feature)));
    out
}

fn phrase(r: &ChangeReport) -> String {
    let unit = r.feature.unit();
    let unit = if unit.is_empty() { String::new() } else { format!(" {unit}") };
    format!(
        "{} {} ({} -> {}{})",
        r.feature.name().replace('-', " "),
        r.direction.verb(),
        r.reference_median,
        r.window_median,
        unit
    )
}

fn category_lead(c: Behavior) -> &'static str {
    match c {
        Behavior::Nutrition => "Meals",
        Behavior::PersonalHygiene => "Personal hygiene",
        Behavior::Sleep => "Sleep",
        Behavior::Therapy => "Medication",
        Behavior::MobilityHome => "Movement at home",
        Behavior::MobilityOutdoor => "Time outdoors",
        Behavior::Cognition => "Cognitive tests",
    }
}

/// Renders the explanation for a group of same-category reports.
pub fn explain(group: &[&ChangeReport]) -> String {
    let Some(first) = group.first() else { return String::new() };
    let find = |f: Feature, d: Direction| group.iter().find(|r| r.feature == f && r.direction == d);
    let mut text = match (
        find(Feature::LunchCookingPeaks, Direction::Decrease),
        find(Feature::LunchtimeOutings, Direction::Increase),
    ) {
        (Some(cook), Some(out)) => format!(
            "Meals: lunchtime cooking peaks went from {} to {} per day while lunchtime outings went from {} to {} per day; lunch is likely being eaten away from home.",
            cook.reference_median, cook.window_median, out.reference_median, out.window_median
        ),
        _ => {
            let parts: Vec<String> = group.iter().map(|r| phrase(r)).collect();
            format!("{}: {}.", category_lead(first.feature.category()), parts.join("; "))
        }
    };
    if group.iter().any(|r| r.seasonal_confound) {
        text.push_str(" The change period shares no month with the reference period, so part of this may be seasonal.");
    }
    text
}

/// Groups reports by category and overlapping spans, then fills in
/// explanations and attributions.
pub fn explain_all(baseline: &BaselineModel, series: &FeatureSeries, reports: &mut [ChangeReport]) {
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by_key(|&i| (reports[i].feature.category(), reports[i].start, reports[i].feature.clone()));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_end = NaiveDate::MIN;
    for i in order {
        let r = &reports[i];
        match groups.last_mut() {
            Some(g) if reports[g[0]].feature.category() == r.feature.category() && r.start <= group_end => {
                g.push(i);
                group_end = group_end.max(r.end);
            }
            _ => {
                groups.push(vec![i]);
                group_end = r.end;
            }
        }
    }
    for g in groups {
        let span = (
            g.iter().map(|&i| reports[i].start).min().unwrap_or(NaiveDate::MIN),
            g.iter().map(|&i| reports[i].end).max().unwrap_or(NaiveDate::MIN),
        );
        let features: Vec<Feature> =
            g.iter().map(|&i| reports[i].feature.clone()).collect::<BTreeSet<_>>().into_iter().collect();
        let attribution = attribute(baseline, series, &features, span);
        let text = explain(&g.iter().map(|&i| &reports[i]).collect::<Vec<_>>());
        for &i in &g {
            reports[i].explanation = text.clone();
            reports[i].contributors = attribution.clone();
        }
    }
}

/// Everything derived for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub subject: String,
    pub thresholds: Thresholds,
    pub baseline: BaselineModel,
    pub windows: Vec<WindowFlag>,
    pub reports: Vec<ChangeReport>,
}

/// Fits the baseline on the first `reference_days` days and scores the rest.
pub fn analyze(series: &FeatureSeries, th: &Thresholds) -> Result<AnalysisResult, ThresholdError> {
    th.validate()?;
    let end = series.start + Days::new(u64::from(th.reference_days) - 1);
    let baseline = fit_baseline(series, (series.start, end), th);
    let windows = score_windows(&baseline, series, th);
    let mut reports = detect_sustained(&baseline, series, &windows, th);
    explain_all(&baseline, series, &mut reports);
    Ok(AnalysisResult { subject: series.subject.clone(), thresholds: th.clone(), baseline, windows, reports })
}

/// Plain-text clinician summary.
pub fn render_summary(result: &AnalysisResult) -> String {
    let mut out = format!("Subject {}\n", result.subject);
    out.push_str(&format!("Reference period {} to {}\n", result.baseline.reference.0, result.baseline.reference.1));
    if result.reports.is_empty() {
        out.push_str("No sustained behavioral changes.\n");
        return out;
    }
    out.push_str(&format!("{} sustained change(s):\n", result.reports.len()));
    for r in &result.reports {
        out.push_str(&format!(
            "- {} {} from {} to {} (effect {:.2}, p {:.2e}, {} windows){}\n  {}\n",
            r.feature,
            r.direction.verb(),
            r.start,
            r.end,
            r.effect_size,
            r.p_value,
            r.persistence,
            if r.seasonal_confound { ", possibly seasonal" } else { "" },
            r.explanation
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<Option<f64>>) -> FeatureSeries {
        let len = values.len();
        FeatureSeries {
            subject: "p".into(),
            start: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            len,
            columns: BTreeMap::from([(Feature::Steps, values)]),
        }
    }

    #[test]
    fn constant_feature_is_quasi_constant() {
        let s = series(vec![Some(5.0); 60]);
        let th = Thresholds::default();
        let b = fit_baseline(&s, (s.start, s.date(59)), &th);
        let f = &b.features[&Feature::Steps];
        assert_eq!((f.median, f.mad, f.rule), (5.0, 0.0, ScaleRule::QuasiConstant));
        assert_eq!(f.effect(&[5.0, 5.0]), 0.0);
        assert_eq!(f.effect(&[7.0, 7.0, 9.0]), 1.0);
    }

    #[test]
    fn all_missing_is_unscorable() {
        let s = series(vec![None; 60]);
        let b = fit_baseline(&s, (s.start, s.date(59)), &Thresholds::default());
        assert_eq!(b.unscorable[&Feature::Steps], Unscorable::TooManyMissing);
    }

    #[test]
    fn sparse_window_is_rejected() {
        let s = series((0..60).map(|i| Some(f64::from(i % 7))).collect());
        let th = Thresholds::default();
        let b = fit_baseline(&s, (s.start, s.date(59)), &th);
        let mut w = vec![None; 28];
        for v in w.iter_mut().take(3) {
            *v = Some(1.0);
        }
        assert_eq!(score_window(&b.features[&Feature::Steps], &w, &th), Err(WindowTooSparse { valued: 3, len: 28 }));
    }

    #[test]
    fn thresholds_are_validated() {
        assert!(Thresholds::default().validate().is_ok());
        let bad = Thresholds { alpha: 1.5, ..Thresholds::default() };
        assert_eq!(bad.validate(), Err(ThresholdError::Alpha(1.5)));
    }

    #[test]
    fn seasonal_rule() {
        let d = |m, day| NaiveDate::from_ymd_opt(2024, m, day).unwrap();
        let reference = (d(1, 1), d(3, 31));
        assert!(seasonal_flag(&Feature::Outings, reference, (d(7, 1), d(7, 28))));
        assert!(!seasonal_flag(&Feature::Outings, reference, (d(3, 20), d(4, 16))));
        assert!(!seasonal_flag(&Feature::ToothbrushSessions, reference, (d(7, 1), d(7, 28))));
    }
}
