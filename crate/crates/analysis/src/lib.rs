//! Analysis pipeline: curation of raw sensor streams, daily behavioral
//! features, and detection of sustained changes against a personal baseline.

pub mod curation;
pub mod drift;
pub mod features;
pub mod stats;

pub use curation::{
    change_points, coverage, default_penalty, detect_gaps, fill, impute, penalized_cost, poisson_cost, segment,
    Coverage, Gap, Grid, ImputePolicy, ImputedSeries, Segment, Slot, SlotState,
};
pub use drift::{
    analyze, attribute, detect_sustained, explain, fit_baseline, render_summary, score_window, score_windows,
    seasonal_flag, AnalysisResult, Attribution, BaselineModel, ChangeReport, Direction, FeatureBaseline, FeatureSeries,
    ScaleRule, ThresholdError, Thresholds, WindowFlag, WindowScore, WindowTooSparse,
};
pub use features::{
    detect_outings, detect_peaks, detect_temperature_peaks, extract_daily, extract_range, extract_sleep, read_table,
    write_table, DailyFeatureVector, ExtractConfig, ExtractError, Feature, Missing, Value,
};
