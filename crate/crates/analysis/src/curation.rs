//! Data cleaning: coverage and gaps of periodic channels, small-gap
//! imputation, and change-point segmentation of event rates.

use serde::{Deserialize, Serialize};

use carewatch_core::{DeviceId, DeviceSpec, ReportingMode, Timestamp};

/// A maximal run of missing samples of a periodic device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub device_id: DeviceId,
    /// First missing slot.
    pub start: Timestamp,
    /// Next received sample, or the end of the analyzed range.
    pub end: Timestamp,
    pub expected_samples_missed: u32,
}

/// Sampling slots of a periodic device over a range: `first + k * interval`
/// for `k < len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub first: Timestamp,
    pub interval: i64,
    pub len: usize,
}

impl Grid {
    /// The slots inside `[range.0, range.1)` in phase with `phase` (any
    /// timestamp on the grid). Without a phase the grid starts at `range.0`.
    pub fn over(range: (Timestamp, Timestamp), interval: i64, phase: Option<Timestamp>) -> Self {
        let interval = interval.max(1);
        let first = match phase {
            Some(p) => range.0 + (p - range.0).rem_euclid(interval),
            None => range.0,
        };
        let len = if first < range.1 { ((range.1 - first + interval - 1) / interval) as usize } else { 0 };
        Self { first, interval, len }
    }

    pub fn slot(&self, k: usize) -> Timestamp {
        self.first + k as i64 * self.interval
    }

    /// Nearest slot of `ts`, if it falls inside the grid.
    pub fn index_of(&self, ts: Timestamp) -> Option<usize> {
        let k = ((ts - self.first) as f64 / self.interval as f64).round();
        (k >= 0.0 && (k as usize) < self.len).then_some(k as usize)
    }
}

/// Expected versus received samples of one periodic device over a range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub expected: u32,
    pub observed: u32,
    pub gaps: Vec<Gap>,
    /// Missing samples outside any gap: isolated losses whose spacing does
    /// not exceed the silence budget.
    pub short_missed: u32,
}

impl Coverage {
    pub fn missed(&self) -> u32 {
        self.gaps.iter().map(|g| g.expected_samples_missed).sum::<u32>() + self.short_missed
    }
}

/// Coverage of `samples` (timestamps of one device, any order) over `range`.
/// A gap is a spacing larger than twice the sampling interval; the range
/// edges count as virtual samples one interval outside the grid. Event-driven
/// and gated devices have no expected samples and never have gaps.
pub fn coverage(samples: &[Timestamp], device: &DeviceSpec, range: (Timestamp, Timestamp)) -> Coverage {
    let interval = match (device.mode(), device.interval_s()) {
        (ReportingMode::Periodic, Some(i)) if i > 0 => i64::from(i),
        _ => {
            let observed = samples.iter().filter(|t| (range.0..range.1).contains(*t)).count() as u32;
            return Coverage { expected: 0, observed, gaps: Vec::new(), short_missed: 0 };
        }
    };
    let mut ts: Vec<Timestamp> = samples.iter().copied().filter(|t| (range.0..range.1).contains(t)).collect();
    ts.sort_unstable();
    ts.dedup();
    let grid = Grid::over(range, interval, ts.first().copied());
    let mut present = vec![false; grid.len];
    for t in &ts {
        if let Some(k) = grid.index_of(*t) {
            present[k] = true;
        }
    }
    let observed = present.iter().filter(|p| **p).count() as u32;
    let mut gaps = Vec::new();
    let mut short_missed = 0;
    let mut k = 0;
    while k < grid.len {
        if present[k] {
            k += 1;
            continue;
        }
        let run_start = k;
        while k < grid.len && !present[k] {
            k += 1;
        }
        let missed = (k - run_start) as u32;
        // Spacing between the neighbours of the run is (missed + 1) intervals.
        if missed >= 2 {
            let end = if k < grid.len { grid.slot(k) } else { range.1 };
            gaps.push(Gap {
                device_id: device.id.clone(),
                start: grid.slot(run_start),
                end,
                expected_samples_missed: missed,
            });
        } else {
            short_missed += missed;
        }
    }
    Coverage { expected: grid.len as u32, observed, gaps, short_missed }
}

/// Gaps of one device over `range`; see [`coverage`].
pub fn detect_gaps(samples: &[Timestamp], device: &DeviceSpec, range: (Timestamp, Timestamp)) -> Vec<Gap> {
    coverage(samples, device, range).gaps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlotState {
    Original,
    Imputed,
    Missing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub ts: Timestamp,
    pub value: Option<f64>,
    pub state: SlotState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputePolicy {
    /// Longest run of missing slots, in seconds, that is interpolated.
    pub small_gap_s: i64,
}

impl Default for ImputePolicy {
    fn default() -> Self {
        Self { small_gap_s: 30 * 60 }
    }
}

/// A periodic series laid on its grid with a per-slot imputation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputedSeries {
    pub interval: i64,
    pub slots: Vec<Slot>,
}

impl ImputedSeries {
    /// Places `samples` on `grid`. Off-grid samples snap to the nearest slot;
    /// a later sample for an occupied slot is ignored.
    pub fn from_samples(samples: &[(Timestamp, f64)], grid: Grid) -> Self {
        let mut slots: Vec<Slot> =
            (0..grid.len).map(|k| Slot { ts: grid.slot(k), value: None, state: SlotState::Missing }).collect();
        for &(t, v) in samples {
            if let Some(k) = grid.index_of(t) {
                if slots[k].state == SlotState::Missing {
                    slots[k] = Slot { ts: t, value: Some(v), state: SlotState::Original };
                }
            }
        }
        Self { interval: grid.interval, slots }
    }

    pub fn count(&self, state: SlotState) -> usize {
        self.slots.iter().filter(|s| s.state == state).count()
    }

    /// Slots carrying a value, original or imputed.
    pub fn valued(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        self.slots.iter().filter_map(|s| s.value.map(|v| (s.ts, v)))
    }
}

/// Fills every interior run of missing slots no longer than the policy's
/// small-gap threshold by linear interpolation between its boundary values.
/// Longer runs and runs touching either end stay missing. Valued slots are
/// never modified, so applying this twice changes nothing.
pub fn fill(mut series: ImputedSeries, policy: ImputePolicy) -> ImputedSeries {
    let n = series.slots.len();
    let mut k = 0;
    while k < n {
        if series.slots[k].value.is_some() {
            k += 1;
            continue;
        }
        let a = k;
        while k < n && series.slots[k].value.is_none() {
            k += 1;
        }
        let run = k - a;
        if a == 0 || k == n || run as i64 * series.interval > policy.small_gap_s {
            continue;
        }
        let (l, r) = (series.slots[a - 1], series.slots[k]);
        let (lv, rv) = (l.value.unwrap_or_default(), r.value.unwrap_or_default());
        // Weighted form: exact for integer-valued samples up to the final
        // division, which is correctly rounded.
        let n = (run + 1) as f64;
        for (j, s) in series.slots[a..k].iter_mut().enumerate() {
            let i = (j + 1) as f64;
            s.value = Some((lv * (n - i) + rv * i) / n);
            s.state = SlotState::Imputed;
        }
    }
    series
}

/// Lays `samples` on `grid` and fills small gaps; see [`fill`].
pub fn impute(samples: &[(Timestamp, f64)], grid: Grid, policy: ImputePolicy) -> ImputedSeries {
    fill(ImputedSeries::from_samples(samples, grid), policy)
}

/// A stretch of roughly constant event rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: Timestamp,
    pub end: Timestamp,
    /// Mean events per bin.
    pub rate: f64,
    /// Half-open range of bin indices.
    pub bins: (usize, usize),
}

/// Event counts in consecutive bins of `width` seconds over `range`.
pub fn bin_counts(events: &[Timestamp], range: (Timestamp, Timestamp), width: i64) -> Vec<u64> {
    let width = width.max(1);
    let n = ((range.1 - range.0 + width - 1) / width).max(0) as usize;
    let mut bins = vec![0; n];
    for t in events.iter().filter(|t| (range.0..range.1).contains(*t)) {
        bins[((t - range.0) / width) as usize] += 1;
    }
    bins
}

/// The default split penalty for `n` bins, `3 ln n`.
pub fn default_penalty(n: usize) -> f64 {
    3.0 * (n.max(1) as f64).ln()
}

/// Poisson negative log-likelihood of `sum` events over `n` bins at the
/// maximum-likelihood rate, without the data-only `ln x!` terms.
pub fn poisson_cost(sum: u64, n: usize) -> f64 {
    if sum == 0 || n == 0 {
        return 0.0;
    }
    let s = sum as f64;
    s - s * (s / n as f64).ln()
}

/// Total segment cost of splitting `counts` at `cps` plus `beta` per split.
pub fn penalized_cost(counts: &[u64], cps: &[usize], beta: f64) -> f64 {
    let mut bounds = vec![0];
    bounds.extend_from_slice(cps);
    bounds.push(counts.len());
    let cost: f64 = bounds.windows(2).map(|w| poisson_cost(counts[w[0]..w[1]].iter().sum(), w[1] - w[0])).sum();
    cost + beta * cps.len() as f64
}

/// Change points of `counts` by binary segmentation: each segment is split
/// where the cost reduction is largest, and only when it exceeds `beta`.
/// Returns split indices in increasing order; index `k` starts a new segment
/// at bin `k`.
pub fn change_points(counts: &[u64], beta: f64) -> Vec<usize> {
    let mut prefix = vec![0u64; counts.len() + 1];
    for (i, c) in counts.iter().enumerate() {
        prefix[i + 1] = prefix[i] + c;
    }
    let cost = |a: usize, b: usize| poisson_cost(prefix[b] - prefix[a], b - a);
    let mut out = Vec::new();
    let mut stack = vec![(0, counts.len())];
    while let Some((a, b)) = stack.pop() {
        if b - a < 2 {
            continue;
        }
        let whole = cost(a, b);
        let mut best: Option<(usize, f64)> = None;
        for k in a + 1..b {
            let gain = whole - cost(a, k) - cost(k, b);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((k, gain));
            }
        }
        if let Some((k, gain)) = best {
            if gain > beta {
                out.push(k);
                stack.push((a, k));
                stack.push((k, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Segments of the event stream `events` over `range`, binned by `width`
/// seconds, with split penalty `beta` (default `3 ln #bins`).
pub fn segment(events: &[Timestamp], range: (Timestamp, Timestamp), width: i64, beta: Option<f64>) -> Vec<Segment> {
    let counts = bin_counts(events, range, width);
    let beta = beta.unwrap_or_else(|| default_penalty(counts.len()));
    let mut bounds = vec![0];
    bounds.extend(change_points(&counts, beta));
    bounds.push(counts.len());
    bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let sum: u64 = counts[a..b].iter().sum();
            Segment {
                start: range.0 + a as i64 * width,
                end: (range.0 + b as i64 * width).min(range.1),
                rate: sum as f64 / (b - a) as f64,
                bins: (a, b),
            }
        })
        .collect()
}
