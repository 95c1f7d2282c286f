//! UTC timestamps and per-home local time.
//!
//! Everything is stored as UTC seconds. Local wall-clock time is only needed
//! when features refer to times of day ("lunchtime"), and is derived from a
//! fixed per-home offset.

use chrono::{DateTime, Datelike, NaiveDate, Utc, Weekday};
use serde::{Deserialize, Serialize};

/// UTC seconds since the Unix epoch.
pub type Timestamp = i64;

pub const DAY_SECONDS: i64 = 86_400;

/// Converts between UTC timestamps and a home's local calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct LocalClock {
    /// Offset of local time from UTC, in minutes.
    pub offset_minutes: i32,
}

impl LocalClock {
    pub const UTC: LocalClock = LocalClock { offset_minutes: 0 };

    pub fn new(offset_minutes: i32) -> Self {
        Self { offset_minutes }
    }

    fn offset_seconds(self) -> i64 {
        i64::from(self.offset_minutes) * 60
    }

    /// UTC timestamp of local midnight starting `date`.
    pub fn day_start(self, date: NaiveDate) -> Timestamp {
        days_from_epoch(date) * DAY_SECONDS - self.offset_seconds()
    }

    /// Half-open UTC range covering the local `date`.
    pub fn day_range(self, date: NaiveDate) -> (Timestamp, Timestamp) {
        let start = self.day_start(date);
        (start, start + DAY_SECONDS)
    }

    /// UTC timestamp of a local `date` plus `minute` minutes after midnight.
    /// `minute` may exceed one day or be negative.
    pub fn at_minute(self, date: NaiveDate, minute: i64) -> Timestamp {
        self.day_start(date) + minute * 60
    }

    pub fn local_date(self, ts: Timestamp) -> NaiveDate {
        date_from_days((ts + self.offset_seconds()).div_euclid(DAY_SECONDS))
    }

    /// Seconds since local midnight.
    pub fn second_of_day(self, ts: Timestamp) -> i64 {
        (ts + self.offset_seconds()).rem_euclid(DAY_SECONDS)
    }

    pub fn weekday(self, ts: Timestamp) -> Weekday {
        self.local_date(ts).weekday()
    }
}

pub fn days_from_epoch(date: NaiveDate) -> i64 {
    i64::from(date.num_days_from_ce()) - i64::from(epoch().num_days_from_ce())
}

pub fn date_from_days(days: i64) -> NaiveDate {
    epoch() + chrono::Duration::days(days)
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// ISO-8601 UTC rendering with second precision, e.g. `2024-03-01T12:00:00Z`.
pub fn to_iso(ts: Timestamp) -> String {
    match DateTime::<Utc>::from_timestamp(ts, 0) {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        None => format!("{ts}"),
    }
}

pub fn from_iso(s: &str) -> Option<Timestamp> {
    if !s.ends_with('Z') || s.len() != 20 {
        return None;
    }
    DateTime::parse_from_rfc3339(s).ok().map(|dt| dt.timestamp())
}
