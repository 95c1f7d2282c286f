//! Seed derivation.
//!
//! Every random draw of a run descends from one top-level seed:
//!
//! * home seed = `mix(top ^ fnv1a(home_id))`
//! * stream seed = `mix(home_seed ^ mix(day_index) ^ stream_tag)`
//!
//! where `mix` is the SplitMix64 finalizer and `day_index` counts days since
//! 1970-01-01. Independent streams per purpose keep, for example, the sleep
//! plan of a night unchanged when the daytime plan changes.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use carewatch_core::time::days_from_epoch;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Day = 1,
    Night = 2,
    Sensors = 3,
    Test = 4,
    Caregiver = 5,
}

pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn home_seed(top: u64, home_id: &str) -> u64 {
    mix(top ^ fnv1a(home_id))
}

pub fn stream(home_seed: u64, date: NaiveDate, stream: Stream) -> ChaCha8Rng {
    let day = days_from_epoch(date) as u64;
    ChaCha8Rng::seed_from_u64(mix(home_seed ^ mix(day) ^ ((stream as u64) << 56)))
}

/// Stable per-device phase of the sampling grid, in `[0, interval)`.
pub fn grid_offset(device_id: &str, interval_s: u32) -> i64 {
    (fnv1a(device_id) % u64::from(interval_s.max(1))) as i64
}
