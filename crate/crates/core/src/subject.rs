use serde::{Deserialize, Serialize};

use crate::ids::SubjectId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cohort {
    Neurodegenerative,
    NonNeurodegenerative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Consent {
    /// Outdoor location collection. When false no location event may be
    /// generated, accepted or stored anywhere.
    pub location: bool,
}

/// Habitual routine of a subject. Times are local minutes after midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Routine {
    pub wake_minute: f64,
    pub wake_sd_minutes: f64,
    pub bed_minute: f64,
    pub bed_sd_minutes: f64,
    pub lunch_window: (u32, u32),
    pub dinner_window: (u32, u32),
    /// Expected number of discretionary outings per day (meals out excluded).
    pub outings_per_day: f64,
    pub shower_per_day: f64,
    /// Expected toothbrushing sessions per day, at most two.
    pub brushing_per_day: f64,
    pub medicine_minutes: Vec<u32>,
}

impl Default for Routine {
    fn default() -> Self {
        Self {
            wake_minute: 7.0 * 60.0,
            wake_sd_minutes: 20.0,
            bed_minute: 22.5 * 60.0,
            bed_sd_minutes: 20.0,
            lunch_window: (11 * 60 + 30, 14 * 60),
            dinner_window: (18 * 60 + 30, 21 * 60 + 30),
            outings_per_day: 0.9,
            shower_per_day: 0.6,
            brushing_per_day: 1.8,
            medicine_minutes: vec![8 * 60 + 30, 20 * 60],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub id: SubjectId,
    pub cohort: Cohort,
    #[serde(default)]
    pub routine: Routine,
    #[serde(default)]
    pub consent: Consent,
}
