//! Parametric description of a subject's daily routine.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use carewatch_core::{HomeConfig, RoomId, SubjectProfile, TargetObject};

use crate::sched::TestPlan;
use crate::template::{BATHROOM, BEDROOM, HALL, KITCHEN, LIVING};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("`{name}` = {value} is not a probability")]
    NotAProbability { name: &'static str, value: f64 },
    #[error("`{0}` must be non-negative and finite")]
    Negative(&'static str),
    #[error("{0} meal choice probabilities exceed 1")]
    MealChoices(Meal),
    #[error("activity windows `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("transition row {0} does not sum to 1")]
    TransitionRow(usize),
    #[error("transition matrix shape does not match {0} rooms")]
    TransitionShape(usize),
    #[error("deep and REM fractions leave too little light sleep")]
    SleepFractions,
    #[error("time window `{0}` is empty or exceeds the day")]
    BadWindow(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Meal {
    Breakfast,
    Lunch,
    Dinner,
}

impl std::fmt::Display for Meal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Meal::Breakfast => "breakfast",
            Meal::Lunch => "lunch",
            Meal::Dinner => "dinner",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepPlan {
    pub bed_minute: f64,
    pub bed_sd_minutes: f64,
    /// Local minute of the wake-up on the following morning.
    pub wake_minute: f64,
    pub wake_sd_minutes: f64,
    pub deep_fraction: f64,
    pub rem_fraction: f64,
    /// Night-to-night standard deviation of both phase fractions.
    pub fraction_sd: f64,
    pub awakenings_per_night: f64,
    /// Bathroom trips.
    pub getups_per_night: f64,
    /// Aimless walks through several rooms.
    pub wanderings_per_night: f64,
}

/// One daily meal. Each day exactly one of hot cooking, eating out or a cold
/// meal at home happens; `cold = 1 - hot_prob - eat_out_prob`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MealPlan {
    pub meal: Meal,
    /// Range of local start minutes.
    pub start: (u32, u32),
    pub hot_prob: f64,
    pub eat_out_prob: f64,
    /// Probability of using the microwave when not cooking hot.
    pub microwave_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HygienePlan {
    pub shower_prob: f64,
    pub brush_morning_prob: f64,
    pub brush_evening_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedicineDose {
    pub minute: u32,
    pub adherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutingPlan {
    pub start: (u32, u32),
    /// Duration range in minutes.
    pub duration: (u32, u32),
    pub prob: f64,
}

/// First-order Markov walk over rooms for unstructured time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomWalk {
    pub rooms: Vec<RoomId>,
    pub transitions: Vec<Vec<f64>>,
    pub mean_dwell_minutes: f64,
}

/// Rooms where anchored activities take place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub bedroom: RoomId,
    pub bathroom: RoomId,
    pub kitchen: RoomId,
    pub living: RoomId,
    pub entrance: RoomId,
}

impl SleepPlan {
    fn validate(&self) -> Result<(), ScriptError> {
        for (name, v) in [
            ("sleep.bed_sd_minutes", self.bed_sd_minutes),
            ("sleep.wake_sd_minutes", self.wake_sd_minutes),
            ("sleep.fraction_sd", self.fraction_sd),
            ("sleep.awakenings_per_night", self.awakenings_per_night),
            ("sleep.getups_per_night", self.getups_per_night),
            ("sleep.wanderings_per_night", self.wanderings_per_night),
        ] {
            check_nonneg(name, v)?;
        }
        check_prob("sleep.deep_fraction", self.deep_fraction)?;
        check_prob("sleep.rem_fraction", self.rem_fraction)?;
        if self.deep_fraction + self.rem_fraction > 0.8 {
            return Err(ScriptError::SleepFractions);
        }
        if !(18.0 * 60.0..24.0 * 60.0).contains(&self.bed_minute) {
            return Err(ScriptError::BadWindow("sleep.bed_minute".into()));
        }
        if !(4.0 * 60.0..11.0 * 60.0).contains(&self.wake_minute) {
            return Err(ScriptError::BadWindow("sleep.wake_minute".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorScript {
    /// `None` for a subject who never sleeps at home.
    pub sleep: Option<SleepPlan>,
    pub meals: Vec<MealPlan>,
    pub hygiene: HygienePlan,
    pub medicine: Vec<MedicineDose>,
    pub outings: Vec<OutingPlan>,
    pub walk: RoomWalk,
    pub anchors: Anchors,
    pub snacks_per_day: f64,
    pub home_steps_per_5min: f64,
    pub outdoor_steps_per_5min: f64,
    /// Relative amplitude of the annual modulation of outings and ambient
    /// temperature; zero disables it.
    pub seasonal_amplitude: f64,
    pub test: Option<TestPlan>,
    /// Sensorized objects the script interacts with; each must be installed.
    pub targets: BTreeSet<TargetObject>,
}

fn check_prob(name: &'static str, value: f64) -> Result<(), ScriptError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ScriptError::NotAProbability { name, value })
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<(), ScriptError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ScriptError::Negative(name))
    }
}

impl BehaviorScript {
    /// Builds the script for `profile` living in `home`, interacting only with
    /// objects that carry a sensor there.
    pub fn for_home(profile: &SubjectProfile, home: &HomeConfig) -> Self {
        let r = &profile.routine;
        let room = |id: &str| RoomId::new(id);
        let lunch_start = r.lunch_window.0;
        let dinner_start = r.dinner_window.0;
        let per_outing = (r.outings_per_day / 2.0).clamp(0.0, 1.0);
        let brush = (r.brushing_per_day / 2.0).clamp(0.0, 1.0);
        let rooms = [BEDROOM, BATHROOM, KITCHEN, LIVING, HALL].map(room).to_vec();
        // rows/cols: bedroom, bathroom, kitchen, living, hall
        let transitions = vec![
            vec![0.0, 0.15, 0.15, 0.55, 0.15],
            vec![0.25, 0.0, 0.15, 0.50, 0.10],
            vec![0.10, 0.10, 0.0, 0.70, 0.10],
            vec![0.20, 0.20, 0.45, 0.0, 0.15],
            vec![0.20, 0.15, 0.20, 0.45, 0.0],
        ];
        let targets = [
            TargetObject::Fridge,
            TargetObject::Pantry,
            TargetObject::MedicineCabinet,
            TargetObject::EntranceDoor,
            TargetObject::Stove,
            TargetObject::Shower,
            TargetObject::Bed,
            TargetObject::Tablet,
            TargetObject::Microwave,
        ]
        .into_iter()
        .filter(|t| home.has_target(*t))
        .collect();
        Self {
            sleep: Some(SleepPlan {
                bed_minute: r.bed_minute,
                bed_sd_minutes: r.bed_sd_minutes,
                wake_minute: r.wake_minute,
                wake_sd_minutes: r.wake_sd_minutes,
                deep_fraction: 0.22,
                rem_fraction: 0.20,
                fraction_sd: 0.025,
                awakenings_per_night: 1.2,
                getups_per_night: 0.6,
                wanderings_per_night: 0.05,
            }),
            meals: vec![
                MealPlan {
                    meal: Meal::Breakfast,
                    start: (0, 0),
                    hot_prob: 0.0,
                    eat_out_prob: 0.0,
                    microwave_prob: 0.3,
                },
                MealPlan {
                    meal: Meal::Lunch,
                    start: (lunch_start + 10, lunch_start + 70),
                    hot_prob: 0.8,
                    eat_out_prob: 0.05,
                    microwave_prob: 0.4,
                },
                MealPlan {
                    meal: Meal::Dinner,
                    start: (dinner_start + 15, dinner_start + 75),
                    hot_prob: 0.6,
                    eat_out_prob: 0.02,
                    microwave_prob: 0.7,
                },
            ],
            hygiene: HygienePlan {
                shower_prob: r.shower_per_day.clamp(0.0, 1.0),
                brush_morning_prob: brush,
                brush_evening_prob: brush,
            },
            medicine: r.medicine_minutes.iter().map(|&minute| MedicineDose { minute, adherence: 0.95 }).collect(),
            outings: vec![
                OutingPlan { start: (9 * 60, 10 * 60), duration: (30, 80), prob: per_outing },
                OutingPlan { start: (15 * 60, 16 * 60 + 30), duration: (30, 90), prob: per_outing },
            ],
            walk: RoomWalk { rooms, transitions, mean_dwell_minutes: 25.0 },
            anchors: Anchors {
                bedroom: room(BEDROOM),
                bathroom: room(BATHROOM),
                kitchen: room(KITCHEN),
                living: room(LIVING),
                entrance: room(HALL),
            },
            snacks_per_day: 1.0,
            home_steps_per_5min: 35.0,
            outdoor_steps_per_5min: 420.0,
            seasonal_amplitude: 0.0,
            test: home.has_target(TargetObject::Tablet).then(TestPlan::default),
            targets,
        }
    }

    pub fn meal(&self, meal: Meal) -> Option<&MealPlan> {
        self.meals.iter().find(|m| m.meal == meal)
    }

    pub fn meal_mut(&mut self, meal: Meal) -> Option<&mut MealPlan> {
        self.meals.iter_mut().find(|m| m.meal == meal)
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        if let Some(s) = &self.sleep {
            s.validate()?;
        }
        for (name, v) in [
            ("snacks_per_day", self.snacks_per_day),
            ("home_steps_per_5min", self.home_steps_per_5min),
            ("outdoor_steps_per_5min", self.outdoor_steps_per_5min),
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("walk.mean_dwell_minutes", self.walk.mean_dwell_minutes),
        ] {
            check_nonneg(name, v)?;
        }
        check_prob("seasonal_amplitude", self.seasonal_amplitude)?;
        for m in &self.meals {
            check_prob("meal.hot_prob", m.hot_prob)?;
            check_prob("meal.eat_out_prob", m.eat_out_prob)?;
            check_prob("meal.microwave_prob", m.microwave_prob)?;
            if m.hot_prob + m.eat_out_prob > 1.0 + 1e-12 {
                return Err(ScriptError::MealChoices(m.meal));
            }
            if m.start.0 > m.start.1 || m.start.1 >= 1440 {
                return Err(ScriptError::BadWindow(m.meal.to_string()));
            }
        }
        let h = &self.hygiene;
        check_prob("hygiene.shower_prob", h.shower_prob)?;
        check_prob("hygiene.brush_morning_prob", h.brush_morning_prob)?;
        check_prob("hygiene.brush_evening_prob", h.brush_evening_prob)?;
        for d in &self.medicine {
            check_prob("medicine.adherence", d.adherence)?;
        }
        for o in &self.outings {
            check_prob("outing.prob", o.prob)?;
            if o.start.0 > o.start.1 || o.duration.0 > o.duration.1 || o.duration.0 == 0 {
                return Err(ScriptError::BadWindow("outing".into()));
            }
        }

        // Latest possible spans of the time-anchored blocks must not overlap.
        let mut blocks: Vec<(String, u32, u32)> = Vec::new();
        for m in self.meals.iter().filter(|m| m.meal != Meal::Breakfast) {
            blocks.push((m.meal.to_string(), m.start.0, m.start.1 + 120));
        }
        for (i, o) in self.outings.iter().enumerate() {
            blocks.push((format!("outing {i}"), o.start.0, o.start.1 + o.duration.1));
        }
        for (i, a) in blocks.iter().enumerate() {
            for b in &blocks[i + 1..] {
                if a.1 < b.2 && b.1 < a.2 {
                    return Err(ScriptError::Overlap(a.0.clone(), b.0.clone()));
                }
            }
        }

        let n = self.walk.rooms.len();
        if self.walk.transitions.len() != n || self.walk.transitions.iter().any(|r| r.len() != n) {
            return Err(ScriptError::TransitionShape(n));
        }
        for (i, row) in self.walk.transitions.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
                return Err(ScriptError::TransitionRow(i));
            }
        }
        if let Some(t) = &self.test {
            check_prob("test.confirm_prob", t.confirm_prob)?;
            check_nonneg("test.score_sd", t.score_sd)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{standard_home, HomeTemplate};
    use carewatch_core::{Cohort, Consent, Routine, SubjectId};

    pub(crate) fn profile() -> SubjectProfile {
        SubjectProfile {
            id: SubjectId::new("s1"),
            cohort: Cohort::Neurodegenerative,
            routine: Routine::default(),
            consent: Consent::default(),
        }
    }

    #[test]
    fn default_script_is_valid() {
        let home = standard_home("h1", &HomeTemplate::default());
        let s = BehaviorScript::for_home(&profile(), &home);
        s.validate().unwrap();
        assert!(s.targets.contains(&TargetObject::Stove));
    }

    #[test]
    fn bad_transition_row_rejected() {
        let home = standard_home("h1", &HomeTemplate::default());
        let mut s = BehaviorScript::for_home(&profile(), &home);
        s.walk.transitions[2][3] = 0.9;
        assert_eq!(s.validate(), Err(ScriptError::TransitionRow(2)));
    }

    #[test]
    fn overlapping_outing_and_lunch_rejected() {
        let home = standard_home("h1", &HomeTemplate::default());
        let mut s = BehaviorScript::for_home(&profile(), &home);
        s.outings[0].duration = (30, 200);
        assert!(matches!(s.validate(), Err(ScriptError::Overlap(..))));
    }

    #[test]
    fn meal_choices_must_fit() {
        let home = standard_home("h1", &HomeTemplate::default());
        let mut s = BehaviorScript::for_home(&profile(), &home);
        s.meal_mut(Meal::Lunch).unwrap().eat_out_prob = 0.5;
        assert_eq!(s.validate(), Err(ScriptError::MealChoices(Meal::Lunch)));
    }
}
