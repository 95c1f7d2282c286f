//! Long-term behavioral change injected into a script.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::script::{BehaviorScript, Meal, ScriptError};

/// Script parameters that a scenario can shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScriptParam {
    LunchHotProb,
    LunchEatOutProb,
    DinnerHotProb,
    DeepFraction,
    RemFraction,
    ShowerProb,
    BrushProb,
    MedicineAdherence,
    /// Night wanderings per night.
    NightWanderings,
    NightAwakenings,
    OutingProb,
    TestConfirmProb,
    TestScoreMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Change {
    Add(f64),
    /// Multiplies the parameter.
    Scale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamShift {
    pub param: ScriptParam,
    pub change: Change,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftScenario {
    pub name: String,
    pub onset: NaiveDate,
    /// Days over which the shift grows linearly to its full size; 0 applies
    /// it in full from the onset.
    #[serde(default)]
    pub ramp_days: u32,
    pub shifts: Vec<ParamShift>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriftError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario `{name}` onset {onset} is outside the simulated range")]
    OnsetOutOfRange { name: String, onset: NaiveDate },
    #[error("scenario `{name}` produces an invalid script: {source}")]
    InvalidResult {
        name: String,
        #[source]
        source: ScriptError,
    },
    #[error("scenario `{name}` changes a parameter the script lacks: {param:?}")]
    MissingParam { name: String, param: ScriptParam },
}

/// Names accepted by [`DriftScenario::builtin`].
pub const BUILTIN_SCENARIOS: [&str; 5] =
    ["lunch-shift", "sleep-shift", "hygiene-decline", "therapy-nonadherence", "wandering"];

impl DriftScenario {
    pub fn builtin(name: &str, onset: NaiveDate, ramp_days: u32) -> Result<Self, DriftError> {
        use Change::*;
        use ScriptParam::*;
        let shifts: &[(ScriptParam, Change)] = match name {
            "lunch-shift" => &[(LunchHotProb, Add(-0.5)), (LunchEatOutProb, Add(0.65))],
            "sleep-shift" => &[(DeepFraction, Add(-0.08)), (RemFraction, Add(0.07))],
            "hygiene-decline" => &[(ShowerProb, Scale(0.4)), (BrushProb, Scale(0.5))],
            "therapy-nonadherence" => &[(MedicineAdherence, Scale(0.5))],
            "wandering" => &[(NightWanderings, Add(1.5))],
            _ => return Err(DriftError::UnknownScenario(name.to_owned())),
        };
        Ok(Self {
            name: name.to_owned(),
            onset,
            ramp_days,
            shifts: shifts.iter().map(|&(param, change)| ParamShift { param, change }).collect(),
        })
    }

    /// Fraction of the full shift in effect on `date`.
    pub fn progress(&self, date: NaiveDate) -> f64 {
        let days = (date - self.onset).num_days();
        if days < 0 {
            0.0
        } else if self.ramp_days == 0 {
            1.0
        } else {
            (days as f64 / f64::from(self.ramp_days)).min(1.0)
        }
    }

    /// Checks the onset against `range` and that the fully shifted script is
    /// still valid.
    pub fn validate(&self, script: &BehaviorScript, range: (NaiveDate, NaiveDate)) -> Result<(), DriftError> {
        if self.onset < range.0 || self.onset > range.1 {
            return Err(DriftError::OnsetOutOfRange { name: self.name.clone(), onset: self.onset });
        }
        let mut shifted = script.clone();
        for s in &self.shifts {
            if !shift(&mut shifted, s, 1.0) {
                return Err(DriftError::MissingParam { name: self.name.clone(), param: s.param });
            }
        }
        shifted.validate().map_err(|source| DriftError::InvalidResult { name: self.name.clone(), source })
    }
}

fn shifted_value(v: f64, change: Change, f: f64) -> f64 {
    match change {
        Change::Add(d) => v + f * d,
        Change::Scale(m) => v * (1.0 + f * (m - 1.0)),
    }
}

/// Applies one shift at progress `f`; false when the script lacks the
/// parameter.
fn shift(script: &mut BehaviorScript, s: &ParamShift, f: f64) -> bool {
    let apply = |v: &mut f64| *v = shifted_value(*v, s.change, f);
    match s.param {
        ScriptParam::LunchHotProb | ScriptParam::LunchEatOutProb | ScriptParam::DinnerHotProb => {
            let meal = if s.param == ScriptParam::DinnerHotProb { Meal::Dinner } else { Meal::Lunch };
            let Some(plan) = script.meal_mut(meal) else { return false };
            if s.param == ScriptParam::LunchEatOutProb {
                apply(&mut plan.eat_out_prob);
            } else {
                apply(&mut plan.hot_prob);
            }
        }
        ScriptParam::DeepFraction
        | ScriptParam::RemFraction
        | ScriptParam::NightWanderings
        | ScriptParam::NightAwakenings => {
            let Some(sleep) = script.sleep.as_mut() else { return false };
            apply(match s.param {
                ScriptParam::DeepFraction => &mut sleep.deep_fraction,
                ScriptParam::RemFraction => &mut sleep.rem_fraction,
                ScriptParam::NightWanderings => &mut sleep.wanderings_per_night,
                _ => &mut sleep.awakenings_per_night,
            });
        }
        ScriptParam::ShowerProb => apply(&mut script.hygiene.shower_prob),
        ScriptParam::BrushProb => {
            apply(&mut script.hygiene.brush_morning_prob);
            apply(&mut script.hygiene.brush_evening_prob);
        }
        ScriptParam::MedicineAdherence => script.medicine.iter_mut().for_each(|d| apply(&mut d.adherence)),
        ScriptParam::OutingProb => script.outings.iter_mut().for_each(|o| apply(&mut o.prob)),
        ScriptParam::TestConfirmProb | ScriptParam::TestScoreMean => {
            let Some(t) = script.test.as_mut() else { return false };
            if s.param == ScriptParam::TestConfirmProb {
                apply(&mut t.confirm_prob);
            } else {
                apply(&mut t.score_mean);
            }
        }
    }
    true
}

/// The script in effect on `date` under `scenario`.
pub fn apply_drift(script: &BehaviorScript, scenario: &DriftScenario, date: NaiveDate) -> BehaviorScript {
    let mut out = script.clone();
    let f = scenario.progress(date);
    if f > 0.0 {
        for s in &scenario.shifts {
            shift(&mut out, s, f);
        }
    }
    out
}
