//! Deterministic generator of sensorized-home event streams.
//!
//! A subject's habits are captured in a [`BehaviorScript`]; [`generate_day`]
//! turns one day of that script into the sensor events a typical installation
//! would report. Long-term behavioral changes are injected with
//! [`DriftScenario`]s and deployment problems with a [`FaultSpec`].
//! [`simulate`] ties these together and writes one event log per home per day.

pub mod drift;
pub mod faults;
pub mod generator;
pub mod sched;
pub mod script;
pub mod seed;
pub mod simulate;
pub mod template;

pub use drift::{apply_drift, Change, DriftError, DriftScenario, ParamShift, ScriptParam, BUILTIN_SCENARIOS};
pub use faults::{inject_faults, Fault, FaultSpec};
pub use generator::{events_from_plan, generate_day, plan_day, DayPlan, MealChoice, Place, Stay};
pub use sched::{
    model_check, MissReason, ModelCheckReport, ScheduleError, TestInput, TestPlan, TestSchedule, TestState,
    CHECK_INPUTS, MAX_ATTEMPTS,
};
pub use script::{
    Anchors, BehaviorScript, HygienePlan, Meal, MealPlan, MedicineDose, OutingPlan, RoomWalk, ScriptError, SleepPlan,
};
pub use simulate::{
    log_path, simulate, DayCount, DayLog, HomeManifest, HomeRun, HomeSimulator, SimError, SimulationManifest,
};
pub use template::{standard_home, HomeTemplate};
