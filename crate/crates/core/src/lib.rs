//! Shared domain model for in-home behavioral monitoring.
//!
//! Everything that crosses a module or process boundary lives here: device and
//! payload schemas, the sensor event, home and subject configuration, local
//! time handling and the canonical line-oriented event log format.

pub mod device;
pub mod event;
pub mod format;
pub mod home;
pub mod ids;
pub mod subject;
pub mod time;

pub use device::{BinaryState, DeviceKind, ReportingMode, SleepPhase, TargetObject, Unit};
pub use event::{HomeRef, LocationFix, Payload, SensorEvent};
pub use format::{parse_event, read_log, serialize_event, write_log, ParseError, LOG_HEADER};
pub use home::{Behavior, CaregiverWindow, ConfigError, DeviceSpec, Floorplan, HomeConfig, Placement, Room};
pub use ids::{DeviceId, HomeId, Pseudonym, RoomId, SubjectId};
pub use subject::{Cohort, Consent, Routine, SubjectProfile};
pub use time::{LocalClock, Timestamp, DAY_SECONDS};
