//! Device kinds, their payload schemas and reporting modes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviceKind {
    MagneticContact,
    MotionPir,
    PresenceMmwave,
    Temperature,
    Humidity,
    SmartPlugPower,
    SleepMat,
    Smartwatch,
    Toothbrush,
    EntranceDoorContact,
    TabletPresence,
    LocationSource,
}

/// How a device decides when to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportingMode {
    /// Emits on state changes only; silence is legal.
    EventDriven,
    /// Emits on a fixed grid all day long.
    Periodic,
    /// Emits on a fixed grid only while its condition holds (bed occupied,
    /// subject outdoors). Silence outside that condition is legal.
    Gated,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 12] = [
        DeviceKind::MagneticContact,
        DeviceKind::MotionPir,
        DeviceKind::PresenceMmwave,
        DeviceKind::Temperature,
        DeviceKind::Humidity,
        DeviceKind::SmartPlugPower,
        DeviceKind::SleepMat,
        DeviceKind::Smartwatch,
        DeviceKind::Toothbrush,
        DeviceKind::EntranceDoorContact,
        DeviceKind::TabletPresence,
        DeviceKind::LocationSource,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DeviceKind::MagneticContact => "magnetic-contact",
            DeviceKind::MotionPir => "motion-pir",
            DeviceKind::PresenceMmwave => "presence-mmwave",
            DeviceKind::Temperature => "temperature",
            DeviceKind::Humidity => "humidity",
            DeviceKind::SmartPlugPower => "smart-plug-power",
            DeviceKind::SleepMat => "sleep-mat",
            DeviceKind::Smartwatch => "smartwatch",
            DeviceKind::Toothbrush => "toothbrush",
            DeviceKind::EntranceDoorContact => "entrance-door-contact",
            DeviceKind::TabletPresence => "tablet-presence",
            DeviceKind::LocationSource => "location-source",
        }
    }

    pub fn reporting_mode(self) -> ReportingMode {
        match self {
            DeviceKind::Temperature | DeviceKind::Humidity | DeviceKind::SmartPlugPower | DeviceKind::Smartwatch => {
                ReportingMode::Periodic
            }
            DeviceKind::SleepMat | DeviceKind::LocationSource => ReportingMode::Gated,
            _ => ReportingMode::EventDriven,
        }
    }

    /// Default sampling interval in seconds for periodic and gated kinds.
    pub fn default_interval_s(self) -> Option<u32> {
        match self {
            DeviceKind::Temperature
            | DeviceKind::Humidity
            | DeviceKind::SmartPlugPower
            | DeviceKind::Smartwatch
            | DeviceKind::LocationSource => Some(300),
            DeviceKind::SleepMat => Some(60),
            _ => None,
        }
    }

    /// Whether `payload` matches this kind's fixed schema.
    pub fn accepts(self, payload: &crate::Payload) -> bool {
        use crate::Payload as P;
        match (self, payload) {
            (DeviceKind::MagneticContact | DeviceKind::EntranceDoorContact, P::Binary(s)) => {
                matches!(s, BinaryState::Open | BinaryState::Closed)
            }
            (DeviceKind::MotionPir | DeviceKind::PresenceMmwave, P::Binary(s)) => {
                matches!(s, BinaryState::On | BinaryState::Off)
            }
            (DeviceKind::TabletPresence, P::Binary(s)) => {
                matches!(s, BinaryState::On | BinaryState::Off)
            }
            (DeviceKind::TabletPresence, P::TestOutcome { score, compliant }) => {
                score.is_none_or(|s| s <= 100) && (*compliant || score.is_none())
            }
            (DeviceKind::Temperature, P::Scalar { unit, value }) => *unit == Unit::Celsius && value.is_finite(),
            (DeviceKind::Humidity, P::Scalar { unit, value }) => *unit == Unit::RelativeHumidity && value.is_finite(),
            (DeviceKind::SmartPlugPower, P::Scalar { unit, value }) => *unit == Unit::Watt && value.is_finite(),
            (DeviceKind::Smartwatch, P::Scalar { unit, value }) => {
                matches!(unit, Unit::Steps | Unit::BeatsPerMinute) && value.is_finite()
            }
            (DeviceKind::SleepMat, P::Sleep(_)) => true,
            (DeviceKind::Toothbrush, P::Toothbrush { .. }) => true,
            (DeviceKind::LocationSource, P::Location(fix)) => fix.is_valid(),
            _ => false,
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DeviceKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DeviceKind::ALL.into_iter().find(|k| k.tag() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryState {
    Open,
    Closed,
    On,
    Off,
}

impl BinaryState {
    pub fn tag(self) -> &'static str {
        match self {
            BinaryState::Open => "open",
            BinaryState::Closed => "closed",
            BinaryState::On => "on",
            BinaryState::Off => "off",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "open" => Some(BinaryState::Open),
            "closed" => Some(BinaryState::Closed),
            "on" => Some(BinaryState::On),
            "off" => Some(BinaryState::Off),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "degC")]
    Celsius,
    #[serde(rename = "pctRH")]
    RelativeHumidity,
    #[serde(rename = "W")]
    Watt,
    #[serde(rename = "steps")]
    Steps,
    #[serde(rename = "bpm")]
    BeatsPerMinute,
}

impl Unit {
    pub fn tag(self) -> &'static str {
        match self {
            Unit::Celsius => "degC",
            Unit::RelativeHumidity => "pctRH",
            Unit::Watt => "W",
            Unit::Steps => "steps",
            Unit::BeatsPerMinute => "bpm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Unit::Celsius, Unit::RelativeHumidity, Unit::Watt, Unit::Steps, Unit::BeatsPerMinute]
            .into_iter()
            .find(|u| u.tag() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SleepPhase {
    Awake,
    Light,
    Deep,
    Rem,
}

impl SleepPhase {
    pub fn tag(self) -> &'static str {
        match self {
            SleepPhase::Awake => "awake",
            SleepPhase::Light => "light",
            SleepPhase::Deep => "deep",
            SleepPhase::Rem => "rem",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "awake" => Some(SleepPhase::Awake),
            "light" => Some(SleepPhase::Light),
            "deep" => Some(SleepPhase::Deep),
            "rem" => Some(SleepPhase::Rem),
            _ => None,
        }
    }
}

/// Household object a fixed device is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetObject {
    Fridge,
    Pantry,
    MedicineCabinet,
    EntranceDoor,
    Stove,
    Shower,
    Bed,
    Tablet,
    Tv,
    Microwave,
    WashingMachine,
}
