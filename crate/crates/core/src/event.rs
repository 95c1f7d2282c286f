use serde::{Deserialize, Serialize};

use crate::device::{BinaryState, DeviceKind, SleepPhase, Unit};
use crate::ids::{is_line_safe, DeviceId, HomeId, Pseudonym};
use crate::time::Timestamp;

/// Which identity an event is labeled with.
///
/// Inside the home domain events carry the cleartext home id; everything
/// that leaves the gateway carries a pseudonym only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HomeRef {
    Home(HomeId),
    Pseudonym(Pseudonym),
}

impl HomeRef {
    pub fn is_pseudonymous(&self) -> bool {
        matches!(self, HomeRef::Pseudonym(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationFix {
    pub lat: f64,
    pub lon: f64,
    pub accuracy_m: f64,
}

impl LocationFix {
    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
            && self.accuracy_m.is_finite()
            && self.accuracy_m >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Binary(BinaryState),
    Scalar {
        value: f64,
        unit: Unit,
    },
    Sleep(SleepPhase),
    Location(LocationFix),
    Toothbrush {
        duration_s: u32,
    },
    /// Outcome of the weekly cognitive test. `score` is present iff compliant.
    TestOutcome {
        compliant: bool,
        score: Option<u8>,
    },
}

impl Payload {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Payload::Scalar { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn binary(&self) -> Option<BinaryState> {
        match self {
            Payload::Binary(s) => Some(*s),
            _ => None,
        }
    }
}

/// One timestamped reading from one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEvent {
    pub device_id: DeviceId,
    pub home_ref: HomeRef,
    pub timestamp: Timestamp,
    pub kind: DeviceKind,
    pub payload: Payload,
}

impl SensorEvent {
    /// Checks the per-event invariants: payload schema and identifiers that
    /// can be carried by the line format.
    pub fn is_valid(&self) -> bool {
        let home_ok = match &self.home_ref {
            HomeRef::Home(h) => is_line_safe(h.as_str()),
            HomeRef::Pseudonym(p) => is_line_safe(p.as_str()),
        };
        home_ok && is_line_safe(self.device_id.as_str()) && self.kind.accepts(&self.payload)
    }

    pub fn with_home_ref(mut self, home_ref: HomeRef) -> Self {
        self.home_ref = home_ref;
        self
    }
}
