//! Home configuration: floorplan, device placement and caregiver schedule.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceKind, ReportingMode, TargetObject};
use crate::ids::{is_line_safe, DeviceId, HomeId, RoomId};
use crate::time::{LocalClock, Timestamp};

/// Silence budget for event-driven and gated devices when none is configured.
pub const DEFAULT_HEARTBEAT_BUDGET_S: u32 = 48 * 3600;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("home `{0}` has no devices")]
    NoDevices(HomeId),
    #[error("placement of `{device}` references unknown room `{room}`")]
    UnknownRoom { device: DeviceId, room: RoomId },
    #[error("adjacency references unknown room `{0}`")]
    UnknownAdjacentRoom(RoomId),
    #[error("placement references unconfigured device `{0}`")]
    UnplacedDevice(DeviceId),
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(DeviceId),
    #[error("device id `{0}` is empty or contains whitespace")]
    BadDeviceId(String),
    #[error("devices `{first}` and `{second}` share kind {kind} and target {target:?}")]
    DuplicateTarget { kind: DeviceKind, target: TargetObject, first: DeviceId, second: DeviceId },
    #[error("caregiver windows overlap on {0}")]
    CaregiverOverlap(Weekday),
    #[error("caregiver window on {0} is empty or exceeds the day")]
    BadCaregiverWindow(Weekday),
    #[error("device `{0}` has a zero reporting interval")]
    ZeroInterval(DeviceId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Room {
    pub id: RoomId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub room: RoomId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Floorplan {
    pub rooms: Vec<Room>,
    #[serde(default)]
    pub adjacency: Vec<(RoomId, RoomId)>,
    /// Fixed devices only; wearables have no placement.
    #[serde(default)]
    pub placements: BTreeMap<DeviceId, Placement>,
}

impl Floorplan {
    pub fn has_room(&self, room: &RoomId) -> bool {
        self.rooms.iter().any(|r| &r.id == room)
    }

    pub fn are_adjacent(&self, a: &RoomId, b: &RoomId) -> bool {
        a == b || self.adjacency.iter().any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    pub fn neighbours<'a>(&'a self, room: &'a RoomId) -> impl Iterator<Item = &'a RoomId> + 'a {
        self.adjacency.iter().filter_map(move |(x, y)| {
            if x == room {
                Some(y)
            } else if y == room {
                Some(x)
            } else {
                None
            }
        })
    }

    /// Shortest room path from `from` to `to`, both ends included.
    pub fn path(&self, from: &RoomId, to: &RoomId) -> Option<Vec<RoomId>> {
        let mut prev: BTreeMap<RoomId, Option<RoomId>> = BTreeMap::new();
        let mut queue = std::collections::VecDeque::from([from.clone()]);
        prev.insert(from.clone(), None);
        while let Some(r) = queue.pop_front() {
            if &r == to {
                let mut path = vec![r.clone()];
                let mut cur = r;
                while let Some(Some(p)) = prev.get(&cur) {
                    path.push(p.clone());
                    cur = p.clone();
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbours(&r) {
                if !prev.contains_key(n) {
                    prev.insert(n.clone(), Some(r.clone()));
                    queue.push_back(n.clone());
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: DeviceId,
    pub kind: DeviceKind,
    /// Sampling interval for periodic and gated kinds; defaults per kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_s: Option<u32>,
    /// Maximum tolerated silence for event-driven and gated kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heartbeat_budget_s: Option<u32>,
}

impl DeviceSpec {
    pub fn new(id: &str, kind: DeviceKind) -> Self {
        Self { id: DeviceId::new(id), kind, interval_s: None, heartbeat_budget_s: None }
    }

    pub fn mode(&self) -> ReportingMode {
        self.kind.reporting_mode()
    }

    pub fn interval_s(&self) -> Option<u32> {
        self.interval_s.or(self.kind.default_interval_s())
    }

    /// Longest silence before the device is considered disconnected.
    pub fn silence_budget_s(&self) -> i64 {
        match (self.mode(), self.interval_s()) {
            (ReportingMode::Periodic, Some(i)) => 2 * i64::from(i),
            _ => i64::from(self.heartbeat_budget_s.unwrap_or(DEFAULT_HEARTBEAT_BUDGET_S)),
        }
    }
}

/// Weekly recurring window during which a caregiver is in the home.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaregiverWindow {
    pub weekday: Weekday,
    /// Local minutes after midnight, half-open `[start, end)`.
    pub start_minute: u32,
    pub end_minute: u32,
}

impl CaregiverWindow {
    pub fn contains(&self, clock: LocalClock, ts: Timestamp) -> bool {
        let minute = (clock.second_of_day(ts) / 60) as u32;
        clock.weekday(ts) == self.weekday && (self.start_minute..self.end_minute).contains(&minute)
    }
}

/// Monitored behavior categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    Nutrition,
    PersonalHygiene,
    Sleep,
    Therapy,
    MobilityHome,
    MobilityOutdoor,
    Cognition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeConfig {
    pub id: HomeId,
    #[serde(default)]
    pub clock: LocalClock,
    pub floorplan: Floorplan,
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub caregiver: Vec<CaregiverWindow>,
    /// Behaviors that cannot be monitored in this home.
    #[serde(default)]
    pub unmonitored: BTreeSet<Behavior>,
    /// Home position used as the origin of simulated location fixes.
    #[serde(default = "default_origin")]
    pub origin: (f64, f64),
}

fn default_origin() -> (f64, f64) {
    (45.4642, 9.19)
}

impl HomeConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.devices.is_empty() {
            return Err(ConfigError::NoDevices(self.id.clone()));
        }
        let mut ids = BTreeSet::new();
        for d in &self.devices {
            if !is_line_safe(d.id.as_str()) {
                return Err(ConfigError::BadDeviceId(d.id.to_string()));
            }
            if !ids.insert(&d.id) {
                return Err(ConfigError::DuplicateDevice(d.id.clone()));
            }
            if d.interval_s == Some(0) {
                return Err(ConfigError::ZeroInterval(d.id.clone()));
            }
        }
        for (a, b) in &self.floorplan.adjacency {
            for r in [a, b] {
                if !self.floorplan.has_room(r) {
                    return Err(ConfigError::UnknownAdjacentRoom(r.clone()));
                }
            }
        }
        let mut targets: BTreeMap<(DeviceKind, TargetObject), &DeviceId> = BTreeMap::new();
        for (dev, placement) in &self.floorplan.placements {
            let Some(spec) = self.device(dev) else {
                return Err(ConfigError::UnplacedDevice(dev.clone()));
            };
            if !self.floorplan.has_room(&placement.room) {
                return Err(ConfigError::UnknownRoom { device: dev.clone(), room: placement.room.clone() });
            }
            if let Some(target) = placement.target {
                if let Some(first) = targets.insert((spec.kind, target), dev) {
                    return Err(ConfigError::DuplicateTarget {
                        kind: spec.kind,
                        target,
                        first: first.clone(),
                        second: dev.clone(),
                    });
                }
            }
        }
        for (i, w) in self.caregiver.iter().enumerate() {
            if w.start_minute >= w.end_minute || w.end_minute > 1440 {
                return Err(ConfigError::BadCaregiverWindow(w.weekday));
            }
            for other in &self.caregiver[i + 1..] {
                if other.weekday == w.weekday && other.start_minute < w.end_minute && w.start_minute < other.end_minute
                {
                    return Err(ConfigError::CaregiverOverlap(w.weekday));
                }
            }
        }
        Ok(())
    }

    pub fn device(&self, id: &DeviceId) -> Option<&DeviceSpec> {
        self.devices.iter().find(|d| &d.id == id)
    }

    pub fn room_of(&self, id: &DeviceId) -> Option<&RoomId> {
        self.floorplan.placements.get(id).map(|p| &p.room)
    }

    /// The device of `kind` attached to `target`, if installed.
    pub fn device_for(&self, kind: DeviceKind, target: TargetObject) -> Option<&DeviceSpec> {
        self.floorplan
            .placements
            .iter()
            .filter(|(_, p)| p.target == Some(target))
            .filter_map(|(id, _)| self.device(id))
            .find(|d| d.kind == kind)
    }

    /// Any installed device attached to `target`.
    pub fn has_target(&self, target: TargetObject) -> bool {
        self.floorplan.placements.values().any(|p| p.target == Some(target))
    }

    pub fn devices_of(&self, kind: DeviceKind) -> impl Iterator<Item = &DeviceSpec> {
        self.devices.iter().filter(move |d| d.kind == kind)
    }

    /// Motion or presence devices placed in `room`.
    pub fn activity_devices_in<'a>(&'a self, room: &'a RoomId) -> impl Iterator<Item = &'a DeviceSpec> + 'a {
        self.devices.iter().filter(move |d| {
            matches!(d.kind, DeviceKind::MotionPir | DeviceKind::PresenceMmwave) && self.room_of(&d.id) == Some(room)
        })
    }

    pub fn in_caregiver_window(&self, ts: Timestamp) -> bool {
        self.caregiver.iter().any(|w| w.contains(self.clock, ts))
    }

    /// Caregiver windows falling on local `date`, as UTC half-open ranges.
    pub fn caregiver_ranges(&self, date: chrono::NaiveDate) -> Vec<(Timestamp, Timestamp)> {
        self.caregiver
            .iter()
            .filter(|w| w.weekday == date.weekday())
            .map(|w| {
                (
                    self.clock.at_minute(date, i64::from(w.start_minute)),
                    self.clock.at_minute(date, i64::from(w.end_minute)),
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room(id: &str) -> Room {
        Room { id: RoomId::new(id), name: id.to_owned() }
    }

    fn home() -> HomeConfig {
        let mut placements = BTreeMap::new();
        placements.insert(
            DeviceId::new("c-fridge"),
            Placement { room: RoomId::new("kitchen"), target: Some(TargetObject::Fridge) },
        );
        HomeConfig {
            id: HomeId::new("h1"),
            clock: LocalClock::UTC,
            floorplan: Floorplan {
                rooms: vec![room("kitchen"), room("hall"), room("bath")],
                adjacency: vec![
                    (RoomId::new("kitchen"), RoomId::new("hall")),
                    (RoomId::new("hall"), RoomId::new("bath")),
                ],
                placements,
            },
            devices: vec![DeviceSpec::new("c-fridge", DeviceKind::MagneticContact)],
            caregiver: vec![],
            unmonitored: BTreeSet::new(),
            origin: default_origin(),
        }
    }

    #[test]
    fn valid_home_passes() {
        home().validate().unwrap();
    }

    #[test]
    fn degenerate_home_rejected() {
        let mut h = home();
        h.devices.clear();
        h.floorplan.placements.clear();
        assert_eq!(h.validate(), Err(ConfigError::NoDevices(HomeId::new("h1"))));
    }

    #[test]
    fn placement_in_unknown_room_rejected() {
        let mut h = home();
        h.floorplan.placements.get_mut(&DeviceId::new("c-fridge")).unwrap().room = RoomId::new("attic");
        assert!(matches!(h.validate(), Err(ConfigError::UnknownRoom { .. })));
    }

    #[test]
    fn duplicate_kind_target_rejected() {
        let mut h = home();
        h.devices.push(DeviceSpec::new("c-fridge-2", DeviceKind::MagneticContact));
        h.floorplan.placements.insert(
            DeviceId::new("c-fridge-2"),
            Placement { room: RoomId::new("kitchen"), target: Some(TargetObject::Fridge) },
        );
        assert!(matches!(h.validate(), Err(ConfigError::DuplicateTarget { .. })));
    }

    #[test]
    fn overlapping_caregiver_windows_rejected() {
        let mut h = home();
        h.caregiver = vec![
            CaregiverWindow { weekday: Weekday::Tue, start_minute: 600, end_minute: 720 },
            CaregiverWindow { weekday: Weekday::Tue, start_minute: 700, end_minute: 800 },
        ];
        assert_eq!(h.validate(), Err(ConfigError::CaregiverOverlap(Weekday::Tue)));
        h.caregiver[1].weekday = Weekday::Wed;
        h.validate().unwrap();
    }

    #[test]
    fn path_walks_adjacency() {
        let h = home();
        let p = h.floorplan.path(&RoomId::new("kitchen"), &RoomId::new("bath")).unwrap();
        let names: Vec<_> = p.iter().map(RoomId::as_str).collect();
        assert_eq!(names, ["kitchen", "hall", "bath"]);
    }

    #[test]
    fn silence_budget_is_twice_interval_for_periodic() {
        assert_eq!(DeviceSpec::new("t", DeviceKind::Temperature).silence_budget_s(), 600);
        assert_eq!(
            DeviceSpec::new("c", DeviceKind::MagneticContact).silence_budget_s(),
            i64::from(DEFAULT_HEARTBEAT_BUDGET_S)
        );
    }
}
