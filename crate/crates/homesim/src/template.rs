//! The reference apartment used by bundled scenarios.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use carewatch_core::{
    Behavior, CaregiverWindow, DeviceId, DeviceKind, DeviceSpec, Floorplan, HomeConfig, HomeId, LocalClock, Placement,
    Room, RoomId, TargetObject,
};

pub const BEDROOM: &str = "bedroom";
pub const BATHROOM: &str = "bathroom";
pub const KITCHEN: &str = "kitchen";
pub const LIVING: &str = "living";
pub const HALL: &str = "hall";

/// Knobs for [`standard_home`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct HomeTemplate {
    /// Device ids of the standard layout that are not installed.
    pub omit_devices: BTreeSet<String>,
    pub caregiver: Vec<CaregiverWindow>,
    pub utc_offset_minutes: i32,
    pub location_consent: bool,
}

/// A five-room apartment: bedroom, bathroom and living room off a hall,
/// kitchen reachable through the living room.
pub fn standard_home(id: &str, template: &HomeTemplate) -> HomeConfig {
    let rooms =
        [BEDROOM, BATHROOM, KITCHEN, LIVING, HALL].map(|r| Room { id: RoomId::new(r), name: r.to_owned() }).to_vec();
    let adjacency = [(HALL, BEDROOM), (HALL, BATHROOM), (HALL, LIVING), (LIVING, KITCHEN)]
        .map(|(a, b)| (RoomId::new(a), RoomId::new(b)))
        .to_vec();

    let fixed: [(&str, DeviceKind, &str, Option<TargetObject>); 16] = [
        ("pir-bedroom", DeviceKind::MotionPir, BEDROOM, None),
        ("pir-bathroom", DeviceKind::MotionPir, BATHROOM, None),
        ("pir-kitchen", DeviceKind::MotionPir, KITCHEN, None),
        ("pir-living", DeviceKind::MotionPir, LIVING, None),
        ("pir-hall", DeviceKind::MotionPir, HALL, None),
        ("mmw-living", DeviceKind::PresenceMmwave, LIVING, Some(TargetObject::Tv)),
        ("temp-stove", DeviceKind::Temperature, KITCHEN, Some(TargetObject::Stove)),
        ("hum-shower", DeviceKind::Humidity, BATHROOM, Some(TargetObject::Shower)),
        ("plug-microwave", DeviceKind::SmartPlugPower, KITCHEN, Some(TargetObject::Microwave)),
        ("contact-fridge", DeviceKind::MagneticContact, KITCHEN, Some(TargetObject::Fridge)),
        ("contact-pantry", DeviceKind::MagneticContact, KITCHEN, Some(TargetObject::Pantry)),
        ("contact-medicine", DeviceKind::MagneticContact, KITCHEN, Some(TargetObject::MedicineCabinet)),
        ("door-entrance", DeviceKind::EntranceDoorContact, HALL, Some(TargetObject::EntranceDoor)),
        ("mat-bed", DeviceKind::SleepMat, BEDROOM, Some(TargetObject::Bed)),
        ("tablet", DeviceKind::TabletPresence, LIVING, Some(TargetObject::Tablet)),
        ("toothbrush", DeviceKind::Toothbrush, BATHROOM, None),
    ];
    let mut wearables = vec![("watch", DeviceKind::Smartwatch)];
    if template.location_consent {
        wearables.push(("phone-location", DeviceKind::LocationSource));
    }

    let keep = |id: &str| !template.omit_devices.contains(id);
    let mut devices = Vec::new();
    let mut placements = BTreeMap::new();
    for (id, kind, room, target) in fixed {
        if keep(id) {
            devices.push(DeviceSpec::new(id, kind));
            placements.insert(DeviceId::new(id), Placement { room: RoomId::new(room), target });
        }
    }
    for (id, kind) in wearables {
        if keep(id) {
            devices.push(DeviceSpec::new(id, kind));
        }
    }

    let installed = |id: &str| devices.iter().any(|d| d.id.as_str() == id);
    let mut unmonitored = BTreeSet::new();
    let gaps = [
        ("temp-stove", Behavior::Nutrition),
        ("mat-bed", Behavior::Sleep),
        ("contact-medicine", Behavior::Therapy),
        ("door-entrance", Behavior::MobilityOutdoor),
        ("tablet", Behavior::Cognition),
    ];
    for (id, behavior) in gaps {
        if !installed(id) {
            unmonitored.insert(behavior);
        }
    }
    if !installed("toothbrush") && !installed("hum-shower") {
        unmonitored.insert(Behavior::PersonalHygiene);
    }

    HomeConfig {
        id: HomeId::new(id),
        clock: LocalClock::new(template.utc_offset_minutes),
        floorplan: Floorplan { rooms, adjacency, placements },
        devices,
        caregiver: template.caregiver.clone(),
        unmonitored,
        origin: (45.4642, 9.19),
    }
}
