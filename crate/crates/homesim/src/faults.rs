//! Deployment faults: devices that go quiet and gateways that lose their
//! uplink.

use serde::{Deserialize, Serialize};

use carewatch_core::{DeviceId, SensorEvent, Timestamp};

/// One injected problem. Intervals are half-open UTC ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Fault {
    /// The device stops reporting for a while, e.g. a lost radio link.
    DeviceDropout { device: DeviceId, from: Timestamp, until: Timestamp },
    /// The gateway cannot reach the platform. With `buffering` the home keeps
    /// collecting and syncs late; without it nothing is recorded.
    GatewayOutage { from: Timestamp, until: Timestamp, buffering: bool },
    /// The subject unplugged or hid the device until a technician visit.
    DeviceRemoved { device: DeviceId, from: Timestamp, until: Timestamp },
    /// The battery runs flat; the device stays silent from then on.
    BatteryDecay { device: DeviceId, from: Timestamp },
}

impl Fault {
    /// Whether this fault suppresses `e` at the source.
    pub fn suppresses(&self, e: &SensorEvent) -> bool {
        let t = e.timestamp;
        match self {
            Fault::DeviceDropout { device, from, until } | Fault::DeviceRemoved { device, from, until } => {
                *device == e.device_id && (*from..*until).contains(&t)
            }
            Fault::GatewayOutage { from, until, buffering } => !buffering && (*from..*until).contains(&t),
            Fault::BatteryDecay { device, from } => *device == e.device_id && t >= *from,
        }
    }

    pub fn device(&self) -> Option<&DeviceId> {
        match self {
            Fault::DeviceDropout { device, .. }
            | Fault::DeviceRemoved { device, .. }
            | Fault::BatteryDecay { device, .. } => Some(device),
            Fault::GatewayOutage { .. } => None,
        }
    }

    /// Start and (possibly open) end of the fault.
    pub fn span(&self) -> (Timestamp, Option<Timestamp>) {
        match self {
            Fault::DeviceDropout { from, until, .. }
            | Fault::DeviceRemoved { from, until, .. }
            | Fault::GatewayOutage { from, until, .. } => (*from, Some(*until)),
            Fault::BatteryDecay { from, .. } => (*from, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultSpec {
    pub faults: Vec<Fault>,
}

impl FaultSpec {
    pub fn is_empty(&self) -> bool {
        self.faults.is_empty()
    }

    pub fn suppresses(&self, e: &SensorEvent) -> bool {
        self.faults.iter().any(|f| f.suppresses(e))
    }

    /// Buffered outages overlapping `[from, until)`.
    pub fn outages_overlapping(&self, from: Timestamp, until: Timestamp) -> impl Iterator<Item = &Fault> {
        self.faults.iter().filter(move |f| match f {
            Fault::GatewayOutage { from: a, until: b, .. } => *a < until && from < *b,
            _ => false,
        })
    }
}

/// Removes the events the faults suppress. Removal is the only change; the
/// survivors keep their order.
pub fn inject_faults<'a, I>(events: I, faults: &'a FaultSpec) -> impl Iterator<Item = SensorEvent> + 'a
where
    I: IntoIterator<Item = SensorEvent>,
    I::IntoIter: 'a,
{
    events.into_iter().filter(move |e| !faults.suppresses(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use carewatch_core::{BinaryState, DeviceKind, HomeRef, Payload};

    fn ev(dev: &str, t: Timestamp) -> SensorEvent {
        SensorEvent {
            device_id: DeviceId::new(dev),
            home_ref: HomeRef::Home("h".into()),
            timestamp: t,
            kind: DeviceKind::MotionPir,
            payload: Payload::Binary(BinaryState::On),
        }
    }

    #[test]
    fn empty_spec_is_identity() {
        let evs: Vec<_> = (0..10).map(|t| ev("a", t)).collect();
        let out: Vec<_> = inject_faults(evs.clone(), &FaultSpec::default()).collect();
        assert_eq!(out, evs);
    }

    #[test]
    fn dropout_removes_only_its_device_and_interval() {
        let evs: Vec<_> = (0..10).flat_map(|t| [ev("a", t), ev("b", t)]).collect();
        let spec = FaultSpec { faults: vec![Fault::DeviceDropout { device: DeviceId::new("a"), from: 3, until: 6 }] };
        let out: Vec<_> = inject_faults(evs, &spec).collect();
        assert_eq!(out.len(), 17);
        assert!(out.iter().all(|e| e.device_id.as_str() == "b" || !(3..6).contains(&e.timestamp)));
    }

    #[test]
    fn buffered_outage_keeps_events() {
        let evs: Vec<_> = (0..10).map(|t| ev("a", t)).collect();
        let keep = FaultSpec { faults: vec![Fault::GatewayOutage { from: 0, until: 10, buffering: true }] };
        assert_eq!(inject_faults(evs.clone(), &keep).count(), 10);
        let halt = FaultSpec { faults: vec![Fault::GatewayOutage { from: 0, until: 5, buffering: false }] };
        assert_eq!(inject_faults(evs, &halt).count(), 5);
    }
}
