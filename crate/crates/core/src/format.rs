//! Canonical line-oriented event serialization.
//!
//! One event per line, five tab-separated fields:
//!
//! ```text
//! <timestamp>\t<device_id>\t<home_ref>\t<kind>\t<payload>
//! ```
//!
//! * `timestamp`: ISO-8601 UTC with second precision, `2024-03-01T12:00:00Z`
//! * `home_ref`: `home:<id>` or `pseudo:<pseudonym>`
//! * `kind`: the device kind tag, e.g. `temperature`
//! * `payload`: `binary:<open|closed|on|off>`, `scalar:<value>:<unit>`,
//!   `sleep:<awake|light|deep|rem>`, `location:<lat>:<lon>:<accuracy_m>`,
//!   `toothbrush:<seconds>` or `test:<1|0>:<score|->`
//!
//! Floats are written in Rust's shortest round-trip form, so parsing a
//! serialized event yields a bit-identical value. Log files start with the
//! version line [`LOG_HEADER`].

use thiserror::Error;

use crate::device::{BinaryState, DeviceKind, SleepPhase, Unit};
use crate::event::{HomeRef, LocationFix, Payload, SensorEvent};
use crate::ids::{DeviceId, HomeId, Pseudonym};
use crate::time::{from_iso, to_iso};

pub const LOG_HEADER: &str = "#carewatch-events v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("malformed line: field `{field}`: {reason}")]
    MalformedLine { field: &'static str, reason: String },
    #[error("unknown device kind `{kind}`")]
    UnknownKind { kind: String },
    #[error("payload `{payload}` does not match the schema of kind `{kind}`")]
    PayloadSchemaMismatch { kind: DeviceKind, payload: String },
    #[error("missing or unsupported log header, expected `{LOG_HEADER}`")]
    BadHeader,
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<ParseError> },
}

fn malformed(field: &'static str, reason: impl Into<String>) -> ParseError {
    ParseError::MalformedLine { field, reason: reason.into() }
}

/// Serializes one event to its canonical line, without the trailing newline.
pub fn serialize_event(e: &SensorEvent) -> String {
    let home = match &e.home_ref {
        HomeRef::Home(h) => format!("home:{h}"),
        HomeRef::Pseudonym(p) => format!("pseudo:{p}"),
    };
    format!("{}\t{}\t{}\t{}\t{}", to_iso(e.timestamp), e.device_id, home, e.kind.tag(), serialize_payload(&e.payload))
}

fn serialize_payload(p: &Payload) -> String {
    match p {
        Payload::Binary(s) => format!("binary:{}", s.tag()),
        Payload::Scalar { value, unit } => format!("scalar:{value}:{}", unit.tag()),
        Payload::Sleep(phase) => format!("sleep:{}", phase.tag()),
        Payload::Location(LocationFix { lat, lon, accuracy_m }) => {
            format!("location:{lat}:{lon}:{accuracy_m}")
        }
        Payload::Toothbrush { duration_s } => format!("toothbrush:{duration_s}"),
        Payload::TestOutcome { compliant, score } => {
            let score = score.map_or_else(|| "-".to_owned(), |s| s.to_string());
            format!("test:{}:{score}", u8::from(*compliant))
        }
    }
}

pub fn parse_event(line: &str) -> Result<SensorEvent, ParseError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    let [ts, device, home, kind, payload] = fields[..] else {
        return Err(malformed("line", format!("expected 5 fields, got {}", fields.len())));
    };
    let timestamp = from_iso(ts).ok_or_else(|| malformed("timestamp", ts))?;
    if device.is_empty() || device.chars().any(char::is_whitespace) {
        return Err(malformed("device_id", device));
    }
    let home_ref = match home.split_once(':') {
        Some(("home", id)) if !id.is_empty() => HomeRef::Home(HomeId::new(id)),
        Some(("pseudo", id)) if !id.is_empty() => HomeRef::Pseudonym(Pseudonym::new(id)),
        _ => return Err(malformed("home_ref", home)),
    };
    let kind: DeviceKind = kind.parse().map_err(|()| ParseError::UnknownKind { kind: kind.to_owned() })?;
    let parsed = parse_payload(payload)?;
    if !kind.accepts(&parsed) {
        return Err(ParseError::PayloadSchemaMismatch { kind, payload: payload.to_owned() });
    }
    Ok(SensorEvent { device_id: DeviceId::new(device), home_ref, timestamp, kind, payload: parsed })
}

fn parse_f64(s: &str) -> Result<f64, ParseError> {
    s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| malformed("payload", format!("bad number `{s}`")))
}

fn parse_payload(s: &str) -> Result<Payload, ParseError> {
    let mut parts = s.split(':');
    let tag = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let bad = || malformed("payload", s);
    match (tag, rest.as_slice()) {
        ("binary", [state]) => BinaryState::parse(state).map(Payload::Binary).ok_or_else(bad),
        ("scalar", [value, unit]) => {
            Ok(Payload::Scalar { value: parse_f64(value)?, unit: Unit::parse(unit).ok_or_else(bad)? })
        }
        ("sleep", [phase]) => SleepPhase::parse(phase).map(Payload::Sleep).ok_or_else(bad),
        ("location", [lat, lon, acc]) => Ok(Payload::Location(LocationFix {
            lat: parse_f64(lat)?,
            lon: parse_f64(lon)?,
            accuracy_m: parse_f64(acc)?,
        })),
        ("toothbrush", [secs]) => Ok(Payload::Toothbrush { duration_s: secs.parse().map_err(|_| bad())? }),
        ("test", [flag, score]) => {
            let compliant = match *flag {
                "1" => true,
                "0" => false,
                _ => return Err(bad()),
            };
            let score = match *score {
                "-" => None,
                n => Some(n.parse::<u8>().map_err(|_| bad())?),
            };
            Ok(Payload::TestOutcome { compliant, score })
        }
        _ => Err(bad()),
    }
}

/// Renders a complete log file: header line then one event per line.
pub fn write_log<'a>(events: impl IntoIterator<Item = &'a SensorEvent>) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&serialize_event(e));
        out.push('\n');
    }
    out
}

pub fn read_log(text: &str) -> Result<Vec<SensorEvent>, ParseError> {
    let mut lines = text.lines();
    if lines.next() != Some(LOG_HEADER) {
        return Err(ParseError::BadHeader);
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| parse_event(l).map_err(|e| ParseError::AtLine { line: i + 2, source: Box::new(e) }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn temp_event() -> SensorEvent {
        SensorEvent {
            device_id: DeviceId::new("temp-stove"),
            home_ref: HomeRef::Home(HomeId::new("h1")),
            timestamp: 1_709_294_400,
            kind: DeviceKind::Temperature,
            payload: Payload::Scalar { value: 21.5, unit: Unit::Celsius },
        }
    }

    #[test]
    fn temperature_line_layout() {
        let line = serialize_event(&temp_event());
        assert_eq!(line, "2024-03-01T12:00:00Z\ttemp-stove\thome:h1\ttemperature\tscalar:21.5:degC");
        assert_eq!(parse_event(&line).unwrap(), temp_event());
    }

    #[test]
    fn motion_with_celsius_is_schema_mismatch() {
        let line = "2024-03-01T12:00:00Z\tpir-1\thome:h1\tmotion-pir\tscalar:21.5:degC";
        assert!(matches!(
            parse_event(line),
            Err(ParseError::PayloadSchemaMismatch { kind: DeviceKind::MotionPir, .. })
        ));
    }

    #[test]
    fn truncated_line_is_malformed() {
        let line = serialize_event(&temp_event());
        let cut = &line[..line.len() - 20];
        assert!(matches!(parse_event(cut), Err(ParseError::MalformedLine { .. })));
        assert!(matches!(parse_event(""), Err(ParseError::MalformedLine { field: "line", .. })));
    }

    #[test]
    fn unknown_kind_is_named() {
        let line = "2024-03-01T12:00:00Z\tx\thome:h1\tthermostat\tscalar:21.5:degC";
        assert_eq!(parse_event(line), Err(ParseError::UnknownKind { kind: "thermostat".into() }));
    }

    #[test]
    fn bad_timestamp_names_field() {
        let line = "2024-03-01 12:00:00\tx\thome:h1\ttemperature\tscalar:21.5:degC";
        assert!(matches!(parse_event(line), Err(ParseError::MalformedLine { field: "timestamp", .. })));
    }

    #[test]
    fn log_requires_header() {
        let body = write_log([&temp_event()]);
        assert_eq!(read_log(&body).unwrap(), vec![temp_event()]);
        let without = body.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert_eq!(read_log(&without), Err(ParseError::BadHeader));
    }

    fn arb_payload_for(kind: DeviceKind) -> BoxedStrategy<Payload> {
        let finite = -1.0e6f64..1.0e6;
        match kind {
            DeviceKind::MagneticContact | DeviceKind::EntranceDoorContact => {
                prop_oneof![Just(BinaryState::Open), Just(BinaryState::Closed)].prop_map(Payload::Binary).boxed()
            }
            DeviceKind::MotionPir | DeviceKind::PresenceMmwave => {
                prop_oneof![Just(BinaryState::On), Just(BinaryState::Off)].prop_map(Payload::Binary).boxed()
            }
            DeviceKind::TabletPresence => prop_oneof![
                Just(Payload::Binary(BinaryState::On)),
                (0u8..=100).prop_map(|s| Payload::TestOutcome { compliant: true, score: Some(s) }),
                Just(Payload::TestOutcome { compliant: false, score: None }),
            ]
            .boxed(),
            DeviceKind::Temperature => finite.prop_map(|value| Payload::Scalar { value, unit: Unit::Celsius }).boxed(),
            DeviceKind::Humidity => {
                finite.prop_map(|value| Payload::Scalar { value, unit: Unit::RelativeHumidity }).boxed()
            }
            DeviceKind::SmartPlugPower => finite.prop_map(|value| Payload::Scalar { value, unit: Unit::Watt }).boxed(),
            DeviceKind::Smartwatch => (finite, any::<bool>())
                .prop_map(|(value, steps)| Payload::Scalar {
                    value,
                    unit: if steps { Unit::Steps } else { Unit::BeatsPerMinute },
                })
                .boxed(),
            DeviceKind::SleepMat => prop_oneof![
                Just(SleepPhase::Awake),
                Just(SleepPhase::Light),
                Just(SleepPhase::Deep),
                Just(SleepPhase::Rem)
            ]
            .prop_map(Payload::Sleep)
            .boxed(),
            DeviceKind::Toothbrush => any::<u32>().prop_map(|duration_s| Payload::Toothbrush { duration_s }).boxed(),
            DeviceKind::LocationSource => (-90.0f64..=90.0, -180.0f64..=180.0, 0.0f64..500.0)
                .prop_map(|(lat, lon, accuracy_m)| Payload::Location(LocationFix { lat, lon, accuracy_m }))
                .boxed(),
        }
    }

    fn arb_event() -> impl Strategy<Value = SensorEvent> {
        (
            proptest::sample::select(DeviceKind::ALL.to_vec()),
            "[a-z0-9_.-]{1,12}",
            "[a-zA-Z0-9-]{1,16}",
            any::<bool>(),
            0i64..4_000_000_000,
        )
            .prop_flat_map(|(kind, dev, home, pseudo, ts)| {
                arb_payload_for(kind).prop_map(move |payload| SensorEvent {
                    device_id: DeviceId::new(dev.clone()),
                    home_ref: if pseudo {
                        HomeRef::Pseudonym(Pseudonym::new(home.clone()))
                    } else {
                        HomeRef::Home(HomeId::new(home.clone()))
                    },
                    timestamp: ts,
                    kind,
                    payload,
                })
            })
    }

    proptest! {
        #[test]
        fn round_trip(e in arb_event()) {
            prop_assert!(e.is_valid());
            let line = serialize_event(&e);
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(parse_event(&line).unwrap(), e);
        }
    }
}
