//! Domain types shared by every stage of the pipeline.
//!
//! A transaction log is a flat list of access events: which process touched
//! which resource, how (READ/WRITE), when, and at which resource version.
//! Logs generated with injected races additionally carry ground-truth
//! instances so detectors can be scored against them.
//!
//! All types here are immutable after construction and safe to share across
//! threads; parsing and serialization live in [`crate::io`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Access type of a log event. The model knows no other access kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operation {
    #[serde(rename = "READ")]
    Read,
    #[serde(rename = "WRITE")]
    Write,
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Read => "READ",
            Operation::Write => "WRITE",
        })
    }
}

/// The three race classes this toolkit injects and detects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RaceClass {
    /// Simultaneous write conflict: two concurrent unsynchronized writes.
    #[serde(rename = "SWC")]
    Swc,
    /// TOCTOU authorization violation: read, foreign write, dependent act.
    #[serde(rename = "TAV")]
    Tav,
    /// Cascading update race: stale read propagates to a third process.
    #[serde(rename = "CUR")]
    Cur,
}

impl RaceClass {
    pub const ALL: [RaceClass; 3] = [RaceClass::Swc, RaceClass::Tav, RaceClass::Cur];

    pub fn name(self) -> &'static str {
        match self {
            RaceClass::Swc => "SWC",
            RaceClass::Tav => "TAV",
            RaceClass::Cur => "CUR",
        }
    }
}

impl fmt::Display for RaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Experimental condition a log was generated under.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    /// Sequential access, no races injected; false-positive control.
    C1,
    /// Full concurrent access with injected races.
    C2,
    /// Concurrent access with a fraction of writes ETag-protected.
    C3,
}

impl Condition {
    /// Lowercase token used in file names and CLI flags.
    pub fn token(self) -> &'static str {
        match self {
            Condition::C1 => "c1",
            Condition::C2 => "c2",
            Condition::C3 => "c3",
        }
    }

    /// Stable index used when deriving per-log seeds.
    pub fn index(self) -> u64 {
        match self {
            Condition::C1 => 0,
            Condition::C2 => 1,
            Condition::C3 => 2,
        }
    }

    pub fn parse_token(s: &str) -> Option<Condition> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Some(Condition::C1),
            "c2" => Some(Condition::C2),
            "c3" => Some(Condition::C3),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
        })
    }
}

/// FHIR resource types present in the synthetic workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResourceType {
    AllergyIntolerance,
    MedicationRequest,
    Observation,
    Patient,
}

impl ResourceType {
    pub const ALL: [ResourceType; 4] = [
        ResourceType::AllergyIntolerance,
        ResourceType::MedicationRequest,
        ResourceType::Observation,
        ResourceType::Patient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResourceType::AllergyIntolerance => "AllergyIntolerance",
            ResourceType::MedicationRequest => "MedicationRequest",
            ResourceType::Observation => "Observation",
            ResourceType::Patient => "Patient",
        }
    }
}

impl fmt::Display for ResourceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Event time in whole milliseconds since the log origin.
///
/// Timestamps are stored at millisecond precision; conversion from seconds
/// rounds half to even. Keeping integer milliseconds makes every window
/// comparison in the detectors exact, including the strict/closed boundary
/// cases, and keeps serialization byte-stable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0);

    pub fn from_ms(ms: u64) -> Timestamp {
        Timestamp(ms)
    }

    /// Converts non-negative seconds to a millisecond timestamp.
    /// Returns `None` for negative or non-finite input.
    pub fn from_secs_f64(secs: f64) -> Option<Timestamp> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        Some(Timestamp((secs * 1000.0).round_ties_even() as u64))
    }

    pub fn ms(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn abs_diff_ms(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn add_ms(self, ms: u64) -> Timestamp {
        Timestamp(self.0 + ms)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_secs_f64())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_secs_f64())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let secs = f64::deserialize(deserializer)?;
        Timestamp::from_secs_f64(secs)
            .ok_or_else(|| serde::de::Error::custom(format!("timestamp must be finite and >= 0, got {secs}")))
    }
}

/// Converts a window expressed in seconds to whole milliseconds.
pub(crate) fn ms_from_secs(secs: f64) -> u64 {
    (secs * 1000.0).round_ties_even().max(0.0) as u64
}

fn is_false(v: &bool) -> bool {
    !*v
}

/// One transaction-log line: a single resource access.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub event_id: u64,
    pub process_id: String,
    #[serde(rename = "resource")]
    pub resource_type: ResourceType,
    pub resource_id: String,
    pub operation: Operation,
    pub timestamp: Timestamp,
    pub version_id: u64,
    pub is_race: bool,
    #[serde(default)]
    pub race_class: Option<RaceClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub race_instance_id: Option<u64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub etag_protected: bool,
}

impl AccessEvent {
    /// Full resource name, `Type/id`, which uniquely identifies the node.
    pub fn resource_name(&self) -> String {
        format!("{}/{}", self.resource_type, self.resource_id)
    }

    /// Sort key used everywhere event order matters.
    pub fn order_key(&self) -> (Timestamp, u64) {
        (self.timestamp, self.event_id)
    }
}

/// One injected race: which events realize it and where it starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthInstance {
    pub instance_id: u64,
    pub race_class: RaceClass,
    /// Full resource name (`Type/id`).
    pub resource_id: String,
    pub event_ids: Vec<u64>,
    pub earliest_timestamp: Timestamp,
}

/// ETag-protected write events, the realized synchronization constraints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncConstraintSet {
    pub protected_write_event_ids: BTreeSet<u64>,
}

impl SyncConstraintSet {
    pub fn empty() -> SyncConstraintSet {
        SyncConstraintSet::default()
    }

    pub fn from_log(log: &TransactionLog) -> SyncConstraintSet {
        let protected_write_event_ids = log
            .events
            .iter()
            .filter(|e| e.etag_protected && e.operation == Operation::Write)
            .map(|e| e.event_id)
            .collect();
        SyncConstraintSet { protected_write_event_ids }
    }

    pub fn is_protected(&self, event_id: u64) -> bool {
        self.protected_write_event_ids.contains(&event_id)
    }
}

/// A complete synthetic transaction log with its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransactionLog {
    pub log_id: u64,
    pub condition: Condition,
    pub seed: u64,
    pub events: Vec<AccessEvent>,
    pub ground_truth: Vec<GroundTruthInstance>,
}

impl TransactionLog {
    pub fn sync_constraints(&self) -> SyncConstraintSet {
        SyncConstraintSet::from_log(self)
    }

    /// Event lookup by id. Panics only on ids absent from the log, which
    /// validation rules out for ground-truth references.
    pub fn events_by_id(&self) -> BTreeMap<u64, &AccessEvent> {
        self.events.iter().map(|e| (e.event_id, e)).collect()
    }

    /// Checks every structural invariant of the log. Returns the first
    /// violation found as an [`Error::Integrity`].
    pub fn validate(&self) -> Result<()> {
        let mut seen_ids = BTreeSet::new();
        for event in &self.events {
            if !seen_ids.insert(event.event_id) {
                return Err(Error::Integrity(format!(
                    "duplicate event_id {}",
                    event.event_id
                )));
            }
            let race_fields = (
                event.is_race,
                event.race_class.is_some(),
                event.race_instance_id.is_some(),
            );
            match race_fields {
                (true, true, true) | (false, false, false) => {}
                _ => {
                    return Err(Error::Integrity(format!(
                        "event {}: is_race, race_class and race_instance_id must be set together",
                        event.event_id
                    )));
                }
            }
            if event.etag_protected && event.operation != Operation::Write {
                return Err(Error::Integrity(format!(
                    "event {}: etag_protected on a {} event",
                    event.event_id, event.operation
                )));
            }
        }

        self.check_version_discipline()?;
        self.check_ground_truth()?;

        if self.condition == Condition::C1 {
            if !self.ground_truth.is_empty() {
                return Err(Error::Integrity(
                    "C1 log carries ground-truth instances".to_string(),
                ));
            }
            if self.events.iter().any(|e| e.etag_protected) {
                return Err(Error::Integrity(
                    "C1 log carries etag_protected events".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Per-resource version discipline: the k-th WRITE (in timestamp order,
    /// event_id tiebreak) carries version k; every READ carries the version
    /// of the most recent preceding WRITE, or 1 if none.
    fn check_version_discipline(&self) -> Result<()> {
        let mut order: Vec<&AccessEvent> = self.events.iter().collect();
        order.sort_by_key(|e| e.order_key());
        let mut write_counts: BTreeMap<String, u64> = BTreeMap::new();
        for event in order {
            let name = event.resource_name();
            let count = write_counts.entry(name.clone()).or_insert(0);
            let expected = match event.operation {
                Operation::Write => {
                    *count += 1;
                    *count
                }
                Operation::Read => (*count).max(1),
            };
            if event.version_id != expected {
                return Err(Error::Integrity(format!(
                    "event {} on {}: version_id {} violates version discipline (expected {})",
                    event.event_id, name, event.version_id, expected
                )));
            }
        }
        Ok(())
    }

    fn check_ground_truth(&self) -> Result<()> {
        let by_id = self.events_by_id();
        let mut instance_ids = BTreeSet::new();
        let mut claimed_events: BTreeMap<u64, u64> = BTreeMap::new();
        for instance in &self.ground_truth {
            if !instance_ids.insert(instance.instance_id) {
                return Err(Error::Integrity(format!(
                    "duplicate ground-truth instance_id {}",
                    instance.instance_id
                )));
            }
            if instance.event_ids.is_empty() {
                return Err(Error::Integrity(format!(
                    "ground-truth instance {} has no events",
                    instance.instance_id
                )));
            }
            let mut earliest: Option<Timestamp> = None;
            for &eid in &instance.event_ids {
                let event = by_id.get(&eid).ok_or_else(|| {
                    Error::Integrity(format!(
                        "ground-truth instance {} references unknown event {}",
                        instance.instance_id, eid
                    ))
                })?;
                if claimed_events.insert(eid, instance.instance_id).is_some() {
                    return Err(Error::Integrity(format!(
                        "event {} belongs to more than one ground-truth instance",
                        eid
                    )));
                }
                if !event.is_race
                    || event.race_class != Some(instance.race_class)
                    || event.race_instance_id != Some(instance.instance_id)
                {
                    return Err(Error::Integrity(format!(
                        "event {} does not match its ground-truth instance {}",
                        eid, instance.instance_id
                    )));
                }
                if event.resource_name() != instance.resource_id {
                    return Err(Error::Integrity(format!(
                        "event {} resource {} differs from instance resource {}",
                        eid,
                        event.resource_name(),
                        instance.resource_id
                    )));
                }
                earliest = Some(match earliest {
                    Some(t) => t.min(event.timestamp),
                    None => event.timestamp,
                });
            }
            if earliest != Some(instance.earliest_timestamp) {
                return Err(Error::Integrity(format!(
                    "ground-truth instance {}: earliest_timestamp does not match its events",
                    instance.instance_id
                )));
            }
        }
        for event in &self.events {
            if event.is_race && !claimed_events.contains_key(&event.event_id) {
                return Err(Error::Integrity(format!(
                    "race event {} belongs to no ground-truth instance",
                    event.event_id
                )));
            }
        }
        Ok(())
    }
}
