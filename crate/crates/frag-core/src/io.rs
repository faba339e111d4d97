//! Newline-delimited JSON transaction-log format.
//!
//! One event per line, optionally preceded by a single header object marked
//! with `"_header": true` that carries `log_id`, `condition`, `seed` and the
//! ground-truth instance list. Header-less files in the bare nine-field
//! format are accepted: race instances are then reconstructed by grouping
//! race events that share `(resource, class)` within a 300 ms span, and the
//! condition is inferred from the flags present.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::RaceDetection;
use crate::error::{Error, Result};
use crate::model::{AccessEvent, Condition, GroundTruthInstance, RaceClass, TransactionLog};

/// Maximum span of one reconstructed race instance when grouping events
/// that arrive without explicit `race_instance_id`s.
const INSTANCE_GROUPING_SPAN_MS: u64 = 300;

#[derive(Serialize, Deserialize)]
struct LogHeader {
    #[serde(rename = "_header")]
    marker: bool,
    log_id: u64,
    condition: Condition,
    seed: u64,
    #[serde(default)]
    ground_truth: Option<Vec<GroundTruthInstance>>,
}

/// Serializes a log to NDJSON bytes: header line first, then events sorted
/// by `(timestamp, event_id)`.
pub fn serialize_log(log: &TransactionLog) -> Vec<u8> {
    let mut out = Vec::new();
    write_log(log, &mut out).expect("writing to a Vec cannot fail");
    out
}

/// Writes a log as NDJSON to an arbitrary writer.
pub fn write_log<W: Write>(log: &TransactionLog, mut w: W) -> Result<()> {
    let header = LogHeader {
        marker: true,
        log_id: log.log_id,
        condition: log.condition,
        seed: log.seed,
        ground_truth: Some(log.ground_truth.clone()),
    };
    serde_json::to_writer(&mut w, &header).map_err(io_from_json)?;
    w.write_all(b"\n")?;

    let mut order: Vec<&AccessEvent> = log.events.iter().collect();
    order.sort_by_key(|e| e.order_key());
    for event in order {
        serde_json::to_writer(&mut w, event).map_err(io_from_json)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn io_from_json(err: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(err))
}

/// Parses an NDJSON byte stream into a validated [`TransactionLog`].
pub fn parse_log(bytes: &[u8]) -> Result<TransactionLog> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;

    let mut header: Option<LogHeader> = None;
    let mut events: Vec<AccessEvent> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let is_header = value
            .as_object()
            .and_then(|o| o.get("_header"))
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        if is_header {
            if header.is_some() || !events.is_empty() {
                return Err(Error::Schema {
                    line: line_no,
                    message: "header object must be the first line".to_string(),
                });
            }
            header = Some(serde_json::from_value(value).map_err(|e| Error::Schema {
                line: line_no,
                message: e.to_string(),
            })?);
        } else {
            let event: AccessEvent =
                serde_json::from_value(value).map_err(|e| Error::Schema {
                    line: line_no,
                    message: e.to_string(),
                })?;
            events.push(event);
        }
    }

    events.sort_by_key(|e| e.order_key());

    assign_missing_instance_ids(&mut events)?;

    let (log_id, condition, seed, ground_truth) = match header {
        Some(h) => {
            let gt = match h.ground_truth {
                Some(gt) => gt,
                None => reconstruct_instances(&events),
            };
            (h.log_id, h.condition, h.seed, gt)
        }
        None => {
            let condition = infer_condition(&events);
            (0, condition, 0, reconstruct_instances(&events))
        }
    };

    let log = TransactionLog {
        log_id,
        condition,
        seed,
        events,
        ground_truth,
    };
    log.validate()?;
    Ok(log)
}

fn infer_condition(events: &[AccessEvent]) -> Condition {
    if events.iter().any(|e| e.etag_protected) {
        Condition::C3
    } else if events.iter().any(|e| e.is_race) {
        Condition::C2
    } else {
        Condition::C1
    }
}

/// Fills in `race_instance_id` on race events parsed from the bare
/// nine-field format. Race events sharing `(resource, class)` whose timestamps fall
/// within one 300 ms span form one instance; ids are assigned in timestamp
/// order of the instances' earliest events.
fn assign_missing_instance_ids(events: &mut [AccessEvent]) -> Result<()> {
    let race_total = events.iter().filter(|e| e.is_race).count();
    if race_total == 0 {
        return Ok(());
    }
    let with_id = events
        .iter()
        .filter(|e| e.is_race && e.race_instance_id.is_some())
        .count();
    if with_id == race_total {
        return Ok(());
    }
    if with_id != 0 {
        return Err(Error::Integrity(
            "race_instance_id present on some race events but not all".to_string(),
        ));
    }

    // Indices of race events grouped by (resource, class), each group in
    // (timestamp, event_id) order because `events` is already sorted.
    let mut groups: std::collections::BTreeMap<(String, String), Vec<usize>> =
        std::collections::BTreeMap::new();
    for (idx, event) in events.iter().enumerate() {
        if let (true, Some(class)) = (event.is_race, event.race_class) {
            groups
                .entry((event.resource_name(), class.name().to_string()))
                .or_default()
                .push(idx);
        }
    }

    // Split each group on gaps larger than the grouping span.
    let mut instances: Vec<(crate::model::Timestamp, String, Vec<usize>)> = Vec::new();
    for ((resource, _class), idxs) in groups {
        let mut current: Vec<usize> = Vec::new();
        let mut span_start = None;
        for idx in idxs {
            let t = events[idx].timestamp;
            match span_start {
                Some(start) if t.abs_diff_ms(start) <= INSTANCE_GROUPING_SPAN_MS => {
                    current.push(idx);
                }
                Some(start) => {
                    instances.push((start, resource.clone(), std::mem::take(&mut current)));
                    span_start = Some(t);
                    current.push(idx);
                }
                None => {
                    span_start = Some(t);
                    current.push(idx);
                }
            }
        }
        if let Some(start) = span_start {
            instances.push((start, resource.clone(), current));
        }
    }

    instances.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    for (instance_id, (_, _, idxs)) in instances.into_iter().enumerate() {
        for idx in idxs {
            events[idx].race_instance_id = Some(instance_id as u64);
        }
    }
    Ok(())
}

/// Rebuilds ground-truth instances from per-event instance ids.
fn reconstruct_instances(events: &[AccessEvent]) -> Vec<GroundTruthInstance> {
    let mut by_instance: std::collections::BTreeMap<u64, (RaceClass, String, Vec<u64>, crate::model::Timestamp)> =
        std::collections::BTreeMap::new();
    for event in events {
        if let (true, Some(class), Some(id)) =
            (event.is_race, event.race_class, event.race_instance_id)
        {
            let entry = by_instance.entry(id).or_insert_with(|| {
                (class, event.resource_name(), Vec::new(), event.timestamp)
            });
            entry.2.push(event.event_id);
            entry.3 = entry.3.min(event.timestamp);
        }
    }
    by_instance
        .into_iter()
        .map(|(instance_id, (race_class, resource_id, event_ids, earliest))| {
            GroundTruthInstance {
                instance_id,
                race_class,
                resource_id,
                event_ids,
                earliest_timestamp: earliest,
            }
        })
        .collect()
}

pub fn read_log_file(path: &Path) -> Result<TransactionLog> {
    let bytes = fs::read(path)?;
    parse_log(&bytes)
}

pub fn write_log_file(path: &Path, log: &TransactionLog) -> Result<()> {
    fs::write(path, serialize_log(log))?;
    Ok(())
}

/// Serializes detections as NDJSON, one detection per line.
pub fn serialize_detections(detections: &[RaceDetection]) -> Vec<u8> {
    let mut out = Vec::new();
    for det in detections {
        serde_json::to_writer(&mut out, det).expect("writing to a Vec cannot fail");
        out.push(b'\n');
    }
    out
}

pub fn parse_detections(bytes: &[u8]) -> Result<Vec<RaceDetection>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let mut detections = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let det: RaceDetection = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        detections.push(det);
    }
    Ok(detections)
}
