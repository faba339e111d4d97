//! Three-pass race detection over the access graph.
//!
//! The passes share one claimed set: once a resource is assigned a race
//! class it is skipped by every later pass, so each resource yields at most
//! one detection. Pass order runs from the most structurally specific
//! pattern to the least:
//!
//! 1. TAV — a READ followed by a same-process WRITE with a foreign WRITE
//!    strictly in between and the resource version moving across the gap.
//! 2. SWC — two WRITEs by distinct processes closer than `delta`.
//! 3. CUR — a stale READ before a foreign WRITE with a third process
//!    reading after it; the reported chain is the depth-two path from the
//!    write to the downstream read.
//!
//! All scans proceed in `(timestamp, event_id)` order and the first
//! qualifying witness claims the resource, so detection is deterministic.
//! With `respect_etag` set, an ETag-protected write cannot serve as either
//! member of an SWC pair, as the intervening write in TAV, or as the
//! triggering write in CUR.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AccessEdge, Frag};
use crate::model::{ms_from_secs, Operation, RaceClass, Timestamp};

/// Detection windows, in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// SWC concurrency window.
    pub delta: f64,
    /// Pass 1 lookahead from a READ to the same-process dependent WRITE.
    pub delta_tav: f64,
    /// Pass 3 maximum `t_w - t_r` scanned back from a write.
    pub cur_lookback: f64,
    /// Pass 3 maximum `t_a - t_w` scanned forward from a write.
    pub cur_lookahead: f64,
    /// Honor ETag protection flags (set under C3).
    pub respect_etag: bool,
}

impl Default for DetectorConfig {
    fn default() -> DetectorConfig {
        DetectorConfig {
            delta: 0.150,
            delta_tav: 0.250,
            cur_lookback: 0.150,
            cur_lookahead: 0.100,
            respect_etag: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("delta", self.delta),
            ("delta_tav", self.delta_tav),
            ("cur_lookback", self.cur_lookback),
            ("cur_lookahead", self.cur_lookahead),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Usage(format!("{name} must be > 0, got {value}")));
            }
        }
        if self.delta_tav < 0.200 {
            return Err(Error::Usage(format!(
                "delta_tav must be >= 0.200 s to cover dependent-action offsets, got {}",
                self.delta_tav
            )));
        }
        Ok(())
    }

    pub(crate) fn delta_ms(&self) -> u64 {
        ms_from_secs(self.delta)
    }

    pub(crate) fn delta_tav_ms(&self) -> u64 {
        ms_from_secs(self.delta_tav)
    }

    pub(crate) fn cur_lookback_ms(&self) -> u64 {
        ms_from_secs(self.cur_lookback)
    }

    pub(crate) fn cur_lookahead_ms(&self) -> u64 {
        ms_from_secs(self.cur_lookahead)
    }
}

/// One detector finding. `race_class` is `None` for the class-blind
/// baseline scanner, which shares this type and its NDJSON format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaceDetection {
    pub race_class: Option<RaceClass>,
    pub resource: String,
    pub detection_time: Timestamp,
    pub process_ids: Vec<String>,
    pub event_ids: Vec<u64>,
}

/// Resources already assigned a race class in this run.
pub type ClaimedSet = BTreeSet<String>;

/// Runs all three passes over the graph, sharing one claimed set, and
/// returns detections sorted by detection time.
pub fn detect(frag: &Frag, config: &DetectorConfig) -> Vec<RaceDetection> {
    let mut claimed = ClaimedSet::new();
    let mut detections = pass_tav(frag, config, &mut claimed);
    detections.extend(pass_swc(frag, config, &mut claimed));
    detections.extend(pass_cur(frag, config, &mut claimed));
    detections.sort_by(|a, b| {
        (a.detection_time, &a.resource).cmp(&(b.detection_time, &b.resource))
    });
    detections
}

fn suppressed(edge: &AccessEdge, config: &DetectorConfig, frag: &Frag) -> bool {
    config.respect_etag && frag.sync.is_protected(edge.event_id)
}

/// Pass 1: TAV. For each unclaimed resource, find a READ at `t1` and a
/// same-process WRITE at `t2` with `t1 < t2 <= t1 + delta_tav` such that a
/// foreign, unsuppressed WRITE lands strictly inside `(t1, t2)` and the
/// resource version moved since the read.
pub fn pass_tav(frag: &Frag, config: &DetectorConfig, claimed: &mut ClaimedSet) -> Vec<RaceDetection> {
    let delta_tav = config.delta_tav_ms();
    let mut detections = Vec::new();

    'resource: for (resource, idxs) in &frag.by_resource {
        if claimed.contains(resource) {
            continue;
        }
        let edges: Vec<&AccessEdge> = idxs.iter().map(|&i| &frag.edges[i]).collect();
        for (ri, read) in edges.iter().enumerate() {
            if read.operation != Operation::Read {
                continue;
            }
            let t1 = read.timestamp;
            for act in edges[ri + 1..].iter() {
                if act.timestamp.ms() > t1.ms() + delta_tav {
                    break;
                }
                if act.operation != Operation::Write
                    || act.process_id != read.process_id
                    || act.timestamp <= t1
                {
                    continue;
                }
                let t2 = act.timestamp;
                // Earliest qualifying intervening write wins.
                let intervening = edges.iter().find(|mid| {
                    mid.operation == Operation::Write
                        && mid.timestamp > t1
                        && mid.timestamp < t2
                        && mid.process_id != read.process_id
                        && mid.version_id >= read.version_id
                        && !suppressed(mid, config, frag)
                });
                if let Some(mid) = intervening {
                    detections.push(RaceDetection {
                        race_class: Some(RaceClass::Tav),
                        resource: resource.clone(),
                        detection_time: t1,
                        process_ids: vec![read.process_id.clone(), mid.process_id.clone()],
                        event_ids: vec![read.event_id, mid.event_id, act.event_id],
                    });
                    claimed.insert(resource.clone());
                    continue 'resource;
                }
            }
        }
    }
    detections
}

/// Pass 2: SWC. For each unclaimed resource, scan WRITE pairs from distinct
/// processes; a gap strictly below `delta` (gap zero included) with neither
/// write suppressed claims the resource.
pub fn pass_swc(frag: &Frag, config: &DetectorConfig, claimed: &mut ClaimedSet) -> Vec<RaceDetection> {
    let delta = config.delta_ms();
    let mut detections = Vec::new();

    'resource: for (resource, idxs) in &frag.by_resource {
        if claimed.contains(resource) {
            continue;
        }
        let writes: Vec<&AccessEdge> = idxs
            .iter()
            .map(|&i| &frag.edges[i])
            .filter(|e| e.operation == Operation::Write)
            .collect();
        for (i, first) in writes.iter().enumerate() {
            if suppressed(first, config, frag) {
                continue;
            }
            for second in writes[i + 1..].iter() {
                let gap = second.timestamp.abs_diff_ms(first.timestamp);
                if gap >= delta {
                    break;
                }
                if second.process_id == first.process_id || suppressed(second, config, frag) {
                    continue;
                }
                detections.push(RaceDetection {
                    race_class: Some(RaceClass::Swc),
                    resource: resource.clone(),
                    detection_time: first.timestamp,
                    process_ids: vec![first.process_id.clone(), second.process_id.clone()],
                    event_ids: vec![first.event_id, second.event_id],
                });
                claimed.insert(resource.clone());
                continue 'resource;
            }
        }
    }
    detections
}

/// Pass 3: CUR. For each unclaimed resource, take each unsuppressed WRITE
/// at `t_w`, a foreign READ within `cur_lookback` before it, and a READ by
/// a process other than the writer within `cur_lookahead` after it. The
/// reported chain is the depth-two path write -> downstream read, so the
/// detection is timestamped at the write.
pub fn pass_cur(frag: &Frag, config: &DetectorConfig, claimed: &mut ClaimedSet) -> Vec<RaceDetection> {
    let lookback = config.cur_lookback_ms();
    let lookahead = config.cur_lookahead_ms();
    let mut detections = Vec::new();

    'resource: for (resource, idxs) in &frag.by_resource {
        if claimed.contains(resource) {
            continue;
        }
        let edges: Vec<&AccessEdge> = idxs.iter().map(|&i| &frag.edges[i]).collect();
        for (wi, write) in edges.iter().enumerate() {
            if write.operation != Operation::Write || suppressed(write, config, frag) {
                continue;
            }
            let t_w = write.timestamp;
            for stale in edges[..wi].iter() {
                if stale.operation != Operation::Read
                    || stale.timestamp >= t_w
                    || t_w.abs_diff_ms(stale.timestamp) > lookback
                    || stale.process_id == write.process_id
                {
                    continue;
                }
                for downstream in edges[wi + 1..].iter() {
                    if downstream.timestamp.ms() > t_w.ms() + lookahead {
                        break;
                    }
                    if downstream.operation != Operation::Read
                        || downstream.timestamp <= t_w
                        || downstream.process_id == write.process_id
                    {
                        continue;
                    }
                    detections.push(RaceDetection {
                        race_class: Some(RaceClass::Cur),
                        resource: resource.clone(),
                        detection_time: t_w,
                        process_ids: vec![
                            stale.process_id.clone(),
                            write.process_id.clone(),
                            downstream.process_id.clone(),
                        ],
                        event_ids: vec![write.event_id, downstream.event_id],
                    });
                    claimed.insert(resource.clone());
                    continue 'resource;
                }
            }
        }
    }
    detections
}
