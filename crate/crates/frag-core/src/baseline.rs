//! Time-window baseline scanner.
//!
//! Flags any two same-resource events within the window when at least one
//! is a WRITE, ignoring ETag state entirely. Raw qualifying pairs on one
//! resource are coalesced into episodes: a maximal chain of pairs whose
//! successive start times fall within the window yields a single
//! unclassified detection, timestamped at the episode's earliest event.
//! Emitting every raw pair would only manufacture false positives, since
//! evaluation matches each ground-truth instance at most once.

use std::collections::{BTreeMap, BTreeSet};

use crate::detector::RaceDetection;
use crate::model::{ms_from_secs, Operation, Timestamp, TransactionLog};

/// Default scan window, in seconds.
pub const DEFAULT_BASELINE_WINDOW: f64 = 0.200;

/// Scans each resource's events chronologically and emits one detection per
/// qualifying episode, sorted by detection time.
pub fn baseline_detect(log: &TransactionLog, window: f64) -> Vec<RaceDetection> {
    let window_ms = ms_from_secs(window);

    let mut by_resource: BTreeMap<String, Vec<&crate::model::AccessEvent>> = BTreeMap::new();
    for event in &log.events {
        by_resource.entry(event.resource_name()).or_default().push(event);
    }

    let mut detections = Vec::new();
    for (resource, mut events) in by_resource {
        events.sort_by_key(|e| e.order_key());

        // Qualifying pairs as (start time, earlier index, later index),
        // naturally ordered by start time.
        let mut pairs: Vec<(Timestamp, usize, usize)> = Vec::new();
        for j in 1..events.len() {
            for i in (0..j).rev() {
                if events[j].timestamp.abs_diff_ms(events[i].timestamp) > window_ms {
                    break;
                }
                if events[i].operation == Operation::Write
                    || events[j].operation == Operation::Write
                {
                    pairs.push((events[i].timestamp, i, j));
                }
            }
        }
        pairs.sort_by_key(|&(t, i, j)| (t, i, j));

        let mut episode: Option<(Timestamp, Timestamp, BTreeSet<usize>)> = None;
        for (start, i, j) in pairs {
            match episode.as_mut() {
                Some((_, last, members)) if start.abs_diff_ms(*last) <= window_ms => {
                    *last = (*last).max(start);
                    members.insert(i);
                    members.insert(j);
                }
                _ => {
                    if let Some(ep) = episode.take() {
                        detections.push(episode_detection(&resource, &events, ep));
                    }
                    episode = Some((start, start, [i, j].into_iter().collect()));
                }
            }
        }
        if let Some(ep) = episode.take() {
            detections.push(episode_detection(&resource, &events, ep));
        }
    }

    detections.sort_by(|a, b| {
        (a.detection_time, &a.resource).cmp(&(b.detection_time, &b.resource))
    });
    detections
}

fn episode_detection(
    resource: &str,
    events: &[&crate::model::AccessEvent],
    (start, _, members): (Timestamp, Timestamp, BTreeSet<usize>),
) -> RaceDetection {
    let mut process_ids: BTreeSet<String> = BTreeSet::new();
    let mut event_ids: Vec<u64> = Vec::new();
    for &idx in &members {
        process_ids.insert(events[idx].process_id.clone());
        event_ids.push(events[idx].event_id);
    }
    event_ids.sort_unstable();
    RaceDetection {
        race_class: None,
        resource: resource.to_string(),
        detection_time: start,
        process_ids: process_ids.into_iter().collect(),
        event_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AccessEvent, Condition, ResourceType};

    fn event(id: u64, process: &str, op: Operation, ms: u64, version: u64) -> AccessEvent {
        AccessEvent {
            event_id: id,
            process_id: process.to_string(),
            resource_type: ResourceType::Observation,
            resource_id: "o-1".to_string(),
            operation: op,
            timestamp: Timestamp::from_ms(ms),
            version_id: version,
            is_race: false,
            race_class: None,
            race_instance_id: None,
            etag_protected: false,
        }
    }

    fn log(events: Vec<AccessEvent>) -> TransactionLog {
        let log = TransactionLog {
            log_id: 0,
            condition: Condition::C2,
            seed: 0,
            events,
            ground_truth: vec![],
        };
        log.validate().unwrap();
        log
    }

    #[test]
    fn two_writes_inside_window_yield_one_detection() {
        let l = log(vec![
            event(0, "ehr-01", Operation::Write, 1000, 1),
            event(1, "lab-01", Operation::Write, 1199, 2),
        ]);
        let dets = baseline_detect(&l, DEFAULT_BASELINE_WINDOW);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].race_class, None);
        assert_eq!(dets[0].detection_time, Timestamp::from_ms(1000));
    }

    #[test]
    fn read_read_pair_is_ignored() {
        let l = log(vec![
            event(0, "ehr-01", Operation::Read, 1000, 1),
            event(1, "lab-01", Operation::Read, 1010, 1),
        ]);
        assert!(baseline_detect(&l, DEFAULT_BASELINE_WINDOW).is_empty());
    }

    #[test]
    fn sequential_spacing_is_clean() {
        let l = log(vec![
            event(0, "ehr-01", Operation::Write, 0, 1),
            event(1, "lab-01", Operation::Read, 260, 1),
            event(2, "cds-01", Operation::Write, 520, 2),
        ]);
        assert!(baseline_detect(&l, DEFAULT_BASELINE_WINDOW).is_empty());
    }

    #[test]
    fn chained_pairs_coalesce_into_one_episode() {
        let l = log(vec![
            event(0, "ehr-01", Operation::Write, 0, 1),
            event(1, "lab-01", Operation::Read, 180, 1),
            event(2, "cds-01", Operation::Write, 360, 2),
        ]);
        let dets = baseline_detect(&l, DEFAULT_BASELINE_WINDOW);
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].detection_time, Timestamp::from_ms(0));
        assert_eq!(dets[0].event_ids, vec![0, 1, 2]);
    }

    #[test]
    fn separated_bursts_yield_separated_detections() {
        let l = log(vec![
            event(0, "ehr-01", Operation::Write, 0, 1),
            event(1, "lab-01", Operation::Read, 100, 1),
            event(2, "cds-01", Operation::Read, 500, 1),
            event(3, "ehr-01", Operation::Write, 600, 2),
        ]);
        let dets = baseline_detect(&l, DEFAULT_BASELINE_WINDOW);
        assert_eq!(dets.len(), 2);
        let window_ms = ms_from_secs(DEFAULT_BASELINE_WINDOW);
        assert!(dets[1].detection_time.abs_diff_ms(dets[0].detection_time) > window_ms);
    }

    #[test]
    fn etag_flags_do_not_change_output() {
        let mut protected = vec![
            event(0, "ehr-01", Operation::Write, 1000, 1),
            event(1, "lab-01", Operation::Write, 1150, 2),
        ];
        protected[0].etag_protected = true;
        protected[1].etag_protected = true;
        let plain = log(vec![
            event(0, "ehr-01", Operation::Write, 1000, 1),
            event(1, "lab-01", Operation::Write, 1150, 2),
        ]);
        let flagged = TransactionLog {
            log_id: 0,
            condition: Condition::C3,
            seed: 0,
            events: protected,
            ground_truth: vec![],
        };
        flagged.validate().unwrap();
        assert_eq!(
            baseline_detect(&plain, DEFAULT_BASELINE_WINDOW),
            baseline_detect(&flagged, DEFAULT_BASELINE_WINDOW)
        );
    }
}
