//! Brute-force definitional checkers, used as ground-truth validators and
//! property-test oracles.
//!
//! These functions check race definitions directly on edge pairs/triples,
//! independent of the pass-based detector. Note the deliberate window gap:
//! [`is_rc`] accepts a timestamp gap up to `2 * delta` (the symmetric
//! interval-overlap form) while the SWC pass uses a strict `< delta`; the
//! detector's window is the stricter of the two, so detector output stays
//! contained in oracle output.

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::graph::{AccessEdge, Frag};
use crate::model::{ms_from_secs, Operation, RaceClass, SyncConstraintSet};

/// Size guard for exhaustive enumeration.
pub const MAX_ENUMERATION_EVENTS: usize = 2000;

fn protected(edge: &AccessEdge, sync: &SyncConstraintSet) -> bool {
    sync.is_protected(edge.event_id)
}

/// Race condition between two accesses: same resource, distinct processes,
/// at least one WRITE, neither edge protected, and overlapping
/// `[t - delta, t + delta]` intervals (equivalently a gap of at most
/// `2 * delta`, closed at the boundary).
pub fn is_rc(
    a: &AccessEdge,
    b: &AccessEdge,
    sync: &SyncConstraintSet,
    delta: f64,
) -> bool {
    a.resource == b.resource
        && a.process_id != b.process_id
        && (a.operation == Operation::Write || b.operation == Operation::Write)
        && !protected(a, sync)
        && !protected(b, sync)
        && a.timestamp.abs_diff_ms(b.timestamp) <= 2 * ms_from_secs(delta)
}

/// TOCTOU window: `read` and `act` share a process, `intervening` is a
/// WRITE to the read's resource by a different process strictly between
/// them, and the intervening write is not protected.
pub fn is_toctou_window(
    read: &AccessEdge,
    intervening: &AccessEdge,
    act: &AccessEdge,
    sync: &SyncConstraintSet,
) -> bool {
    read.operation == Operation::Read
        && read.process_id == act.process_id
        && read.resource == intervening.resource
        && read.resource == act.resource
        && intervening.operation == Operation::Write
        && intervening.process_id != read.process_id
        && read.timestamp < intervening.timestamp
        && intervening.timestamp < act.timestamp
        && !protected(intervening, sync)
}

/// Cascading update race: all three accesses share a resource, `write` is a
/// WRITE flanked by READs with strict ordering `t_r < t_w < t_a`, the stale
/// reader and the downstream reader are both distinct from the writer, and
/// the write is not protected.
pub fn is_cur(
    stale_read: &AccessEdge,
    write: &AccessEdge,
    downstream: &AccessEdge,
    sync: &SyncConstraintSet,
) -> bool {
    stale_read.resource == write.resource
        && downstream.resource == write.resource
        && stale_read.operation == Operation::Read
        && write.operation == Operation::Write
        && downstream.operation == Operation::Read
        && stale_read.timestamp < write.timestamp
        && write.timestamp < downstream.timestamp
        && downstream.process_id != write.process_id
        && stale_read.process_id != write.process_id
        && !protected(write, sync)
}

/// One pair/triple that satisfies a definitional check inside the
/// detector's windows.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleWitness {
    pub race_class: RaceClass,
    pub resource: String,
    pub event_ids: Vec<u64>,
}

/// Exhaustively enumerates every pair/triple satisfying
/// [`is_rc`]/[`is_toctou_window`]/[`is_cur`] within the detector's windows,
/// without claimed-set suppression. When `config.respect_etag` is set the
/// graph's constraint set applies; otherwise an empty set is used, matching
/// the detector's view of the log.
pub fn enumerate_all(frag: &Frag, config: &DetectorConfig) -> Result<Vec<OracleWitness>> {
    if frag.edges.len() > MAX_ENUMERATION_EVENTS {
        return Err(Error::EnumerationLimit {
            events: frag.edges.len(),
            limit: MAX_ENUMERATION_EVENTS,
        });
    }
    let sync = if config.respect_etag {
        frag.sync.clone()
    } else {
        SyncConstraintSet::empty()
    };
    let delta = config.delta_ms();
    let delta_tav = config.delta_tav_ms();
    let lookback = config.cur_lookback_ms();
    let lookahead = config.cur_lookahead_ms();

    let mut witnesses = Vec::new();
    for (resource, idxs) in &frag.by_resource {
        let edges: Vec<&AccessEdge> = idxs.iter().map(|&i| &frag.edges[i]).collect();
        let n = edges.len();

        // SWC candidates: the pass's strict window intersected with is_rc.
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (edges[i], edges[j]);
                if a.operation == Operation::Write
                    && b.operation == Operation::Write
                    && a.timestamp.abs_diff_ms(b.timestamp) < delta
                    && is_rc(a, b, &sync, config.delta)
                {
                    witnesses.push(OracleWitness {
                        race_class: RaceClass::Swc,
                        resource: resource.clone(),
                        event_ids: vec![a.event_id, b.event_id],
                    });
                }
            }
        }

        // TAV candidates.
        for read in &edges {
            for act in &edges {
                if act.timestamp.ms() > read.timestamp.ms() + delta_tav
                    || act.operation != Operation::Write
                    || act.process_id != read.process_id
                {
                    continue;
                }
                for mid in &edges {
                    if is_toctou_window(read, mid, act, &sync) {
                        witnesses.push(OracleWitness {
                            race_class: RaceClass::Tav,
                            resource: resource.clone(),
                            event_ids: vec![read.event_id, mid.event_id, act.event_id],
                        });
                    }
                }
            }
        }

        // CUR candidates.
        for write in &edges {
            if write.operation != Operation::Write {
                continue;
            }
            for stale in &edges {
                if stale.timestamp >= write.timestamp
                    || write.timestamp.abs_diff_ms(stale.timestamp) > lookback
                {
                    continue;
                }
                for downstream in &edges {
                    if downstream.timestamp.ms() > write.timestamp.ms() + lookahead {
                        continue;
                    }
                    if is_cur(stale, write, downstream, &sync) {
                        witnesses.push(OracleWitness {
                            race_class: RaceClass::Cur,
                            resource: resource.clone(),
                            event_ids: vec![
                                stale.event_id,
                                write.event_id,
                                downstream.event_id,
                            ],
                        });
                    }
                }
            }
        }
    }
    Ok(witnesses)
}

/// Checks one ground-truth instance against its race definition.
///
/// Definitional checks run under an empty constraint set: the definitions'
/// premises assume no synchronization, and protection flags added after
/// injection must not retroactively falsify the injected structure. Event
/// ids must resolve and arrive in timestamp order per class shape.
pub fn check_instance(
    log: &crate::model::TransactionLog,
    instance: &crate::model::GroundTruthInstance,
    delta: f64,
) -> Result<bool> {
    let by_id = log.events_by_id();
    let mut edges: Vec<AccessEdge> = Vec::with_capacity(instance.event_ids.len());
    for &eid in &instance.event_ids {
        let event = by_id.get(&eid).ok_or_else(|| {
            Error::Integrity(format!(
                "ground-truth instance {} references unknown event {}",
                instance.instance_id, eid
            ))
        })?;
        edges.push(AccessEdge::from(*event));
    }
    edges.sort_by_key(|e| (e.timestamp, e.event_id));
    let sync = SyncConstraintSet::empty();
    let ok = match (instance.race_class, edges.as_slice()) {
        (RaceClass::Swc, [a, b]) => is_rc(a, b, &sync, delta),
        (RaceClass::Tav, [read, mid, act]) => is_toctou_window(read, mid, act, &sync),
        (RaceClass::Cur, [stale, write, downstream]) => {
            is_cur(stale, write, downstream, &sync)
        }
        _ => false,
    };
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timestamp;

    fn edge(id: u64, process: &str, op: Operation, ms: u64) -> AccessEdge {
        AccessEdge {
            event_id: id,
            process_id: process.to_string(),
            resource: "Patient/p-1".to_string(),
            operation: op,
            timestamp: Timestamp::from_ms(ms),
            version_id: 1,
            etag_protected: false,
        }
    }

    #[test]
    fn rc_holds_for_concurrent_writes_at_gap_zero() {
        let a = edge(0, "ehr-01", Operation::Write, 1000);
        let b = edge(1, "lab-01", Operation::Write, 1000);
        assert!(is_rc(&a, &b, &SyncConstraintSet::empty(), 0.150));
    }

    #[test]
    fn rc_rejects_two_reads() {
        let a = edge(0, "ehr-01", Operation::Read, 1000);
        let b = edge(1, "lab-01", Operation::Read, 1000);
        assert!(!is_rc(&a, &b, &SyncConstraintSet::empty(), 0.150));
    }

    #[test]
    fn rc_holds_at_exactly_twice_delta() {
        // Interval overlap [t-d, t+d] meets at a single point.
        let a = edge(0, "ehr-01", Operation::Write, 1000);
        let b = edge(1, "lab-01", Operation::Write, 1300);
        assert!(is_rc(&a, &b, &SyncConstraintSet::empty(), 0.150));
        let c = edge(2, "lab-01", Operation::Write, 1301);
        assert!(!is_rc(&a, &c, &SyncConstraintSet::empty(), 0.150));
    }

    #[test]
    fn rc_respects_protection() {
        let a = edge(0, "ehr-01", Operation::Write, 1000);
        let b = edge(1, "lab-01", Operation::Write, 1010);
        let sync = SyncConstraintSet {
            protected_write_event_ids: [1].into_iter().collect(),
        };
        assert!(!is_rc(&a, &b, &sync, 0.150));
    }

    #[test]
    fn toctou_rejects_same_process_intervener() {
        let read = edge(0, "ehr-01", Operation::Read, 1000);
        let mid = edge(1, "ehr-01", Operation::Write, 1040);
        let act = edge(2, "ehr-01", Operation::Write, 1150);
        assert!(!is_toctou_window(&read, &mid, &act, &SyncConstraintSet::empty()));
    }

    #[test]
    fn toctou_is_strict_at_the_read_boundary() {
        let read = edge(0, "ehr-01", Operation::Read, 1000);
        let mid = edge(1, "lab-01", Operation::Write, 1000);
        let act = edge(2, "ehr-01", Operation::Write, 1150);
        assert!(!is_toctou_window(&read, &mid, &act, &SyncConstraintSet::empty()));
        let mid_inside = edge(3, "lab-01", Operation::Write, 1001);
        assert!(is_toctou_window(&read, &mid_inside, &act, &SyncConstraintSet::empty()));
    }

    #[test]
    fn cur_requires_strict_stale_ordering() {
        let write = edge(1, "lab-01", Operation::Write, 1050);
        let downstream = edge(2, "cds-01", Operation::Read, 1100);
        let stale_equal = edge(0, "ehr-01", Operation::Read, 1050);
        assert!(!is_cur(&stale_equal, &write, &downstream, &SyncConstraintSet::empty()));
        let stale = edge(3, "ehr-01", Operation::Read, 1000);
        assert!(is_cur(&stale, &write, &downstream, &SyncConstraintSet::empty()));
    }

    #[test]
    fn cur_rejects_downstream_by_writer() {
        let stale = edge(0, "ehr-01", Operation::Read, 1000);
        let write = edge(1, "lab-01", Operation::Write, 1050);
        let downstream = edge(2, "lab-01", Operation::Read, 1100);
        assert!(!is_cur(&stale, &write, &downstream, &SyncConstraintSet::empty()));
    }
}
