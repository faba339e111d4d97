//! Resource access graph construction.
//!
//! The graph is bipartite: process nodes on one side, resource nodes on the
//! other, and one directed edge per access event carrying the operation,
//! timestamp, version and protection flag. Detection passes only ever need
//! per-resource chronological scans, so instead of materialized reverse
//! edges the graph keeps a per-resource index of edges sorted by
//! `(timestamp, event_id)`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use crate::model::{AccessEvent, Operation, SyncConstraintSet, Timestamp, TransactionLog};

/// One access edge, mirroring its source event exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct AccessEdge {
    pub event_id: u64,
    pub process_id: String,
    pub resource: String,
    pub operation: Operation,
    pub timestamp: Timestamp,
    pub version_id: u64,
    pub etag_protected: bool,
}

impl From<&AccessEvent> for AccessEdge {
    fn from(event: &AccessEvent) -> AccessEdge {
        AccessEdge {
            event_id: event.event_id,
            process_id: event.process_id.clone(),
            resource: event.resource_name(),
            operation: event.operation,
            timestamp: event.timestamp,
            version_id: event.version_id,
            etag_protected: event.etag_protected,
        }
    }
}

/// The access graph: processes, resources, edges, synchronization
/// constraints, and the per-resource chronological edge index.
#[derive(Clone, Debug, Default)]
pub struct Frag {
    pub processes: BTreeSet<String>,
    pub resources: BTreeSet<String>,
    pub edges: Vec<AccessEdge>,
    pub sync: SyncConstraintSet,
    /// Resource name -> indices into `edges`, ascending `(timestamp, event_id)`.
    pub by_resource: BTreeMap<String, Vec<usize>>,
}

impl Frag {
    /// Edges touching `resource` in chronological order.
    pub fn resource_edges<'a>(&'a self, resource: &str) -> impl Iterator<Item = &'a AccessEdge> {
        self.by_resource
            .get(resource)
            .into_iter()
            .flatten()
            .map(move |&i| &self.edges[i])
    }

    /// Debug export: one edge per line as `process\tresource\top\ttimestamp`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for idxs in self.by_resource.values() {
            for &i in idxs {
                let e = &self.edges[i];
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}",
                    e.process_id, e.resource, e.operation, e.timestamp
                )?;
            }
        }
        Ok(())
    }
}

/// Builds the access graph from a log. Pure: building twice yields
/// structurally equal graphs.
pub fn build_frag(log: &TransactionLog) -> Frag {
    let mut frag = Frag {
        sync: log.sync_constraints(),
        ..Frag::default()
    };
    frag.edges = log.events.iter().map(AccessEdge::from).collect();
    frag.edges.sort_by(|a, b| {
        (a.timestamp, a.event_id).cmp(&(b.timestamp, b.event_id))
    });
    for (idx, edge) in frag.edges.iter().enumerate() {
        frag.processes.insert(edge.process_id.clone());
        frag.resources.insert(edge.resource.clone());
        frag.by_resource
            .entry(edge.resource.clone())
            .or_default()
            .push(idx);
    }
    frag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Condition, ResourceType};

    fn event(
        id: u64,
        process: &str,
        op: Operation,
        ms: u64,
        version: u64,
    ) -> AccessEvent {
        AccessEvent {
            event_id: id,
            process_id: process.to_string(),
            resource_type: ResourceType::AllergyIntolerance,
            resource_id: "a-1".to_string(),
            operation: op,
            timestamp: Timestamp::from_ms(ms),
            version_id: version,
            is_race: false,
            race_class: None,
            race_instance_id: None,
            etag_protected: false,
        }
    }

    #[test]
    fn empty_log_builds_empty_graph() {
        let log = TransactionLog {
            log_id: 0,
            condition: Condition::C1,
            seed: 0,
            events: vec![],
            ground_truth: vec![],
        };
        let frag = build_frag(&log);
        assert!(frag.processes.is_empty());
        assert!(frag.resources.is_empty());
        assert!(frag.edges.is_empty());
        assert!(frag.by_resource.is_empty());
    }

    #[test]
    fn three_system_scenario_has_three_processes_one_resource() {
        // EHR reads, the lab writes, decision support reads, all on one
        // AllergyIntolerance resource.
        let log = TransactionLog {
            log_id: 0,
            condition: Condition::C1,
            seed: 0,
            events: vec![
                event(0, "ehr-01", Operation::Read, 1000, 1),
                event(1, "lab-01", Operation::Write, 1050, 1),
                event(2, "cds-01", Operation::Read, 1100, 1),
            ],
            ground_truth: vec![],
        };
        log.validate().unwrap();
        let frag = build_frag(&log);
        assert_eq!(frag.processes.len(), 3);
        assert_eq!(frag.resources.len(), 1);
        assert_eq!(frag.edges.len(), 3);
        assert_eq!(frag.by_resource["AllergyIntolerance/a-1"].len(), 3);
    }

    #[test]
    fn edge_list_export_is_one_line_per_edge() {
        let log = TransactionLog {
            log_id: 0,
            condition: Condition::C1,
            seed: 0,
            events: vec![
                event(0, "ehr-01", Operation::Read, 1000, 1),
                event(1, "lab-01", Operation::Write, 1500, 1),
            ],
            ground_truth: vec![],
        };
        let mut out = Vec::new();
        build_frag(&log).write_edge_list(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "ehr-01\tAllergyIntolerance/a-1\tREAD\t1\nlab-01\tAllergyIntolerance/a-1\tWRITE\t1.5\n"
        );
    }

    #[test]
    fn index_is_sorted_with_event_id_tiebreak() {
        let log = TransactionLog {
            log_id: 0,
            condition: Condition::C1,
            seed: 0,
            events: vec![
                event(1, "lab-01", Operation::Write, 500, 2),
                event(0, "ehr-01", Operation::Write, 500, 1),
            ],
            ground_truth: vec![],
        };
        let frag = build_frag(&log);
        let ids: Vec<u64> = frag
            .resource_edges("AllergyIntolerance/a-1")
            .map(|e| e.event_id)
            .collect();
        assert_eq!(ids, vec![0, 1]);
    }
}
