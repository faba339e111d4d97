//! Cross-module integration tests: generated corpora flowing through the
//! graph builder, both detectors, the oracle and the serializer.

use frag_core::baseline::{baseline_detect, DEFAULT_BASELINE_WINDOW};
use frag_core::detector::{detect, DetectorConfig};
use frag_core::eval::{evaluate_corpus, reports_to_csv, DetectorChoice, DEFAULT_MATCH_TOLERANCE};
use frag_core::generator::{generate_corpus, generate_log, GeneratorParams};
use frag_core::graph::build_frag;
use frag_core::io::{parse_log, serialize_log};
use frag_core::model::{Condition, Operation, RaceClass};
use frag_core::oracle::{check_instance, enumerate_all, MAX_ENUMERATION_EVENTS};

fn params(condition: Condition, n_logs: usize) -> GeneratorParams {
    GeneratorParams {
        n_logs,
        ..GeneratorParams::for_condition(condition)
    }
}

#[test]
fn generated_logs_roundtrip_byte_identically() {
    for condition in [Condition::C1, Condition::C2, Condition::C3] {
        let log = generate_log(&params(condition, 1), 0).unwrap();
        let bytes = serialize_log(&log);
        let reparsed = parse_log(&bytes).unwrap();
        assert_eq!(reparsed, log);
        assert_eq!(serialize_log(&reparsed), bytes);
    }
}

#[test]
fn resource_index_partitions_all_events() {
    let log = generate_log(&params(Condition::C2, 1), 0).unwrap();
    let frag = build_frag(&log);
    let indexed: usize = frag.by_resource.values().map(Vec::len).sum();
    assert_eq!(indexed, log.events.len());
}

#[test]
fn detector_detects_every_tav_and_most_swc_instances() {
    let log = generate_log(&params(Condition::C2, 1), 7).unwrap();
    let detections = detect(&build_frag(&log), &DetectorConfig::default());
    let detected: std::collections::BTreeSet<&str> = detections
        .iter()
        .map(|d| d.resource.as_str())
        .collect();
    for instance in &log.ground_truth {
        if instance.race_class == RaceClass::Tav {
            assert!(
                detected.contains(instance.resource_id.as_str()),
                "undetected TAV instance {}",
                instance.instance_id
            );
        }
    }
}

#[test]
fn detections_are_contained_in_oracle_enumeration() {
    for condition in [Condition::C2, Condition::C3] {
        let config = DetectorConfig {
            respect_etag: condition == Condition::C3,
            ..DetectorConfig::default()
        };
        for log_id in 0..3 {
            let log = generate_log(&params(condition, 3), log_id).unwrap();
            assert!(log.events.len() <= MAX_ENUMERATION_EVENTS);
            let frag = build_frag(&log);
            let detections = detect(&frag, &config);
            let witnesses = enumerate_all(&frag, &config).unwrap();
            for det in &detections {
                let class = det.race_class.unwrap();
                assert!(
                    witnesses
                        .iter()
                        .any(|w| w.race_class == class && w.resource == det.resource),
                    "{condition:?} log {log_id}: {class} detection on {} has no witness",
                    det.resource
                );
            }
        }
    }
}

#[test]
fn respecting_etags_only_removes_detected_resources() {
    let log = generate_log(&params(Condition::C3, 1), 3).unwrap();
    let frag = build_frag(&log);
    let with = detect(&frag, &DetectorConfig { respect_etag: true, ..DetectorConfig::default() });
    let without = detect(&frag, &DetectorConfig::default());
    let without_resources: std::collections::BTreeSet<&str> =
        without.iter().map(|d| d.resource.as_str()).collect();
    for det in &with {
        assert!(without_resources.contains(det.resource.as_str()));
    }
    assert!(with.len() <= without.len());
}

#[test]
fn baseline_ignores_protection_flags() {
    let protected = generate_log(&params(Condition::C3, 1), 11).unwrap();
    let mut stripped = protected.clone();
    for event in &mut stripped.events {
        event.etag_protected = false;
    }
    assert_eq!(
        baseline_detect(&protected, DEFAULT_BASELINE_WINDOW),
        baseline_detect(&stripped, DEFAULT_BASELINE_WINDOW)
    );
}

#[test]
fn oracle_enumeration_is_empty_on_c1() {
    let log = generate_log(&params(Condition::C1, 1), 0).unwrap();
    let witnesses = enumerate_all(&build_frag(&log), &DetectorConfig::default()).unwrap();
    assert!(witnesses.is_empty());
}

#[test]
fn single_injected_swc_yields_exactly_one_witness() {
    // A lone SWC pair and nothing else: the oracle must find exactly it.
    let line_a = r#"{"event_id":0,"process_id":"ehr-01","resource":"Patient","resource_id":"inj-000","operation":"WRITE","timestamp":1.0,"version_id":1,"is_race":true,"race_class":"SWC"}"#;
    let line_b = r#"{"event_id":1,"process_id":"lab-01","resource":"Patient","resource_id":"inj-000","operation":"WRITE","timestamp":1.1,"version_id":2,"is_race":true,"race_class":"SWC"}"#;
    let log = parse_log(format!("{line_a}\n{line_b}\n").as_bytes()).unwrap();
    let witnesses = enumerate_all(&build_frag(&log), &DetectorConfig::default()).unwrap();
    assert_eq!(witnesses.len(), 1);
    assert_eq!(witnesses[0].race_class, RaceClass::Swc);
    assert_eq!(witnesses[0].event_ids, vec![0, 1]);
}

#[test]
fn oracle_size_guard_refuses_oversized_logs() {
    let mut params = params(Condition::C2, 1);
    params.background_events = (2200, 2200);
    let log = generate_log(&params, 0).unwrap();
    let err = enumerate_all(&build_frag(&log), &DetectorConfig::default()).unwrap_err();
    assert!(matches!(err, frag_core::Error::EnumerationLimit { .. }));
}

#[test]
fn corrupted_instance_fails_its_definition() {
    let mut log = generate_log(&params(Condition::C2, 1), 1).unwrap();
    let tav = log
        .ground_truth
        .iter()
        .find(|i| i.race_class == RaceClass::Tav)
        .expect("corpus contains a TAV instance")
        .clone();
    assert!(check_instance(&log, &tav, 0.150).unwrap());

    // Push the intervening write past the dependent action.
    let act_time = log.events[tav.event_ids[2] as usize].timestamp;
    let mid_id = tav.event_ids[1];
    for event in &mut log.events {
        if event.event_id == mid_id {
            event.timestamp = act_time.add_ms(10);
        }
    }
    assert!(!check_instance(&log, &tav, 0.150).unwrap());
}

#[test]
fn csv_report_has_one_row_per_class_plus_overall() {
    let logs = generate_corpus(&params(Condition::C2, 4)).unwrap();
    let report = evaluate_corpus(
        &logs,
        &DetectorChoice::Frag(DetectorConfig::default()),
        DEFAULT_MATCH_TOLERANCE,
    )
    .unwrap();
    let csv = reports_to_csv(std::slice::from_ref(&report));
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "condition,detector,class,precision,recall,f1,tp,fp,fn");
    assert!(lines[1].starts_with("C2,frag,SWC,"));
    assert!(lines[4].starts_with("C2,frag,overall,"));
}

#[test]
fn background_write_isolation_holds_in_assembled_logs() {
    // Non-race writes never sit within the baseline window of another
    // non-race event on the same resource, so ambient traffic alone can
    // trip neither detector. Contention-cluster members (read-write-read
    // bursts) are the deliberate exception for their flanking reads, but
    // write pairs stay clean everywhere.
    let log = generate_log(&params(Condition::C2, 1), 13).unwrap();
    let background: Vec<_> = log.events.iter().filter(|e| !e.is_race).collect();
    for (i, a) in background.iter().enumerate() {
        for b in background.iter().skip(i + 1) {
            if a.resource_name() != b.resource_name() {
                continue;
            }
            if a.operation == Operation::Write && b.operation == Operation::Write {
                assert!(a.timestamp.abs_diff_ms(b.timestamp) > 200);
            }
        }
    }
}
