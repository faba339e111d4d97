//! Property tests over generated corpora.

use std::collections::BTreeSet;

use proptest::prelude::*;

use frag_core::detector::{detect, DetectorConfig};
use frag_core::generator::{generate_log, GeneratorParams};
use frag_core::graph::build_frag;
use frag_core::io::{parse_log, serialize_log};
use frag_core::model::Condition;
use frag_core::oracle::check_instance;

fn small_params(condition: Condition, seed: u64) -> GeneratorParams {
    GeneratorParams {
        base_seed: seed,
        n_logs: 1,
        background_events: (40, 160),
        race_instances: (2, 12),
        ..GeneratorParams::for_condition(condition)
    }
}

fn any_condition() -> impl Strategy<Value = Condition> {
    prop_oneof![
        Just(Condition::C1),
        Just(Condition::C2),
        Just(Condition::C3),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn serialization_roundtrips(seed in 0u64..10_000, condition in any_condition()) {
        let log = generate_log(&small_params(condition, seed), 0).unwrap();
        let bytes = serialize_log(&log);
        let reparsed = parse_log(&bytes).unwrap();
        prop_assert_eq!(&reparsed, &log);
        prop_assert_eq!(serialize_log(&reparsed), bytes);
    }

    #[test]
    fn generated_logs_satisfy_all_invariants(seed in 0u64..10_000, condition in any_condition()) {
        let log = generate_log(&small_params(condition, seed), 0).unwrap();
        prop_assert!(log.validate().is_ok());
    }

    #[test]
    fn injected_instances_satisfy_their_definitions(seed in 0u64..10_000) {
        let params = small_params(Condition::C2, seed);
        let log = generate_log(&params, 0).unwrap();
        for instance in &log.ground_truth {
            prop_assert!(check_instance(&log, instance, params.swc_delta).unwrap());
        }
    }

    #[test]
    fn detector_claims_each_resource_at_most_once(seed in 0u64..10_000, condition in any_condition()) {
        let log = generate_log(&small_params(condition, seed), 0).unwrap();
        let config = DetectorConfig {
            respect_etag: condition == Condition::C3,
            ..DetectorConfig::default()
        };
        let detections = detect(&build_frag(&log), &config);
        let mut seen = BTreeSet::new();
        for det in &detections {
            prop_assert!(seen.insert(det.resource.clone()), "resource {} detected twice", det.resource);
        }
    }

    #[test]
    fn etag_respecting_detections_shrink_the_resource_set(seed in 0u64..10_000) {
        let log = generate_log(&small_params(Condition::C3, seed), 0).unwrap();
        let frag = build_frag(&log);
        let with: BTreeSet<String> = detect(&frag, &DetectorConfig { respect_etag: true, ..DetectorConfig::default() })
            .into_iter()
            .map(|d| d.resource)
            .collect();
        let without: BTreeSet<String> = detect(&frag, &DetectorConfig::default())
            .into_iter()
            .map(|d| d.resource)
            .collect();
        prop_assert!(with.is_subset(&without));
    }

    #[test]
    fn baseline_episodes_on_one_resource_stay_apart(seed in 0u64..10_000, condition in any_condition()) {
        let log = generate_log(&small_params(condition, seed), 0).unwrap();
        let window = frag_core::baseline::DEFAULT_BASELINE_WINDOW;
        let detections = frag_core::baseline::baseline_detect(&log, window);
        let window_ms = (window * 1000.0).round() as u64;
        for (i, a) in detections.iter().enumerate() {
            for b in detections.iter().skip(i + 1) {
                if a.resource == b.resource {
                    prop_assert!(
                        a.detection_time.abs_diff_ms(b.detection_time) > window_ms,
                        "episodes {}ms apart on {}",
                        a.detection_time.abs_diff_ms(b.detection_time),
                        a.resource
                    );
                }
            }
        }
    }

    #[test]
    fn detection_time_is_earliest_implicated_event(seed in 0u64..10_000) {
        let log = generate_log(&small_params(Condition::C2, seed), 0).unwrap();
        let by_id = log.events_by_id();
        let detections = detect(&build_frag(&log), &DetectorConfig::default());
        for det in &detections {
            let min = det
                .event_ids
                .iter()
                .map(|id| by_id[id].timestamp)
                .min()
                .unwrap();
            prop_assert_eq!(det.detection_time, min);
            prop_assert!(!det.event_ids.is_empty());
        }
    }
}
