//! Detection-to-ground-truth matching and precision/recall/F1 reporting.
//!
//! Matching is greedy and chronological: each detection, in detection-time
//! order, is matched to the earliest still-unmatched instance on the same
//! resource whose earliest event lies within the tolerance (and, for the
//! class-aware detector, whose class agrees). Each instance matches at most
//! once; leftover detections are false positives and leftover instances
//! false negatives. Corpus metrics are micro-averaged: counts are summed
//! across logs and metrics computed from the sums.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::baseline_detect;
use crate::detector::{detect, DetectorConfig, RaceDetection};
use crate::error::{Error, Result};
use crate::graph::build_frag;
use crate::model::{ms_from_secs, Condition, GroundTruthInstance, RaceClass, TransactionLog};

/// Detection time must fall within this many seconds of the instance's
/// earliest event to count as a true positive.
pub const DEFAULT_MATCH_TOLERANCE: f64 = 0.050;

/// Raw matching outcome for one log (or summed over a corpus).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatchCounts {
    pub tp_by_class: BTreeMap<RaceClass, u64>,
    pub fn_by_class: BTreeMap<RaceClass, u64>,
    pub fp_by_class: BTreeMap<RaceClass, u64>,
    /// False positives from class-blind detections (baseline), counted in
    /// the overall row only.
    pub fp_unclassified: u64,
}

impl MatchCounts {
    pub fn merge(&mut self, other: &MatchCounts) {
        for (k, v) in &other.tp_by_class {
            *self.tp_by_class.entry(*k).or_insert(0) += v;
        }
        for (k, v) in &other.fn_by_class {
            *self.fn_by_class.entry(*k).or_insert(0) += v;
        }
        for (k, v) in &other.fp_by_class {
            *self.fp_by_class.entry(*k).or_insert(0) += v;
        }
        self.fp_unclassified += other.fp_unclassified;
    }
}

/// Greedy chronological matching of detections against instances.
/// `class_strict` is set for the class-aware detector and unset for the
/// baseline; baseline matches inherit the instance's class.
pub fn match_detections(
    detections: &[RaceDetection],
    instances: &[GroundTruthInstance],
    tolerance: f64,
    class_strict: bool,
) -> MatchCounts {
    let tolerance_ms = ms_from_secs(tolerance);
    let mut counts = MatchCounts::default();

    let mut det_order: Vec<usize> = (0..detections.len()).collect();
    det_order.sort_by_key(|&i| (detections[i].detection_time, &detections[i].resource));

    let mut inst_order: Vec<usize> = (0..instances.len()).collect();
    inst_order.sort_by_key(|&i| (instances[i].earliest_timestamp, instances[i].instance_id));
    let mut matched = vec![false; instances.len()];

    for &di in &det_order {
        let det = &detections[di];
        let hit = inst_order.iter().copied().find(|&ii| {
            let inst = &instances[ii];
            !matched[ii]
                && inst.resource_id == det.resource
                && det.detection_time.abs_diff_ms(inst.earliest_timestamp) <= tolerance_ms
                && (!class_strict || det.race_class == Some(inst.race_class))
        });
        match hit {
            Some(ii) => {
                matched[ii] = true;
                *counts
                    .tp_by_class
                    .entry(instances[ii].race_class)
                    .or_insert(0) += 1;
            }
            None => match det.race_class {
                Some(class) => *counts.fp_by_class.entry(class).or_insert(0) += 1,
                None => counts.fp_unclassified += 1,
            },
        }
    }
    for (ii, inst) in instances.iter().enumerate() {
        if !matched[ii] {
            *counts.fn_by_class.entry(inst.race_class).or_insert(0) += 1;
        }
    }
    counts
}

/// Counts plus derived metrics for one class row (or the overall row).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    #[serde(rename = "tp")]
    pub true_positives: u64,
    #[serde(rename = "fp")]
    pub false_positives: u64,
    #[serde(rename = "fn")]
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassMetrics {
    /// Division conventions: 0/0 is 1.0 only when there are neither
    /// detections nor instances (the vacuous case), otherwise 0.0; F1 is 0
    /// when precision and recall are both 0.
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> ClassMetrics {
        let vacuous_ok = |num: u64, den: u64| -> f64 {
            if den == 0 {
                if tp + fp == 0 && tp + fn_ == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = vacuous_ok(tp, tp + fp);
        let recall = vacuous_ok(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// Per-class and overall scores for one detector over one corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector: String,
    pub condition: Condition,
    pub n_logs: usize,
    pub per_class: BTreeMap<RaceClass, ClassMetrics>,
    pub overall: ClassMetrics,
}

impl EvalReport {
    pub fn from_counts(
        counts: &MatchCounts,
        detector: &str,
        condition: Condition,
        n_logs: usize,
    ) -> EvalReport {
        let mut per_class = BTreeMap::new();
        let mut tp_sum = 0;
        let mut fp_sum = 0;
        let mut fn_sum = 0;
        for class in RaceClass::ALL {
            let tp = counts.tp_by_class.get(&class).copied().unwrap_or(0);
            let fp = counts.fp_by_class.get(&class).copied().unwrap_or(0);
            let fn_ = counts.fn_by_class.get(&class).copied().unwrap_or(0);
            tp_sum += tp;
            fp_sum += fp;
            fn_sum += fn_;
            per_class.insert(class, ClassMetrics::from_counts(tp, fp, fn_));
        }
        let overall =
            ClassMetrics::from_counts(tp_sum, fp_sum + counts.fp_unclassified, fn_sum);
        EvalReport {
            detector: detector.to_string(),
            condition,
            n_logs,
            per_class,
            overall,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Which detector to run over a corpus.
#[derive(Clone, Debug)]
pub enum DetectorChoice {
    Frag(DetectorConfig),
    Baseline { window: f64 },
}

impl DetectorChoice {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorChoice::Frag(_) => "frag",
            DetectorChoice::Baseline { .. } => "baseline",
        }
    }

    /// The class-aware detector is matched class-strictly; the baseline is
    /// matched class-agnostically.
    pub fn class_strict(&self) -> bool {
        matches!(self, DetectorChoice::Frag(_))
    }

    pub fn run(&self, log: &TransactionLog) -> Vec<RaceDetection> {
        match self {
            DetectorChoice::Frag(config) => detect(&build_frag(log), config),
            DetectorChoice::Baseline { window } => baseline_detect(log, *window),
        }
    }
}

fn single_condition(logs: &[TransactionLog]) -> Result<Condition> {
    let first = logs
        .first()
        .ok_or_else(|| Error::Usage("cannot evaluate an empty corpus".into()))?;
    for log in logs {
        if log.condition != first.condition {
            return Err(Error::Usage(format!(
                "mixed conditions in corpus: {} and {}",
                first.condition, log.condition
            )));
        }
    }
    Ok(first.condition)
}

/// Runs a detector over every log, matches per log, and micro-averages.
pub fn evaluate_corpus(
    logs: &[TransactionLog],
    choice: &DetectorChoice,
    tolerance: f64,
) -> Result<EvalReport> {
    let condition = single_condition(logs)?;
    let mut counts = MatchCounts::default();
    for log in logs {
        let detections = choice.run(log);
        counts.merge(&match_detections(
            &detections,
            &log.ground_truth,
            tolerance,
            choice.class_strict(),
        ));
    }
    Ok(EvalReport::from_counts(
        &counts,
        choice.name(),
        condition,
        logs.len(),
    ))
}

/// Scores pre-computed detections (one list per log, same order as `logs`).
pub fn evaluate_detections(
    logs: &[TransactionLog],
    detections: &[Vec<RaceDetection>],
    detector: &str,
    class_strict: bool,
    tolerance: f64,
) -> Result<EvalReport> {
    if logs.len() != detections.len() {
        return Err(Error::Usage(format!(
            "{} logs but {} detection lists",
            logs.len(),
            detections.len()
        )));
    }
    let condition = single_condition(logs)?;
    let mut counts = MatchCounts::default();
    for (log, dets) in logs.iter().zip(detections) {
        counts.merge(&match_detections(
            dets,
            &log.ground_truth,
            tolerance,
            class_strict,
        ));
    }
    Ok(EvalReport::from_counts(&counts, detector, condition, logs.len()))
}

/// Flat CSV with one row per class per report plus an overall row,
/// shaped like the per-condition results tables.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("condition,detector,class,precision,recall,f1,tp,fp,fn\n");
    for report in reports {
        for class in RaceClass::ALL {
            let m = report.per_class[&class];
            push_row(&mut out, report, class.name(), &m);
        }
        let overall = report.overall;
        push_row(&mut out, report, "overall", &overall);
    }
    out
}

fn push_row(out: &mut String, report: &EvalReport, class: &str, m: &ClassMetrics) {
    use std::fmt::Write;
    writeln!(
        out,
        "{},{},{},{:.4},{:.4},{:.4},{},{},{}",
        report.condition,
        report.detector,
        class,
        m.precision,
        m.recall,
        m.f1,
        m.true_positives,
        m.false_positives,
        m.false_negatives
    )
    .expect("writing to a String cannot fail");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timestamp;

    fn instance(id: u64, class: RaceClass, resource: &str, ms: u64) -> GroundTruthInstance {
        GroundTruthInstance {
            instance_id: id,
            race_class: class,
            resource_id: resource.to_string(),
            event_ids: vec![id * 10, id * 10 + 1],
            earliest_timestamp: Timestamp::from_ms(ms),
        }
    }

    fn detection(class: Option<RaceClass>, resource: &str, ms: u64) -> RaceDetection {
        RaceDetection {
            race_class: class,
            resource: resource.to_string(),
            detection_time: Timestamp::from_ms(ms),
            process_ids: vec!["ehr-01".into()],
            event_ids: vec![0],
        }
    }

    #[test]
    fn exact_match_is_a_true_positive() {
        let instances = [instance(0, RaceClass::Swc, "Patient/inj-000", 1000)];
        let dets = [detection(Some(RaceClass::Swc), "Patient/inj-000", 1000)];
        let c = match_detections(&dets, &instances, DEFAULT_MATCH_TOLERANCE, true);
        assert_eq!(c.tp_by_class[&RaceClass::Swc], 1);
        assert!(c.fp_by_class.is_empty());
        assert!(c.fn_by_class.is_empty());
    }

    #[test]
    fn class_mismatch_is_fp_and_leaves_instance_unmatched() {
        let instances = [instance(0, RaceClass::Swc, "Patient/inj-000", 1000)];
        let dets = [detection(Some(RaceClass::Tav), "Patient/inj-000", 1000)];
        let c = match_detections(&dets, &instances, DEFAULT_MATCH_TOLERANCE, true);
        assert_eq!(c.fp_by_class[&RaceClass::Tav], 1);
        assert_eq!(c.fn_by_class[&RaceClass::Swc], 1);
        assert!(c.tp_by_class.is_empty());
    }

    #[test]
    fn instances_match_at_most_once() {
        let instances = [instance(0, RaceClass::Swc, "Patient/inj-000", 1000)];
        let dets = [
            detection(Some(RaceClass::Swc), "Patient/inj-000", 1000),
            detection(Some(RaceClass::Swc), "Patient/inj-000", 1020),
        ];
        let c = match_detections(&dets, &instances, DEFAULT_MATCH_TOLERANCE, true);
        assert_eq!(c.tp_by_class[&RaceClass::Swc], 1);
        assert_eq!(c.fp_by_class[&RaceClass::Swc], 1);
    }

    #[test]
    fn tolerance_is_inclusive_at_fifty_ms() {
        let instances = [instance(0, RaceClass::Cur, "Patient/inj-000", 1000)];
        let hit = [detection(Some(RaceClass::Cur), "Patient/inj-000", 1050)];
        let miss = [detection(Some(RaceClass::Cur), "Patient/inj-000", 1051)];
        let c_hit = match_detections(&hit, &instances, DEFAULT_MATCH_TOLERANCE, true);
        assert_eq!(c_hit.tp_by_class[&RaceClass::Cur], 1);
        let c_miss = match_detections(&miss, &instances, DEFAULT_MATCH_TOLERANCE, true);
        assert_eq!(c_miss.fp_by_class[&RaceClass::Cur], 1);
        assert_eq!(c_miss.fn_by_class[&RaceClass::Cur], 1);
    }

    #[test]
    fn baseline_matches_class_agnostically_and_inherits_class() {
        let instances = [instance(0, RaceClass::Tav, "Patient/inj-000", 1000)];
        let dets = [detection(None, "Patient/inj-000", 1000)];
        let c = match_detections(&dets, &instances, DEFAULT_MATCH_TOLERANCE, false);
        assert_eq!(c.tp_by_class[&RaceClass::Tav], 1);
        assert_eq!(c.fp_unclassified, 0);
    }

    #[test]
    fn relaxing_class_strict_never_loses_true_positives() {
        let instances = [
            instance(0, RaceClass::Swc, "Patient/inj-000", 1000),
            instance(1, RaceClass::Tav, "Patient/inj-001", 2000),
        ];
        let dets = [
            detection(Some(RaceClass::Tav), "Patient/inj-000", 1000),
            detection(Some(RaceClass::Tav), "Patient/inj-001", 2000),
        ];
        let strict = match_detections(&dets, &instances, DEFAULT_MATCH_TOLERANCE, true);
        let lax = match_detections(&dets, &instances, DEFAULT_MATCH_TOLERANCE, false);
        let strict_tp: u64 = strict.tp_by_class.values().sum();
        let lax_tp: u64 = lax.tp_by_class.values().sum();
        assert!(lax_tp >= strict_tp);
        assert_eq!(lax_tp, 2);
        assert_eq!(strict_tp, 1);
    }

    #[test]
    fn metrics_follow_division_conventions() {
        let vacuous = ClassMetrics::from_counts(0, 0, 0);
        assert_eq!(vacuous.precision, 1.0);
        assert_eq!(vacuous.recall, 1.0);
        assert_eq!(vacuous.f1, 1.0);

        let missed_everything = ClassMetrics::from_counts(0, 0, 5);
        assert_eq!(missed_everything.precision, 0.0);
        assert_eq!(missed_everything.recall, 0.0);
        assert_eq!(missed_everything.f1, 0.0);

        let only_noise = ClassMetrics::from_counts(0, 5, 0);
        assert_eq!(only_noise.precision, 0.0);
        assert_eq!(only_noise.recall, 0.0);
    }

    #[test]
    fn overall_counts_are_class_sums_plus_agnostic_fps() {
        let mut counts = MatchCounts::default();
        counts.tp_by_class.insert(RaceClass::Swc, 3);
        counts.tp_by_class.insert(RaceClass::Cur, 2);
        counts.fn_by_class.insert(RaceClass::Tav, 1);
        counts.fp_by_class.insert(RaceClass::Cur, 4);
        counts.fp_unclassified = 5;
        let report = EvalReport::from_counts(&counts, "x", Condition::C2, 1);
        assert_eq!(report.overall.true_positives, 5);
        assert_eq!(report.overall.false_negatives, 1);
        assert_eq!(report.overall.false_positives, 9);
    }

    #[test]
    fn mixed_conditions_are_rejected() {
        let mk = |condition| TransactionLog {
            log_id: 0,
            condition,
            seed: 0,
            events: vec![],
            ground_truth: vec![],
        };
        let logs = [mk(Condition::C2), mk(Condition::C3)];
        let choice = DetectorChoice::Baseline { window: 0.2 };
        assert!(evaluate_corpus(&logs, &choice, DEFAULT_MATCH_TOLERANCE).is_err());
    }
}
