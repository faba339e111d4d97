use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use frag_core::baseline::baseline_detect;
use frag_core::detector::{detect as frag_detect, DetectorConfig, RaceDetection};
use frag_core::error::{Error, Result};
use frag_core::eval::{evaluate_detections, reports_to_csv, EvalReport};
use frag_core::generator::{
    generate_corpus, log_file_name, CorpusManifest, GeneratorParams,
};
use frag_core::graph::build_frag;
use frag_core::io::{
    parse_detections, read_log_file, serialize_detections, write_log_file,
};
use frag_core::model::{Condition, Operation, RaceClass, TransactionLog};
use frag_core::oracle::{check_instance, enumerate_all, MAX_ENUMERATION_EVENTS};

use crate::{
    DetectArgs, DetectorArg, EvalDetectorArg, EvaluateArgs, GenerateArgs, ReproduceArgs,
    VerifyArgs,
};

const MANIFEST_FILE: &str = "manifest.json";
const DETECTIONS_SUFFIX: &str = ".detections.ndjson";

fn params_from(args: &GenerateArgs) -> GeneratorParams {
    GeneratorParams {
        condition: args.condition.to_condition(),
        base_seed: args.seed,
        n_logs: args.n_logs,
        background_events: (args.background_min, args.background_max),
        race_instances: (args.race_min, args.race_max),
        class_mix: frag_core::generator::ClassMix {
            swc: args.mix_swc,
            tav: args.mix_tav,
            cur: args.mix_cur,
        },
        swc_delta: args.swc_delta,
        read_write_ratio: args.read_write_ratio,
        hot_resource_weight: args.hot_resource_weight,
        etag_fraction: args.etag_fraction,
        n_processes: args.n_processes,
        resource_pool_per_type: args.resource_pool_per_type,
        log_duration: args.log_duration,
        c1_min_spacing: args.c1_min_spacing,
        hot_cluster_rate: args.hot_cluster_rate,
    }
}

fn write_corpus(dir: &Path, params: &GeneratorParams, logs: &[TransactionLog]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for log in logs {
        let path = dir.join(log_file_name(log.condition, log.log_id));
        write_log_file(&path, log)?;
    }
    let manifest = CorpusManifest::for_params(params);
    fs::write(dir.join(MANIFEST_FILE), manifest.to_json())?;
    Ok(())
}

fn corpus_summary(logs: &[TransactionLog]) -> String {
    let mut events = 0usize;
    let mut race_events = 0usize;
    let mut etag_writes = 0usize;
    let mut per_class: BTreeMap<RaceClass, usize> = BTreeMap::new();
    for log in logs {
        events += log.events.len();
        race_events += log.events.iter().filter(|e| e.is_race).count();
        etag_writes += log
            .events
            .iter()
            .filter(|e| e.etag_protected && e.operation == Operation::Write)
            .count();
        for inst in &log.ground_truth {
            *per_class.entry(inst.race_class).or_insert(0) += 1;
        }
    }
    let instances: usize = per_class.values().sum();
    let class_counts = RaceClass::ALL
        .iter()
        .map(|c| format!("{c} {}", per_class.get(c).copied().unwrap_or(0)))
        .collect::<Vec<_>>()
        .join(", ");
    format!(
        "{} logs, {} events ({} race events), {} instances ({}), {} etag-protected writes",
        logs.len(),
        events,
        race_events,
        instances,
        class_counts,
        etag_writes
    )
}

pub fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let params = params_from(&args);
    params.validate()?;
    let logs = generate_corpus(&params)?;
    write_corpus(&args.out, &params, &logs)?;
    println!(
        "wrote corpus to {} (condition {}, base seed {})",
        args.out.display(),
        params.condition,
        params.base_seed
    );
    println!("{}", corpus_summary(&logs));
    Ok(ExitCode::SUCCESS)
}

/// Log files of a corpus directory, sorted by name.
fn list_log_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if name.ends_with(".ndjson") && !name.ends_with(DETECTIONS_SUFFIX) {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Usage(format!(
            "no .ndjson log files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

fn detections_name(log_path: &Path) -> String {
    let stem = log_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("log");
    format!("{stem}{DETECTIONS_SUFFIX}")
}

fn run_detector(
    log: &TransactionLog,
    detector: DetectorArg,
    config: &DetectorConfig,
    window: f64,
) -> Vec<RaceDetection> {
    match detector {
        DetectorArg::Frag => frag_detect(&build_frag(log), config),
        DetectorArg::Baseline => baseline_detect(log, window),
    }
}

fn detection_counts(detections: &[RaceDetection]) -> String {
    let mut per_class: BTreeMap<&str, usize> = BTreeMap::new();
    for det in detections {
        let key = det.race_class.map(|c| c.name()).unwrap_or("unclassified");
        *per_class.entry(key).or_insert(0) += 1;
    }
    let parts: Vec<String> = per_class
        .iter()
        .map(|(k, v)| format!("{k} {v}"))
        .collect();
    if parts.is_empty() {
        "none".to_string()
    } else {
        parts.join(", ")
    }
}

pub fn detect(args: DetectArgs) -> Result<ExitCode> {
    let config = DetectorConfig {
        delta: args.delta,
        delta_tav: args.delta_tav,
        cur_lookback: args.cur_lookback,
        cur_lookahead: args.cur_lookahead,
        respect_etag: args.respect_etag,
    };
    if matches!(args.detector, DetectorArg::Frag) {
        config.validate()?;
    }

    let mut all: Vec<RaceDetection> = Vec::new();
    if args.r#in.is_dir() {
        fs::create_dir_all(&args.out)?;
        for path in list_log_files(&args.r#in)? {
            let log = read_log_file(&path)?;
            let detections = run_detector(&log, args.detector, &config, args.window);
            fs::write(
                args.out.join(detections_name(&path)),
                serialize_detections(&detections),
            )?;
            all.extend(detections);
        }
    } else if args.r#in.is_file() {
        let log = read_log_file(&args.r#in)?;
        let detections = run_detector(&log, args.detector, &config, args.window);
        if let Some(parent) = args.out.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(&args.out, serialize_detections(&detections))?;
        all = detections;
    } else {
        return Err(Error::Usage(format!(
            "input {} does not exist",
            args.r#in.display()
        )));
    }

    println!("{} detections ({})", all.len(), detection_counts(&all));
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let log_files = list_log_files(&args.logs)?;
    let mut logs = Vec::with_capacity(log_files.len());
    let mut detections = Vec::with_capacity(log_files.len());
    for path in &log_files {
        let det_path = args.detections.join(detections_name(path));
        if !det_path.is_file() {
            return Err(Error::Usage(format!(
                "no detections for {} (expected {})",
                path.display(),
                det_path.display()
            )));
        }
        logs.push(read_log_file(path)?);
        detections.push(parse_detections(&fs::read(det_path)?)?);
    }

    let (name, class_strict) = match args.detector {
        EvalDetectorArg::Frag => ("frag", true),
        EvalDetectorArg::Baseline => ("baseline", false),
        EvalDetectorArg::Auto => {
            let classified = detections
                .iter()
                .flatten()
                .any(|d| d.race_class.is_some());
            let unclassified = detections
                .iter()
                .flatten()
                .any(|d| d.race_class.is_none());
            match (classified, unclassified) {
                (_, false) => ("frag", true),
                (false, true) => ("baseline", false),
                (true, true) => {
                    return Err(Error::Usage(
                        "mixed classified and unclassified detections; pass --detector".into(),
                    ))
                }
            }
        }
    };

    let report = evaluate_detections(&logs, &detections, name, class_strict, args.tolerance)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&args.out, report.to_json())?;
    if let Some(csv_path) = &args.csv {
        fs::write(csv_path, reports_to_csv(std::slice::from_ref(&report)))?;
    }
    print_reports(std::slice::from_ref(&report));
    Ok(ExitCode::SUCCESS)
}

pub fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut per_class_pass: BTreeMap<RaceClass, u64> = BTreeMap::new();
    let mut per_class_total: BTreeMap<RaceClass, u64> = BTreeMap::new();
    let mut failures = 0u64;
    let mut containment_checked = 0u64;
    let mut containment_skipped = 0u64;

    for path in list_log_files(&args.r#in)? {
        let log = read_log_file(&path)?;
        for instance in &log.ground_truth {
            *per_class_total.entry(instance.race_class).or_insert(0) += 1;
            if check_instance(&log, instance, args.delta)? {
                *per_class_pass.entry(instance.race_class).or_insert(0) += 1;
            } else {
                failures += 1;
                println!(
                    "FAIL {}: instance {} ({}) on {} violates its definition",
                    path.display(),
                    instance.instance_id,
                    instance.race_class,
                    instance.resource_id
                );
            }
        }

        if !args.no_containment {
            if log.events.len() > MAX_ENUMERATION_EVENTS {
                containment_skipped += 1;
                eprintln!(
                    "warning: {} has {} events, skipping containment (limit {})",
                    path.display(),
                    log.events.len(),
                    MAX_ENUMERATION_EVENTS
                );
                continue;
            }
            containment_checked += 1;
            let config = DetectorConfig {
                respect_etag: log.condition == Condition::C3,
                ..DetectorConfig::default()
            };
            let frag = build_frag(&log);
            let witnesses = enumerate_all(&frag, &config)?;
            for det in frag_detect(&frag, &config) {
                let class = det.race_class.expect("graph detections carry a class");
                let witnessed = witnesses
                    .iter()
                    .any(|w| w.race_class == class && w.resource == det.resource);
                if !witnessed {
                    failures += 1;
                    println!(
                        "FAIL {}: {} detection on {} has no witness in the exhaustive enumeration",
                        path.display(),
                        class,
                        det.resource
                    );
                }
            }
        }
    }

    for class in RaceClass::ALL {
        let total = per_class_total.get(&class).copied().unwrap_or(0);
        let pass = per_class_pass.get(&class).copied().unwrap_or(0);
        println!("{class}: {pass}/{total} instances satisfy the definition");
    }
    if !args.no_containment {
        println!(
            "containment: {containment_checked} logs cross-checked, {containment_skipped} skipped (size guard)"
        );
    }
    if failures > 0 {
        println!("verification failed: {failures} violations");
        return Ok(ExitCode::from(2));
    }
    println!("verification passed");
    Ok(ExitCode::SUCCESS)
}

fn print_reports(reports: &[EvalReport]) {
    println!(
        "{:<10} {:<9} {:<8} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7}",
        "condition", "detector", "class", "P", "R", "F1", "tp", "fp", "fn"
    );
    for report in reports {
        let mut rows: Vec<(String, frag_core::eval::ClassMetrics)> = RaceClass::ALL
            .iter()
            .map(|c| (c.name().to_string(), report.per_class[c]))
            .collect();
        rows.push(("overall".to_string(), report.overall));
        for (class, m) in rows {
            println!(
                "{:<10} {:<9} {:<8} {:>9.4} {:>9.4} {:>9.4} {:>7} {:>7} {:>7}",
                report.condition.to_string(),
                report.detector,
                class,
                m.precision,
                m.recall,
                m.f1,
                m.true_positives,
                m.false_positives,
                m.false_negatives
            );
        }
    }
}

pub fn reproduce(args: ReproduceArgs) -> Result<ExitCode> {
    fs::create_dir_all(&args.out)?;
    let mut reports: Vec<EvalReport> = Vec::new();

    for condition in [Condition::C1, Condition::C2, Condition::C3] {
        let params = GeneratorParams {
            n_logs: args.n_logs,
            base_seed: args.seed,
            ..GeneratorParams::for_condition(condition)
        };
        let logs = generate_corpus(&params)?;
        let cond_dir = args.out.join(condition.token());
        write_corpus(&cond_dir.join("logs"), &params, &logs)?;
        println!("[{condition}] {}", corpus_summary(&logs));

        let frag_config = DetectorConfig {
            respect_etag: condition == Condition::C3,
            ..DetectorConfig::default()
        };
        for (detector, strict) in [(DetectorArg::Frag, true), (DetectorArg::Baseline, false)] {
            let name = match detector {
                DetectorArg::Frag => "frag",
                DetectorArg::Baseline => "baseline",
            };
            let det_dir = cond_dir.join(format!("detections-{name}"));
            fs::create_dir_all(&det_dir)?;
            let mut per_log: Vec<Vec<RaceDetection>> = Vec::with_capacity(logs.len());
            for log in &logs {
                let detections = run_detector(
                    log,
                    detector,
                    &frag_config,
                    frag_core::baseline::DEFAULT_BASELINE_WINDOW,
                );
                let file = det_dir.join(format!(
                    "{}_{:04}{DETECTIONS_SUFFIX}",
                    condition.token(),
                    log.log_id
                ));
                fs::write(file, serialize_detections(&detections))?;
                per_log.push(detections);
            }
            let report = evaluate_detections(
                &logs,
                &per_log,
                name,
                strict,
                frag_core::eval::DEFAULT_MATCH_TOLERANCE,
            )?;
            reports.push(report);
        }
    }

    let json = serde_json::to_string_pretty(&reports)
        .map_err(|e| Error::Usage(format!("report serialization: {e}")))?;
    fs::write(args.out.join("report.json"), json)?;
    fs::write(args.out.join("report.csv"), reports_to_csv(&reports))?;
    println!();
    print_reports(&reports);
    println!();
    println!("wrote {}/report.json and report.csv", args.out.display());
    Ok(ExitCode::SUCCESS)
}
