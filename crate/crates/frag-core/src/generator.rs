//! Deterministic seeded synthesis of transaction-log corpora.
//!
//! Each log is a pure function of a seed derived by SplitMix64-mixing
//! `(base_seed, condition, log_index)`, fed to a ChaCha8 stream. All random
//! quantities are drawn as integers (milliseconds) or from raw-bit uniform
//! floats compared against fixed thresholds, so corpora are byte-identical
//! across runs and machines.
//!
//! A C2/C3 log is assembled in four phases:
//!
//! 1. Ambient background: event times are sorted uniform draws over the log
//!    duration (a Poisson arrival stream conditioned on its count), with
//!    operation, resource and process drawn per event from the configured
//!    workload distribution.
//! 2. Hot-resource contention clusters: a small number of deliberate
//!    read/write/read bursts by three distinct processes on one busy
//!    resource. These are the background patterns that trip the stale-read
//!    chain scan and the time-window baseline; their rate is the knob that
//!    tunes the CUR false-positive share and is recorded in the manifest.
//! 3. Collision sweep: every ambient write is pushed (+250 ms at a time)
//!    until no other same-resource event lies within 200 ms of it, so
//!    ambient traffic alone can never look like a race to either detector.
//!    Cluster events and injected races are left untouched.
//! 4. Race injection: SWC/TAV/CUR instances on fresh resources disjoint
//!    from the background pool.
//!
//! C1 logs are serialized instead: consecutive events are spaced at least
//! `c1_min_spacing` apart with no injections and no protection flags.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ms_from_secs, AccessEvent, Condition, GroundTruthInstance, Operation, RaceClass,
    ResourceType, Timestamp, TransactionLog,
};

/// Gap below which two same-resource events count as colliding for the
/// background sweep; one millisecond wider than the baseline window so a
/// swept log is invisible to both detectors.
const SWEEP_WINDOW_MS: u64 = 200;
/// Nudge applied to a colliding ambient write.
const SWEEP_NUDGE_MS: u64 = 250;
const SWEEP_MAX_PASSES: usize = 100;

/// Cluster intra-burst gaps, chosen to sit inside the stale-read scan
/// windows (lookback 150 ms, lookahead 100 ms).
const CLUSTER_GAP_MS: (u64, u64) = (20, 80);

/// Time reserved at the end of a log so injected spans fit.
const INJECTION_TAIL_MS: u64 = 400;

/// Race-class proportions for injected instances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub swc: f64,
    pub tav: f64,
    pub cur: f64,
}

/// Everything that shapes a generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub condition: Condition,
    pub base_seed: u64,
    pub n_logs: usize,
    /// Inclusive range of background (non-race) events per log.
    pub background_events: (u64, u64),
    /// Inclusive range of injected race instances per log.
    pub race_instances: (u64, u64),
    pub class_mix: ClassMix,
    /// SWC injection window, seconds.
    pub swc_delta: f64,
    /// READ:WRITE frequency ratio for background events.
    pub read_write_ratio: f64,
    /// Weight of AllergyIntolerance/MedicationRequest relative to
    /// Observation/Patient in background type selection.
    pub hot_resource_weight: f64,
    /// Fraction of writes flagged ETag-protected under C3.
    pub etag_fraction: f64,
    pub n_processes: usize,
    pub resource_pool_per_type: usize,
    /// Nominal log duration, seconds.
    pub log_duration: f64,
    /// Minimum inter-event spacing under C1, seconds.
    pub c1_min_spacing: f64,
    /// Mean number of hot-resource contention clusters per C2/C3 log;
    /// the tuning knob for background-induced stale-read false positives.
    pub hot_cluster_rate: f64,
}

impl GeneratorParams {
    pub fn for_condition(condition: Condition) -> GeneratorParams {
        GeneratorParams {
            condition,
            base_seed: 42,
            n_logs: 500,
            background_events: (200, 800),
            race_instances: (8, 40),
            class_mix: ClassMix { swc: 0.40, tav: 0.30, cur: 0.30 },
            swc_delta: 0.150,
            read_write_ratio: 3.0,
            hot_resource_weight: 2.0,
            etag_fraction: 0.70,
            n_processes: 6,
            resource_pool_per_type: 40,
            log_duration: 60.0,
            c1_min_spacing: 0.250,
            hot_cluster_rate: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mix_sum = self.class_mix.swc + self.class_mix.tav + self.class_mix.cur;
        if (mix_sum - 1.0).abs() > 1e-9 {
            return Err(Error::Usage(format!(
                "class_mix must sum to 1, got {mix_sum}"
            )));
        }
        if self.class_mix.swc < 0.0 || self.class_mix.tav < 0.0 || self.class_mix.cur < 0.0 {
            return Err(Error::Usage("class_mix proportions must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.etag_fraction) {
            return Err(Error::Usage(format!(
                "etag_fraction must be in [0, 1], got {}",
                self.etag_fraction
            )));
        }
        if self.c1_min_spacing <= 0.200 {
            return Err(Error::Usage(format!(
                "c1_min_spacing must exceed the 0.200 s baseline window, got {}",
                self.c1_min_spacing
            )));
        }
        if self.background_events.0 > self.background_events.1 {
            return Err(Error::Usage("background_events range is inverted".into()));
        }
        if self.race_instances.0 > self.race_instances.1 {
            return Err(Error::Usage("race_instances range is inverted".into()));
        }
        if self.condition != Condition::C1 && self.n_processes < 3 {
            return Err(Error::Usage(
                "n_processes must be >= 3 to inject three-process races".into(),
            ));
        }
        if self.n_processes == 0 || self.resource_pool_per_type == 0 {
            return Err(Error::Usage("process and resource pools must be non-empty".into()));
        }
        if !(self.read_write_ratio.is_finite() && self.read_write_ratio >= 0.0) {
            return Err(Error::Usage("read_write_ratio must be >= 0".into()));
        }
        if !(self.hot_resource_weight.is_finite() && self.hot_resource_weight > 0.0) {
            return Err(Error::Usage("hot_resource_weight must be > 0".into()));
        }
        if !(self.log_duration.is_finite() && self.log_duration >= 1.0) {
            return Err(Error::Usage("log_duration must be >= 1 s".into()));
        }
        if !(self.swc_delta.is_finite() && self.swc_delta > 0.0) {
            return Err(Error::Usage("swc_delta must be > 0".into()));
        }
        if !(self.hot_cluster_rate.is_finite() && self.hot_cluster_rate >= 0.0) {
            return Err(Error::Usage("hot_cluster_rate must be >= 0".into()));
        }
        Ok(())
    }

    fn duration_ms(&self) -> u64 {
        ms_from_secs(self.log_duration)
    }

    fn anchor_max_ms(&self) -> u64 {
        self.duration_ms().saturating_sub(INJECTION_TAIL_MS).max(1)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the per-log seed from `(base_seed, condition, log_index)`.
pub fn derive_seed(base_seed: u64, condition: Condition, log_index: u64) -> u64 {
    let mut s = splitmix64(base_seed);
    s = splitmix64(s ^ splitmix64(condition.index().wrapping_add(1)));
    s = splitmix64(s ^ splitmix64(log_index.wrapping_add(1)));
    s
}

/// Names the process pool after the client systems that populate a typical
/// deployment.
pub fn process_pool(n: usize) -> Vec<String> {
    const ROLES: [&str; 6] = ["ehr", "lab", "pharmacy", "cds", "device", "portal"];
    (0..n)
        .map(|i| format!("{}-{:02}", ROLES[i % ROLES.len()], i / ROLES.len() + 1))
        .collect()
}

pub(crate) fn draw_operation<R: Rng>(rng: &mut R, read_write_ratio: f64) -> Operation {
    let read_prob = read_write_ratio / (read_write_ratio + 1.0);
    if rng.gen::<f64>() < read_prob {
        Operation::Read
    } else {
        Operation::Write
    }
}

pub(crate) fn draw_resource_type<R: Rng>(rng: &mut R, hot_weight: f64) -> ResourceType {
    let weights = [hot_weight, hot_weight, 1.0, 1.0];
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (ty, w) in ResourceType::ALL.iter().zip(weights) {
        if x < w {
            return *ty;
        }
        x -= w;
    }
    ResourceType::Patient
}

/// Draws `k` distinct processes from the pool via a partial shuffle.
fn distinct_processes<R: Rng>(rng: &mut R, pool: &[String], k: usize) -> Vec<String> {
    debug_assert!(k <= pool.len());
    let mut idxs: Vec<usize> = (0..pool.len()).collect();
    for i in 0..k {
        let j = rng.gen_range(i..idxs.len());
        idxs.swap(i, j);
    }
    idxs[..k].iter().map(|&i| pool[i].clone()).collect()
}

fn raw_event(
    process_id: String,
    resource_type: ResourceType,
    resource_id: String,
    operation: Operation,
    t_ms: u64,
    race: Option<(RaceClass, u64)>,
) -> AccessEvent {
    AccessEvent {
        event_id: 0,
        process_id,
        resource_type,
        resource_id,
        operation,
        timestamp: Timestamp::from_ms(t_ms),
        // Provisional; assigned during assembly.
        version_id: 0,
        is_race: race.is_some(),
        race_class: race.map(|(c, _)| c),
        race_instance_id: race.map(|(_, i)| i),
        etag_protected: false,
    }
}

/// Generates the background event stream for one C2/C3 log: ambient
/// traffic plus contention clusters, already swept. Event ids and version
/// ids are provisional until the log is assembled.
pub fn generate_background<R: Rng>(rng: &mut R, params: &GeneratorParams) -> Vec<AccessEvent> {
    let duration = params.duration_ms();
    let processes = process_pool(params.n_processes);

    let total = rng.gen_range(params.background_events.0..=params.background_events.1);
    let cluster_count = {
        let whole = params.hot_cluster_rate.floor();
        let frac = params.hot_cluster_rate - whole;
        whole as u64 + u64::from(rng.gen::<f64>() < frac)
    };
    let cluster_count = cluster_count.min(total / 3);
    let ambient_count = total - 3 * cluster_count;

    let mut times: Vec<u64> = (0..ambient_count)
        .map(|_| rng.gen_range(0..=duration))
        .collect();
    times.sort_unstable();

    let mut events: Vec<AccessEvent> = Vec::with_capacity(total as usize);
    for t in times {
        let operation = draw_operation(rng, params.read_write_ratio);
        let resource_type = draw_resource_type(rng, params.hot_resource_weight);
        let resource_idx = rng.gen_range(0..params.resource_pool_per_type);
        let process_idx = rng.gen_range(0..processes.len());
        events.push(raw_event(
            processes[process_idx].clone(),
            resource_type,
            format!("bg-{resource_idx:03}"),
            operation,
            t,
            None,
        ));
    }
    let ambient_len = events.len();

    let mut used_cluster_resources: Vec<(ResourceType, usize)> = Vec::new();
    for _ in 0..cluster_count {
        let resource_type = if rng.gen_range(0..2) == 0 {
            ResourceType::AllergyIntolerance
        } else {
            ResourceType::MedicationRequest
        };
        let mut resource_idx = rng.gen_range(0..params.resource_pool_per_type);
        for _ in 0..50 {
            if !used_cluster_resources.contains(&(resource_type, resource_idx)) {
                break;
            }
            resource_idx = rng.gen_range(0..params.resource_pool_per_type);
        }
        used_cluster_resources.push((resource_type, resource_idx));
        let resource_id = format!("bg-{resource_idx:03}");

        let anchor = rng.gen_range(0..=params.anchor_max_ms());
        let gap_to_write = rng.gen_range(CLUSTER_GAP_MS.0..=CLUSTER_GAP_MS.1);
        let gap_to_read = rng.gen_range(CLUSTER_GAP_MS.0..=CLUSTER_GAP_MS.1);
        let procs = distinct_processes(rng, &processes, 3);
        events.push(raw_event(
            procs[0].clone(),
            resource_type,
            resource_id.clone(),
            Operation::Read,
            anchor,
            None,
        ));
        events.push(raw_event(
            procs[1].clone(),
            resource_type,
            resource_id.clone(),
            Operation::Write,
            anchor + gap_to_write,
            None,
        ));
        events.push(raw_event(
            procs[2].clone(),
            resource_type,
            resource_id,
            Operation::Read,
            anchor + gap_to_write + gap_to_read,
            None,
        ));
    }

    sweep_ambient_writes(rng, &mut events, ambient_len, params.resource_pool_per_type);
    events
}

/// Pushes ambient writes away from every other same-resource event until no
/// collision within [`SWEEP_WINDOW_MS`] remains. A colliding write yields to
/// reads, to cluster events and to earlier writes, so the latest write in a
/// clump moves first and progress is monotone. Writes still colliding after
/// [`SWEEP_MAX_PASSES`] are reassigned to a different resource.
fn sweep_ambient_writes<R: Rng>(
    rng: &mut R,
    events: &mut [AccessEvent],
    ambient_len: usize,
    pool_size: usize,
) {
    let movable = |idx: usize, events: &[AccessEvent]| {
        idx < ambient_len && events[idx].operation == Operation::Write
    };

    let colliding = |idx: usize, events: &[AccessEvent]| -> bool {
        let subject = &events[idx];
        events.iter().enumerate().any(|(j, other)| {
            j != idx
                && other.resource_type == subject.resource_type
                && other.resource_id == subject.resource_id
                && other.timestamp.abs_diff_ms(subject.timestamp) <= SWEEP_WINDOW_MS
                && !(movable(j, events)
                    && (other.timestamp, j) > (subject.timestamp, idx))
        })
    };

    for _ in 0..SWEEP_MAX_PASSES {
        let mut moved = false;
        for idx in 0..ambient_len {
            if movable(idx, events) && colliding(idx, events) {
                events[idx].timestamp = events[idx].timestamp.add_ms(SWEEP_NUDGE_MS);
                moved = true;
            }
        }
        if !moved {
            return;
        }
    }
    // Stragglers get a different resource id.
    for idx in 0..ambient_len {
        if !movable(idx, events) {
            continue;
        }
        for _ in 0..SWEEP_MAX_PASSES {
            if !colliding(idx, events) {
                break;
            }
            let new_idx = rng.gen_range(0..pool_size);
            events[idx].resource_id = format!("bg-{new_idx:03}");
        }
    }
}

/// Mutable state threaded through race injection: the event list under
/// construction plus bookkeeping for fresh resources and instance ids.
pub struct LogAssembly {
    pub events: Vec<AccessEvent>,
    pending: Vec<PendingInstance>,
    processes: Vec<String>,
    anchor_max_ms: u64,
    swc_delta_ms: u64,
    hot_resource_weight: f64,
}

struct PendingInstance {
    race_class: RaceClass,
    event_indices: Vec<usize>,
}

impl LogAssembly {
    pub fn new(background: Vec<AccessEvent>, params: &GeneratorParams) -> LogAssembly {
        LogAssembly {
            events: background,
            pending: Vec::new(),
            processes: process_pool(params.n_processes),
            anchor_max_ms: params.anchor_max_ms(),
            swc_delta_ms: ms_from_secs(params.swc_delta),
            hot_resource_weight: params.hot_resource_weight,
        }
    }

    /// Number of injected instances so far.
    pub fn instance_count(&self) -> usize {
        self.pending.len()
    }

    fn fresh_resource<R: Rng>(&mut self, rng: &mut R) -> (ResourceType, String) {
        let resource_type = draw_resource_type(rng, self.hot_resource_weight);
        let resource_id = format!("inj-{:03}", self.pending.len());
        (resource_type, resource_id)
    }

    fn push_instance(&mut self, race_class: RaceClass, specs: Vec<(String, Operation, u64)>, resource: (ResourceType, String)) {
        let instance_id = self.pending.len() as u64;
        let mut event_indices = Vec::with_capacity(specs.len());
        for (process_id, operation, t_ms) in specs {
            event_indices.push(self.events.len());
            self.events.push(raw_event(
                process_id,
                resource.0,
                resource.1.clone(),
                operation,
                t_ms,
                Some((race_class, instance_id)),
            ));
        }
        self.pending.push(PendingInstance { race_class, event_indices });
    }
}

/// Injects a simultaneous write conflict: two writes by distinct processes
/// to a fresh resource, separated by `U(0, swc_delta)`.
pub fn inject_swc<R: Rng>(rng: &mut R, asm: &mut LogAssembly) {
    let procs = distinct_processes(rng, &asm.processes, 2);
    let resource = asm.fresh_resource(rng);
    let t1 = rng.gen_range(0..=asm.anchor_max_ms);
    let dt = rng.gen_range(0..=asm.swc_delta_ms);
    asm.push_instance(
        RaceClass::Swc,
        vec![
            (procs[0].clone(), Operation::Write, t1),
            (procs[1].clone(), Operation::Write, t1 + dt),
        ],
        resource,
    );
}

/// Injects a TOCTOU violation: a read at `t1`, a foreign write at
/// `t1 + U(10, 80) ms`, and the reader's dependent write at
/// `t1 + U(90, 200) ms`.
pub fn inject_tav<R: Rng>(rng: &mut R, asm: &mut LogAssembly) {
    let procs = distinct_processes(rng, &asm.processes, 2);
    let resource = asm.fresh_resource(rng);
    let t1 = rng.gen_range(0..=asm.anchor_max_ms);
    let intervening = t1 + rng.gen_range(10..=80);
    let act = t1 + rng.gen_range(90..=200);
    asm.push_instance(
        RaceClass::Tav,
        vec![
            (procs[0].clone(), Operation::Read, t1),
            (procs[1].clone(), Operation::Write, intervening),
            (procs[0].clone(), Operation::Write, act),
        ],
        resource,
    );
}

/// Injects a cascading update race: a stale read at `t_w - U(10, 100) ms`,
/// a write at `t_w`, and a third process's dependent read at
/// `t_w + U(5, 50) ms`. All three processes are pairwise distinct.
pub fn inject_cur<R: Rng>(rng: &mut R, asm: &mut LogAssembly) {
    let procs = distinct_processes(rng, &asm.processes, 3);
    let resource = asm.fresh_resource(rng);
    let t_w = rng.gen_range(100..=asm.anchor_max_ms.max(100));
    let stale = t_w - rng.gen_range(10..=100);
    let downstream = t_w + rng.gen_range(5..=50);
    asm.push_instance(
        RaceClass::Cur,
        vec![
            (procs[0].clone(), Operation::Read, stale),
            (procs[1].clone(), Operation::Write, t_w),
            (procs[2].clone(), Operation::Read, downstream),
        ],
        resource,
    );
}

fn draw_class<R: Rng>(rng: &mut R, mix: &ClassMix) -> RaceClass {
    let x = rng.gen::<f64>();
    if x < mix.swc {
        RaceClass::Swc
    } else if x < mix.swc + mix.tav {
        RaceClass::Tav
    } else {
        RaceClass::Cur
    }
}

/// Orders events, assigns final event ids and version ids, and produces the
/// ground-truth instance list sorted by earliest timestamp.
fn assemble(asm: LogAssembly, log_id: u64, condition: Condition, seed: u64) -> TransactionLog {
    let LogAssembly { events, pending, .. } = asm;

    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by_key(|&i| (events[i].timestamp, i));
    let mut rank_of = vec![0usize; events.len()];
    for (rank, &old) in order.iter().enumerate() {
        rank_of[old] = rank;
    }

    let mut sorted: Vec<AccessEvent> = Vec::with_capacity(events.len());
    let mut write_counts: std::collections::BTreeMap<String, u64> =
        std::collections::BTreeMap::new();
    for (rank, &old) in order.iter().enumerate() {
        let mut event = events[old].clone();
        event.event_id = rank as u64;
        let count = write_counts.entry(event.resource_name()).or_insert(0);
        event.version_id = match event.operation {
            Operation::Write => {
                *count += 1;
                *count
            }
            Operation::Read => (*count).max(1),
        };
        sorted.push(event);
    }

    // Ground-truth instances, renumbered in earliest-timestamp order.
    let mut instances: Vec<GroundTruthInstance> = pending
        .into_iter()
        .map(|p| {
            let mut event_ids: Vec<u64> =
                p.event_indices.iter().map(|&i| rank_of[i] as u64).collect();
            event_ids.sort_unstable();
            let earliest = event_ids
                .iter()
                .map(|&id| sorted[id as usize].timestamp)
                .min()
                .expect("instances have events");
            let resource_id = sorted[event_ids[0] as usize].resource_name();
            GroundTruthInstance {
                instance_id: 0,
                race_class: p.race_class,
                resource_id,
                event_ids,
                earliest_timestamp: earliest,
            }
        })
        .collect();
    instances.sort_by(|a, b| {
        (a.earliest_timestamp, &a.resource_id).cmp(&(b.earliest_timestamp, &b.resource_id))
    });
    for (new_id, instance) in instances.iter_mut().enumerate() {
        instance.instance_id = new_id as u64;
        for &eid in &instance.event_ids {
            sorted[eid as usize].race_instance_id = Some(new_id as u64);
        }
    }

    TransactionLog {
        log_id,
        condition,
        seed,
        events: sorted,
        ground_truth: instances,
    }
}

fn generate_c1<R: Rng>(rng: &mut R, params: &GeneratorParams, log_id: u64, seed: u64) -> TransactionLog {
    let processes = process_pool(params.n_processes);
    let spacing = ms_from_secs(params.c1_min_spacing);
    let count = rng.gen_range(params.background_events.0..=params.background_events.1);

    let mut events = Vec::with_capacity(count as usize);
    let mut t = rng.gen_range(0..=50);
    for i in 0..count {
        if i > 0 {
            t += spacing + rng.gen_range(0..=50);
        }
        let operation = draw_operation(rng, params.read_write_ratio);
        let resource_type = draw_resource_type(rng, params.hot_resource_weight);
        let resource_idx = rng.gen_range(0..params.resource_pool_per_type);
        let process_idx = rng.gen_range(0..processes.len());
        events.push(raw_event(
            processes[process_idx].clone(),
            resource_type,
            format!("bg-{resource_idx:03}"),
            operation,
            t,
            None,
        ));
    }
    let asm = LogAssembly::new(events, params);
    assemble(asm, log_id, Condition::C1, seed)
}

fn generate_concurrent<R: Rng>(
    rng: &mut R,
    params: &GeneratorParams,
    log_id: u64,
    seed: u64,
) -> TransactionLog {
    let background = generate_background(rng, params);
    let mut asm = LogAssembly::new(background, params);
    let instance_count = rng.gen_range(params.race_instances.0..=params.race_instances.1);
    for _ in 0..instance_count {
        match draw_class(rng, &params.class_mix) {
            RaceClass::Swc => inject_swc(rng, &mut asm),
            RaceClass::Tav => inject_tav(rng, &mut asm),
            RaceClass::Cur => inject_cur(rng, &mut asm),
        }
    }
    assemble(asm, log_id, params.condition, seed)
}

/// Flags each WRITE as ETag-protected independently with probability
/// `fraction`, clearing any previous flags. Only meaningful under C3.
pub fn apply_etag_marking<R: Rng>(
    rng: &mut R,
    log: &mut TransactionLog,
    fraction: f64,
) -> Result<()> {
    if log.condition != Condition::C3 {
        return Err(Error::Usage(format!(
            "etag marking applies to C3 logs only, got {}",
            log.condition
        )));
    }
    for event in &mut log.events {
        event.etag_protected =
            event.operation == Operation::Write && rng.gen::<f64>() < fraction;
    }
    Ok(())
}

/// Generates one log from its derived seed.
pub fn generate_log(params: &GeneratorParams, log_id: u64) -> Result<TransactionLog> {
    params.validate()?;
    let seed = derive_seed(params.base_seed, params.condition, log_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = match params.condition {
        Condition::C1 => generate_c1(&mut rng, params, log_id, seed),
        _ => generate_concurrent(&mut rng, params, log_id, seed),
    };
    if params.condition == Condition::C3 {
        apply_etag_marking(&mut rng, &mut log, params.etag_fraction)?;
    }
    debug_assert!(log.validate().is_ok(), "generated log violates invariants");
    Ok(log)
}

/// Generates the full corpus. Each log depends only on its own derived
/// seed, so any log can be regenerated independently.
pub fn generate_corpus(params: &GeneratorParams) -> Result<Vec<TransactionLog>> {
    params.validate()?;
    (0..params.n_logs as u64)
        .map(|i| generate_log(params, i))
        .collect()
}

/// File name of log `log_id` inside a corpus directory.
pub fn log_file_name(condition: Condition, log_id: u64) -> String {
    format!("{}_{log_id:04}.ndjson", condition.token())
}

/// Corpus-level metadata written next to the generated logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub condition: Condition,
    pub n_logs: usize,
    pub base_seed: u64,
    pub params: GeneratorParams,
    pub log_seeds: Vec<u64>,
    pub files: Vec<String>,
}

impl CorpusManifest {
    pub fn for_params(params: &GeneratorParams) -> CorpusManifest {
        let log_seeds = (0..params.n_logs as u64)
            .map(|i| derive_seed(params.base_seed, params.condition, i))
            .collect();
        let files = (0..params.n_logs as u64)
            .map(|i| log_file_name(params.condition, i))
            .collect();
        CorpusManifest {
            condition: params.condition,
            n_logs: params.n_logs,
            base_seed: params.base_seed,
            params: params.clone(),
            log_seeds,
            files,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }

    pub fn from_json(bytes: &[u8]) -> Result<CorpusManifest> {
        serde_json::from_slice(bytes).map_err(|e| Error::Parse {
            line: 0,
            message: format!("manifest: {e}"),
        })
    }
}
