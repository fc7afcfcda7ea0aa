//! Deterministic trace replay over the assembled system.
//!
//! Events apply in order on a logical clock; every latency in the resulting
//! report comes from the modeled cost parameters, never from wall time. At
//! each four-hour period boundary the configured prefetch strategy plans
//! from the access log so far and executes while the idleness gate is open.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::MountTable;
use crate::error::{Error, Result};
use crate::ingest::{ExtractorConfig, FramePolicy, Pipeline, ProcessOutcome, SamplerStack, SamplerStage};
use crate::meta::MetaStore;
use crate::prefetch::{execute_plan, plan_for, AccessLog, AccessLogEntry, SizeMap, Strategy, PERIOD_SECONDS};
use crate::report::{LatencyStats, MetricsReport};
use crate::sample::InclusionPolicy;
use crate::tier::{AllocatorKind, BackendCost, EvictorRegistry, TierConfig, TieredStore};
use crate::workload::{TraceEvent, TraceEventKind, OBJECT_PREFIX};

/// Optional samplers wired into replay.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_learning: Option<InclusionPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_memorization: Option<InclusionPolicy>,
}

/// Modeled query cost: a base plus a per-result term, keeping the replay
/// wall-clock independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryCost {
    pub base_ms: f64,
    pub per_record_ms: f64,
}

impl Default for QueryCost {
    fn default() -> Self {
        Self { base_ms: 1.0, per_record_ms: 0.01 }
    }
}

/// Everything replay needs to assemble the system.
#[derive(Debug, Clone)]
pub struct SystemConfig {
    pub tiers: Vec<TierConfig>,
    pub backend_cost: BackendCost,
    pub allocator: AllocatorKind,
    pub evictor: String,
    pub prefetch_strategy: Strategy,
    pub prefetch_budget: u64,
    /// Bytes the boundary sweep frees across tiers; anything above the plan
    /// budget stays available for reactive promotion-on-miss.
    pub maintenance_free_bytes: u64,
    pub load_threshold: f64,
    pub frame_policy: FramePolicy,
    pub extractor: ExtractorConfig,
    pub query_cost: QueryCost,
    pub reduction: ReductionConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            tiers: crate::tier::default_tiers(96_000_000, 192_000_000, 384_000_000),
            backend_cost: BackendCost::default(),
            allocator: AllocatorKind::DefaultCascade,
            evictor: "lru".into(),
            prefetch_strategy: Strategy::None,
            prefetch_budget: 320_000_000,
            maintenance_free_bytes: 448_000_000,
            load_threshold: 4.0,
            frame_policy: FramePolicy::default(),
            extractor: ExtractorConfig {
                kind: crate::ingest::ExtractorKind::SyntheticHash,
                vocabulary: crate::ingest::default_vocabulary(),
                labels_per_frame: 2,
                endpoint: None,
            },
            query_cost: QueryCost::default(),
            reduction: ReductionConfig::default(),
        }
    }
}

impl SystemConfig {
    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.prefetch_strategy = strategy;
        self
    }

    pub fn with_allocator(mut self, allocator: AllocatorKind) -> Self {
        self.allocator = allocator;
        self
    }
}

struct ReplayState {
    store: TieredStore,
    meta: MetaStore,
    log: AccessLog,
    pipeline: Pipeline,
    sizes: SizeMap,
    records_by_path: std::collections::BTreeMap<crate::backend::ObjectPath, crate::meta::SessionRecord>,
    write_lat: Vec<f64>,
    read_lat: Vec<f64>,
    query_lat: Vec<f64>,
    report: MetricsReport,
}

/// Final system state a replay leaves behind, for inspection.
pub struct ReplayArtifacts {
    pub report: MetricsReport,
    pub log: AccessLog,
    pub sizes: SizeMap,
    pub meta: MetaStore,
}

/// Replay a sorted trace against a freshly assembled system.
pub fn replay(trace: &[TraceEvent], config: &SystemConfig) -> Result<MetricsReport> {
    replay_with_artifacts(trace, config).map(|a| a.report)
}

/// Like [`replay`], also returning the final access log, size map, and
/// metadata store so callers can build inspection plans from them.
pub fn replay_with_artifacts(trace: &[TraceEvent], config: &SystemConfig) -> Result<ReplayArtifacts> {
    for (index, pair) in trace.windows(2).enumerate() {
        if pair[1].t < pair[0].t {
            return Err(Error::MalformedEvent { index: index + 1, reason: "events not sorted by t".into() });
        }
    }
    let mut fabric = MountTable::new();
    fabric.mount(
        crate::backend::ObjectPath::new("/store")?,
        crate::backend::BackendDescriptor::in_memory("backend"),
    )?;
    let store = TieredStore::create_with_registry(
        config.tiers.clone(),
        config.allocator,
        &config.evictor,
        Arc::new(fabric),
        &EvictorRegistry::default(),
        config.backend_cost.clone(),
    )?;
    let pipeline = Pipeline::new(
        config.frame_policy,
        config.extractor.clone(),
        crate::backend::ObjectPath::new(OBJECT_PREFIX)?,
    )
    .with_samplers(SamplerStack {
        pre_learning: config.reduction.pre_learning.clone(),
        pre_memorization: config.reduction.pre_memorization.clone(),
    });

    let mut state = ReplayState {
        store,
        meta: MetaStore::new(),
        log: AccessLog::new(),
        pipeline,
        sizes: SizeMap::new(),
        records_by_path: Default::default(),
        write_lat: Vec::new(),
        read_lat: Vec::new(),
        query_lat: Vec::new(),
        report: MetricsReport {
            strategy: config.prefetch_strategy.to_string(),
            allocator: config.allocator.to_string(),
            ..Default::default()
        },
    };

    let mut next_boundary = trace
        .first()
        .map(|e| e.t - e.t.rem_euclid(PERIOD_SECONDS) + PERIOD_SECONDS)
        .unwrap_or(0);

    for (index, event) in trace.iter().enumerate() {
        while event.t >= next_boundary {
            run_prefetch(&mut state, config, next_boundary);
            next_boundary += PERIOD_SECONDS;
        }
        apply_event(&mut state, config, index, event)?;
        state.report.events += 1;
    }

    let metrics = state.store.metrics_snapshot();
    state.report.hits = metrics.hits;
    state.report.misses = metrics.misses;
    state.report.hit_rate = metrics.hit_rate();
    state.report.moves_total = metrics.total_moves;
    state.report.write_latency = LatencyStats::from_samples(&state.write_lat);
    state.report.read_latency = LatencyStats::from_samples(&state.read_lat);
    state.report.query_latency = LatencyStats::from_samples(&state.query_lat);
    Ok(ReplayArtifacts { report: state.report, log: state.log, sizes: state.sizes, meta: state.meta })
}

/// Idle-period boundary work. Regardless of strategy, cold blocks are swept
/// to the backend until the prefetch budget is free: the tiers would
/// otherwise sit permanently full of stale writes and best-effort promotion
/// could never place anything. The sweep is identical across strategies, so
/// runs differ only in what gets prefilled afterwards.
fn run_prefetch(state: &mut ReplayState, config: &SystemConfig, now: i64) {
    if config.maintenance_free_bytes > 0 {
        state.store.demote_cold(config.maintenance_free_bytes);
    }
    if config.prefetch_strategy == Strategy::None {
        return;
    }
    let plan = plan_for(
        config.prefetch_strategy,
        &state.log,
        &state.meta,
        now,
        config.prefetch_budget,
        &state.sizes,
    );
    state.report.prefetch_plans += 1;
    state.report.prefetch_candidates += plan.candidates.len() as u64;
    let store = &state.store;
    let outcome = execute_plan(&plan, store, config.load_threshold, || store.in_flight() as f64);
    state.report.prefetch_promoted += outcome.promoted;
    state.report.prefetch_skipped += outcome.skipped;
}

fn apply_event(state: &mut ReplayState, config: &SystemConfig, index: usize, event: &TraceEvent) -> Result<()> {
    match &event.kind {
        TraceEventKind::Ingest { stream } => {
            state.report.ingests += 1;
            let video = stream.materialize();
            let outcome = state
                .pipeline
                .process_stream(&video, &state.store, &mut state.meta)
                .map_err(|e| Error::MalformedEvent { index, reason: e.to_string() })?;
            match outcome {
                ProcessOutcome::Stored { record, receipt } => {
                    state.sizes.insert(record.object_path.clone(), video.block_size());
                    state.records_by_path.insert(record.object_path.clone(), record);
                    state.write_lat.push(receipt.modeled_latency_ms);
                    state.report.records_stored += 1;
                }
                ProcessOutcome::Skipped { stage: SamplerStage::PreLearning, .. } => {
                    state.report.skipped_pre_learning += 1;
                }
                ProcessOutcome::Skipped { stage: SamplerStage::PreMemorization, .. } => {
                    state.report.skipped_pre_memorization += 1;
                }
            }
        }
        TraceEventKind::Read { object_path } => {
            state.report.reads += 1;
            let Some(id) = state.store.block_by_path(object_path) else {
                // The stream this object belonged to was sampled out.
                state.report.skipped_reads += 1;
                return Ok(());
            };
            let (_, receipt) = state
                .store
                .read_block(&id)
                .map_err(|e| Error::MalformedEvent { index, reason: e.to_string() })?;
            state.read_lat.push(receipt.modeled_latency_ms);
            // Blocks and records are stored together, so the record exists.
            let record = state
                .records_by_path
                .get(object_path)
                .ok_or_else(|| Error::MalformedEvent { index, reason: "read of unrecorded object".into() })?;
            state.log.record_access(AccessLogEntry {
                timestamp: event.t,
                object_path: object_path.clone(),
                table_or_group: record.user_id.to_string(),
                labels: record.labels.clone(),
                location: record.location.clone(),
            })?;
        }
        TraceEventKind::Query { predicate } => {
            state.report.queries += 1;
            let results = state
                .meta
                .query(predicate)
                .map_err(|e| Error::MalformedEvent { index, reason: e.to_string() })?;
            state
                .query_lat
                .push(config.query_cost.base_ms + config.query_cost.per_record_ms * results.len() as f64);
        }
    }
    Ok(())
}

/// Replay the same trace under several prefetch strategies.
pub fn replay_strategies(
    trace: &[TraceEvent],
    base: &SystemConfig,
    strategies: &[Strategy],
) -> Result<Vec<MetricsReport>> {
    strategies
        .iter()
        .map(|s| replay(trace, &base.clone().with_strategy(*s)))
        .collect()
}

/// Outcome of the allocator saturation benchmark: the same scripted write
/// sequence against both allocators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocBenchReport {
    pub writes: u64,
    pub cascade_mean_ms: f64,
    pub direct_mean_ms: f64,
    pub cascade_total_moves: u64,
    pub direct_total_moves: u64,
    /// cascade mean / direct mean.
    pub latency_ratio: f64,
}

/// Saturation stress: `writes` blocks of ~10 MB into small memory and ssd
/// tiers over an ample hdd, so the cascade pays two levels of eviction on
/// nearly every write while direct writes fall through. Deterministic in
/// `seed`.
pub fn alloc_bench(writes: u64, seed: u64) -> Result<AllocBenchReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let sizes: Vec<u64> = (0..writes).map(|_| rng.random_range(8_000_000..=12_000_000)).collect();

    let run = |allocator: AllocatorKind| -> Result<(f64, u64)> {
        let fabric = Arc::new(MountTable::single_in_memory("/store"));
        let tiers = crate::tier::default_tiers(256_000_000, 512_000_000, 1_000_000_000_000);
        let store = TieredStore::create(tiers, allocator, "lru", fabric)?;
        let mut total = 0.0;
        for (i, size) in sizes.iter().enumerate() {
            let block = crate::tier::Block::new(
                format!("b{i}"),
                *size,
                crate::backend::ObjectPath::new(format!("/store/b{i}"))?,
            );
            let receipt = store.write_block(&block, &vec![0u8; 16])?;
            total += receipt.modeled_latency_ms;
        }
        Ok((total / writes.max(1) as f64, store.metrics_snapshot().total_moves))
    };

    let (cascade_mean_ms, cascade_total_moves) = run(AllocatorKind::DefaultCascade)?;
    let (direct_mean_ms, direct_total_moves) = run(AllocatorKind::DirectWrite)?;
    Ok(AllocBenchReport {
        writes,
        cascade_mean_ms,
        direct_mean_ms,
        cascade_total_moves,
        direct_total_moves,
        latency_ratio: cascade_mean_ms / direct_mean_ms,
    })
}
