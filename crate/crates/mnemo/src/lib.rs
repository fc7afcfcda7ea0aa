//! mnemo: a deterministic, single-process model of a media-session store.
//!
//! Incoming streams are turned into labeled session records (`ingest`), raw
//! payloads live in a tiered block cache above a persistent backend (`tier`,
//! `backend`), records answer multi-attribute recall queries (`meta`),
//! access-log-driven prefetching warms the tiers (`prefetch`), and samplers
//! with a rescaling count estimator trade accuracy for resources (`sample`).
//! The `workload`/`replay` harness generates seeded traces and replays them
//! on a logical clock, so every reported number is reproducible bit for bit.
//!
//! The `guide` module mirrors the book under `book/`; its code blocks run as
//! doc-tests to keep the two in sync.

pub mod backend;
pub mod config;
pub mod error;
pub mod guide;
pub mod ingest;
pub mod meta;
pub mod plan;
pub mod prefetch;
pub mod replay;
pub mod report;
pub mod sample;
pub mod tier;
pub mod workload;

pub use backend::{BackendDescriptor, BackendKind, Blob, MountTable, ObjectPath, PersistReceipt};
pub use error::{Error, Result};
pub use ingest::{
    default_locations, default_vocabulary, extract_labels, schedule_frames, ExtractorConfig,
    ExtractorKind, Frame, FramePolicy, Pipeline, ProcessOutcome, SamplerStack, SamplerStage,
    VideoStream,
};
pub use meta::{LabelStat, MetaStore, QueryPredicate, RecordKey, SessionId, SessionRecord, UserId};
pub use prefetch::{
    execute_plan, plan_for, plan_label_hot, plan_location_hot, plan_most_requested,
    plan_time_period, AccessLog, AccessLogEntry, PeriodIndex, PrefetchPlan, PromotionReport,
    SizeMap, Strategy, PERIODS_PER_DAY, PERIOD_SECONDS,
};
pub use plan::{capacity_plan, CapacityInputs, CapacityPlan};
pub use replay::{alloc_bench, replay, replay_strategies, AllocBenchReport, QueryCost, ReductionConfig, SystemConfig};
pub use report::{export_report, LatencyStats, MetricsReport, ReportFormat};
pub use sample::{
    approx_count, approx_query, approx_sum_duration, online_sample, online_sample_from_units,
    pre_learning_decide, pre_memorization_decide, ApproxAnswer, Decision, InclusionPolicy,
    PolicyKind, SampledRow, StreamMeta,
};
pub use workload::{
    export_trace_jsonl, generate_hot_groups, generate_workload, import_trace_jsonl, QueryMix,
    StreamSpec, TraceEvent, TraceEventKind, WorkloadSpec,
};
pub use tier::{
    AllocatorKind, BackendCost, Block, BlockId, CostModel, Evictor, EvictorRegistry, Location,
    Move, PromotionOutcome, PromotionRecord, ReadReceipt, StoreMetrics, TierConfig, TierName,
    TierState, TieredStore, WriteReceipt,
};
