//! Crate-wide error type.

use crate::tier::TierName;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ----- object namespace -----
    #[error("invalid object path `{path}`: {reason}")]
    InvalidPath { path: String, reason: String },
    #[error("mount prefix `{incoming}` overlaps existing mount `{existing}`")]
    OverlappingPrefix { incoming: String, existing: String },
    #[error("backend name `{0}` is already mounted")]
    DuplicateBackendName(String),
    #[error("path `{0}` is not under any mount")]
    Unmounted(String),
    #[error("no object stored at `{0}`")]
    MissingObject(String),

    // ----- tiered store -----
    #[error("a store needs at least one tier")]
    NoTiers,
    #[error("duplicate tier `{0}`")]
    DuplicateTier(TierName),
    #[error("tiers must be listed top to bottom (memory, ssd, hdd); `{lower}` cannot follow `{upper}`")]
    TierOrder { upper: TierName, lower: TierName },
    #[error("invalid tier config for `{tier}`: {reason}")]
    InvalidTierConfig { tier: TierName, reason: String },
    #[error("unknown evictor policy `{0}`")]
    UnknownEvictor(String),
    #[error("block `{0}` was already written")]
    DuplicateBlock(String),
    #[error("object path `{path}` is already referenced by block `{block}`")]
    DuplicatePayloadRef { path: String, block: String },
    #[error("block `{id}` ({size} bytes) exceeds every tier capacity")]
    BlockTooLarge { id: String, size: u64 },
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("tier `{0}` is not configured on this store")]
    UnknownTier(TierName),

    // ----- metadata store -----
    #[error("record key ({session_id}, {timestamp}) already present")]
    DuplicateRecord { session_id: String, timestamp: i64 },
    #[error("no record with key ({session_id}, {timestamp})")]
    MissingRecord { session_id: String, timestamp: i64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),

    // ----- ingest pipeline -----
    #[error("invalid stream: {0}")]
    InvalidStream(String),
    #[error("invalid frame policy: {0}")]
    InvalidFramePolicy(String),
    #[error("invalid extractor config: {0}")]
    InvalidExtractor(String),
    #[error("label extraction endpoint failed: {0}")]
    Endpoint(String),

    // ----- prefetch -----
    #[error("access timestamp {new} precedes log tail {last}")]
    TimeRegression { new: i64, last: i64 },

    // ----- sampling -----
    #[error("invalid inclusion policy: {0}")]
    InvalidPolicy(String),
    #[error("inclusion probability {0} outside (0, 1]")]
    InvalidProbability(f64),

    // ----- harness -----
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("malformed trace event at index {index}: {reason}")]
    MalformedEvent { index: usize, reason: String },
    #[error("invalid capacity input: {0}")]
    InvalidCapacityInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
