//! Tiered block store: ordered cache tiers above a persistent backend.
//!
//! Blocks live in at most one tier at a time; every written payload is also
//! persisted through the [`MountTable`](crate::backend::MountTable), so
//! evicting a block from the tiers never loses data. Two allocators compete:
//!
//! * [`AllocatorKind::DefaultCascade`] always lands the new block in the top
//!   tier, cascading evictions downward through every full tier.
//! * [`AllocatorKind::DirectWrite`] lands the block in the first tier that
//!   already has room, moving nothing unless the whole store is full.
//!
//! All latencies are modeled, never measured: a transfer into or out of a
//! location costs `overhead + size / throughput`, and a move costs the read
//! of its source plus the write of its destination. Receipts carry enough
//! information to recompute their own latency.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::backend::{Blob, MountTable, ObjectPath};
use crate::error::{Error, Result};

/// Identifier of a stored block. Unique across a store's lifetime.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub String);

impl BlockId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A stored payload's accounting handle. `size` is the accounted size used
/// for capacity and latency modeling; it is immutable after creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub size: u64,
    pub payload_ref: ObjectPath,
}

impl Block {
    pub fn new(id: impl Into<String>, size: u64, payload_ref: ObjectPath) -> Self {
        Self { id: BlockId::new(id), size, payload_ref }
    }

    /// Block whose accounted size equals the payload length.
    pub fn sized_for(id: impl Into<String>, payload: &[u8], payload_ref: ObjectPath) -> Self {
        Self::new(id, payload.len().max(1) as u64, payload_ref)
    }
}

/// Cache tier levels, top to bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierName {
    Memory,
    Ssd,
    Hdd,
}

impl TierName {
    pub const ALL: [TierName; 3] = [TierName::Memory, TierName::Ssd, TierName::Hdd];

    pub fn as_str(self) -> &'static str {
        match self {
            TierName::Memory => "memory",
            TierName::Ssd => "ssd",
            TierName::Hdd => "hdd",
        }
    }
}

impl fmt::Display for TierName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TierName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "memory" => Ok(TierName::Memory),
            "ssd" => Ok(TierName::Ssd),
            "hdd" => Ok(TierName::Hdd),
            other => Err(Error::InvalidConfig(format!("unknown tier name `{other}`"))),
        }
    }
}

/// Where a block can reside or move to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Tier(TierName),
    Backend,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Tier(t) => t.fmt(f),
            Location::Backend => f.write_str("backend"),
        }
    }
}

/// Capacity and transfer-cost parameters of one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierConfig {
    pub name: TierName,
    pub capacity: u64,
    pub read_overhead_ms: f64,
    pub write_overhead_ms: f64,
    /// Bytes per second for both directions.
    pub throughput: f64,
}

impl TierConfig {
    pub fn new(name: TierName, capacity: u64, overhead_ms: f64, throughput: f64) -> Self {
        Self { name, capacity, read_overhead_ms: overhead_ms, write_overhead_ms: overhead_ms, throughput }
    }

    fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidTierConfig { tier: self.name, reason: reason.to_string() };
        if self.capacity == 0 {
            return Err(bad("capacity must be positive"));
        }
        if !self.throughput.is_finite() || self.throughput <= 0.0 {
            return Err(bad("throughput must be positive"));
        }
        if self.read_overhead_ms < 0.0 || self.write_overhead_ms < 0.0 {
            return Err(bad("overheads must be non-negative"));
        }
        Ok(())
    }
}

/// Transfer-cost parameters of the persistent backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendCost {
    pub read_overhead_ms: f64,
    pub write_overhead_ms: f64,
    pub throughput: f64,
}

impl Default for BackendCost {
    fn default() -> Self {
        Self { read_overhead_ms: 200.0, write_overhead_ms: 200.0, throughput: 20e6 }
    }
}

/// Default three-tier layout: memory 0.1 ms / 650 MB/s, ssd 1 ms / 120 MB/s,
/// hdd 5 ms / 60 MB/s. Capacities are the caller's business.
pub fn default_tiers(memory_cap: u64, ssd_cap: u64, hdd_cap: u64) -> Vec<TierConfig> {
    vec![
        TierConfig::new(TierName::Memory, memory_cap, 0.1, 650e6),
        TierConfig::new(TierName::Ssd, ssd_cap, 1.0, 120e6),
        TierConfig::new(TierName::Hdd, hdd_cap, 5.0, 60e6),
    ]
}

/// Modeled transfer costs over tiers and backend.
#[derive(Debug, Clone)]
pub struct CostModel {
    tiers: BTreeMap<TierName, (f64, f64, f64)>, // (read_overhead, write_overhead, throughput)
    backend: BackendCost,
}

impl CostModel {
    pub fn new(tiers: &[TierConfig], backend: BackendCost) -> Self {
        let tiers = tiers
            .iter()
            .map(|t| (t.name, (t.read_overhead_ms, t.write_overhead_ms, t.throughput)))
            .collect();
        Self { tiers, backend }
    }

    fn transfer_ms(overhead_ms: f64, throughput: f64, size: u64) -> f64 {
        overhead_ms + size as f64 / throughput * 1e3
    }

    pub fn read_ms(&self, location: Location, size: u64) -> f64 {
        match location {
            Location::Tier(t) => {
                let (r, _, tp) = self.tiers[&t];
                Self::transfer_ms(r, tp, size)
            }
            Location::Backend => Self::transfer_ms(self.backend.read_overhead_ms, self.backend.throughput, size),
        }
    }

    pub fn write_ms(&self, location: Location, size: u64) -> f64 {
        match location {
            Location::Tier(t) => {
                let (_, w, tp) = self.tiers[&t];
                Self::transfer_ms(w, tp, size)
            }
            Location::Backend => Self::transfer_ms(self.backend.write_overhead_ms, self.backend.throughput, size),
        }
    }

    /// A move reads its source and writes its destination.
    pub fn move_ms(&self, from: Location, to: Location, size: u64) -> f64 {
        self.read_ms(from, size) + self.write_ms(to, size)
    }
}

/// Which allocator places newly written blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocatorKind {
    /// New blocks land in the top tier; full tiers cascade victims downward.
    DefaultCascade,
    /// New blocks land in the first tier with free space.
    DirectWrite,
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AllocatorKind::DefaultCascade => "default-cascade",
            AllocatorKind::DirectWrite => "direct-write",
        })
    }
}

impl std::str::FromStr for AllocatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default-cascade" | "cascade" => Ok(AllocatorKind::DefaultCascade),
            "direct-write" | "direct" => Ok(AllocatorKind::DirectWrite),
            other => Err(Error::InvalidConfig(format!("unknown allocator `{other}`"))),
        }
    }
}

/// One evictor-driven block transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub block_id: BlockId,
    pub size: u64,
    pub from: Location,
    pub to: Location,
}

/// Outcome of a write, with every move the evictor performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WriteReceipt {
    pub block_id: BlockId,
    pub placed_tier: TierName,
    pub moves: Vec<Move>,
    pub modeled_latency_ms: f64,
}

impl WriteReceipt {
    /// Recompute this receipt's latency from its own move list: the sum of
    /// move costs plus the final placement write.
    pub fn recompute_latency(&self, model: &CostModel, block_size: u64) -> f64 {
        let moves: f64 = self.moves.iter().map(|m| model.move_ms(m.from, m.to, m.size)).sum();
        moves + model.write_ms(Location::Tier(self.placed_tier), block_size)
    }
}

/// Outcome of a read. `hit` iff the payload came from a tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadReceipt {
    pub block_id: BlockId,
    pub source: Location,
    pub hit: bool,
    pub modeled_latency_ms: f64,
    pub promoted_to: Option<TierName>,
}

/// Outcome of an explicit promotion attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromotionRecord {
    pub block_id: BlockId,
    pub target: TierName,
    pub outcome: PromotionOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PromotionOutcome {
    Promoted { from: Location, modeled_latency_ms: f64 },
    /// Already in the target tier; nothing to do.
    AlreadyResident,
    /// Target tier cannot take the block without evicting; promotion is
    /// best-effort and never evicts.
    InsufficientSpace,
}

/// Read-only view of one tier's occupancy.
#[derive(Debug, Clone, PartialEq)]
pub struct TierState {
    pub config: TierConfig,
    pub resident: BTreeMap<BlockId, u64>,
    pub used: u64,
}

impl TierState {
    pub fn free(&self) -> u64 {
        self.config.capacity - self.used
    }
}

/// Monotone operation counters plus cumulative modeled latency per op class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StoreMetrics {
    pub writes: u64,
    pub reads: u64,
    pub hits: u64,
    pub misses: u64,
    pub promotions: u64,
    pub demotions: u64,
    pub total_moves: u64,
    pub write_latency_ms: f64,
    pub read_latency_ms: f64,
    pub promote_latency_ms: f64,
    pub demote_latency_ms: f64,
}

impl StoreMetrics {
    pub fn hit_rate(&self) -> f64 {
        if self.reads == 0 {
            0.0
        } else {
            self.hits as f64 / self.reads as f64
        }
    }
}

// ---------------------------------------------------------------------------
// Evictors
// ---------------------------------------------------------------------------

/// Victim-selection policy. The store notifies the evictor of every resident
/// set change; `victims` must return blocks of the tier summing to at least
/// `need` bytes (all of them if the tier cannot cover `need`).
pub trait Evictor: Send {
    fn on_insert(&mut self, tier: TierName, id: &BlockId);
    fn on_access(&mut self, tier: TierName, id: &BlockId);
    fn on_remove(&mut self, tier: TierName, id: &BlockId);
    fn victims(&self, tier: TierName, resident: &BTreeMap<BlockId, u64>, need: u64) -> Vec<BlockId>;
}

/// Least-recently-used eviction: victims are taken from the cold end of the
/// access order until enough bytes are freed.
#[derive(Debug, Default)]
pub struct LruEvictor {
    order: BTreeMap<TierName, Vec<BlockId>>, // front = coldest
}

impl LruEvictor {
    fn touch(&mut self, tier: TierName, id: &BlockId) {
        let order = self.order.entry(tier).or_default();
        order.retain(|b| b != id);
        order.push(id.clone());
    }
}

impl Evictor for LruEvictor {
    fn on_insert(&mut self, tier: TierName, id: &BlockId) {
        self.touch(tier, id);
    }

    fn on_access(&mut self, tier: TierName, id: &BlockId) {
        self.touch(tier, id);
    }

    fn on_remove(&mut self, tier: TierName, id: &BlockId) {
        if let Some(order) = self.order.get_mut(&tier) {
            order.retain(|b| b != id);
        }
    }

    fn victims(&self, tier: TierName, resident: &BTreeMap<BlockId, u64>, need: u64) -> Vec<BlockId> {
        let mut out = Vec::new();
        let mut freed = 0u64;
        if let Some(order) = self.order.get(&tier) {
            for id in order {
                if freed >= need {
                    break;
                }
                if let Some(size) = resident.get(id) {
                    freed += size;
                    out.push(id.clone());
                }
            }
        }
        out
    }
}

/// First-in-first-out eviction: insertion order only, reads do not refresh.
#[derive(Debug, Default)]
pub struct FifoEvictor {
    order: BTreeMap<TierName, Vec<BlockId>>,
}

impl Evictor for FifoEvictor {
    fn on_insert(&mut self, tier: TierName, id: &BlockId) {
        let order = self.order.entry(tier).or_default();
        order.retain(|b| b != id);
        order.push(id.clone());
    }

    fn on_access(&mut self, _tier: TierName, _id: &BlockId) {}

    fn on_remove(&mut self, tier: TierName, id: &BlockId) {
        if let Some(order) = self.order.get_mut(&tier) {
            order.retain(|b| b != id);
        }
    }

    fn victims(&self, tier: TierName, resident: &BTreeMap<BlockId, u64>, need: u64) -> Vec<BlockId> {
        let mut out = Vec::new();
        let mut freed = 0u64;
        if let Some(order) = self.order.get(&tier) {
            for id in order {
                if freed >= need {
                    break;
                }
                if let Some(size) = resident.get(id) {
                    freed += size;
                    out.push(id.clone());
                }
            }
        }
        out
    }
}

type EvictorCtor = fn() -> Box<dyn Evictor>;

/// Name-to-constructor registry for evictor policies.
#[derive(Clone)]
pub struct EvictorRegistry {
    ctors: BTreeMap<String, EvictorCtor>,
}

impl Default for EvictorRegistry {
    fn default() -> Self {
        let mut registry = Self { ctors: BTreeMap::new() };
        registry.register("lru", || Box::new(LruEvictor::default()));
        registry.register("fifo", || Box::new(FifoEvictor::default()));
        registry
    }
}

impl EvictorRegistry {
    pub fn register(&mut self, name: impl Into<String>, ctor: EvictorCtor) {
        self.ctors.insert(name.into(), ctor);
    }

    pub fn build(&self, name: &str) -> Result<Box<dyn Evictor>> {
        self.ctors.get(name).map(|ctor| ctor()).ok_or_else(|| Error::UnknownEvictor(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ctors.keys().map(String::as_str)
    }
}

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct CatalogEntry {
    size: u64,
    payload_ref: ObjectPath,
    residency: Option<TierName>,
}

struct TierSlot {
    config: TierConfig,
    resident: BTreeMap<BlockId, u64>,
    used: u64,
}

impl TierSlot {
    fn free(&self) -> u64 {
        self.config.capacity - self.used
    }
}

struct StoreInner {
    tiers: Vec<TierSlot>,
    catalog: BTreeMap<BlockId, CatalogEntry>,
    by_path: BTreeMap<ObjectPath, BlockId>,
    payloads: BTreeMap<BlockId, Arc<Blob>>, // bytes of tier-resident blocks
    evictor: Box<dyn Evictor>,
    metrics: StoreMetrics,
}

/// The tiered block store. Operations are linearizable: all state sits
/// behind one store-wide lock, so per-block operations are atomic and tier
/// accounting is always observed consistently. Payloads are persisted to the
/// backend before a block becomes visible, hence a block is never observable
/// as neither tier-resident nor backend-persisted.
pub struct TieredStore {
    inner: Mutex<StoreInner>,
    cost: CostModel,
    allocator: AllocatorKind,
    backend: Arc<MountTable>,
    in_flight: AtomicU64,
}

impl TieredStore {
    /// Build a store over `tiers` (listed top to bottom) with the given
    /// allocator and a named evictor policy from the default registry.
    pub fn create(
        tiers: Vec<TierConfig>,
        allocator: AllocatorKind,
        evictor: &str,
        backend: Arc<MountTable>,
    ) -> Result<Self> {
        Self::create_with_registry(tiers, allocator, evictor, backend, &EvictorRegistry::default(), BackendCost::default())
    }

    pub fn create_with_registry(
        tiers: Vec<TierConfig>,
        allocator: AllocatorKind,
        evictor: &str,
        backend: Arc<MountTable>,
        registry: &EvictorRegistry,
        backend_cost: BackendCost,
    ) -> Result<Self> {
        if tiers.is_empty() {
            return Err(Error::NoTiers);
        }
        for t in &tiers {
            t.validate()?;
        }
        for pair in tiers.windows(2) {
            if pair[1].name == pair[0].name {
                return Err(Error::DuplicateTier(pair[1].name));
            }
            if pair[1].name < pair[0].name {
                return Err(Error::TierOrder { upper: pair[0].name, lower: pair[1].name });
            }
        }
        let evictor = registry.build(evictor)?;
        let cost = CostModel::new(&tiers, backend_cost);
        let slots = tiers
            .into_iter()
            .map(|config| TierSlot { config, resident: BTreeMap::new(), used: 0 })
            .collect();
        Ok(Self {
            inner: Mutex::new(StoreInner {
                tiers: slots,
                catalog: BTreeMap::new(),
                by_path: BTreeMap::new(),
                payloads: BTreeMap::new(),
                evictor,
                metrics: StoreMetrics::default(),
            }),
            cost,
            allocator,
            backend,
            in_flight: AtomicU64::new(0),
        })
    }

    pub fn allocator(&self) -> AllocatorKind {
        self.allocator
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    /// Number of operations currently executing; the prefetch idleness gate
    /// reads this as its load signal.
    pub fn in_flight(&self) -> u64 {
        self.in_flight.load(Ordering::Relaxed)
    }

    /// Write a new block: persist the payload, place the block per the
    /// allocator, and account every evictor-driven move.
    pub fn write_block(&self, block: &Block, payload: &Blob) -> Result<WriteReceipt> {
        let _guard = OpGuard::enter(&self.in_flight);
        let mut inner = self.inner.lock().unwrap();
        if inner.catalog.contains_key(&block.id) {
            return Err(Error::DuplicateBlock(block.id.to_string()));
        }
        if let Some(owner) = inner.by_path.get(&block.payload_ref) {
            return Err(Error::DuplicatePayloadRef {
                path: block.payload_ref.to_string(),
                block: owner.to_string(),
            });
        }
        if block.size == 0 {
            return Err(Error::InvalidConfig(format!("block `{}` has zero size", block.id)));
        }
        let max_cap = inner.tiers.iter().map(|t| t.config.capacity).max().unwrap_or(0);
        if block.size > max_cap {
            return Err(Error::BlockTooLarge { id: block.id.to_string(), size: block.size });
        }

        // Write-through: the payload is durable before the block is visible.
        self.backend.persist(&block.payload_ref, payload)?;

        let (placed_idx, moves) = match self.allocator {
            AllocatorKind::DefaultCascade => Self::plan_cascade(&mut inner, block.size),
            AllocatorKind::DirectWrite => Self::plan_direct(&mut inner, block.size),
        };
        Self::apply_moves(&mut inner, &moves);

        let placed_tier = inner.tiers[placed_idx].config.name;
        inner.tiers[placed_idx].resident.insert(block.id.clone(), block.size);
        inner.tiers[placed_idx].used += block.size;
        inner.evictor.on_insert(placed_tier, &block.id);
        inner.catalog.insert(
            block.id.clone(),
            CatalogEntry { size: block.size, payload_ref: block.payload_ref.clone(), residency: Some(placed_tier) },
        );
        inner.by_path.insert(block.payload_ref.clone(), block.id.clone());
        inner.payloads.insert(block.id.clone(), Arc::new(payload.clone()));

        let move_cost: f64 = moves.iter().map(|m| self.cost.move_ms(m.from, m.to, m.size)).sum();
        let latency = move_cost + self.cost.write_ms(Location::Tier(placed_tier), block.size);
        inner.metrics.writes += 1;
        inner.metrics.total_moves += moves.len() as u64;
        inner.metrics.write_latency_ms += latency;
        Ok(WriteReceipt { block_id: block.id.clone(), placed_tier, moves, modeled_latency_ms: latency })
    }

    /// Cascade plan: the new block lands in the topmost tier large enough to
    /// hold it (the top tier, in any ordinary configuration); each tier that
    /// overflows sheds the minimum victim prefix (in evictor order) to the
    /// tier below, and the bottom tier sheds to the backend. Victims larger
    /// than the next tier's total capacity go straight to the backend.
    /// Moves are ordered bottom-up so capacity never overshoots mid-write.
    fn plan_cascade(inner: &mut StoreInner, size: u64) -> (usize, Vec<Move>) {
        let levels = inner.tiers.len();
        let target = inner
            .tiers
            .iter()
            .position(|t| t.config.capacity >= size)
            .expect("write_block validated size against the largest tier");
        let mut incoming_bytes = vec![0u64; levels];
        incoming_bytes[target] = size;
        let mut per_level_moves: Vec<Vec<Move>> = vec![Vec::new(); levels];

        for level in target..levels {
            let slot = &inner.tiers[level];
            let need = (slot.used + incoming_bytes[level]).saturating_sub(slot.config.capacity);
            if need == 0 {
                continue;
            }
            let victims = inner.evictor.victims(slot.config.name, &slot.resident, need);
            let from = Location::Tier(slot.config.name);
            for id in victims {
                let vsize = slot.resident[&id];
                let to = match inner.tiers.get(level + 1) {
                    Some(below) if vsize <= below.config.capacity => {
                        incoming_bytes[level + 1] += vsize;
                        Location::Tier(below.config.name)
                    }
                    _ => Location::Backend,
                };
                per_level_moves[level].push(Move { block_id: id, size: vsize, from, to });
            }
        }

        let moves = per_level_moves.into_iter().rev().flatten().collect();
        (target, moves)
    }

    /// Direct-write plan: first tier with room takes the block with zero
    /// moves; if the store is full, one victim prefix leaves the deepest
    /// tier that can hold the block (normally the bottom tier) for the
    /// backend, and the block lands there.
    fn plan_direct(inner: &mut StoreInner, size: u64) -> (usize, Vec<Move>) {
        for (idx, slot) in inner.tiers.iter().enumerate() {
            if slot.free() >= size {
                return (idx, Vec::new());
            }
        }
        let bottom = inner
            .tiers
            .iter()
            .rposition(|t| t.config.capacity >= size)
            .expect("write_block validated size against the largest tier");
        let slot = &inner.tiers[bottom];
        let need = (slot.used + size).saturating_sub(slot.config.capacity);
        let victims = inner.evictor.victims(slot.config.name, &slot.resident, need);
        let from = Location::Tier(slot.config.name);
        let moves = victims
            .into_iter()
            .map(|id| {
                let vsize = slot.resident[&id];
                Move { block_id: id, size: vsize, from, to: Location::Backend }
            })
            .collect();
        (bottom, moves)
    }

    fn apply_moves(inner: &mut StoreInner, moves: &[Move]) {
        for m in moves {
            let Location::Tier(from) = m.from else { unreachable!("moves originate in tiers") };
            let from_idx = inner.tiers.iter().position(|t| t.config.name == from).expect("known tier");
            inner.tiers[from_idx].resident.remove(&m.block_id);
            inner.tiers[from_idx].used -= m.size;
            inner.evictor.on_remove(from, &m.block_id);
            match m.to {
                Location::Tier(to) => {
                    let to_idx = inner.tiers.iter().position(|t| t.config.name == to).expect("known tier");
                    inner.tiers[to_idx].resident.insert(m.block_id.clone(), m.size);
                    inner.tiers[to_idx].used += m.size;
                    inner.evictor.on_insert(to, &m.block_id);
                    if let Some(entry) = inner.catalog.get_mut(&m.block_id) {
                        entry.residency = Some(to);
                    }
                }
                Location::Backend => {
                    // Payload is already persisted; demotion just drops the cached copy.
                    inner.payloads.remove(&m.block_id);
                    if let Some(entry) = inner.catalog.get_mut(&m.block_id) {
                        entry.residency = None;
                    }
                }
            }
        }
    }

    /// Read a block's payload. Misses fetch from the backend and promote the
    /// block into the first tier with free space, never evicting.
    pub fn read_block(&self, id: &BlockId) -> Result<(Blob, ReadReceipt)> {
        let _guard = OpGuard::enter(&self.in_flight);
        let mut inner = self.inner.lock().unwrap();
        let entry = inner.catalog.get(id).cloned().ok_or_else(|| Error::UnknownBlock(id.to_string()))?;
        inner.metrics.reads += 1;
        match entry.residency {
            Some(tier) => {
                let bytes = inner.payloads.get(id).expect("resident block has cached payload").clone();
                inner.evictor.on_access(tier, id);
                let latency = self.cost.read_ms(Location::Tier(tier), entry.size);
                inner.metrics.hits += 1;
                inner.metrics.read_latency_ms += latency;
                Ok((
                    bytes.as_ref().clone(),
                    ReadReceipt {
                        block_id: id.clone(),
                        source: Location::Tier(tier),
                        hit: true,
                        modeled_latency_ms: latency,
                        promoted_to: None,
                    },
                ))
            }
            None => {
                let (bytes, _) = self.backend.fetch(&entry.payload_ref)?;
                let latency = self.cost.read_ms(Location::Backend, entry.size);
                inner.metrics.misses += 1;
                inner.metrics.read_latency_ms += latency;
                let promoted_to = Self::promote_into_first_fit(&mut inner, id, entry.size, &bytes);
                if let Some(tier) = promoted_to {
                    let promote_ms = self.cost.move_ms(Location::Backend, Location::Tier(tier), entry.size);
                    inner.metrics.promotions += 1;
                    inner.metrics.total_moves += 1;
                    inner.metrics.promote_latency_ms += promote_ms;
                }
                Ok((
                    bytes,
                    ReadReceipt {
                        block_id: id.clone(),
                        source: Location::Backend,
                        hit: false,
                        modeled_latency_ms: latency,
                        promoted_to,
                    },
                ))
            }
        }
    }

    fn promote_into_first_fit(inner: &mut StoreInner, id: &BlockId, size: u64, bytes: &Blob) -> Option<TierName> {
        let idx = inner.tiers.iter().position(|t| t.free() >= size)?;
        let tier = inner.tiers[idx].config.name;
        inner.tiers[idx].resident.insert(id.clone(), size);
        inner.tiers[idx].used += size;
        inner.evictor.on_insert(tier, id);
        inner.payloads.insert(id.clone(), Arc::new(bytes.clone()));
        if let Some(entry) = inner.catalog.get_mut(id) {
            entry.residency = Some(tier);
        }
        Some(tier)
    }

    /// Free bytes in one tier.
    pub fn free_space(&self, tier: TierName) -> Result<u64> {
        let inner = self.inner.lock().unwrap();
        inner
            .tiers
            .iter()
            .find(|t| t.config.name == tier)
            .map(TierSlot::free)
            .ok_or(Error::UnknownTier(tier))
    }

    /// Best-effort promotion of a block into `target`. Never evicts; a full
    /// target is reported, not forced.
    pub fn promote_block(&self, id: &BlockId, target: TierName) -> Result<PromotionRecord> {
        let _guard = OpGuard::enter(&self.in_flight);
        let mut inner = self.inner.lock().unwrap();
        if !inner.tiers.iter().any(|t| t.config.name == target) {
            return Err(Error::UnknownTier(target));
        }
        let entry = inner.catalog.get(id).cloned().ok_or_else(|| Error::UnknownBlock(id.to_string()))?;
        if entry.residency == Some(target) {
            return Ok(PromotionRecord { block_id: id.clone(), target, outcome: PromotionOutcome::AlreadyResident });
        }
        let target_idx = inner.tiers.iter().position(|t| t.config.name == target).unwrap();
        if inner.tiers[target_idx].free() < entry.size {
            return Ok(PromotionRecord { block_id: id.clone(), target, outcome: PromotionOutcome::InsufficientSpace });
        }
        let from = match entry.residency {
            Some(tier) => {
                let from_idx = inner.tiers.iter().position(|t| t.config.name == tier).unwrap();
                inner.tiers[from_idx].resident.remove(id);
                inner.tiers[from_idx].used -= entry.size;
                inner.evictor.on_remove(tier, id);
                Location::Tier(tier)
            }
            None => {
                let (bytes, _) = self.backend.fetch(&entry.payload_ref)?;
                inner.payloads.insert(id.clone(), Arc::new(bytes));
                Location::Backend
            }
        };
        inner.tiers[target_idx].resident.insert(id.clone(), entry.size);
        inner.tiers[target_idx].used += entry.size;
        inner.evictor.on_insert(target, id);
        if let Some(e) = inner.catalog.get_mut(id) {
            e.residency = Some(target);
        }
        let latency = self.cost.move_ms(from, Location::Tier(target), entry.size);
        inner.metrics.promotions += 1;
        inner.metrics.total_moves += 1;
        inner.metrics.promote_latency_ms += latency;
        Ok(PromotionRecord {
            block_id: id.clone(),
            target,
            outcome: PromotionOutcome::Promoted { from, modeled_latency_ms: latency },
        })
    }

    /// Demote cold blocks to the backend until at least `target_free` bytes
    /// are free across all tiers (or the tiers are empty). Victims come from
    /// the evictor's cold end, bottom tier first. This is the maintenance
    /// hook the replay harness runs during idle periods so best-effort
    /// promotion has room to work with.
    pub fn demote_cold(&self, target_free: u64) -> Vec<Move> {
        let _guard = OpGuard::enter(&self.in_flight);
        let mut inner = self.inner.lock().unwrap();
        let mut moves = Vec::new();
        for level in (0..inner.tiers.len()).rev() {
            loop {
                let total_free: u64 = inner.tiers.iter().map(TierSlot::free).sum();
                if total_free >= target_free {
                    break;
                }
                let slot = &inner.tiers[level];
                let name = slot.config.name;
                let victims = inner.evictor.victims(name, &slot.resident, 1);
                let Some(victim) = victims.into_iter().next() else { break };
                let size = slot.resident[&victim];
                let mv = Move { block_id: victim, size, from: Location::Tier(name), to: Location::Backend };
                Self::apply_moves(&mut inner, std::slice::from_ref(&mv));
                let cost = self.cost.move_ms(mv.from, mv.to, mv.size);
                inner.metrics.demotions += 1;
                inner.metrics.total_moves += 1;
                inner.metrics.demote_latency_ms += cost;
                moves.push(mv);
            }
            let total_free: u64 = inner.tiers.iter().map(TierSlot::free).sum();
            if total_free >= target_free {
                break;
            }
        }
        moves
    }

    pub fn metrics_snapshot(&self) -> StoreMetrics {
        self.inner.lock().unwrap().metrics
    }

    /// Occupancy views of all tiers, top to bottom.
    pub fn tier_states(&self) -> Vec<TierState> {
        let inner = self.inner.lock().unwrap();
        inner
            .tiers
            .iter()
            .map(|t| TierState { config: t.config.clone(), resident: t.resident.clone(), used: t.used })
            .collect()
    }

    /// Where a block currently resides, if it is known to the store.
    pub fn residency(&self, id: &BlockId) -> Option<Location> {
        let inner = self.inner.lock().unwrap();
        inner.catalog.get(id).map(|e| match e.residency {
            Some(tier) => Location::Tier(tier),
            None => Location::Backend,
        })
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.inner.lock().unwrap().catalog.contains_key(id)
    }

    pub fn block_by_path(&self, path: &ObjectPath) -> Option<BlockId> {
        self.inner.lock().unwrap().by_path.get(path).cloned()
    }

    pub fn block_size(&self, id: &BlockId) -> Option<u64> {
        self.inner.lock().unwrap().catalog.get(id).map(|e| e.size)
    }

    /// All known blocks with their accounted sizes, path-keyed.
    pub fn size_map(&self) -> BTreeMap<ObjectPath, u64> {
        let inner = self.inner.lock().unwrap();
        inner.catalog.values().map(|e| (e.payload_ref.clone(), e.size)).collect()
    }

    /// Panic if any structural invariant is broken. Test and soak helper.
    pub fn check_invariants(&self) {
        let inner = self.inner.lock().unwrap();
        let mut seen = BTreeMap::new();
        for slot in &inner.tiers {
            let sum: u64 = slot.resident.values().sum();
            assert_eq!(sum, slot.used, "tier {} used/accounting mismatch", slot.config.name);
            assert!(slot.used <= slot.config.capacity, "tier {} over capacity", slot.config.name);
            for id in slot.resident.keys() {
                assert!(
                    seen.insert(id.clone(), slot.config.name).is_none(),
                    "block {id} resident in more than one tier"
                );
                assert!(inner.payloads.contains_key(id), "resident block {id} lost its payload cache");
            }
        }
        for (id, entry) in &inner.catalog {
            assert_eq!(entry.residency, seen.get(id).copied(), "catalog residency stale for {id}");
        }
    }
}

struct OpGuard<'a> {
    counter: &'a AtomicU64,
}

impl<'a> OpGuard<'a> {
    fn enter(counter: &'a AtomicU64) -> Self {
        counter.fetch_add(1, Ordering::Relaxed);
        Self { counter }
    }
}

impl Drop for OpGuard<'_> {
    fn drop(&mut self) {
        self.counter.fetch_sub(1, Ordering::Relaxed);
    }
}
