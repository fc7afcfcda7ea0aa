//! Access-log-driven prefetch planning and best-effort execution.
//!
//! Planning is a pure function of a log snapshot: rank (groups, labels, or
//! locations), expand to candidate objects, then fill a byte budget greedily
//! with whole objects. The day splits into six four-hour periods; the
//! time-period strategy ranks by the same period of the previous day, which
//! pays off when access patterns repeat daily. Execution promotes candidates
//! into the first tier with room, never evicts, and only proceeds while the
//! measured load sits below the idleness threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::backend::ObjectPath;
use crate::error::{Error, Result};
use crate::meta::MetaStore;
use crate::tier::{PromotionOutcome, TieredStore};

/// Seconds per prefetch period (four hours).
pub const PERIOD_SECONDS: i64 = 14_400;
/// Periods per day.
pub const PERIODS_PER_DAY: usize = 6;
const DAY_SECONDS: i64 = 86_400;

/// Which four-hour slot of the day a timestamp falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodIndex(pub usize);

impl PeriodIndex {
    pub fn of(timestamp: i64) -> Self {
        let seconds_into_day = timestamp.rem_euclid(DAY_SECONDS);
        Self((seconds_into_day / PERIOD_SECONDS) as usize)
    }
}

/// The same period's window on the previous day: `[start, end)`.
pub fn previous_day_window(now: i64) -> (i64, i64) {
    let day_start = now - now.rem_euclid(DAY_SECONDS);
    let period = PeriodIndex::of(now).0 as i64;
    let start = day_start - DAY_SECONDS + period * PERIOD_SECONDS;
    (start, start + PERIOD_SECONDS)
}

/// One observed access to a stored object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessLogEntry {
    pub timestamp: i64,
    pub object_path: ObjectPath,
    pub table_or_group: String,
    pub labels: BTreeSet<String>,
    pub location: String,
}

/// Append-only access log with non-decreasing timestamps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AccessLog {
    entries: Vec<AccessLogEntry>,
}

impl AccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_access(&mut self, entry: AccessLogEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.timestamp < last.timestamp {
                return Err(Error::TimeRegression { new: entry.timestamp, last: last.timestamp });
            }
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AccessLogEntry> {
        self.entries.iter()
    }

    /// One JSON entry per line.
    pub fn export_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut writer, entry)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn import_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut log = Self::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            log.record_access(serde_json::from_str(&line)?)?;
        }
        Ok(log)
    }
}

/// Prefetch candidate-selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    None,
    MostRequested,
    TimePeriod,
    LabelHot,
    LocationHot,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::None => "none",
            Strategy::MostRequested => "most-requested",
            Strategy::TimePeriod => "time-period",
            Strategy::LabelHot => "label-hot",
            Strategy::LocationHot => "location-hot",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Strategy::None),
            "most-requested" => Ok(Strategy::MostRequested),
            "time-period" => Ok(Strategy::TimePeriod),
            "label-hot" => Ok(Strategy::LabelHot),
            "location-hot" => Ok(Strategy::LocationHot),
            other => Err(Error::InvalidConfig(format!("unknown prefetch strategy `{other}`"))),
        }
    }
}

/// Object sizes for budget accounting, keyed by path.
pub type SizeMap = BTreeMap<ObjectPath, u64>;

/// An ordered, deduplicated candidate list whose total size fits the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefetchPlan {
    pub strategy: Strategy,
    pub candidates: Vec<ObjectPath>,
    pub byte_budget: u64,
    pub planned_bytes: u64,
}

impl PrefetchPlan {
    fn empty(strategy: Strategy, byte_budget: u64) -> Self {
        Self { strategy, candidates: Vec::new(), byte_budget, planned_bytes: 0 }
    }

    /// Greedy whole-object fill: keep candidates that fit the remaining
    /// budget, in the given order, skipping any already taken.
    fn fill(strategy: Strategy, ordered: impl IntoIterator<Item = ObjectPath>, byte_budget: u64, sizes: &SizeMap) -> Self {
        let mut plan = Self::empty(strategy, byte_budget);
        let mut seen = BTreeSet::new();
        for path in ordered {
            if !seen.insert(path.clone()) {
                continue;
            }
            let Some(&size) = sizes.get(&path) else { continue };
            if plan.planned_bytes + size <= byte_budget {
                plan.planned_bytes += size;
                plan.candidates.push(path);
            }
        }
        plan
    }
}

/// Access counts per group, with objects ranked inside each group.
fn group_ranking<'a>(entries: impl Iterator<Item = &'a AccessLogEntry>) -> Vec<ObjectPath> {
    let mut group_counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut object_counts: BTreeMap<&str, BTreeMap<&ObjectPath, u64>> = BTreeMap::new();
    for entry in entries {
        *group_counts.entry(&entry.table_or_group).or_insert(0) += 1;
        *object_counts
            .entry(&entry.table_or_group)
            .or_default()
            .entry(&entry.object_path)
            .or_insert(0) += 1;
    }
    let mut groups: Vec<(&str, u64)> = group_counts.into_iter().collect();
    groups.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut ordered = Vec::new();
    for (group, _) in groups {
        let mut objects: Vec<(&ObjectPath, u64)> = object_counts[group].iter().map(|(p, c)| (*p, *c)).collect();
        objects.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ordered.extend(objects.into_iter().map(|(p, _)| p.clone()));
    }
    ordered
}

/// Prefetch the objects of the most-requested groups, all time.
pub fn plan_most_requested(log: &AccessLog, byte_budget: u64, sizes: &SizeMap) -> PrefetchPlan {
    PrefetchPlan::fill(Strategy::MostRequested, group_ranking(log.iter()), byte_budget, sizes)
}

/// Prefetch the objects of the groups most requested during the same period
/// of the previous day.
pub fn plan_time_period(log: &AccessLog, now: i64, byte_budget: u64, sizes: &SizeMap) -> PrefetchPlan {
    let (start, end) = previous_day_window(now);
    let window = log.iter().filter(|e| e.timestamp >= start && e.timestamp < end);
    PrefetchPlan::fill(Strategy::TimePeriod, group_ranking(window), byte_budget, sizes)
}

fn key_ranking<'a>(
    entries: impl Iterator<Item = &'a AccessLogEntry>,
    keys_of: impl Fn(&'a AccessLogEntry) -> Vec<&'a str>,
) -> Vec<String> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for entry in entries {
        for key in keys_of(entry) {
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().map(|(k, _)| k.to_string()).collect()
}

/// Prefetch videos carrying the hottest accessed labels.
pub fn plan_label_hot(log: &AccessLog, meta: &MetaStore, byte_budget: u64, sizes: &SizeMap) -> PrefetchPlan {
    let labels = key_ranking(log.iter(), |e| e.labels.iter().map(String::as_str).collect());
    let mut ordered = Vec::new();
    for label in labels {
        let predicate = crate::meta::QueryPredicate {
            labels_any: Some([label].into_iter().collect()),
            ..Default::default()
        };
        for record in meta.query(&predicate).expect("single-label predicate is valid") {
            ordered.push(record.object_path);
        }
    }
    PrefetchPlan::fill(Strategy::LabelHot, ordered, byte_budget, sizes)
}

/// Prefetch videos recorded at the most searched locations.
pub fn plan_location_hot(log: &AccessLog, meta: &MetaStore, byte_budget: u64, sizes: &SizeMap) -> PrefetchPlan {
    let locations = key_ranking(log.iter(), |e| vec![e.location.as_str()]);
    let mut ordered = Vec::new();
    for location in locations {
        let predicate = crate::meta::QueryPredicate { location: Some(location), ..Default::default() };
        for record in meta.query(&predicate).expect("location predicate is valid") {
            ordered.push(record.object_path);
        }
    }
    PrefetchPlan::fill(Strategy::LocationHot, ordered, byte_budget, sizes)
}

/// Dispatch on strategy. `Strategy::None` plans nothing.
pub fn plan_for(
    strategy: Strategy,
    log: &AccessLog,
    meta: &MetaStore,
    now: i64,
    byte_budget: u64,
    sizes: &SizeMap,
) -> PrefetchPlan {
    match strategy {
        Strategy::None => PrefetchPlan::empty(Strategy::None, byte_budget),
        Strategy::MostRequested => plan_most_requested(log, byte_budget, sizes),
        Strategy::TimePeriod => plan_time_period(log, now, byte_budget, sizes),
        Strategy::LabelHot => plan_label_hot(log, meta, byte_budget, sizes),
        Strategy::LocationHot => plan_location_hot(log, meta, byte_budget, sizes),
    }
}

/// Why a candidate was not promoted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    GateClosed,
    InsufficientSpace,
    UnknownObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "status")]
pub enum CandidateOutcome {
    Promoted,
    /// Already tier-resident; the goal state, counted as promoted.
    AlreadyResident,
    Skipped { reason: SkipReason },
}

/// Per-candidate accounting for one plan execution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PromotionReport {
    pub attempted: u64,
    pub promoted: u64,
    pub skipped: u64,
    pub outcomes: Vec<(ObjectPath, CandidateOutcome)>,
}

/// Execute a plan against the store: promote each candidate into the first
/// tier with room (never evicting), but only while `load()` stays below
/// `load_threshold`. Every candidate is accounted for in the report.
pub fn execute_plan(
    plan: &PrefetchPlan,
    store: &TieredStore,
    load_threshold: f64,
    load: impl Fn() -> f64,
) -> PromotionReport {
    let mut report = PromotionReport::default();
    for path in &plan.candidates {
        if load() >= load_threshold {
            report.skipped += 1;
            report.outcomes.push((path.clone(), CandidateOutcome::Skipped { reason: SkipReason::GateClosed }));
            continue;
        }
        report.attempted += 1;
        let Some(id) = store.block_by_path(path) else {
            report.skipped += 1;
            report.outcomes.push((path.clone(), CandidateOutcome::Skipped { reason: SkipReason::UnknownObject }));
            continue;
        };
        let size = store.block_size(&id).unwrap_or(0);
        let target = store
            .tier_states()
            .into_iter()
            .find(|t| t.free() >= size)
            .map(|t| t.config.name);
        let Some(target) = target else {
            report.skipped += 1;
            report
                .outcomes
                .push((path.clone(), CandidateOutcome::Skipped { reason: SkipReason::InsufficientSpace }));
            continue;
        };
        match store.promote_block(&id, target) {
            Ok(record) => match record.outcome {
                PromotionOutcome::Promoted { .. } => {
                    report.promoted += 1;
                    report.outcomes.push((path.clone(), CandidateOutcome::Promoted));
                }
                PromotionOutcome::AlreadyResident => {
                    report.promoted += 1;
                    report.outcomes.push((path.clone(), CandidateOutcome::AlreadyResident));
                }
                PromotionOutcome::InsufficientSpace => {
                    report.skipped += 1;
                    report
                        .outcomes
                        .push((path.clone(), CandidateOutcome::Skipped { reason: SkipReason::InsufficientSpace }));
                }
            },
            Err(_) => {
                report.skipped += 1;
                report.outcomes.push((path.clone(), CandidateOutcome::Skipped { reason: SkipReason::UnknownObject }));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MountTable;
    use crate::meta::{SessionId, SessionRecord, UserId};
    use crate::tier::{AllocatorKind, Block, TierConfig, TierName, TieredStore};
    use std::sync::Arc;

    fn path(s: &str) -> ObjectPath {
        ObjectPath::new(s).unwrap()
    }

    fn entry(ts: i64, object: &str, group: &str, labels: &[&str], location: &str) -> AccessLogEntry {
        AccessLogEntry {
            timestamp: ts,
            object_path: path(object),
            table_or_group: group.to_string(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            location: location.to_string(),
        }
    }

    #[test]
    fn period_arithmetic_splits_day_into_six() {
        assert_eq!(PeriodIndex::of(0), PeriodIndex(0));
        assert_eq!(PeriodIndex::of(14_399), PeriodIndex(0));
        assert_eq!(PeriodIndex::of(14_400), PeriodIndex(1));
        assert_eq!(PeriodIndex::of(86_399), PeriodIndex(5));
        assert_eq!(PeriodIndex::of(86_400), PeriodIndex(0));
        // Tuesday 09:00 (day 1 of the sim, 9h in) sits in period 2, and its
        // window is Monday 08:00-12:00.
        let tuesday_9am = DAY_SECONDS + 9 * 3600;
        assert_eq!(PeriodIndex::of(tuesday_9am), PeriodIndex(2));
        let (start, end) = previous_day_window(tuesday_9am);
        assert_eq!(start, 8 * 3600);
        assert_eq!(end, 12 * 3600);
    }

    #[test]
    fn log_appends_and_rejects_regressions() {
        let mut log = AccessLog::new();
        log.record_access(entry(10, "/o/a", "g", &[], "x")).unwrap();
        assert_eq!(log.len(), 1);
        log.record_access(entry(10, "/o/b", "g", &[], "x")).unwrap(); // equal is fine
        assert!(matches!(
            log.record_access(entry(9, "/o/c", "g", &[], "x")),
            Err(Error::TimeRegression { .. })
        ));
    }

    #[test]
    fn log_counts_match_reference_counter() {
        let mut log = AccessLog::new();
        let mut reference: BTreeMap<String, u64> = BTreeMap::new();
        for i in 0..10_000i64 {
            let group = format!("g{}", i % 13);
            log.record_access(entry(i, &format!("/o/{}", i % 100), &group, &[], "x")).unwrap();
            *reference.entry(group).or_insert(0) += 1;
        }
        let mut counted: BTreeMap<String, u64> = BTreeMap::new();
        for e in log.iter() {
            *counted.entry(e.table_or_group.clone()).or_insert(0) += 1;
        }
        assert_eq!(counted, reference);
    }

    #[test]
    fn log_jsonl_round_trip() {
        let mut log = AccessLog::new();
        log.record_access(entry(5, "/o/a", "g1", &["dog"], "kitchen")).unwrap();
        log.record_access(entry(7, "/o/b", "g2", &[], "office")).unwrap();
        let mut buf = Vec::new();
        log.export_jsonl(&mut buf).unwrap();
        let reloaded = AccessLog::import_jsonl(buf.as_slice()).unwrap();
        assert_eq!(reloaded, log);
    }

    fn sizes_of(pairs: &[(&str, u64)]) -> SizeMap {
        pairs.iter().map(|(p, s)| (path(p), *s)).collect()
    }

    #[test]
    fn most_requested_ranks_groups_and_respects_budget() {
        let mut log = AccessLog::new();
        for i in 0..5 {
            log.record_access(entry(i, "/o/a1", "A", &[], "x")).unwrap();
        }
        for i in 5..8 {
            log.record_access(entry(i, "/o/b1", "B", &[], "x")).unwrap();
        }
        let sizes = sizes_of(&[("/o/a1", 10), ("/o/b1", 10)]);
        let plan = plan_most_requested(&log, 10, &sizes);
        assert_eq!(plan.candidates, vec![path("/o/a1")]);
        assert_eq!(plan.planned_bytes, 10);

        // Budget smaller than the smallest object: empty but valid.
        let tiny = plan_most_requested(&log, 5, &sizes);
        assert!(tiny.candidates.is_empty());
        assert_eq!(tiny.planned_bytes, 0);

        // Empty log: empty plan.
        let empty = plan_most_requested(&AccessLog::new(), 100, &sizes);
        assert!(empty.candidates.is_empty());
    }

    #[test]
    fn time_period_ranks_only_previous_day_window() {
        let mut log = AccessLog::new();
        // Day 0: group C is hot in period 2 (08:00-12:00)...
        for i in 0..10 {
            log.record_access(entry(8 * 3600 + i, "/o/c1", "C", &[], "x")).unwrap();
        }
        // ...but group D dominates all-time in other periods.
        for i in 0..50 {
            log.record_access(entry(13 * 3600 + i, "/o/d1", "D", &[], "x")).unwrap();
        }
        let sizes = sizes_of(&[("/o/c1", 1), ("/o/d1", 1)]);
        let now = DAY_SECONDS + 9 * 3600; // day 1, period 2
        let period_plan = plan_time_period(&log, now, 10, &sizes);
        assert_eq!(period_plan.candidates, vec![path("/o/c1")]);
        let all_time = plan_most_requested(&log, 10, &sizes);
        assert_eq!(all_time.candidates[0], path("/o/d1"));

        // No accesses in the previous-day window: empty plan.
        let empty = plan_time_period(&log, now + 2 * PERIOD_SECONDS, 10, &sizes);
        assert!(empty.candidates.is_empty());
    }

    fn meta_with(records: &[(&str, i64, &str, &[&str], &str)]) -> MetaStore {
        let mut meta = MetaStore::new();
        for (session, ts, location, labels, object) in records {
            meta.put_record(SessionRecord {
                session_id: SessionId::new(*session),
                user_id: UserId::new("u"),
                timestamp: *ts,
                duration: 5.0,
                location: location.to_string(),
                labels: labels.iter().map(|s| s.to_string()).collect(),
                object_path: path(object),
            })
            .unwrap();
        }
        meta
    }

    #[test]
    fn label_hot_prefetches_hottest_labels_videos() {
        let meta = meta_with(&[
            ("s1", 1, "x", &["dog"], "/o/dog1"),
            ("s2", 2, "x", &["dog"], "/o/dog2"),
            ("s3", 3, "x", &["cat"], "/o/cat1"),
        ]);
        let mut log = AccessLog::new();
        for i in 0..4 {
            log.record_access(entry(i, "/o/dog1", "g", &["dog"], "x")).unwrap();
        }
        log.record_access(entry(9, "/o/cat1", "g", &["cat"], "x")).unwrap();
        let sizes = sizes_of(&[("/o/dog1", 1), ("/o/dog2", 1), ("/o/cat1", 1)]);
        let plan = plan_label_hot(&log, &meta, 2, &sizes);
        assert_eq!(plan.candidates, vec![path("/o/dog1"), path("/o/dog2")]);

        // No labeled accesses at all: empty plan.
        let mut unlabeled = AccessLog::new();
        unlabeled.record_access(entry(1, "/o/dog1", "g", &[], "x")).unwrap();
        assert!(plan_label_hot(&unlabeled, &meta, 2, &sizes).candidates.is_empty());
    }

    #[test]
    fn equal_label_counts_break_lexicographically() {
        let meta = meta_with(&[
            ("s1", 1, "x", &["dog"], "/o/dog1"),
            ("s2", 2, "x", &["ant"], "/o/ant1"),
        ]);
        let mut log = AccessLog::new();
        log.record_access(entry(1, "/o/dog1", "g", &["dog"], "x")).unwrap();
        log.record_access(entry(2, "/o/ant1", "g", &["ant"], "x")).unwrap();
        let sizes = sizes_of(&[("/o/dog1", 1), ("/o/ant1", 1)]);
        let plan = plan_label_hot(&log, &meta, 1, &sizes);
        assert_eq!(plan.candidates, vec![path("/o/ant1")]);
    }

    #[test]
    fn location_hot_mirrors_label_hot() {
        let meta = meta_with(&[
            ("s1", 1, "bedroom", &[], "/o/b1"),
            ("s2", 2, "bedroom", &[], "/o/b2"),
            ("s3", 3, "kitchen", &[], "/o/k1"),
        ]);
        let mut log = AccessLog::new();
        for i in 0..3 {
            log.record_access(entry(i, "/o/b1", "g", &[], "bedroom")).unwrap();
        }
        let sizes = sizes_of(&[("/o/b1", 1), ("/o/b2", 1), ("/o/k1", 1)]);
        let plan = plan_location_hot(&log, &meta, 10, &sizes);
        // Only accessed locations rank; kitchen was never searched.
        assert_eq!(plan.candidates, vec![path("/o/b1"), path("/o/b2")]);
        assert!(plan_location_hot(&AccessLog::new(), &meta, 10, &sizes).candidates.is_empty());

        // Equal-count locations break lexicographically: bedroom then kitchen.
        log.record_access(entry(5, "/o/k1", "g", &[], "kitchen")).unwrap();
        log.record_access(entry(6, "/o/k1", "g", &[], "kitchen")).unwrap();
        log.record_access(entry(7, "/o/k1", "g", &[], "kitchen")).unwrap();
        let tied = plan_location_hot(&log, &meta, 10, &sizes);
        assert_eq!(tied.candidates, vec![path("/o/b1"), path("/o/b2"), path("/o/k1")]);
    }

    #[test]
    fn plans_are_deterministic() {
        let meta = meta_with(&[("s1", 1, "x", &["dog"], "/o/a")]);
        let mut log = AccessLog::new();
        for i in 0..20 {
            log.record_access(entry(i, "/o/a", &format!("g{}", i % 3), &["dog"], "x")).unwrap();
        }
        let sizes = sizes_of(&[("/o/a", 1)]);
        for strategy in [Strategy::MostRequested, Strategy::TimePeriod, Strategy::LabelHot, Strategy::LocationHot] {
            let a = plan_for(strategy, &log, &meta, DAY_SECONDS, 10, &sizes);
            let b = plan_for(strategy, &log, &meta, DAY_SECONDS, 10, &sizes);
            assert_eq!(a, b);
        }
    }

    fn store_with_blocks(caps: [u64; 3], blocks: &[(&str, u64)]) -> TieredStore {
        let tiers = vec![
            TierConfig::new(TierName::Memory, caps[0], 0.1, 650e6),
            TierConfig::new(TierName::Ssd, caps[1], 1.0, 120e6),
            TierConfig::new(TierName::Hdd, caps[2], 5.0, 60e6),
        ];
        let store = TieredStore::create(
            tiers,
            AllocatorKind::DirectWrite,
            "lru",
            Arc::new(MountTable::single_in_memory("/o")),
        )
        .unwrap();
        for (name, size) in blocks {
            store.write_block(&Block::new(*name, *size, path(&format!("/o/{name}"))), &vec![1]).unwrap();
        }
        store
    }

    /// Memory ends up with room for two unit blocks while `v` and `w` sit in
    /// the backend: saturate, overshoot the bottom-tier demotion, then shift
    /// two memory residents down into the freed hdd space.
    fn store_with_two_free_memory_slots() -> TieredStore {
        let store = store_with_blocks(
            [3, 1, 4],
            &[("a", 1), ("b", 1), ("c", 1), ("s", 1), ("v", 1), ("w", 3)],
        );
        // Layout now: memory[a,b,c] ssd[s] hdd[v,w].
        // z(2) needs 2 bytes at the bottom; the LRU prefix [v, w] frees 4,
        // so both demote to the backend and hdd keeps 2 free bytes.
        store.write_block(&Block::new("z", 2, path("/o/z")), &vec![1]).unwrap();
        assert_eq!(store.residency(&crate::tier::BlockId::new("v")), Some(crate::tier::Location::Backend));
        assert_eq!(store.residency(&crate::tier::BlockId::new("w")), Some(crate::tier::Location::Backend));
        // Move a and b down into the freed hdd bytes: memory now has 2 free.
        store.promote_block(&crate::tier::BlockId::new("a"), TierName::Hdd).unwrap();
        store.promote_block(&crate::tier::BlockId::new("b"), TierName::Hdd).unwrap();
        assert_eq!(store.free_space(TierName::Memory).unwrap(), 2);
        store
    }

    #[test]
    fn execute_plan_promotes_two_and_reports_the_third() {
        let store = store_with_two_free_memory_slots();
        let plan = PrefetchPlan {
            strategy: Strategy::MostRequested,
            candidates: vec![path("/o/v"), path("/o/w"), path("/o/s")],
            byte_budget: 5,
            planned_bytes: 5,
        };
        let report = execute_plan(&plan, &store, 1.0, || 0.0);
        assert_eq!(report.attempted, 3);
        assert_eq!(report.promoted, 2); // v from backend, s from ssd
        assert_eq!(report.skipped, 1); // w needs 3 bytes, nowhere has them
        assert_eq!(
            report.outcomes[1].1,
            CandidateOutcome::Skipped { reason: SkipReason::InsufficientSpace }
        );
        store.check_invariants();
    }

    #[test]
    fn execute_plan_gate_and_empty_plan() {
        let store = store_with_two_free_memory_slots();
        let plan = PrefetchPlan {
            strategy: Strategy::MostRequested,
            candidates: vec![path("/o/v"), path("/o/w")],
            byte_budget: 4,
            planned_bytes: 4,
        };
        // Load above threshold throughout: nothing attempted, all accounted.
        let closed = execute_plan(&plan, &store, 1.0, || 5.0);
        assert_eq!(closed.attempted, 0);
        assert_eq!(closed.skipped, 2);
        assert!(closed
            .outcomes
            .iter()
            .all(|(_, o)| matches!(o, CandidateOutcome::Skipped { reason: SkipReason::GateClosed })));

        let empty = execute_plan(&PrefetchPlan::empty(Strategy::None, 10), &store, 1.0, || 0.0);
        assert_eq!(empty, PromotionReport::default());

        // Unknown object paths are skipped, not fatal.
        let ghost = PrefetchPlan {
            strategy: Strategy::MostRequested,
            candidates: vec![path("/o/ghost")],
            byte_budget: 4,
            planned_bytes: 0,
        };
        let report = execute_plan(&ghost, &store, 1.0, || 0.0);
        assert_eq!(report.outcomes[0].1, CandidateOutcome::Skipped { reason: SkipReason::UnknownObject });
    }
}
