//! Metadata store: session records with multi-attribute recall queries.
//!
//! Every record is indexed by time, location, user, session, and each label,
//! so any conjunction of predicate fields narrows through index postings
//! before a final verification pass. Results always come back sorted by
//! `(timestamp, session_id)` and match a full linear scan exactly — the
//! linear scan is the test oracle, not the implementation.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::backend::ObjectPath;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl SessionId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
}

impl std::fmt::Display for SessionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub String);

impl UserId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }
}

impl std::fmt::Display for UserId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One processed session: who, when, where, what was seen, and where the
/// raw payload lives. `(session_id, timestamp)` is the primary key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub timestamp: i64,
    pub duration: f64,
    pub location: String,
    pub labels: BTreeSet<String>,
    pub object_path: ObjectPath,
}

impl SessionRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey { timestamp: self.timestamp, session_id: self.session_id.clone() }
    }

    fn validate(&self) -> Result<()> {
        if self.location.is_empty() {
            return Err(Error::InvalidRecord("location must be non-empty".into()));
        }
        if !self.duration.is_finite() || self.duration < 0.0 {
            return Err(Error::InvalidRecord(format!("duration {} must be finite and >= 0", self.duration)));
        }
        Ok(())
    }
}

/// Primary key ordered by `(timestamp, session_id)`, which is also the
/// required result order for queries.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RecordKey {
    pub timestamp: i64,
    pub session_id: SessionId,
}

/// Conjunction of optional match conditions; at least one must be set.
/// `time_range` bounds are inclusive.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryPredicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_range: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_any: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_all: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<SessionId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<UserId>,
}

impl QueryPredicate {
    pub fn validate(&self) -> Result<()> {
        if self.time_range.is_none()
            && self.location.is_none()
            && self.labels_any.is_none()
            && self.labels_all.is_none()
            && self.session_id.is_none()
            && self.user_id.is_none()
        {
            return Err(Error::InvalidPredicate("at least one field must be set".into()));
        }
        if let Some((start, end)) = self.time_range {
            if start > end {
                return Err(Error::InvalidPredicate(format!("time range start {start} > end {end}")));
            }
        }
        Ok(())
    }

    /// Whether `record` satisfies every set field.
    pub fn matches(&self, record: &SessionRecord) -> bool {
        if let Some((start, end)) = self.time_range {
            if record.timestamp < start || record.timestamp > end {
                return false;
            }
        }
        if let Some(location) = &self.location {
            if &record.location != location {
                return false;
            }
        }
        if let Some(any) = &self.labels_any {
            if any.is_empty() || !any.iter().any(|l| record.labels.contains(l)) {
                return false;
            }
        }
        if let Some(all) = &self.labels_all {
            if !all.iter().all(|l| record.labels.contains(l)) {
                return false;
            }
        }
        if let Some(session_id) = &self.session_id {
            if &record.session_id != session_id {
                return false;
            }
        }
        if let Some(user_id) = &self.user_id {
            if &record.user_id != user_id {
                return false;
            }
        }
        true
    }
}

/// Label frequency within a filtered record set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelStat {
    pub label: String,
    pub count: u64,
}

type Postings = BTreeSet<RecordKey>;

/// In-memory metadata store with secondary indexes.
#[derive(Default)]
pub struct MetaStore {
    records: BTreeMap<RecordKey, SessionRecord>,
    by_location: BTreeMap<String, Postings>,
    by_user: BTreeMap<UserId, Postings>,
    by_session: BTreeMap<SessionId, Postings>,
    by_label: BTreeMap<String, Postings>,
}

impl MetaStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Insert a record, indexing every attribute. Duplicate keys are errors.
    pub fn put_record(&mut self, record: SessionRecord) -> Result<RecordKey> {
        record.validate()?;
        let key = record.key();
        if self.records.contains_key(&key) {
            return Err(Error::DuplicateRecord {
                session_id: record.session_id.to_string(),
                timestamp: record.timestamp,
            });
        }
        self.by_location.entry(record.location.clone()).or_default().insert(key.clone());
        self.by_user.entry(record.user_id.clone()).or_default().insert(key.clone());
        self.by_session.entry(record.session_id.clone()).or_default().insert(key.clone());
        for label in &record.labels {
            self.by_label.entry(label.clone()).or_default().insert(key.clone());
        }
        self.records.insert(key.clone(), record);
        Ok(key)
    }

    pub fn get_by_key(&self, session_id: &SessionId, timestamp: i64) -> Result<&SessionRecord> {
        let key = RecordKey { timestamp, session_id: session_id.clone() };
        self.records.get(&key).ok_or_else(|| Error::MissingRecord {
            session_id: session_id.to_string(),
            timestamp,
        })
    }

    /// All records in `(timestamp, session_id)` order.
    pub fn scan(&self) -> impl Iterator<Item = &SessionRecord> {
        self.records.values()
    }

    /// Records matching the conjunction of all set predicate fields, sorted
    /// by `(timestamp, session_id)`.
    pub fn query(&self, predicate: &QueryPredicate) -> Result<Vec<SessionRecord>> {
        predicate.validate()?;
        let mut candidate_sets: Vec<Postings> = Vec::new();
        if let Some(session_id) = &predicate.session_id {
            candidate_sets.push(self.by_session.get(session_id).cloned().unwrap_or_default());
        }
        if let Some(user_id) = &predicate.user_id {
            candidate_sets.push(self.by_user.get(user_id).cloned().unwrap_or_default());
        }
        if let Some(location) = &predicate.location {
            candidate_sets.push(self.by_location.get(location).cloned().unwrap_or_default());
        }
        if let Some(all) = &predicate.labels_all {
            for label in all {
                candidate_sets.push(self.by_label.get(label).cloned().unwrap_or_default());
            }
        }
        if let Some(any) = &predicate.labels_any {
            let mut union = Postings::new();
            for label in any {
                if let Some(postings) = self.by_label.get(label) {
                    union.extend(postings.iter().cloned());
                }
            }
            candidate_sets.push(union);
        }
        if let Some((start, end)) = predicate.time_range {
            candidate_sets.push(self.time_range_keys(start, end));
        }

        // Narrow via the smallest posting set, then verify the full predicate.
        candidate_sets.sort_by_key(Postings::len);
        let candidates: Vec<RecordKey> = match candidate_sets.into_iter().next() {
            Some(smallest) => smallest.into_iter().collect(),
            None => return Err(Error::InvalidPredicate("at least one field must be set".into())),
        };
        let mut out = Vec::new();
        for key in candidates {
            let record = &self.records[&key];
            if predicate.matches(record) {
                out.push(record.clone());
            }
        }
        // BTreeSet iteration already yields (timestamp, session_id) order.
        Ok(out)
    }

    fn time_range_keys(&self, start: i64, end: i64) -> Postings {
        use std::ops::Bound;
        let lower = Bound::Included(RecordKey { timestamp: start, session_id: SessionId::new("") });
        let upper = match end.checked_add(1) {
            Some(next) => Bound::Excluded(RecordKey { timestamp: next, session_id: SessionId::new("") }),
            None => Bound::Unbounded,
        };
        self.records.range((lower, upper)).map(|(k, _)| k.clone()).collect()
    }

    /// The `k` most frequent labels among records matching the optional
    /// location and time filters; counts descending, ties broken by label
    /// ascending.
    pub fn top_labels(
        &self,
        location: Option<&str>,
        time_range: Option<(i64, i64)>,
        k: usize,
    ) -> Result<Vec<LabelStat>> {
        if k == 0 {
            return Err(Error::InvalidPredicate("k must be at least 1".into()));
        }
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for record in self.records.values() {
            if let Some(loc) = location {
                if record.location != loc {
                    continue;
                }
            }
            if let Some((start, end)) = time_range {
                if record.timestamp < start || record.timestamp > end {
                    continue;
                }
            }
            for label in &record.labels {
                *counts.entry(label).or_insert(0) += 1;
            }
        }
        let mut stats: Vec<LabelStat> = counts
            .into_iter()
            .map(|(label, count)| LabelStat { label: label.to_string(), count })
            .collect();
        stats.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.label.cmp(&b.label)));
        stats.truncate(k);
        Ok(stats)
    }

    /// One record per line, field names exactly as stored.
    pub fn export_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for record in self.records.values() {
            serde_json::to_writer(&mut writer, record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn import_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut store = Self::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SessionRecord = serde_json::from_str(&line)?;
            store.put_record(record)?;
        }
        Ok(store)
    }

    /// Union of all index postings; must reconstruct the record set exactly.
    pub fn index_posting_union(&self) -> BTreeSet<RecordKey> {
        let mut union = BTreeSet::new();
        for postings in self
            .by_location
            .values()
            .chain(self.by_label.values())
            .chain(self.by_session.values())
            .chain(self.by_user.values())
        {
            union.extend(postings.iter().cloned());
        }
        union
    }
}
