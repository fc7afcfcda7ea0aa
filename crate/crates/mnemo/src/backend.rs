//! Unified persistent-object namespace over pluggable storage backends.
//!
//! A [`MountTable`] maps disjoint namespace prefixes onto backends. Naming is
//! transparent: the path of an object relative to its mount prefix is exactly
//! its path inside the backend, so `resolve` followed by re-prefixing is the
//! identity. Backends are deliberately small stand-ins for real object
//! stores; the descriptor `kind` is the extension point.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw object payload.
pub type Blob = Vec<u8>;

/// A normalized, slash-separated path in the unified namespace.
///
/// Always starts with `/`, has no empty segments and no `.`/`..` segments.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectPath(String);

impl ObjectPath {
    pub fn new(path: impl AsRef<str>) -> Result<Self> {
        let raw = path.as_ref();
        let invalid = |reason: &str| Error::InvalidPath {
            path: raw.to_string(),
            reason: reason.to_string(),
        };
        if !raw.starts_with('/') {
            return Err(invalid("must start with '/'"));
        }
        let mut segments = Vec::new();
        for seg in raw[1..].split('/') {
            match seg {
                "" => return Err(invalid("empty segment")),
                "." | ".." => return Err(invalid("relative segments are not allowed")),
                s => segments.push(s),
            }
        }
        if segments.is_empty() {
            return Err(invalid("path needs at least one segment"));
        }
        Ok(Self(format!("/{}", segments.join("/"))))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn segments(&self) -> impl Iterator<Item = &str> {
        self.0[1..].split('/')
    }

    /// Segment-wise prefix test: `/a` covers `/a/b` but not `/ab`.
    pub fn has_prefix(&self, prefix: &ObjectPath) -> bool {
        let mut mine = self.segments();
        for want in prefix.segments() {
            match mine.next() {
                Some(got) if got == want => {}
                _ => return false,
            }
        }
        true
    }

    /// Path relative to `prefix`, without a leading slash. Empty when the
    /// path equals the prefix.
    pub fn strip_prefix(&self, prefix: &ObjectPath) -> Option<String> {
        if !self.has_prefix(prefix) {
            return None;
        }
        let rest = &self.0[prefix.0.len()..];
        Some(rest.strip_prefix('/').unwrap_or(rest).to_string())
    }
}

impl fmt::Display for ObjectPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

// Paths appear in receipts and logs constantly; debug-print them as plain strings.
impl fmt::Debug for ObjectPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl std::str::FromStr for ObjectPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

impl Serialize for ObjectPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ObjectPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        ObjectPath::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// What a mount entry is backed by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendKind {
    /// Hash map of objects; zero modeled latency.
    InMemoryMock,
    /// One file per object under `root`, bytes verbatim.
    LocalDirectory { root: PathBuf },
    /// In-memory objects with a fixed injected latency per operation.
    DelayedMock { latency_ms: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub kind: BackendKind,
}

impl BackendDescriptor {
    pub fn in_memory(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: BackendKind::InMemoryMock }
    }

    pub fn local_directory(name: impl Into<String>, root: impl Into<PathBuf>) -> Self {
        Self { name: name.into(), kind: BackendKind::LocalDirectory { root: root.into() } }
    }

    pub fn delayed(name: impl Into<String>, latency_ms: f64) -> Self {
        Self { name: name.into(), kind: BackendKind::DelayedMock { latency_ms } }
    }
}

/// Acknowledgment of a persist, carrying the backend's own modeled latency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistReceipt {
    pub modeled_latency_ms: f64,
}

trait ObjectStore: Send + Sync {
    fn persist(&self, rel: &str, bytes: &[u8]) -> Result<f64>;
    fn fetch(&self, rel: &str) -> Result<(Blob, f64)>;
    fn list(&self, rel_prefix: &str) -> Vec<String>;
}

struct MemStore {
    objects: RwLock<BTreeMap<String, Blob>>,
    latency_ms: f64,
}

impl MemStore {
    fn new(latency_ms: f64) -> Self {
        Self { objects: RwLock::new(BTreeMap::new()), latency_ms }
    }
}

impl ObjectStore for MemStore {
    fn persist(&self, rel: &str, bytes: &[u8]) -> Result<f64> {
        self.objects.write().unwrap().insert(rel.to_string(), bytes.to_vec());
        Ok(self.latency_ms)
    }

    fn fetch(&self, rel: &str) -> Result<(Blob, f64)> {
        let objects = self.objects.read().unwrap();
        let bytes = objects.get(rel).ok_or_else(|| Error::MissingObject(rel.to_string()))?;
        Ok((bytes.clone(), self.latency_ms))
    }

    fn list(&self, rel_prefix: &str) -> Vec<String> {
        let objects = self.objects.read().unwrap();
        objects
            .keys()
            .filter(|k| rel_matches_prefix(k, rel_prefix))
            .cloned()
            .collect()
    }
}

fn rel_matches_prefix(rel: &str, prefix: &str) -> bool {
    if prefix.is_empty() {
        return true;
    }
    rel == prefix || rel.starts_with(prefix) && rel.as_bytes()[prefix.len()] == b'/'
}

struct DirStore {
    root: PathBuf,
}

impl DirStore {
    fn file_path(&self, rel: &str) -> PathBuf {
        // ObjectPath validation already rejected `..` and empty segments.
        self.root.join(rel)
    }

    fn collect(&self, dir: &Path, base: &Path, out: &mut Vec<String>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        for entry in entries.flatten() {
            let path = entry.path();
            if path.is_dir() {
                self.collect(&path, base, out);
            } else if let Ok(rel) = path.strip_prefix(base) {
                let rel = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect::<Vec<_>>()
                    .join("/");
                out.push(rel);
            }
        }
    }
}

impl ObjectStore for DirStore {
    fn persist(&self, rel: &str, bytes: &[u8]) -> Result<f64> {
        let path = self.file_path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
        Ok(0.0)
    }

    fn fetch(&self, rel: &str) -> Result<(Blob, f64)> {
        let path = self.file_path(rel);
        match std::fs::read(&path) {
            Ok(bytes) => Ok((bytes, 0.0)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::MissingObject(rel.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn list(&self, rel_prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        self.collect(&self.root, &self.root, &mut out);
        out.retain(|rel| rel_matches_prefix(rel, rel_prefix));
        out
    }
}

struct MountEntry {
    descriptor: BackendDescriptor,
    store: Arc<dyn ObjectStore>,
}

/// Prefix-routed namespace over mounted backends.
///
/// Mount mutation takes `&mut self` and is therefore exclusive with all I/O;
/// persist/fetch take `&self` and may run concurrently.
#[derive(Default)]
pub struct MountTable {
    entries: BTreeMap<ObjectPath, MountEntry>,
}

impl MountTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table with a single in-memory backend at `prefix`.
    pub fn single_in_memory(prefix: &str) -> Self {
        let mut table = Self::new();
        table
            .mount(ObjectPath::new(prefix).expect("valid prefix"), BackendDescriptor::in_memory("mem"))
            .expect("empty table accepts first mount");
        table
    }

    pub fn mount(&mut self, prefix: ObjectPath, backend: BackendDescriptor) -> Result<()> {
        for (existing, entry) in &self.entries {
            if existing.has_prefix(&prefix) || prefix.has_prefix(existing) {
                return Err(Error::OverlappingPrefix {
                    incoming: prefix.to_string(),
                    existing: existing.to_string(),
                });
            }
            if entry.descriptor.name == backend.name {
                return Err(Error::DuplicateBackendName(backend.name));
            }
        }
        let store: Arc<dyn ObjectStore> = match &backend.kind {
            BackendKind::InMemoryMock => Arc::new(MemStore::new(0.0)),
            BackendKind::DelayedMock { latency_ms } => Arc::new(MemStore::new(*latency_ms)),
            BackendKind::LocalDirectory { root } => {
                std::fs::create_dir_all(root)?;
                Arc::new(DirStore { root: root.clone() })
            }
        };
        self.entries.insert(prefix, MountEntry { descriptor: backend, store });
        Ok(())
    }

    pub fn mounts(&self) -> impl Iterator<Item = (&ObjectPath, &BackendDescriptor)> {
        self.entries.iter().map(|(p, e)| (p, &e.descriptor))
    }

    /// Backend and backend-relative path for `path`.
    pub fn resolve(&self, path: &ObjectPath) -> Result<(&BackendDescriptor, String)> {
        let (entry, rel) = self.entry_for(path)?;
        Ok((&entry.descriptor, rel))
    }

    fn entry_for(&self, path: &ObjectPath) -> Result<(&MountEntry, String)> {
        // Prefixes are disjoint, so at most one entry covers the path.
        for (prefix, entry) in &self.entries {
            if let Some(rel) = path.strip_prefix(prefix) {
                if rel.is_empty() {
                    return Err(Error::InvalidPath {
                        path: path.to_string(),
                        reason: "path equals a mount prefix".to_string(),
                    });
                }
                return Ok((entry, rel));
            }
        }
        Err(Error::Unmounted(path.to_string()))
    }

    pub fn persist(&self, path: &ObjectPath, bytes: &[u8]) -> Result<PersistReceipt> {
        let (entry, rel) = self.entry_for(path)?;
        let modeled_latency_ms = entry.store.persist(&rel, bytes)?;
        Ok(PersistReceipt { modeled_latency_ms })
    }

    /// Byte-identical payload plus the backend's modeled latency.
    pub fn fetch(&self, path: &ObjectPath) -> Result<(Blob, f64)> {
        let (entry, rel) = self.entry_for(path)?;
        entry.store.fetch(&rel).map_err(|e| match e {
            Error::MissingObject(_) => Error::MissingObject(path.to_string()),
            other => other,
        })
    }

    /// All persisted object paths under `prefix`, lexicographically sorted.
    /// Unmounted prefixes yield an empty list.
    pub fn list(&self, prefix: &ObjectPath) -> Vec<ObjectPath> {
        let mut out = Vec::new();
        for (mount_prefix, entry) in &self.entries {
            if let Some(rel) = prefix.strip_prefix(mount_prefix) {
                for obj in entry.store.list(&rel) {
                    out.push(ObjectPath::new(format!("{mount_prefix}/{obj}")).expect("stored paths are valid"));
                }
            } else if mount_prefix.has_prefix(prefix) {
                for obj in entry.store.list("") {
                    out.push(ObjectPath::new(format!("{mount_prefix}/{obj}")).expect("stored paths are valid"));
                }
            }
        }
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(s: &str) -> ObjectPath {
        ObjectPath::new(s).unwrap()
    }

    #[test]
    fn path_normalization_rejects_bad_shapes() {
        assert!(ObjectPath::new("relative/x").is_err());
        assert!(ObjectPath::new("/a//b").is_err());
        assert!(ObjectPath::new("/a/../b").is_err());
        assert!(ObjectPath::new("/").is_err());
        assert_eq!(path("/a/b").as_str(), "/a/b");
    }

    #[test]
    fn mount_then_resolve_strips_prefix() {
        let mut table = MountTable::new();
        table.mount(path("/b1"), BackendDescriptor::in_memory("b1")).unwrap();
        let (backend, rel) = table.resolve(&path("/b1/x/y")).unwrap();
        assert_eq!(backend.name, "b1");
        assert_eq!(rel, "x/y");
    }

    #[test]
    fn resolve_unmounted_path_errors() {
        let table = MountTable::single_in_memory("/b1");
        assert!(matches!(table.resolve(&path("/nowhere/z")), Err(Error::Unmounted(_))));
    }

    #[test]
    fn overlapping_prefix_rejected_both_directions() {
        let mut table = MountTable::new();
        table.mount(path("/a"), BackendDescriptor::in_memory("x")).unwrap();
        assert!(matches!(
            table.mount(path("/a/b"), BackendDescriptor::in_memory("y")),
            Err(Error::OverlappingPrefix { .. })
        ));
        assert!(matches!(
            table.mount(path("/a"), BackendDescriptor::in_memory("z")),
            Err(Error::OverlappingPrefix { .. })
        ));
        // Sibling with a shared string prefix is fine: /a vs /ab.
        table.mount(path("/ab"), BackendDescriptor::in_memory("w")).unwrap();
    }

    #[test]
    fn duplicate_backend_name_rejected() {
        let mut table = MountTable::new();
        table.mount(path("/a"), BackendDescriptor::in_memory("same")).unwrap();
        assert!(matches!(
            table.mount(path("/b"), BackendDescriptor::in_memory("same")),
            Err(Error::DuplicateBackendName(_))
        ));
    }

    #[test]
    fn persist_fetch_round_trip_in_memory() {
        let mut table = MountTable::new();
        table.mount(path("/s3mock"), BackendDescriptor::in_memory("s3mock")).unwrap();
        let p = path("/s3mock/video/1.bin");
        let payload = vec![7u8; 1024];
        table.persist(&p, &payload).unwrap();
        let (got, _) = table.fetch(&p).unwrap();
        assert_eq!(got, payload);
    }

    #[test]
    fn delayed_mock_reports_injected_latency() {
        let mut table = MountTable::new();
        table.mount(path("/slow"), BackendDescriptor::delayed("slow", 200.0)).unwrap();
        let receipt = table.persist(&path("/slow/x"), b"abc").unwrap();
        assert!(receipt.modeled_latency_ms >= 200.0);
        let (_, fetch_ms) = table.fetch(&path("/slow/x")).unwrap();
        assert!(fetch_ms >= 200.0);
    }

    #[test]
    fn local_directory_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut table = MountTable::new();
        table
            .mount(path("/disk"), BackendDescriptor::local_directory("disk", dir.path()))
            .unwrap();
        let payload: Vec<u8> = (0..=255).collect();
        table.persist(&path("/disk/a/b.bin"), &payload).unwrap();
        // File lands at mount root + relative path, verbatim bytes.
        let on_disk = std::fs::read(dir.path().join("a/b.bin")).unwrap();
        assert_eq!(on_disk, payload);
        let (got, _) = table.fetch(&path("/disk/a/b.bin")).unwrap();
        assert_eq!(got, payload);
        assert!(matches!(table.fetch(&path("/disk/missing")), Err(Error::MissingObject(_))));
    }

    #[test]
    fn two_disjoint_mounts_keep_objects_separate() {
        let mut table = MountTable::new();
        table.mount(path("/b1"), BackendDescriptor::in_memory("b1")).unwrap();
        table.mount(path("/b2"), BackendDescriptor::in_memory("b2")).unwrap();
        table.persist(&path("/b1/only"), b"one").unwrap();
        table.persist(&path("/b2/other"), b"two").unwrap();
        assert_eq!(table.list(&path("/b1")), vec![path("/b1/only")]);
        assert_eq!(table.list(&path("/b2")), vec![path("/b2/other")]);
        assert!(table.fetch(&path("/b1/other")).is_err());
    }

    #[test]
    fn list_empty_and_sorted() {
        let table = MountTable::single_in_memory("/m");
        assert!(table.list(&path("/m")).is_empty());
        for name in ["/m/c", "/m/a", "/m/b"] {
            table.persist(&path(name), b"x").unwrap();
        }
        let listed = table.list(&path("/m"));
        assert_eq!(listed, vec![path("/m/a"), path("/m/b"), path("/m/c")]);
    }

    #[test]
    fn randomized_persist_matches_reference_map() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let mut table = MountTable::new();
        table.mount(path("/b1"), BackendDescriptor::in_memory("b1")).unwrap();
        let mut reference: BTreeMap<ObjectPath, Vec<u8>> = BTreeMap::new();
        for i in 0..1_000 {
            let p = path(&format!("/b1/d{}/o{}", i % 7, i));
            let len = rng.random_range(1..256);
            let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            table.persist(&p, &payload).unwrap();
            reference.insert(p, payload);
        }
        let listed = table.list(&path("/b1"));
        let expected: Vec<ObjectPath> = reference.keys().cloned().collect();
        assert_eq!(listed, expected);
        for (p, payload) in &reference {
            let (got, _) = table.fetch(p).unwrap();
            assert_eq!(&got, payload, "payload mismatch at {p}");
        }
    }

    proptest! {
        #[test]
        fn resolve_then_reprefix_is_identity(segs in proptest::collection::vec("[a-z0-9]{1,8}", 1..5)) {
            let table = MountTable::single_in_memory("/mnt");
            let full = path(&format!("/mnt/{}", segs.join("/")));
            let (_, rel) = table.resolve(&full).unwrap();
            prop_assert_eq!(path(&format!("/mnt/{rel}")), full);
        }

        #[test]
        fn mount_sequence_keeps_prefixes_disjoint(names in proptest::collection::vec("[a-c]{1,3}", 1..12)) {
            let mut table = MountTable::new();
            for (i, name) in names.iter().enumerate() {
                let _ = table.mount(path(&format!("/{name}")), BackendDescriptor::in_memory(format!("b{i}")));
            }
            let prefixes: Vec<ObjectPath> = table.mounts().map(|(p, _)| p.clone()).collect();
            for a in &prefixes {
                for b in &prefixes {
                    if a != b {
                        prop_assert!(!a.has_prefix(b), "{a} overlaps {b}");
                    }
                }
            }
        }
    }
}
