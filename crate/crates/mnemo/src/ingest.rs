//! Ingest pipeline: video stream in, session record out.
//!
//! Frames are sampled on a fixed time grid, each selected frame goes through
//! a label extractor, the raw payload is written to the tiered store, and the
//! assembled record lands in the metadata store. The built-in extractor is a
//! deterministic stand-in for a real recognition engine: it hashes frame
//! bytes into vocabulary indices, so identical bytes always yield identical
//! labels. A real engine plugs in behind the external-endpoint kind.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::ObjectPath;
use crate::error::{Error, Result};
use crate::meta::{MetaStore, SessionId, SessionRecord, UserId};
use crate::sample::{pre_learning_decide, pre_memorization_decide, InclusionPolicy, StreamMeta};
use crate::tier::{Block, TieredStore, WriteReceipt};

/// One captured frame: seconds from stream start plus raw bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub offset: f64,
    #[serde(with = "frame_bytes")]
    pub bytes: Vec<u8>,
}

// Frame bytes travel as hex in JSON headers; streams are small by the time
// they are serialized this way.
mod frame_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], serializer: S) -> Result<S::Ok, S::Error> {
        let hex: String = bytes.iter().map(|b| format!("{b:02x}")).collect();
        serializer.serialize_str(&hex)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<u8>, D::Error> {
        let hex = String::deserialize(deserializer)?;
        if hex.len() % 2 != 0 {
            return Err(serde::de::Error::custom("odd-length hex"));
        }
        (0..hex.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// An incoming recording session. `nominal_size` is the accounted payload
/// size in bytes; when absent, the encoded payload length is used. The
/// workload generator sets it so traces can model large media files without
/// materializing their bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoStream {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub start_timestamp: i64,
    pub duration: f64,
    pub location: String,
    pub frames: Vec<Frame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_size: Option<u64>,
}

impl VideoStream {
    pub fn validate(&self) -> Result<()> {
        if !self.duration.is_finite() || self.duration < 0.0 {
            return Err(Error::InvalidStream("duration must be finite and >= 0".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for frame in &self.frames {
            if frame.offset <= prev {
                return Err(Error::InvalidStream(format!(
                    "frame offsets must be strictly increasing ({} after {prev})",
                    frame.offset
                )));
            }
            if frame.offset < 0.0 || frame.offset > self.duration {
                return Err(Error::InvalidStream(format!(
                    "frame offset {} outside [0, {}]",
                    frame.offset, self.duration
                )));
            }
            prev = frame.offset;
        }
        Ok(())
    }

    /// Deterministic byte encoding of the stream: a header line followed by
    /// each frame's offset and bytes. This is the payload written to storage.
    pub fn payload_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(
            format!(
                "stream {} {} {} {} {}\n",
                self.session_id, self.user_id, self.start_timestamp, self.duration, self.location
            )
            .as_bytes(),
        );
        for frame in &self.frames {
            out.extend_from_slice(format!("frame {} {}\n", frame.offset, frame.bytes.len()).as_bytes());
            out.extend_from_slice(&frame.bytes);
        }
        out
    }

    /// Accounted block size for this stream.
    pub fn block_size(&self) -> u64 {
        self.nominal_size.unwrap_or_else(|| self.payload_bytes().len() as u64).max(1)
    }
}

/// Frame-sampling grid spacing in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePolicy {
    pub interval: f64,
}

impl Default for FramePolicy {
    fn default() -> Self {
        Self { interval: 2.0 }
    }
}

impl FramePolicy {
    pub fn new(interval: f64) -> Result<Self> {
        if !interval.is_finite() || interval <= 0.0 {
            return Err(Error::InvalidFramePolicy(format!("interval {interval} must be positive")));
        }
        Ok(Self { interval })
    }
}

/// For each grid time `t = 0, interval, 2*interval, ... <= duration`, select
/// the earliest frame at or after `t`; duplicates collapse. Returns frame
/// indices in ascending order.
pub fn schedule_frames(stream: &VideoStream, policy: &FramePolicy) -> Vec<usize> {
    let mut selected = Vec::new();
    if stream.frames.is_empty() {
        return selected;
    }
    let mut grid_steps = (stream.duration / policy.interval).floor() as u64;
    // Guard against duration being an exact multiple plus float noise.
    if (grid_steps + 1) as f64 * policy.interval <= stream.duration {
        grid_steps += 1;
    }
    let mut cursor = 0usize;
    for step in 0..=grid_steps {
        let t = step as f64 * policy.interval;
        while cursor < stream.frames.len() && stream.frames[cursor].offset < t {
            cursor += 1;
        }
        if cursor == stream.frames.len() {
            break;
        }
        if selected.last() != Some(&cursor) {
            selected.push(cursor);
        }
    }
    selected
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    /// Deterministic: hash frame bytes into vocabulary indices.
    SyntheticHash,
    /// POST frame bytes to an HTTP endpoint returning a JSON label array.
    ExternalEndpoint,
}

/// Label extraction configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub kind: ExtractorKind,
    pub vocabulary: Vec<String>,
    pub labels_per_frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

impl ExtractorConfig {
    pub fn synthetic(vocabulary: Vec<String>, labels_per_frame: usize) -> Result<Self> {
        let cfg = Self { kind: ExtractorKind::SyntheticHash, vocabulary, labels_per_frame, endpoint: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn external(endpoint: impl Into<String>, vocabulary: Vec<String>) -> Result<Self> {
        let cfg = Self {
            kind: ExtractorKind::ExternalEndpoint,
            vocabulary,
            labels_per_frame: 1,
            endpoint: Some(endpoint.into()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocabulary.is_empty() {
            return Err(Error::InvalidExtractor("vocabulary must be non-empty".into()));
        }
        let unique: BTreeSet<&String> = self.vocabulary.iter().collect();
        if unique.len() != self.vocabulary.len() {
            return Err(Error::InvalidExtractor("vocabulary has duplicates".into()));
        }
        if self.labels_per_frame == 0 {
            return Err(Error::InvalidExtractor("labels_per_frame must be at least 1".into()));
        }
        if self.kind == ExtractorKind::ExternalEndpoint && self.endpoint.is_none() {
            return Err(Error::InvalidExtractor("external kind needs an endpoint".into()));
        }
        Ok(())
    }
}

/// The synthetic extractor's index rule, exposed so tests can reimplement
/// it independently: index j of frame bytes is the first 8 bytes of
/// `sha256(bytes || j as u32 le)` taken little-endian, modulo vocabulary
/// size.
pub fn synthetic_label_index(frame: &[u8], j: u32, vocab_len: usize) -> usize {
    let mut hasher = Sha256::new();
    hasher.update(frame);
    hasher.update(j.to_le_bytes());
    let digest = hasher.finalize();
    let word = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    (word % vocab_len as u64) as usize
}

/// Labels for one frame under `config`. Synthetic extraction is a pure
/// function of the bytes; the external kind forwards bytes and filters the
/// response to the vocabulary.
pub fn extract_labels(frame: &[u8], config: &ExtractorConfig) -> Result<BTreeSet<String>> {
    config.validate()?;
    match config.kind {
        ExtractorKind::SyntheticHash => {
            let mut labels = BTreeSet::new();
            for j in 0..config.labels_per_frame {
                let idx = synthetic_label_index(frame, j as u32, config.vocabulary.len());
                labels.insert(config.vocabulary[idx].clone());
            }
            Ok(labels)
        }
        ExtractorKind::ExternalEndpoint => {
            let endpoint = config.endpoint.as_deref().expect("validated");
            let returned = post_frame(endpoint, frame)?;
            let vocab: BTreeSet<&String> = config.vocabulary.iter().collect();
            Ok(returned.into_iter().filter(|l| vocab.contains(l)).collect())
        }
    }
}

fn post_frame(endpoint: &str, frame: &[u8]) -> Result<Vec<String>> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .into();
    let mut response = agent
        .post(endpoint)
        .header("content-type", "application/octet-stream")
        .send(frame)
        .map_err(|e| Error::Endpoint(e.to_string()))?;
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| Error::Endpoint(e.to_string()))?;
    serde_json::from_str(&body).map_err(|e| Error::Endpoint(format!("bad label payload: {e}")))
}

/// Optional samplers applied around the pipeline.
#[derive(Debug, Clone, Default)]
pub struct SamplerStack {
    /// Decides per stream, from meta only, before any extraction work.
    pub pre_learning: Option<InclusionPolicy>,
    /// Decides per assembled record, from its labels, before storage.
    pub pre_memorization: Option<InclusionPolicy>,
}

/// Which sampler dropped a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerStage {
    PreLearning,
    PreMemorization,
}

/// Result of processing one stream.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessOutcome {
    Stored { record: SessionRecord, receipt: WriteReceipt },
    Skipped { stage: SamplerStage, inclusion_probability: f64 },
}

/// Shared pipeline configuration: sampling grid, extractor, and where in the
/// namespace payloads are written.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub frame_policy: FramePolicy,
    pub extractor: ExtractorConfig,
    pub object_prefix: ObjectPath,
    pub samplers: SamplerStack,
}

impl Pipeline {
    pub fn new(frame_policy: FramePolicy, extractor: ExtractorConfig, object_prefix: ObjectPath) -> Self {
        Self { frame_policy, extractor, object_prefix, samplers: SamplerStack::default() }
    }

    pub fn with_samplers(mut self, samplers: SamplerStack) -> Self {
        self.samplers = samplers;
        self
    }

    fn object_path_for(&self, stream: &VideoStream) -> Result<ObjectPath> {
        ObjectPath::new(format!("{}/{}-{}", self.object_prefix, stream.session_id, stream.start_timestamp))
    }

    /// Run the full pipeline on one stream: sample, extract, write the
    /// payload, then insert the record. The record is inserted only after
    /// the payload write succeeds, so the metadata store never points at an
    /// unreadable object.
    pub fn process_stream(
        &self,
        stream: &VideoStream,
        store: &TieredStore,
        meta: &mut MetaStore,
    ) -> Result<ProcessOutcome> {
        stream.validate()?;
        if let Some(policy) = &self.samplers.pre_learning {
            let meta_view = StreamMeta { timestamp: stream.start_timestamp, location: stream.location.clone() };
            let decision = pre_learning_decide(&meta_view, policy)?;
            if !decision.include {
                return Ok(ProcessOutcome::Skipped {
                    stage: SamplerStage::PreLearning,
                    inclusion_probability: decision.probability,
                });
            }
        }

        let mut labels = BTreeSet::new();
        for idx in schedule_frames(stream, &self.frame_policy) {
            labels.extend(extract_labels(&stream.frames[idx].bytes, &self.extractor)?);
        }

        let object_path = self.object_path_for(stream)?;
        let record = SessionRecord {
            session_id: stream.session_id.clone(),
            user_id: stream.user_id.clone(),
            timestamp: stream.start_timestamp,
            duration: stream.duration,
            location: stream.location.clone(),
            labels,
            object_path: object_path.clone(),
        };

        if let Some(policy) = &self.samplers.pre_memorization {
            let decision = pre_memorization_decide(&record, policy)?;
            if !decision.include {
                return Ok(ProcessOutcome::Skipped {
                    stage: SamplerStage::PreMemorization,
                    inclusion_probability: decision.probability,
                });
            }
        }

        // Reject duplicate keys before any storage side effects.
        if meta.get_by_key(&record.session_id, record.timestamp).is_ok() {
            return Err(Error::DuplicateRecord {
                session_id: record.session_id.to_string(),
                timestamp: record.timestamp,
            });
        }

        let payload = stream.payload_bytes();
        let block = Block { id: block_id_for(stream), size: stream.block_size(), payload_ref: object_path };
        let receipt = store.write_block(&block, &payload)?;
        meta.put_record(record.clone())?;
        Ok(ProcessOutcome::Stored { record, receipt })
    }
}

fn block_id_for(stream: &VideoStream) -> crate::tier::BlockId {
    crate::tier::BlockId::new(format!("{}-{}", stream.session_id, stream.start_timestamp))
}

/// The 50-label household vocabulary used when none is configured.
pub fn default_vocabulary() -> Vec<String> {
    [
        "person", "dog", "cat", "chair", "sofa", "table", "lamp", "television", "bed", "pillow",
        "blanket", "curtain", "window", "door", "bookshelf", "book", "cup", "plate", "bowl",
        "fork", "spoon", "knife", "bottle", "vase", "plant", "flower", "clock", "mirror", "rug",
        "toy", "ball", "remote", "phone", "laptop", "keyboard", "monitor", "speaker",
        "headphones", "shoe", "slipper", "jacket", "hat", "bag", "backpack", "umbrella", "towel",
        "toothbrush", "broom", "basket", "stool",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Default location set for synthetic streams.
pub fn default_locations() -> Vec<String> {
    ["living room", "bedroom", "kitchen", "bathroom", "hallway", "office"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Read a stream from its JSON Lines form: a header record on the first
/// line, then one line per frame either inline or as
/// `{"offset": ..., "file": "relative/path"}` resolved against `base_dir`.
pub fn read_stream_jsonl(text: &str, base_dir: &std::path::Path) -> Result<VideoStream> {
    #[derive(Deserialize)]
    struct Header {
        session_id: SessionId,
        user_id: UserId,
        start_timestamp: i64,
        duration: f64,
        location: String,
        #[serde(default)]
        nominal_size: Option<u64>,
    }
    #[derive(Deserialize)]
    struct FrameLine {
        offset: f64,
        #[serde(default)]
        file: Option<String>,
        #[serde(default)]
        bytes: Option<String>,
    }

    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidStream("empty stream file".into()))?;
    let header: Header = serde_json::from_str(header_line)?;
    let mut frames = Vec::new();
    for line in lines {
        let frame: FrameLine = serde_json::from_str(line)?;
        let bytes = match (&frame.file, &frame.bytes) {
            (Some(file), _) => std::fs::read(base_dir.join(file))?,
            (None, Some(hex)) => {
                if hex.len() % 2 != 0 {
                    return Err(Error::InvalidStream("odd-length frame hex".into()));
                }
                (0..hex.len())
                    .step_by(2)
                    .map(|i| {
                        u8::from_str_radix(&hex[i..i + 2], 16)
                            .map_err(|e| Error::InvalidStream(format!("bad frame hex: {e}")))
                    })
                    .collect::<Result<Vec<u8>>>()?
            }
            (None, None) => {
                return Err(Error::InvalidStream("frame line needs `file` or `bytes`".into()));
            }
        };
        frames.push(Frame { offset: frame.offset, bytes });
    }
    let stream = VideoStream {
        session_id: header.session_id,
        user_id: header.user_id,
        start_timestamp: header.start_timestamp,
        duration: header.duration,
        location: header.location,
        frames,
        nominal_size: header.nominal_size,
    };
    stream.validate()?;
    Ok(stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MountTable;
    use crate::tier::{default_tiers, AllocatorKind};
    use std::sync::Arc;

    fn stream_with_frames(offsets: &[f64], duration: f64) -> VideoStream {
        VideoStream {
            session_id: SessionId::new("s1"),
            user_id: UserId::new("u1"),
            start_timestamp: 1_000,
            duration,
            location: "living room".into(),
            frames: offsets
                .iter()
                .enumerate()
                .map(|(i, &offset)| Frame { offset, bytes: vec![i as u8, 0xAB] })
                .collect(),
            nominal_size: None,
        }
    }

    #[test]
    fn grid_selects_six_frames_over_ten_seconds() {
        let offsets: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let stream = stream_with_frames(&offsets, 10.0);
        let policy = FramePolicy::default();
        let selected = schedule_frames(&stream, &policy);
        assert_eq!(selected.len(), 6);
        let picked: Vec<f64> = selected.iter().map(|&i| stream.frames[i].offset).collect();
        assert_eq!(picked, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn degenerate_streams_select_sensibly() {
        let zero = stream_with_frames(&[0.0], 0.0);
        assert_eq!(schedule_frames(&zero, &FramePolicy::default()).len(), 1);

        let short = stream_with_frames(&[0.3, 0.9], 1.0);
        let wide = FramePolicy::new(5.0).unwrap();
        assert_eq!(schedule_frames(&short, &wide), vec![0]);

        let empty = stream_with_frames(&[], 10.0);
        assert!(schedule_frames(&empty, &FramePolicy::default()).is_empty());
    }

    #[test]
    fn stream_validation_rejects_disorder() {
        let mut bad = stream_with_frames(&[1.0, 1.0], 5.0);
        assert!(bad.validate().is_err());
        bad = stream_with_frames(&[1.0, 0.5], 5.0);
        assert!(bad.validate().is_err());
        bad = stream_with_frames(&[1.0, 7.0], 5.0);
        assert!(bad.validate().is_err());
        assert!(FramePolicy::new(0.0).is_err());
    }

    #[test]
    fn synthetic_extraction_is_deterministic() {
        let cfg = ExtractorConfig::synthetic(default_vocabulary(), 2).unwrap();
        let frame = vec![1u8, 2, 3, 4];
        let first = extract_labels(&frame, &cfg).unwrap();
        let second = extract_labels(&frame, &cfg).unwrap();
        assert_eq!(first, second);
        assert!(!first.is_empty() && first.len() <= 2);
    }

    #[test]
    fn single_word_vocabulary_pigeonholes() {
        let cfg = ExtractorConfig::synthetic(vec!["dog".into()], 3).unwrap();
        for seed in 0..20u8 {
            let labels = extract_labels(&[seed, seed + 1], &cfg).unwrap();
            assert_eq!(labels, BTreeSet::from(["dog".to_string()]));
        }
    }

    #[test]
    fn label_histogram_matches_independent_rule() {
        // Reimplementation of the index rule, kept deliberately separate
        // from `synthetic_label_index`.
        fn oracle_index(frame: &[u8], j: u32, vocab_len: usize) -> usize {
            let mut material = frame.to_vec();
            material.extend_from_slice(&j.to_le_bytes());
            let digest = Sha256::digest(&material);
            let mut word = 0u64;
            for (shift, byte) in digest[..8].iter().enumerate() {
                word |= (*byte as u64) << (8 * shift);
            }
            (word % vocab_len as u64) as usize
        }
        let vocab = default_vocabulary();
        let cfg = ExtractorConfig::synthetic(vocab.clone(), 2).unwrap();
        let mut histogram = std::collections::BTreeMap::new();
        let mut oracle_histogram = std::collections::BTreeMap::new();
        for i in 0..100u32 {
            let frame = i.to_le_bytes().to_vec();
            for label in extract_labels(&frame, &cfg).unwrap() {
                *histogram.entry(label).or_insert(0u32) += 1;
            }
            let mut expected = BTreeSet::new();
            for j in 0..2 {
                expected.insert(vocab[oracle_index(&frame, j, vocab.len())].clone());
            }
            for label in expected {
                *oracle_histogram.entry(label).or_insert(0u32) += 1;
            }
        }
        assert_eq!(histogram, oracle_histogram);
    }

    #[test]
    fn invalid_extractor_configs_rejected() {
        assert!(ExtractorConfig::synthetic(vec![], 1).is_err());
        assert!(ExtractorConfig::synthetic(vec!["a".into(), "a".into()], 1).is_err());
        assert!(ExtractorConfig::synthetic(vec!["a".into()], 0).is_err());
    }

    fn test_pipeline() -> (Pipeline, TieredStore, MetaStore) {
        let fabric = Arc::new(MountTable::single_in_memory("/store"));
        let store = TieredStore::create(
            default_tiers(10_000_000, 10_000_000, 10_000_000),
            AllocatorKind::DefaultCascade,
            "lru",
            fabric,
        )
        .unwrap();
        let pipeline = Pipeline::new(
            FramePolicy::default(),
            ExtractorConfig::synthetic(default_vocabulary(), 2).unwrap(),
            ObjectPath::new("/store/videos").unwrap(),
        );
        (pipeline, store, MetaStore::new())
    }

    #[test]
    fn process_stream_labels_are_union_of_scheduled_frames() {
        let (pipeline, store, mut meta) = test_pipeline();
        let offsets: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let stream = stream_with_frames(&offsets, 10.0);

        // Oracle: compose the two stage oracles by hand.
        let mut expected = BTreeSet::new();
        for idx in schedule_frames(&stream, &pipeline.frame_policy) {
            expected.extend(extract_labels(&stream.frames[idx].bytes, &pipeline.extractor).unwrap());
        }

        match pipeline.process_stream(&stream, &store, &mut meta).unwrap() {
            ProcessOutcome::Stored { record, receipt } => {
                assert_eq!(record.labels, expected);
                assert_eq!(record.timestamp, 1_000);
                assert!(store.contains(&receipt.block_id));
                assert_eq!(meta.len(), 1);
                // Label provenance: every label appears in some scheduled frame.
                for label in &record.labels {
                    assert!(expected.contains(label));
                }
            }
            other => panic!("expected stored, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_stream_rejected_without_partial_state() {
        let (pipeline, store, mut meta) = test_pipeline();
        let stream = stream_with_frames(&[0.0, 1.0], 2.0);
        pipeline.process_stream(&stream, &store, &mut meta).unwrap();
        assert!(matches!(
            pipeline.process_stream(&stream, &store, &mut meta),
            Err(Error::DuplicateRecord { .. })
        ));
        assert_eq!(meta.len(), 1);
    }

    #[test]
    fn zero_probability_like_sampler_skips_everything() {
        let (mut pipeline, store, mut meta) = test_pipeline();
        // Smallest allowed rate with p_min to match: effectively never admits
        // under the fixed seed used here.
        let policy = InclusionPolicy::uniform(1e-9, 7).unwrap();
        pipeline.samplers.pre_learning = Some(policy);
        let stream = stream_with_frames(&[0.0, 1.0], 2.0);
        match pipeline.process_stream(&stream, &store, &mut meta).unwrap() {
            ProcessOutcome::Skipped { stage, inclusion_probability } => {
                assert_eq!(stage, SamplerStage::PreLearning);
                assert!(inclusion_probability > 0.0);
            }
            other => panic!("expected skipped, got {other:?}"),
        }
        assert_eq!(meta.len(), 0);
        assert!(!store.contains(&crate::tier::BlockId::new("s1-1000")));
    }

    #[test]
    fn failed_blob_write_leaves_no_record_behind() {
        // Fault injection: the payload prefix is not mounted, so the block
        // write fails before the record insert can happen.
        let fabric = Arc::new(MountTable::single_in_memory("/store"));
        let store = TieredStore::create(
            default_tiers(10_000_000, 10_000_000, 10_000_000),
            AllocatorKind::DefaultCascade,
            "lru",
            fabric,
        )
        .unwrap();
        let pipeline = Pipeline::new(
            FramePolicy::default(),
            ExtractorConfig::synthetic(default_vocabulary(), 2).unwrap(),
            ObjectPath::new("/nowhere/videos").unwrap(),
        );
        let mut meta = MetaStore::new();
        let stream = stream_with_frames(&[0.0, 1.0], 2.0);
        assert!(matches!(
            pipeline.process_stream(&stream, &store, &mut meta),
            Err(Error::Unmounted(_))
        ));
        assert_eq!(meta.len(), 0, "no record may point at an unwritten payload");
    }

    #[test]
    fn absent_sampler_behaves_as_always_store() {
        let (pipeline, store, mut meta) = test_pipeline();
        let stream = stream_with_frames(&[0.0], 1.0);
        assert!(matches!(
            pipeline.process_stream(&stream, &store, &mut meta).unwrap(),
            ProcessOutcome::Stored { .. }
        ));
    }

    #[test]
    fn identical_stream_and_config_yield_identical_records() {
        let (pipeline, store_a, mut meta_a) = test_pipeline();
        let (_, store_b, mut meta_b) = test_pipeline();
        let stream = stream_with_frames(&[0.0, 0.7, 1.9, 3.0], 4.0);
        let a = pipeline.process_stream(&stream, &store_a, &mut meta_a).unwrap();
        let b = pipeline.process_stream(&stream, &store_b, &mut meta_b).unwrap();
        match (a, b) {
            (ProcessOutcome::Stored { record: ra, .. }, ProcessOutcome::Stored { record: rb, .. }) => {
                assert_eq!(ra, rb);
            }
            _ => panic!("both should store"),
        }
    }

    #[test]
    fn external_endpoint_round_trip_and_vocab_filter() {
        let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
        let addr = server.server_addr().to_ip().unwrap();
        let handle = std::thread::spawn(move || {
            for _ in 0..2 {
                let mut request = server.recv().unwrap();
                let mut body = Vec::new();
                request.as_reader().read_to_end(&mut body).unwrap();
                // Echo a fixed label list; one is outside the vocabulary.
                let labels = if body.is_empty() {
                    "[]".to_string()
                } else {
                    "[\"dog\", \"unicorn\"]".to_string()
                };
                let response = tiny_http::Response::from_string(labels);
                request.respond(response).unwrap();
            }
        });
        let cfg = ExtractorConfig::external(
            format!("http://{addr}/extract"),
            vec!["dog".into(), "cat".into()],
        )
        .unwrap();
        let labels = extract_labels(&[1, 2, 3], &cfg).unwrap();
        assert_eq!(labels, BTreeSet::from(["dog".to_string()]));
        let empty = extract_labels(&[], &cfg).unwrap();
        assert!(empty.is_empty());
        handle.join().unwrap();
    }

    #[test]
    fn unreachable_endpoint_surfaces_error() {
        let cfg = ExtractorConfig::external("http://127.0.0.1:1/none", vec!["dog".into()]).unwrap();
        assert!(matches!(extract_labels(&[1], &cfg), Err(Error::Endpoint(_))));
    }

    #[test]
    fn stream_jsonl_parses_inline_and_file_frames() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f1.bin"), [0xDE, 0xAD]).unwrap();
        let text = concat!(
            "{\"session_id\":\"s9\",\"user_id\":\"u9\",\"start_timestamp\":500,",
            "\"duration\":4.0,\"location\":\"kitchen\"}\n",
            "{\"offset\":0.0,\"bytes\":\"beef\"}\n",
            "{\"offset\":2.0,\"file\":\"f1.bin\"}\n",
        );
        let stream = read_stream_jsonl(text, dir.path()).unwrap();
        assert_eq!(stream.frames.len(), 2);
        assert_eq!(stream.frames[0].bytes, vec![0xBE, 0xEF]);
        assert_eq!(stream.frames[1].bytes, vec![0xDE, 0xAD]);
    }
}
