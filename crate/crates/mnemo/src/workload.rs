//! Seeded synthetic workloads: ingest, read, and query events over simulated
//! days.
//!
//! The read pattern drives the prefetch experiments: each four-hour period
//! has a "hot" user group, and a period's hot group carries over to the same
//! period of the next day with probability `period_locality`. Reads inside a
//! period mostly target the hot group's objects with a Zipf-skewed
//! preference for recent ones, so yesterday-same-period access counts are a
//! good predictor of today's reads while all-time counts are a blunt one.
//! Everything is a pure function of the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::ObjectPath;
use crate::error::{Error, Result};
use crate::ingest::{default_locations, Frame, VideoStream};
use crate::meta::{QueryPredicate, SessionId, UserId};
use crate::prefetch::{PERIODS_PER_DAY, PERIOD_SECONDS};

const DAY_SECONDS: i64 = 86_400;

/// Fractions of query shapes in the generated mix; must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryMix {
    pub key_lookup: f64,
    pub label: f64,
    pub location: f64,
    pub time_range: f64,
}

impl Default for QueryMix {
    fn default() -> Self {
        Self { key_lookup: 0.25, label: 0.35, location: 0.2, time_range: 0.2 }
    }
}

impl QueryMix {
    fn validate(&self) -> Result<()> {
        let parts = [self.key_lookup, self.label, self.location, self.time_range];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::InvalidWorkload("query mix fractions must be non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWorkload(format!("query mix sums to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Workload shape. Counts may be zero; fractions are validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub days: u32,
    pub users: u32,
    pub streams_per_user_per_day: u32,
    pub avg_object_size: u64,
    /// Zipf exponent for popularity skew in reads and query labels.
    pub label_popularity: f64,
    /// Zipf exponent skewing which user group gets hot; heavier skew gives
    /// all-time popularity more predictive power.
    pub group_popularity: f64,
    /// Probability that a period's hot group repeats the next day.
    pub period_locality: f64,
    pub query_mix: QueryMix,
    pub seed: u64,
    pub reads_per_period: u32,
    pub queries_per_period: u32,
    /// Fraction of reads aimed at the period's hot group.
    pub hot_read_fraction: f64,
    pub locations: Vec<String>,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            days: 30,
            users: 8,
            streams_per_user_per_day: 4,
            avg_object_size: 10_000_000,
            label_popularity: 0.8,
            group_popularity: 2.0,
            period_locality: 0.9,
            query_mix: QueryMix::default(),
            seed: 42,
            reads_per_period: 40,
            queries_per_period: 20,
            hot_read_fraction: 0.9,
            locations: default_locations(),
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        self.query_mix.validate()?;
        if self.avg_object_size == 0 {
            return Err(Error::InvalidWorkload("avg_object_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.period_locality) {
            return Err(Error::InvalidWorkload(format!("period_locality {} outside [0,1]", self.period_locality)));
        }
        if !(0.0..=1.0).contains(&self.hot_read_fraction) {
            return Err(Error::InvalidWorkload(format!("hot_read_fraction {} outside [0,1]", self.hot_read_fraction)));
        }
        if !self.label_popularity.is_finite() || self.label_popularity < 0.0 {
            return Err(Error::InvalidWorkload("label_popularity must be >= 0".into()));
        }
        if self.locations.is_empty() {
            return Err(Error::InvalidWorkload("locations must be non-empty".into()));
        }
        Ok(())
    }
}

/// Compact stream description; frames regenerate deterministically from the
/// content seed at replay time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub session_id: String,
    pub user_id: String,
    pub start_timestamp: i64,
    pub duration: f64,
    pub location: String,
    pub frame_count: u32,
    pub nominal_size: u64,
    pub content_seed: u64,
}

impl StreamSpec {
    /// Rebuild the full stream: evenly spaced frames with hash-derived bytes.
    pub fn materialize(&self) -> VideoStream {
        let mut frames = Vec::with_capacity(self.frame_count as usize);
        let spacing = if self.frame_count > 1 { self.duration / self.frame_count as f64 } else { 0.0 };
        for i in 0..self.frame_count {
            let mut hasher = Sha256::new();
            hasher.update(self.content_seed.to_le_bytes());
            hasher.update(i.to_le_bytes());
            let digest = hasher.finalize();
            frames.push(Frame { offset: i as f64 * spacing, bytes: digest[..16].to_vec() });
        }
        VideoStream {
            session_id: SessionId::new(&self.session_id),
            user_id: UserId::new(&self.user_id),
            start_timestamp: self.start_timestamp,
            duration: self.duration,
            location: self.location.clone(),
            frames,
            nominal_size: Some(self.nominal_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TraceEventKind {
    Ingest { stream: StreamSpec },
    Query { predicate: QueryPredicate },
    Read { object_path: ObjectPath },
}

/// One replayable event at logical time `t` (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: i64,
    #[serde(flatten)]
    pub kind: TraceEventKind,
}

/// Object path the ingest pipeline will assign to a stream written under
/// `prefix`. The generator and the replayer must agree on this.
pub fn object_path_for(prefix: &str, session_id: &str, start_timestamp: i64) -> ObjectPath {
    ObjectPath::new(format!("{prefix}/{session_id}-{start_timestamp}")).expect("valid synthetic path")
}

/// Default namespace prefix for synthetic stream payloads.
pub const OBJECT_PREFIX: &str = "/store/videos";

fn subseed(seed: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    hasher.update(seed.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Zipf sampler over ranks `1..=n` with exponent `s`, via the cumulative
/// weight table. Rank 0 (returned value) is the most popular.
pub struct ZipfRanks {
    cumulative: Vec<f64>,
}

impl ZipfRanks {
    pub fn new(n: usize, exponent: f64) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut total = 0.0;
        for k in 1..=n {
            total += 1.0 / (k as f64).powf(exponent);
            cumulative.push(total);
        }
        for c in &mut cumulative {
            *c /= total;
        }
        Self { cumulative }
    }

    pub fn draw(&self, unit: f64) -> usize {
        self.cumulative.partition_point(|&c| c < unit).min(self.cumulative.len().saturating_sub(1))
    }
}

/// The hot group (user index) per period per day, following the carry-over
/// process: day 0 draws from a Zipf over users (some homes simply generate
/// more traffic), later days repeat the previous day's group for the same
/// period with probability `period_locality`, otherwise redraw among the
/// other groups from the same skewed distribution.
pub fn generate_hot_groups(spec: &WorkloadSpec) -> Vec<Vec<u32>> {
    let mut rng = ChaCha20Rng::seed_from_u64(subseed(spec.seed, "hot-groups"));
    let zipf = ZipfRanks::new(spec.users.max(1) as usize, spec.group_popularity);
    let draw = |rng: &mut ChaCha20Rng| zipf.draw(rng.random()) as u32;
    let mut days: Vec<Vec<u32>> = Vec::with_capacity(spec.days as usize);
    for day in 0..spec.days {
        let mut periods = Vec::with_capacity(PERIODS_PER_DAY);
        #[allow(clippy::needless_range_loop)]
        for p in 0..PERIODS_PER_DAY {
            let group = if day == 0 || spec.users <= 1 {
                draw(&mut rng)
            } else {
                let prev = days[day as usize - 1][p];
                if rng.random::<f64>() < spec.period_locality {
                    prev
                } else {
                    // Redraw among the other groups (rejection keeps the
                    // carry-over probability exactly period_locality).
                    let mut pick = draw(&mut rng);
                    let mut tries = 0;
                    while pick == prev && tries < 64 {
                        pick = draw(&mut rng);
                        tries += 1;
                    }
                    if pick == prev {
                        pick = (prev + 1) % spec.users;
                    }
                    pick
                }
            };
            periods.push(group);
        }
        days.push(periods);
    }
    days
}

/// Generate the full trace for `spec`, sorted by time.
pub fn generate_workload(spec: &WorkloadSpec) -> Result<Vec<TraceEvent>> {
    spec.validate()?;
    if spec.days == 0 || spec.users == 0 {
        return Ok(Vec::new());
    }
    let hot_groups = generate_hot_groups(spec);
    let mut stream_rng = ChaCha20Rng::seed_from_u64(subseed(spec.seed, "streams"));
    let mut read_rng = ChaCha20Rng::seed_from_u64(subseed(spec.seed, "reads"));
    let mut query_rng = ChaCha20Rng::seed_from_u64(subseed(spec.seed, "queries"));
    let vocabulary = crate::ingest::default_vocabulary();
    let label_zipf = ZipfRanks::new(vocabulary.len(), spec.label_popularity);

    let mut events: Vec<(i64, u64, TraceEventKind)> = Vec::new();
    let mut seq = 0u64;
    let mut push = |events: &mut Vec<(i64, u64, TraceEventKind)>, t: i64, kind: TraceEventKind| {
        events.push((t, seq, kind));
        seq += 1;
    };

    // Object pools: per user, the (path, ingest time) list in ingest order;
    // plus a flat list for uniform picks.
    let mut pools: Vec<Vec<(ObjectPath, i64)>> = vec![Vec::new(); spec.users as usize];
    let mut all_objects: Vec<(ObjectPath, i64)> = Vec::new();
    let mut known_keys: Vec<(String, i64)> = Vec::new();

    let ingests_per_day = (spec.users * spec.streams_per_user_per_day) as i64;

    for day in 0..spec.days {
        let day_start = day as i64 * DAY_SECONDS;

        // Ingest events, spread evenly across the day.
        for k in 0..spec.streams_per_user_per_day {
            for u in 0..spec.users {
                let slot = (k * spec.users + u) as i64;
                let t = day_start + slot * DAY_SECONDS / ingests_per_day.max(1);
                let duration: f64 = stream_rng.random_range(20.0..60.0);
                let location = spec.locations[stream_rng.random_range(0..spec.locations.len())].clone();
                let size_jitter = stream_rng.random_range(0.8..1.2);
                let frame_count = (duration / 2.0).ceil() as u32 + 1;
                let session_id = format!("u{u}-d{day}-k{k}");
                let stream = StreamSpec {
                    session_id: session_id.clone(),
                    user_id: format!("u{u}"),
                    start_timestamp: t,
                    duration,
                    location,
                    frame_count,
                    nominal_size: (spec.avg_object_size as f64 * size_jitter) as u64,
                    content_seed: stream_rng.random(),
                };
                let path = object_path_for(OBJECT_PREFIX, &session_id, t);
                pools[u as usize].push((path.clone(), t));
                all_objects.push((path, t));
                known_keys.push((session_id, t));
                push(&mut events, t, TraceEventKind::Ingest { stream });
            }
        }

        // Read and query events per period.
        #[allow(clippy::needless_range_loop)]
        for p in 0..PERIODS_PER_DAY {
            let period_start = day_start + p as i64 * PERIOD_SECONDS;
            let hot = hot_groups[day as usize][p] as usize;
            for i in 0..spec.reads_per_period {
                let t = period_start + (i as i64 + 1) * PERIOD_SECONDS / (spec.reads_per_period as i64 + 1);
                let target = pick_read_target(spec, &pools, &all_objects, hot, period_start, &mut read_rng);
                if let Some(path) = target {
                    push(&mut events, t, TraceEventKind::Read { object_path: path });
                }
            }
            for i in 0..spec.queries_per_period {
                let t = period_start + (i as i64 + 1) * PERIOD_SECONDS / (spec.queries_per_period as i64 + 1);
                if let Some(predicate) =
                    pick_query(spec, &known_keys, &vocabulary, &label_zipf, t, &mut query_rng)
                {
                    push(&mut events, t, TraceEventKind::Query { predicate });
                }
            }
        }
    }

    events.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(events.into_iter().map(|(t, _, kind)| TraceEvent { t, kind }).collect())
}

/// Stable per-object popularity rank: a hash of the path, independent of
/// ingest time, so popular objects stay popular for their whole life.
fn popularity_key(path: &ObjectPath) -> u64 {
    let digest = Sha256::digest(path.as_str().as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Pick a read target: usually a Zipf-popular object of the hot group that
/// already existed when the period began, otherwise anything ingested
/// earlier. Popularity is stable per object, so old-but-popular objects keep
/// drawing reads long after they left the cache tiers.
fn pick_read_target(
    spec: &WorkloadSpec,
    pools: &[Vec<(ObjectPath, i64)>],
    all_objects: &[(ObjectPath, i64)],
    hot: usize,
    period_start: i64,
    rng: &mut ChaCha20Rng,
) -> Option<ObjectPath> {
    let want_hot = rng.random::<f64>() < spec.hot_read_fraction;
    if want_hot {
        let pool = &pools[hot];
        let visible = pool.iter().take_while(|(_, t)| *t < period_start).count();
        if visible > 0 {
            let mut ranked: Vec<&ObjectPath> = pool[..visible].iter().map(|(p, _)| p).collect();
            ranked.sort_by_key(|p| popularity_key(p));
            let zipf = ZipfRanks::new(visible, spec.label_popularity.max(0.5));
            let rank = zipf.draw(rng.random::<f64>());
            return Some(ranked[rank].clone());
        }
    }
    let visible = all_objects.iter().take_while(|(_, t)| *t < period_start).count();
    if visible == 0 {
        return None;
    }
    let idx = rng.random_range(0..visible);
    Some(all_objects[idx].0.clone())
}

fn pick_query(
    spec: &WorkloadSpec,
    known_keys: &[(String, i64)],
    vocabulary: &[String],
    label_zipf: &ZipfRanks,
    now: i64,
    rng: &mut ChaCha20Rng,
) -> Option<QueryPredicate> {
    let mix = spec.query_mix;
    let roll: f64 = rng.random();
    if roll < mix.key_lookup {
        if known_keys.is_empty() {
            return None;
        }
        let (session, ts) = &known_keys[rng.random_range(0..known_keys.len())];
        Some(QueryPredicate {
            session_id: Some(SessionId::new(session)),
            time_range: Some((*ts, *ts)),
            ..Default::default()
        })
    } else if roll < mix.key_lookup + mix.label {
        let label = vocabulary[label_zipf.draw(rng.random())].clone();
        Some(QueryPredicate { labels_any: Some([label].into_iter().collect()), ..Default::default() })
    } else if roll < mix.key_lookup + mix.label + mix.location {
        let location = spec.locations[rng.random_range(0..spec.locations.len())].clone();
        Some(QueryPredicate { location: Some(location), ..Default::default() })
    } else {
        let window = DAY_SECONDS;
        let end = rng.random_range(0..=now.max(1));
        Some(QueryPredicate { time_range: Some(((end - window).max(0), end)), ..Default::default() })
    }
}

/// One event per line.
pub fn export_trace_jsonl<W: std::io::Write>(trace: &[TraceEvent], mut writer: W) -> Result<()> {
    for event in trace {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn import_trace_jsonl<R: std::io::BufRead>(reader: R) -> Result<Vec<TraceEvent>> {
    let mut trace = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedEvent { index, reason: e.to_string() })?;
        if let Some(prev) = trace.last() {
            let prev: &TraceEvent = prev;
            if event.t < prev.t {
                return Err(Error::MalformedEvent { index, reason: "events not sorted by t".into() });
            }
        }
        trace.push(event);
    }
    Ok(trace)
}
